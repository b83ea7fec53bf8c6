//! Experiment configuration: a TOML file with the sections `[room]`,
//! `[transmitter]`, `[receiver]`, `[noise]`, `[scheme]`, `[ofdm]`,
//! `[simulation]` and `[analysis]`.
//!
//! Every key is optional and defaults to the reference indoor setup; unknown
//! sections or keys are rejected. Any key can be overridden from the
//! environment as `VLCMOD_<SECTION>_<KEY>` (upper case), e.g.
//! `VLCMOD_TRANSMITTER_D_TX_M=2`. Override values are read as TOML values,
//! falling back to a plain string (`VLCMOD_SCHEME_SCHEME=dcm`).

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use vlcmod::geometry::{NoiseModel, RoomConfig};
use vlcmod::link::{LinkConfig, ReceiverConfig, SmDcmPlacement, TransmitterConfig};
use vlcmod::mappers::{ComplexAlphabet, Scheme};
use vlcmod::montecarlo::{Modulation, StopRule};
use vlcmod::ofdm::{OfdmDetector, OfdmScheme};

pub const ENV_PREFIX: &str = "VLCMOD_";

const SECTIONS: [&str; 8] = [
    "room",
    "transmitter",
    "receiver",
    "noise",
    "scheme",
    "ofdm",
    "simulation",
    "analysis",
];

/// A configuration that cannot be read, parsed or validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomSection {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for RoomSection {
    fn default() -> Self {
        let r = RoomConfig::default();
        Self { length_m: r.length_m, width_m: r.width_m, height_m: r.height_m }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitterSection {
    pub height_m: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub half_power_semiangle_deg: f64,
    pub d_tx_m: f64,
    /// Center of the LED square; room center when absent.
    pub center_x_m: Option<f64>,
    pub center_y_m: Option<f64>,
    /// `p1` (diagonal BLOCKs) or `p2` (side-by-side BLOCKs).
    pub smdcm_placement: String,
    /// Optical power per unit of alphabet intensity (W).
    pub led_power_w: f64,
}

impl Default for TransmitterSection {
    fn default() -> Self {
        let t = TransmitterConfig::default();
        Self {
            height_m: t.height_m,
            elevation_deg: t.elevation_deg,
            azimuth_deg: t.azimuth_deg,
            half_power_semiangle_deg: t.half_power_semiangle_deg,
            d_tx_m: t.d_tx_m,
            center_x_m: None,
            center_y_m: None,
            smdcm_placement: t.smdcm_placement.name().into(),
            led_power_w: t.led_power_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub height_m: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub area_m2: f64,
    pub fov_deg: f64,
    pub responsivity_a_per_w: f64,
    pub d_rx_m: f64,
    /// Center of the photodiode array; room center when absent.
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        let r = ReceiverConfig::default();
        Self {
            height_m: r.height_m,
            elevation_deg: r.elevation_deg,
            azimuth_deg: r.azimuth_deg,
            area_m2: r.area_m2,
            fov_deg: r.fov_deg,
            responsivity_a_per_w: r.responsivity_a,
            d_rx_m: r.d_rx_m,
            x_m: None,
            y_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub electron_charge_c: f64,
    pub ambient_current_a: f64,
    pub noise_bandwidth_factor: f64,
    pub symbol_interval_s: f64,
    pub amp_bandwidth_hz: f64,
    pub amp_noise_density_a_per_rthz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::default();
        Self {
            electron_charge_c: n.q,
            ambient_current_a: n.ambient_current_ia,
            noise_bandwidth_factor: n.noise_bw_factor_i2,
            symbol_interval_s: n.symbol_interval_t,
            amp_bandwidth_hz: n.amp_bandwidth_ba,
            amp_noise_density_a_per_rthz: n.amp_noise_density_rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    /// `qcm`, `qcm-pr`, `dcm` or `sm-dcm`.
    pub scheme: String,
    /// `bpsk`, `psk-M` or `qam-M`.
    pub modulation: String,
    /// Constellation rotation for `qcm-pr`.
    pub rotation_deg: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self { scheme: "qcm".into(), modulation: "qam-4".into(), rotation_deg: 45.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSection {
    pub n_subcarriers: usize,
    /// `zf` or `md`.
    pub detector: String,
    /// Restrict QCM-OFDM ZF identification to one LED per sign pair.
    pub structured_identification: bool,
}

impl Default for OfdmSection {
    fn default() -> Self {
        Self { n_subcarriers: 8, detector: "md".into(), structured_identification: false }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub eb_n0_db: Vec<f64>,
    pub min_bit_errors: u64,
    pub max_bits: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub dtx_sweep_eb_n0_db: f64,
    pub dtx_list_m: Vec<f64>,
    pub rotation_sweep_eb_n0_db: f64,
    pub rotation_list_deg: Vec<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let stop = StopRule::default();
        Self {
            eb_n0_db: (0..=15).map(|k| 20.0 + 2.0 * k as f64).collect(),
            min_bit_errors: stop.min_bit_errors,
            max_bits: stop.max_bits,
            seed: 1,
            workers: 0,
            dtx_sweep_eb_n0_db: 35.0,
            dtx_list_m: vec![0.2, 0.6, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.4, 4.8],
            rotation_sweep_eb_n0_db: 37.0,
            rotation_list_deg: (0..=18).map(|k| 5.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub resolution_m: f64,
    pub target_ber: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { resolution_m: 0.025, target_ber: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub room: RoomSection,
    pub transmitter: TransmitterSection,
    pub receiver: ReceiverSection,
    pub noise: NoiseSection,
    pub scheme: SchemeSection,
    pub ofdm: OfdmSection,
    pub simulation: SimulationSection,
    pub analysis: AnalysisSection,
}

/// Reads a TOML override value, falling back to a bare string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Parses `text` and applies `VLCMOD_*` overrides from `env`.
    pub fn parse<I>(text: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        for (name, raw) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            let section = SECTIONS
                .iter()
                .find(|s| rest.starts_with(&format!("{s}_")))
                .ok_or_else(|| invalid(format!("{name}: no config section matches")))?;
            let key = &rest[section.len() + 1..];
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(invalid(format!("[{section}] is not a table")));
            };
            sec.insert(key.to_string(), env_value(&raw));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults only when `None`) and applies overrides.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, env).map_err(|e| match path {
            Some(p) => invalid(format!("{}: {e}", p.display())),
            None => e,
        })
    }

    /// Checks every derived object can be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.link()?.validate().map_err(|e| invalid(e.to_string()))?;
        self.scheme()?;
        self.alphabet()?;
        self.ofdm_detector()?;
        self.stop_rule()?;
        if self.simulation.eb_n0_db.is_empty() {
            return Err(invalid("[simulation] eb_n0_db must not be empty"));
        }
        if !(self.analysis.resolution_m > 0.0) {
            return Err(invalid("[analysis] resolution_m must be positive"));
        }
        if !(self.analysis.target_ber > 0.0 && self.analysis.target_ber < 1.0) {
            return Err(invalid("[analysis] target_ber must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn link(&self) -> Result<LinkConfig, ConfigError> {
        let t = &self.transmitter;
        let r = &self.receiver;
        let n = &self.noise;
        let pair = |x: Option<f64>, y: Option<f64>, what: &str| match (x, y) {
            (Some(x), Some(y)) => Ok(Some((x, y))),
            (None, None) => Ok(None),
            _ => Err(invalid(format!("{what}: give both x and y or neither"))),
        };
        let smdcm_placement = match t.smdcm_placement.to_ascii_lowercase().as_str() {
            "p1" => SmDcmPlacement::P1,
            "p2" => SmDcmPlacement::P2,
            other => return Err(invalid(format!("[transmitter] unknown smdcm_placement '{other}'"))),
        };
        Ok(LinkConfig {
            room: RoomConfig::new(self.room.length_m, self.room.width_m, self.room.height_m)
                .map_err(|e| invalid(format!("[room] {e}")))?,
            tx: TransmitterConfig {
                height_m: t.height_m,
                elevation_deg: t.elevation_deg,
                azimuth_deg: t.azimuth_deg,
                half_power_semiangle_deg: t.half_power_semiangle_deg,
                d_tx_m: t.d_tx_m,
                center: pair(t.center_x_m, t.center_y_m, "[transmitter] center")?,
                smdcm_placement,
                led_power_w: t.led_power_w,
            },
            rx: ReceiverConfig {
                height_m: r.height_m,
                elevation_deg: r.elevation_deg,
                azimuth_deg: r.azimuth_deg,
                area_m2: r.area_m2,
                fov_deg: r.fov_deg,
                responsivity_a: r.responsivity_a_per_w,
                d_rx_m: r.d_rx_m,
                position: pair(r.x_m, r.y_m, "[receiver] position")?,
            },
            noise: NoiseModel {
                q: n.electron_charge_c,
                ambient_current_ia: n.ambient_current_a,
                noise_bw_factor_i2: n.noise_bandwidth_factor,
                symbol_interval_t: n.symbol_interval_s,
                amp_bandwidth_ba: n.amp_bandwidth_hz,
                amp_noise_density_rho: n.amp_noise_density_a_per_rthz,
            },
        })
    }

    pub fn scheme(&self) -> Result<Scheme, ConfigError> {
        match self.scheme.scheme.to_ascii_lowercase().as_str() {
            "qcm" => Ok(Scheme::Qcm),
            "qcm-pr" => Ok(Scheme::QcmPr { theta_rad: self.scheme.rotation_deg.to_radians() }),
            "dcm" => Ok(Scheme::Dcm),
            "sm-dcm" => Ok(Scheme::SmDcm),
            other => Err(invalid(format!("[scheme] unknown scheme '{other}'"))),
        }
    }

    pub fn alphabet(&self) -> Result<ComplexAlphabet, ConfigError> {
        self.scheme
            .modulation
            .parse()
            .map_err(|e: vlcmod::Error| invalid(format!("[scheme] modulation: {e}")))
    }

    pub fn ofdm_detector(&self) -> Result<OfdmDetector, ConfigError> {
        self.ofdm
            .detector
            .parse()
            .map_err(|e: vlcmod::Error| invalid(format!("[ofdm] detector: {e}")))
    }

    /// OFDM variant of the configured scheme (QCM or DCM only).
    pub fn ofdm_modulation(&self) -> Result<Modulation, ConfigError> {
        let scheme = match self.scheme()? {
            Scheme::Qcm => OfdmScheme::Qcm,
            Scheme::Dcm => OfdmScheme::Dcm,
            other => return Err(invalid(format!("OFDM is defined for qcm and dcm, not {other}"))),
        };
        Ok(Modulation::Ofdm {
            scheme,
            detector: self.ofdm_detector()?,
            n_subcarriers: self.ofdm.n_subcarriers,
            structured_identification: self.ofdm.structured_identification,
        })
    }

    pub fn stop_rule(&self) -> Result<StopRule, ConfigError> {
        if self.simulation.min_bit_errors == 0 || self.simulation.max_bits == 0 {
            return Err(invalid("[simulation] min_bit_errors and max_bits must be positive"));
        }
        Ok(StopRule {
            min_bit_errors: self.simulation.min_bit_errors,
            max_bits: self.simulation.max_bits,
        })
    }
}
