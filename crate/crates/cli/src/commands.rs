//! Experiment commands. Each one reads an [`ExperimentConfig`], writes a
//! single CSV file into the output directory and returns a one-line summary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vlcmod::analysis::{bound_curve, coverage_percentage, dmin_davg, rate_contours, rate_ladder, snr_map, RateMap};
use vlcmod::link::SmDcmPlacement;
use vlcmod::mappers::{Scheme, SignalSet};
use vlcmod::montecarlo::{simulate_ber, sweep_dtx, sweep_rotation, Modulation, SimSpec};

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{self, GridField, PlacementRow, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BerCurve,
    BoundCurve,
    SweepDtx,
    SweepRotation,
    OfdmBer,
    PlacementMetrics,
    SnrMap,
    RateContour,
    Coverage,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::BerCurve,
        Command::BoundCurve,
        Command::SweepDtx,
        Command::SweepRotation,
        Command::OfdmBer,
        Command::PlacementMetrics,
        Command::SnrMap,
        Command::RateContour,
        Command::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BerCurve => "ber-curve",
            Command::BoundCurve => "bound-curve",
            Command::SweepDtx => "sweep-dtx",
            Command::SweepRotation => "sweep-rotation",
            Command::OfdmBer => "ofdm-ber",
            Command::PlacementMetrics => "placement-metrics",
            Command::SnrMap => "snr-map",
            Command::RateContour => "rate-contour",
            Command::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command '{s}'"))
    }
}

/// Failure of a command, split by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<vlcmod::Error> for CliError {
    fn from(e: vlcmod::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<output::OutputError> for CliError {
    fn from(e: output::OutputError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub path: PathBuf,
    pub summary: String,
}

fn sim_spec(cfg: &ExperimentConfig, modulation: Modulation) -> Result<SimSpec, CliError> {
    let mut spec = SimSpec::new(cfg.link()?, modulation, cfg.alphabet()?, cfg.simulation.eb_n0_db.clone());
    spec.stop = cfg.stop_rule()?;
    spec.master_seed = cfg.simulation.seed;
    spec.workers = cfg.simulation.workers;
    Ok(spec)
}

fn fmt_opt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "not reached".into(), |v| format!("{v:.2} dB"))
}

/// Runs the spatial analysis on a pool of `cfg.simulation.workers` threads.
fn in_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.simulation.workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

fn rate_map(cfg: &ExperimentConfig, scheme: Scheme) -> Result<RateMap, CliError> {
    let link = cfg.link()?;
    let alphabet = cfg.alphabet()?;
    in_pool(cfg, || -> Result<RateMap, vlcmod::Error> {
        let map = snr_map(&link, scheme, &alphabet, cfg.analysis.resolution_m)?;
        rate_contours(&map, &link, scheme, cfg.analysis.target_ber)
    })?
    .map_err(Into::into)
}

/// Highest rate any ladder alphabet can carry with `scheme`.
fn ladder_top(scheme: Scheme) -> u32 {
    rate_ladder().iter().map(|a| a.bits_per_symbol()).max().unwrap_or(0) + scheme.index_bits()
}

/// Output file name, `<command>_<scheme>_<modulation>.csv`; the rate and
/// coverage maps search the whole alphabet ladder and omit the modulation.
pub fn output_file_name(command: Command, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let scheme = cfg.scheme()?.name();
    let modulation = cfg.alphabet()?.name();
    Ok(match command {
        Command::RateContour | Command::Coverage => format!("{command}_{scheme}.csv"),
        Command::OfdmBer => format!("{command}_{scheme}_{modulation}_{}.csv", cfg.ofdm_detector()?),
        _ => format!("{command}_{scheme}_{modulation}.csv"),
    })
}

/// Executes `command` and writes its CSV into `out_dir`.
pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let (table, summary): (Table, String) = match command {
        Command::BerCurve => {
            let curve = simulate_ber(&sim_spec(cfg, Modulation::Single(scheme))?)?;
            let need = curve.required_eb_n0(1e-4);
            (output::ber_table(&curve), format!("{} points, BER 1e-4 at {}", curve.points.len(), fmt_opt_db(need)))
        }
        Command::OfdmBer => {
            let curve = simulate_ber(&sim_spec(cfg, cfg.ofdm_modulation()?)?)?;
            let need = curve.required_eb_n0(1e-4);
            (output::ber_table(&curve), format!("{} points, BER 1e-4 at {}", curve.points.len(), fmt_opt_db(need)))
        }
        Command::BoundCurve => {
            let set = SignalSet::enumerate(scheme, &cfg.alphabet()?)?;
            let h = cfg.link()?.channel(scheme)?;
            let curve = bound_curve(&set, &h, &cfg.simulation.eb_n0_db)?;
            let need = vlcmod::montecarlo::required_eb_n0(
                &curve
                    .points
                    .iter()
                    .map(|p| vlcmod::montecarlo::BerPoint { eb_n0_db: p.eb_n0_db, ber: p.ber_bound, bits: 0, errors: 0 })
                    .collect::<Vec<_>>(),
                1e-4,
            );
            (output::bound_table(&curve), format!("{} points, bound 1e-4 at {}", curve.points.len(), fmt_opt_db(need)))
        }
        Command::SweepDtx => {
            let spec = sim_spec(cfg, Modulation::Single(scheme))?;
            let pts = sweep_dtx(&spec, cfg.simulation.dtx_sweep_eb_n0_db, &cfg.simulation.dtx_list_m)?;
            let best = pts.iter().min_by(|a, b| a.1.ber.total_cmp(&b.1.ber));
            let summary = best.map_or_else(String::new, |(d, p)| format!("lowest BER {:.3e} at d_tx = {d} m", p.ber));
            (output::sweep_table("d_tx_m", &pts), summary)
        }
        Command::SweepRotation => {
            let spec = sim_spec(cfg, Modulation::Single(scheme))?;
            let pts = sweep_rotation(&spec, cfg.simulation.rotation_sweep_eb_n0_db, &cfg.simulation.rotation_list_deg)?;
            let best = pts.iter().min_by(|a, b| a.1.ber.total_cmp(&b.1.ber));
            let summary = best.map_or_else(String::new, |(t, p)| format!("lowest BER {:.3e} at {t} deg", p.ber));
            (output::sweep_table("rotation_deg", &pts), summary)
        }
        Command::PlacementMetrics => {
            if scheme != Scheme::SmDcm {
                return Err(ConfigError(format!("placement-metrics compares SM-DCM placements, not {}", scheme.name())).into());
            }
            let alphabet = cfg.alphabet()?;
            let set = SignalSet::enumerate(scheme, &alphabet)?;
            let mut rows = Vec::new();
            for placement in [SmDcmPlacement::P1, SmDcmPlacement::P2] {
                let mut link = cfg.link()?;
                link.tx.smdcm_placement = placement;
                let (d_min, d_avg) = dmin_davg(&set, &link.channel(scheme)?)?;
                rows.push(PlacementRow {
                    placement: placement.name().into(),
                    modulation: alphabet.name(),
                    d_min,
                    d_avg,
                });
            }
            let summary = format!(
                "p1 d_min {:.4e}, p2 d_min {:.4e}",
                rows[0].d_min, rows[1].d_min
            );
            (output::placement_table(&rows), summary)
        }
        Command::SnrMap => {
            let link = cfg.link()?;
            let alphabet = cfg.alphabet()?;
            let map = in_pool(cfg, || snr_map(&link, scheme, &alphabet, cfg.analysis.resolution_m))??;
            let vals: Vec<f64> = map.gamma_db.iter().flatten().copied().collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (output::grid_table(&map, GridField::GammaDb), format!("{} cells, SNR {lo:.2}..{hi:.2} dB", vals.len()))
        }
        Command::RateContour => {
            let map = rate_map(cfg, scheme)?;
            (output::grid_table(&map, GridField::RateBpcu), format!("max rate {} bpcu", map.max_rate()))
        }
        Command::Coverage => {
            let map = rate_map(cfg, scheme)?;
            let rows: Vec<(u32, f64)> = (1..=ladder_top(scheme)).map(|eta| (eta, coverage_percentage(&map, eta))).collect();
            let summary = rows.iter().map(|(e, p)| format!("{e}:{p:.1}%")).collect::<Vec<_>>().join(" ");
            (output::coverage_table(&rows), summary)
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let path = out_dir.join(output_file_name(command, cfg)?);
    table.write(&path)?;
    Ok(Outcome {
        summary: format!("{command}: {summary} -> {}", path.display()),
        path,
    })
}
