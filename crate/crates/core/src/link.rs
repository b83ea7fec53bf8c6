//! Room, transmitter and receiver setup shared by the simulators and the
//! spatial analysis.

use crate::error::{domain, Result};
use crate::geometry::{
    build_channel_matrix, detector_array, generate_placement, normal_from_angles, ChannelMatrix,
    Detector, Luminaire, NoiseModel, PlacementKind, RoomConfig, TransceiverLayout, Vec3,
};
use crate::mappers::Scheme;

/// Which SM-DCM block pairing to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmDcmPlacement {
    P1,
    P2,
}

impl SmDcmPlacement {
    pub fn kind(self) -> PlacementKind {
        match self {
            SmDcmPlacement::P1 => PlacementKind::SmDcmP1,
            SmDcmPlacement::P2 => PlacementKind::SmDcmP2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SmDcmPlacement::P1 => "p1",
            SmDcmPlacement::P2 => "p2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterConfig {
    pub height_m: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub half_power_semiangle_deg: f64,
    pub d_tx_m: f64,
    /// Center of the LED square on the ceiling plane; room center if `None`.
    pub center: Option<(f64, f64)>,
    pub smdcm_placement: SmDcmPlacement,
    /// Optical power (W) emitted per unit of alphabet intensity; sets the
    /// absolute SNR of the spatial maps.
    pub led_power_w: f64,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        Self {
            height_m: 3.0,
            elevation_deg: -90.0,
            azimuth_deg: 0.0,
            half_power_semiangle_deg: 60.0,
            d_tx_m: 1.0,
            center: None,
            smdcm_placement: SmDcmPlacement::P2,
            led_power_w: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub height_m: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub area_m2: f64,
    pub fov_deg: f64,
    pub responsivity_a: f64,
    pub d_rx_m: f64,
    /// Center of the photodiode array; room center if `None`.
    pub position: Option<(f64, f64)>,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            height_m: 0.8,
            elevation_deg: 90.0,
            azimuth_deg: 0.0,
            area_m2: Detector::DEFAULT_AREA_M2,
            fov_deg: 85.0,
            responsivity_a: 1.0,
            d_rx_m: 0.1,
            position: None,
        }
    }
}

/// Everything needed to build the channel of a scheme.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkConfig {
    pub room: RoomConfig,
    pub tx: TransmitterConfig,
    pub rx: ReceiverConfig,
    pub noise: NoiseModel,
}

impl LinkConfig {
    pub fn with_d_tx(&self, d_tx_m: f64) -> Self {
        let mut c = self.clone();
        c.tx.d_tx_m = d_tx_m;
        c
    }

    pub fn validate(&self) -> Result<()> {
        RoomConfig::new(self.room.length_m, self.room.width_m, self.room.height_m)?;
        self.noise.validate()?;
        if !(self.tx.led_power_w > 0.0) {
            return domain(format!("LED power must be positive, got {}", self.tx.led_power_w));
        }
        if !(self.rx.d_rx_m > 0.0) {
            return domain(format!("photodiode spacing must be positive, got {}", self.rx.d_rx_m));
        }
        self.leds(Scheme::Qcm)?;
        self.detectors_at(self.rx_center())?;
        Ok(())
    }

    pub fn rx_center(&self) -> (f64, f64) {
        self.rx.position.unwrap_or_else(|| self.room.center())
    }

    /// LED placement used by `scheme`, in transmit-vector order.
    pub fn placement(&self, scheme: Scheme) -> PlacementKind {
        match scheme {
            Scheme::SmDcm => self.tx.smdcm_placement.kind(),
            _ => PlacementKind::QcmGrid,
        }
    }

    pub fn leds(&self, scheme: Scheme) -> Result<Vec<Luminaire>> {
        self.leds_for(self.placement(scheme), scheme.n_tx())
    }

    /// The first `n_tx` LEDs of `kind`; DCM uses LED 1 and LED 2.
    pub fn leds_for(&self, kind: PlacementKind, n_tx: usize) -> Result<Vec<Luminaire>> {
        let center = self.tx.center.unwrap_or_else(|| self.room.center());
        let normal = normal_from_angles(self.tx.elevation_deg, self.tx.azimuth_deg);
        generate_placement(kind, self.tx.d_tx_m, center, self.tx.height_m, &self.room)?
            .into_iter()
            .take(n_tx)
            .map(|p| Luminaire::new(p, normal, self.tx.half_power_semiangle_deg))
            .collect()
    }

    pub fn detectors_at(&self, center: (f64, f64)) -> Result<Vec<Detector>> {
        let normal = normal_from_angles(self.rx.elevation_deg, self.rx.azimuth_deg);
        detector_array(center, self.rx.d_rx_m, self.rx.height_m)
            .into_iter()
            .map(|p| {
                Detector::new(
                    p,
                    normal,
                    self.rx.area_m2,
                    self.rx.fov_deg,
                    self.rx.responsivity_a,
                )
            })
            .collect()
    }

    /// Whether the whole photodiode array centered at `center` is in the room.
    pub fn array_fits(&self, center: (f64, f64)) -> bool {
        detector_array(center, self.rx.d_rx_m, self.rx.height_m)
            .iter()
            .all(|p: &Vec3| self.room.contains(p))
    }

    pub fn layout_at(&self, scheme: Scheme, rx_center: (f64, f64)) -> Result<TransceiverLayout> {
        TransceiverLayout::new(
            self.room,
            self.leds(scheme)?,
            self.detectors_at(rx_center)?,
            self.tx.d_tx_m,
            self.rx.d_rx_m,
        )
    }

    pub fn layout(&self, scheme: Scheme) -> Result<TransceiverLayout> {
        self.layout_at(scheme, self.rx_center())
    }

    pub fn channel(&self, scheme: Scheme) -> Result<ChannelMatrix> {
        build_channel_matrix(&self.layout(scheme)?)
    }

    pub fn channel_at(&self, scheme: Scheme, rx_center: (f64, f64)) -> Result<ChannelMatrix> {
        build_channel_matrix(&self.layout_at(scheme, rx_center)?)
    }
}
