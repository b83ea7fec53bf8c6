//! Indoor line-of-sight optical channel.
//!
//! LEDs radiate with a generalized Lambertian pattern; photodiodes collect
//! with a cosine response inside a hard field of view. The gain between LED
//! `j` and photodiode `i` is
//!
//! ```text
//! h_ij = (n + 1) / (2π) · cosⁿ(φ) · cos(θ) · A / R² · rect(θ / FOV)
//! ```
//!
//! with `φ` the emergence angle at the LED, `θ` the incidence angle at the
//! photodiode, `A` the detector area and `R` the LED–photodiode distance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};

use crate::error::{domain, Error, Result};
use crate::mappers::SignalSet;

pub type Vec3 = Vector3<f64>;

/// Gains below this magnitude are flushed to zero.
pub const GAIN_FLOOR: f64 = 1e-30;

/// Unit-norm tolerance accepted for device normals.
const NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomConfig {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            length_m: 5.0,
            width_m: 5.0,
            height_m: 3.5,
        }
    }
}

impl RoomConfig {
    pub fn new(length_m: f64, width_m: f64, height_m: f64) -> Result<Self> {
        for (name, v) in [("length", length_m), ("width", width_m), ("height", height_m)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("room {name} must be positive, got {v}"));
            }
        }
        Ok(Self {
            length_m,
            width_m,
            height_m,
        })
    }

    /// Whether `p` lies inside the closed room volume.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.length_m).contains(&p.x)
            && (0.0..=self.width_m).contains(&p.y)
            && (0.0..=self.height_m).contains(&p.z)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.length_m / 2.0, self.width_m / 2.0)
    }
}

/// Unit vector for an elevation/azimuth pair given in degrees.
///
/// Elevation is measured from the horizontal plane (−90° points at the
/// floor), azimuth from the +x axis.
pub fn normal_from_angles(elevation_deg: f64, azimuth_deg: f64) -> Vec3 {
    let (el, az) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
    let v = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    // cos(±90°) is not exactly zero in floating point.
    let snap = |c: f64| if c.abs() < 1e-15 { 0.0 } else { c };
    Vec3::new(snap(v.x), snap(v.y), snap(v.z)).normalize()
}

fn check_normal(normal: &Vec3) -> Result<()> {
    if (normal.norm() - 1.0).abs() > NORMAL_TOL {
        return domain(format!("normal must have unit norm, got {}", normal.norm()));
    }
    Ok(())
}

/// Lambertian mode number `n = −ln 2 / ln cos Φ½` of an LED lobe.
pub fn lambertian_mode(half_power_semiangle_deg: f64) -> Result<f64> {
    if !(half_power_semiangle_deg > 0.0 && half_power_semiangle_deg < 90.0) {
        return domain(format!(
            "half-power semiangle must be in (0, 90) degrees, got {half_power_semiangle_deg}"
        ));
    }
    Ok(-(2f64.ln()) / half_power_semiangle_deg.to_radians().cos().ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Luminaire {
    pub position: Vec3,
    pub normal: Vec3,
    pub half_power_semiangle_deg: f64,
    pub mode_number: f64,
}

impl Luminaire {
    pub fn new(position: Vec3, normal: Vec3, half_power_semiangle_deg: f64) -> Result<Self> {
        check_normal(&normal)?;
        let mode_number = lambertian_mode(half_power_semiangle_deg)?;
        Ok(Self {
            position,
            normal,
            half_power_semiangle_deg,
            mode_number,
        })
    }

    /// Ceiling LED pointing straight down with a 60° half-power semiangle.
    pub fn downward(position: Vec3) -> Self {
        Self::new(position, Vec3::new(0.0, 0.0, -1.0), 60.0).expect("default luminaire is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub position: Vec3,
    pub normal: Vec3,
    pub area_m2: f64,
    pub fov_deg: f64,
    pub responsivity_a: f64,
}

impl Detector {
    pub const DEFAULT_AREA_M2: f64 = 1e-4;

    pub fn new(
        position: Vec3,
        normal: Vec3,
        area_m2: f64,
        fov_deg: f64,
        responsivity_a: f64,
    ) -> Result<Self> {
        check_normal(&normal)?;
        if !(area_m2 > 0.0) {
            return domain(format!("detector area must be positive, got {area_m2}"));
        }
        if !(fov_deg > 0.0 && fov_deg <= 90.0) {
            return domain(format!("field of view must be in (0, 90] degrees, got {fov_deg}"));
        }
        if !(responsivity_a > 0.0) {
            return domain(format!("responsivity must be positive, got {responsivity_a}"));
        }
        Ok(Self {
            position,
            normal,
            area_m2,
            fov_deg,
            responsivity_a,
        })
    }

    /// Upward-facing photodiode with 1 cm² area, 85° FOV and 1 A/W.
    pub fn upward(position: Vec3) -> Self {
        Self::new(position, Vec3::new(0.0, 0.0, 1.0), Self::DEFAULT_AREA_M2, 85.0, 1.0)
            .expect("default detector is valid")
    }
}

/// LOS gain between one LED and one photodiode.
pub fn los_gain(led: &Luminaire, pd: &Detector) -> Result<f64> {
    let d = pd.position - led.position;
    let r2 = d.norm_squared();
    if r2 == 0.0 {
        return domain("LED and photodiode are at the same position");
    }
    let r = r2.sqrt();
    let cos_phi = d.dot(&led.normal) / r;
    let cos_theta = -d.dot(&pd.normal) / r;
    if cos_phi <= 0.0 || cos_theta <= 0.0 {
        return Ok(0.0);
    }
    let theta_deg = cos_theta.min(1.0).acos().to_degrees();
    if theta_deg > pd.fov_deg {
        return Ok(0.0);
    }
    let n = led.mode_number;
    let gain = (n + 1.0) / (2.0 * PI) * cos_phi.powf(n) * cos_theta * pd.area_m2 / r2;
    Ok(if gain < GAIN_FLOOR { 0.0 } else { gain })
}

/// Placement of the LED array on the ceiling plane.
///
/// All three share the same 2×2 square of side `d_tx`; they differ in which
/// physical corner drives which transmit-vector position. Corners are named
/// with north = +y and east = +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlacementKind {
    /// QCM grid: LED 1/2 (real part ±) on the NW–SE diagonal and LED 3/4
    /// (imaginary part ±) on the NE–SW diagonal, i.e. order NW, SE, NE, SW.
    QcmGrid,
    /// SM-DCM with diagonal blocks: BLOCK 1 = (NW, SE), BLOCK 2 = (NE, SW).
    SmDcmP1,
    /// SM-DCM with side-by-side blocks: BLOCK 1 = (NW, NE), BLOCK 2 = (SE, SW),
    /// so LED 1 and LED 3 sit on a diagonal.
    SmDcmP2,
}

/// LED positions in transmit-vector order for a placement.
pub fn generate_placement(
    kind: PlacementKind,
    d_tx: f64,
    center: (f64, f64),
    height: f64,
    room: &RoomConfig,
) -> Result<Vec<Vec3>> {
    if !(d_tx > 0.0) {
        return domain(format!("LED spacing must be positive, got {d_tx}"));
    }
    let h = d_tx / 2.0;
    let (cx, cy) = center;
    let nw = Vec3::new(cx - h, cy + h, height);
    let ne = Vec3::new(cx + h, cy + h, height);
    let sw = Vec3::new(cx - h, cy - h, height);
    let se = Vec3::new(cx + h, cy - h, height);
    if [nw, ne, sw, se].iter().any(|p| !room.contains(p)) {
        return domain(format!(
            "LED grid of side {d_tx} m centered at ({cx}, {cy}, {height}) does not fit in the room"
        ));
    }
    Ok(match kind {
        PlacementKind::QcmGrid | PlacementKind::SmDcmP1 => vec![nw, se, ne, sw],
        PlacementKind::SmDcmP2 => vec![nw, ne, se, sw],
    })
}

/// Photodiode positions of the 2×2 receiver array (NW, NE, SW, SE).
pub fn detector_array(center: (f64, f64), d_rx: f64, height: f64) -> Vec<Vec3> {
    let h = d_rx / 2.0;
    let (cx, cy) = center;
    vec![
        Vec3::new(cx - h, cy + h, height),
        Vec3::new(cx + h, cy + h, height),
        Vec3::new(cx - h, cy - h, height),
        Vec3::new(cx + h, cy - h, height),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverLayout {
    pub room: RoomConfig,
    pub luminaires: Vec<Luminaire>,
    pub detectors: Vec<Detector>,
    pub d_tx: f64,
    pub d_rx: f64,
}

impl TransceiverLayout {
    pub fn new(
        room: RoomConfig,
        luminaires: Vec<Luminaire>,
        detectors: Vec<Detector>,
        d_tx: f64,
        d_rx: f64,
    ) -> Result<Self> {
        if luminaires.is_empty() {
            return Err(Error::Empty("layout has no LEDs".into()));
        }
        if detectors.is_empty() {
            return Err(Error::Empty("layout has no photodiodes".into()));
        }
        if let Some(l) = luminaires.iter().find(|l| !room.contains(&l.position)) {
            return domain(format!("LED at {:?} lies outside the room", l.position.as_slice()));
        }
        if let Some(d) = detectors.iter().find(|d| !room.contains(&d.position)) {
            return domain(format!("photodiode at {:?} lies outside the room", d.position.as_slice()));
        }
        let a = detectors[0].responsivity_a;
        if detectors.iter().any(|d| d.responsivity_a != a) {
            return domain("all photodiodes must share one responsivity");
        }
        Ok(Self {
            room,
            luminaires,
            detectors,
            d_tx,
            d_rx,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.luminaires.len()
    }

    pub fn n_rx(&self) -> usize {
        self.detectors.len()
    }
}

/// Real nonnegative `N_r × N_t` LOS gain matrix together with the
/// photodiode responsivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<f64>,
    responsivity_a: f64,
}

impl ChannelMatrix {
    pub fn new(entries: DMatrix<f64>, responsivity_a: f64) -> Result<Self> {
        if entries.iter().any(|&g| !g.is_finite() || g < 0.0) {
            return domain("channel gains must be finite and nonnegative");
        }
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Empty("channel matrix has no entries".into()));
        }
        if !(responsivity_a > 0.0) {
            return domain(format!("responsivity must be positive, got {responsivity_a}"));
        }
        Ok(Self {
            entries,
            responsivity_a,
        })
    }

    pub fn from_rows(rows: &[&[f64]], responsivity_a: f64) -> Result<Self> {
        let n_r = rows.len();
        let n_t = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_t) {
            return Err(Error::Dimension("ragged channel rows".into()));
        }
        Self::new(
            DMatrix::from_fn(n_r, n_t, |i, j| rows[i][j]),
            responsivity_a,
        )
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn responsivity(&self) -> f64 {
        self.responsivity_a
    }

    pub fn n_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.entries.ncols()
    }

    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.entries[(rx, tx)]
    }

    /// `H x` for an intensity vector of length `N_t`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rx()];
        self.apply_into(x, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_tx());
        for (i, o) in out.iter_mut().enumerate() {
            *o = x
                .iter()
                .enumerate()
                .map(|(j, &xj)| self.entries[(i, j)] * xj)
                .sum();
        }
    }

    /// Columns restricted to the given LED indices, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<ChannelMatrix> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_tx()) {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: self.n_tx(),
            });
        }
        Self::new(self.entries.select_columns(cols), self.responsivity_a)
    }

    pub(crate) fn check_tx_len(&self, len: usize) -> Result<()> {
        if len != self.n_tx() {
            return Err(Error::Dimension(format!(
                "transmit vectors have length {len} but the channel has {} LEDs",
                self.n_tx()
            )));
        }
        Ok(())
    }
}

/// Entry `(i, j)` is the LOS gain from LED `j` to photodiode `i`.
pub fn build_channel_matrix(layout: &TransceiverLayout) -> Result<ChannelMatrix> {
    let mut h = DMatrix::zeros(layout.n_rx(), layout.n_tx());
    for (i, pd) in layout.detectors.iter().enumerate() {
        for (j, led) in layout.luminaires.iter().enumerate() {
            h[(i, j)] = los_gain(led, pd)?;
        }
    }
    ChannelMatrix::new(h, layout.detectors[0].responsivity_a)
}

/// Shot plus thermal noise parameters of the photodiode front end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Electron charge (C).
    pub q: f64,
    /// Ambient light photocurrent (A).
    pub ambient_current_ia: f64,
    /// Noise bandwidth factor.
    pub noise_bw_factor_i2: f64,
    /// Signaling interval (s).
    pub symbol_interval_t: f64,
    /// Amplifier bandwidth (Hz).
    pub amp_bandwidth_ba: f64,
    /// Amplifier noise density (A/√Hz).
    pub amp_noise_density_rho: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            q: 1.602e-19,
            ambient_current_ia: 5.84e-3,
            noise_bw_factor_i2: 0.562,
            symbol_interval_t: 5e-8,
            amp_bandwidth_ba: 5e7,
            amp_noise_density_rho: 5e-12,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("q", self.q),
            ("ambient current", self.ambient_current_ia),
            ("noise bandwidth factor", self.noise_bw_factor_i2),
            ("symbol interval", self.symbol_interval_t),
            ("amplifier bandwidth", self.amp_bandwidth_ba),
            ("amplifier noise density", self.amp_noise_density_rho),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("noise {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// `σ² = 2qa(P_r + I_a/a)I₂/T + B_a ρ²` in A².
    pub fn noise_variance(&self, received_power_w: f64, responsivity_a: f64) -> f64 {
        let shot = 2.0 * self.q * responsivity_a
            * (received_power_w + self.ambient_current_ia / responsivity_a)
            * self.noise_bw_factor_i2
            / self.symbol_interval_t;
        shot + self.amp_bandwidth_ba * self.amp_noise_density_rho.powi(2)
    }
}

/// `P_r² = (1/N_r) Σ_i E[(H_i x)²]`, expectation uniform over the set.
pub fn mean_square_received_power(h: &ChannelMatrix, set: &SignalSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("signal set".into()));
    }
    h.check_tx_len(set.n_tx())?;
    let mut hx = vec![0.0; h.n_rx()];
    let mut total = 0.0;
    for v in set.vectors() {
        h.apply_into(&v.intensities, &mut hx);
        total += hx.iter().map(|g| g * g).sum::<f64>();
    }
    Ok(total / (set.len() as f64 * h.n_rx() as f64))
}

/// Average received SNR `γ̄ = a² P_r² / σ²`.
pub fn average_received_snr(h: &ChannelMatrix, set: &SignalSet, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return domain(format!("noise variance must be positive, got {sigma2}"));
    }
    let pr2 = mean_square_received_power(h, set)?;
    Ok(h.responsivity().powi(2) * pr2 / sigma2)
}
