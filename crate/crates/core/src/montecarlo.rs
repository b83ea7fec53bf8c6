//! Deterministic parallel BER estimation and parameter sweeps.
//!
//! Every Eb/N0 point is simulated in fixed-size batches. Batch `b` of point
//! `p` always draws from random stream `(p << 32) | b` of the master seed.
//! Batches are dispatched in rounds of fixed length (1, 2, 4, … up to 64
//! batches) and the stop rule is evaluated only between rounds, so the
//! batches simulated, and hence the counts, do not depend on the number of
//! worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::sigma_for_eb_n0;
use crate::detection::{stream_rng, MlDetector};
use crate::error::{domain, Error, Result};
use crate::geometry::ChannelMatrix;
use crate::link::LinkConfig;
use crate::mappers::{ComplexAlphabet, Scheme, SignalSet};
use crate::ofdm::{
    ofdm_mean_square_received_power, MdDetector, MdScratch, OfdmConfig, OfdmDetector, OfdmScheme,
    ZfDetector,
};

/// Channel uses per batch for per-symbol schemes.
const SYMBOL_BATCH: usize = 4096;
/// Frames per batch for OFDM schemes.
const FRAME_BATCH: usize = 64;
/// Largest number of batches dispatched between two stop-rule checks.
const MAX_ROUND: usize = 64;

/// Transmission format under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    /// One complex symbol (plus index bits) per channel use, ML detection.
    Single(Scheme),
    /// OFDM frames of `n_subcarriers` symbols.
    Ofdm {
        scheme: OfdmScheme,
        detector: OfdmDetector,
        n_subcarriers: usize,
        structured_identification: bool,
    },
}

impl Modulation {
    pub fn name(&self) -> String {
        match self {
            Modulation::Single(s) => s.name().to_string(),
            Modulation::Ofdm { scheme, detector, .. } => format!("{scheme}-{detector}"),
        }
    }

    /// Scheme whose LED layout the channel is built for.
    pub fn layout_scheme(&self) -> Scheme {
        match self {
            Modulation::Single(s) => *s,
            Modulation::Ofdm { scheme: OfdmScheme::Qcm, .. } => Scheme::Qcm,
            Modulation::Ofdm { scheme: OfdmScheme::Dcm, .. } => Scheme::Dcm,
        }
    }
}

/// Per-point stopping rule: stop after `min_bit_errors` errors or
/// `max_bits` simulated bits, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_bit_errors: 200, max_bits: 10_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub link: LinkConfig,
    pub modulation: Modulation,
    pub alphabet: ComplexAlphabet,
    pub eb_n0_db: Vec<f64>,
    pub stop: StopRule,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

impl SimSpec {
    pub fn new(link: LinkConfig, modulation: Modulation, alphabet: ComplexAlphabet, eb_n0_db: Vec<f64>) -> Self {
        Self {
            link,
            modulation,
            alphabet,
            eb_n0_db,
            stop: StopRule::default(),
            master_seed: 0,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eb_n0_db.is_empty() {
            return Err(Error::Empty("Eb/N0 grid".into()));
        }
        if let Some(v) = self.eb_n0_db.iter().find(|v| !v.is_finite()) {
            return domain(format!("Eb/N0 values must be finite, got {v}"));
        }
        if self.stop.min_bit_errors == 0 || self.stop.max_bits == 0 {
            return domain("stop-rule fields must be positive");
        }
        self.link.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub eb_n0_db: f64,
    pub ber: f64,
    pub bits: u64,
    pub errors: u64,
}

impl BerPoint {
    fn new(eb_n0_db: f64, bits: u64, errors: u64) -> Self {
        Self { eb_n0_db, ber: errors as f64 / bits as f64, bits, errors }
    }

    /// Wilson score interval for the bit error probability at normal
    /// quantile `z` (1.96 for 95 %).
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        let n = self.bits as f64;
        let p = self.ber;
        let z2 = z * z;
        let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        ((center - half).max(0.0), (center + half).min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    /// Eb/N0 at which the BER crosses `target`, interpolating `log10 BER`
    /// linearly between the first bracketing pair of simulated points.
    pub fn required_eb_n0(&self, target: f64) -> Option<f64> {
        required_eb_n0(&self.points, target)
    }
}

/// See [`BerCurve::required_eb_n0`].
pub fn required_eb_n0(points: &[BerPoint], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (p, q) = (w[0], w[1]);
        if p.ber >= target && q.ber < target {
            if q.ber == 0.0 {
                return Some(q.eb_n0_db);
            }
            let (lp, lq, lt) = (p.ber.log10(), q.ber.log10(), target.log10());
            Some(p.eb_n0_db + (lt - lp) / (lq - lp) * (q.eb_n0_db - p.eb_n0_db))
        } else {
            None
        }
    })
}

/// Draws one batch and returns `(bits, bit errors)`.
trait BatchRunner: Sync {
    fn run(&self, rng: &mut ChaCha8Rng) -> (u64, u64);
    fn bits_per_batch(&self) -> u64;
}

struct SymbolRunner<'a> {
    det: &'a MlDetector,
    labels: Vec<u32>,
    bits: u32,
    sigma: f64,
}

impl BatchRunner for SymbolRunner<'_> {
    fn run(&self, rng: &mut ChaCha8Rng) -> (u64, u64) {
        let n = self.labels.len();
        let mut y = vec![0.0; self.det.image(0).len()];
        let mut errors = 0u64;
        for _ in 0..SYMBOL_BATCH {
            let i = rng.random_range(0..n);
            for (v, g) in y.iter_mut().zip(self.det.image(i)) {
                *v = g + self.sigma * rng.sample::<f64, _>(StandardNormal);
            }
            let j = self.det.detect_index(&y);
            errors += (self.labels[i] ^ self.labels[j]).count_ones() as u64;
        }
        (self.bits_per_batch(), errors)
    }

    fn bits_per_batch(&self) -> u64 {
        SYMBOL_BATCH as u64 * self.bits as u64
    }
}

enum FrameDetector {
    Zf(ZfDetector),
    Md(MdDetector),
}

struct FrameRunner<'a> {
    cfg: &'a OfdmConfig,
    h: &'a ChannelMatrix,
    det: &'a FrameDetector,
    sigma: f64,
}

impl BatchRunner for FrameRunner<'_> {
    fn run(&self, rng: &mut ChaCha8Rng) -> (u64, u64) {
        let m = self.cfg.alphabet().len();
        let n = self.cfg.n_subcarriers();
        let ah = self.h.entries() * self.h.responsivity();
        let mut scratch = MdScratch::default();
        let mut symbols = vec![0usize; n];
        let mut errors = 0u64;
        for _ in 0..FRAME_BATCH {
            symbols.iter_mut().for_each(|k| *k = rng.random_range(0..m));
            let x = self.cfg.transmit(&symbols).expect("valid frame");
            let mut y: DMatrix<f64> = &ah * x;
            y.iter_mut().for_each(|v| *v += self.sigma * rng.sample::<f64, _>(StandardNormal));
            let decided = match self.det {
                FrameDetector::Zf(d) => d.detect(&y).expect("dimensions checked").symbols,
                FrameDetector::Md(d) => d.detect_with(&y, &mut scratch).expect("dimensions checked"),
            };
            let alphabet = self.cfg.alphabet();
            errors += symbols
                .iter()
                .zip(&decided)
                .map(|(&a, &b)| (alphabet.label(a) ^ alphabet.label(b)).count_ones() as u64)
                .sum::<u64>();
        }
        (self.bits_per_batch(), errors)
    }

    fn bits_per_batch(&self) -> u64 {
        FRAME_BATCH as u64 * self.cfg.bits_per_frame() as u64
    }
}

fn run_point(runner: &dyn BatchRunner, stop: StopRule, seed: u64, point: u64, eb_n0_db: f64) -> BerPoint {
    let per_batch = runner.bits_per_batch();
    let (mut bits, mut errors) = (0u64, 0u64);
    let mut next_batch = 0u64;
    let mut round = 1usize;
    while errors < stop.min_bit_errors && bits < stop.max_bits {
        let remaining = (stop.max_bits - bits).div_ceil(per_batch);
        let count = (round as u64).min(remaining);
        let (b, e) = (next_batch..next_batch + count)
            .into_par_iter()
            .map(|batch| runner.run(&mut stream_rng(seed, (point << 32) | batch)))
            .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
        bits += b;
        errors += e;
        next_batch += count;
        round = (round * 2).min(MAX_ROUND);
    }
    BerPoint::new(eb_n0_db, bits, errors)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Noise deviation giving `Eb/N0 = γ̄/η` for an OFDM frame format.
pub fn ofdm_sigma_for_eb_n0(h: &ChannelMatrix, cfg: &OfdmConfig, eb_n0_db: f64) -> Result<f64> {
    let pr2 = ofdm_mean_square_received_power(h, cfg)?;
    let a = h.responsivity();
    let eta = cfg.bits_per_use() as f64;
    Ok((a * a * pr2 / (eta * 10f64.powf(eb_n0_db / 10.0))).sqrt())
}

/// Simulates `spec` at every Eb/N0 point, numbering points from
/// `first_point` in the random-stream space.
fn simulate_points(spec: &SimSpec, h: &ChannelMatrix, first_point: u64) -> Result<BerCurve> {
    let stop = spec.stop;
    let seed = spec.master_seed;
    let points = match spec.modulation {
        Modulation::Single(scheme) => {
            let set = SignalSet::enumerate(scheme, &spec.alphabet)?;
            let det = MlDetector::new(h, &set)?;
            let labels = set.vectors().iter().map(|v| v.label).collect::<Vec<_>>();
            spec.eb_n0_db
                .iter()
                .enumerate()
                .map(|(p, &db)| {
                    let sigma = sigma_for_eb_n0(h, &set, db)?;
                    let runner = SymbolRunner { det: &det, labels: labels.clone(), bits: set.bits_per_use(), sigma };
                    Ok(run_point(&runner, stop, seed, first_point + p as u64, db))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Modulation::Ofdm { scheme, detector, n_subcarriers, structured_identification } => {
            let cfg = OfdmConfig::new(scheme, spec.alphabet.clone(), n_subcarriers)?
                .with_structured_identification(structured_identification);
            let det = match detector {
                OfdmDetector::Zf => FrameDetector::Zf(ZfDetector::new(&cfg, h)?),
                OfdmDetector::Md => FrameDetector::Md(MdDetector::new(&cfg, h)?),
            };
            spec.eb_n0_db
                .iter()
                .enumerate()
                .map(|(p, &db)| {
                    let sigma = ofdm_sigma_for_eb_n0(h, &cfg, db)?;
                    let runner = FrameRunner { cfg: &cfg, h, det: &det, sigma };
                    Ok(run_point(&runner, stop, seed, first_point + p as u64, db))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(BerCurve { points })
}

/// BER curve of `spec` over its Eb/N0 grid.
///
/// The receiver sits at the configured position (room center by default).
/// The result is identical for every worker count.
pub fn simulate_ber(spec: &SimSpec) -> Result<BerCurve> {
    spec.validate()?;
    let h = spec.link.channel(spec.modulation.layout_scheme())?;
    with_pool(spec.workers, || simulate_points(spec, &h, 0))?
}

/// BER at `eb_n0_db` for each LED spacing in `dtx_list` (meters).
pub fn sweep_dtx(spec: &SimSpec, eb_n0_db: f64, dtx_list: &[f64]) -> Result<Vec<(f64, BerPoint)>> {
    let mut one = spec.clone();
    one.eb_n0_db = vec![eb_n0_db];
    one.validate()?;
    let channels = dtx_list
        .iter()
        .map(|&d| {
            let link = one.link.with_d_tx(d);
            link.validate()?;
            link.channel(one.modulation.layout_scheme())
        })
        .collect::<Result<Vec<_>>>()?;
    with_pool(spec.workers, || {
        dtx_list
            .iter()
            .zip(&channels)
            .enumerate()
            .map(|(k, (&d, h))| Ok((d, simulate_points(&one, h, k as u64)?.points[0])))
            .collect()
    })?
}

/// QCM-PR BER at `eb_n0_db` for each rotation angle in `theta_list_deg`.
pub fn sweep_rotation(spec: &SimSpec, eb_n0_db: f64, theta_list_deg: &[f64]) -> Result<Vec<(f64, BerPoint)>> {
    if !matches!(spec.modulation, Modulation::Single(Scheme::Qcm | Scheme::QcmPr { .. })) {
        return Err(Error::Incompatible(format!(
            "rotation sweeps need QCM-PR, got {}",
            spec.modulation.name()
        )));
    }
    let mut one = spec.clone();
    one.eb_n0_db = vec![eb_n0_db];
    one.validate()?;
    let h = one.link.channel(Scheme::Qcm)?;
    with_pool(spec.workers, || {
        theta_list_deg
            .iter()
            .enumerate()
            .map(|(k, &deg)| {
                let mut s = one.clone();
                s.modulation = Modulation::Single(Scheme::QcmPr { theta_rad: deg.to_radians() });
                Ok((deg, simulate_points(&s, &h, k as u64)?.points[0]))
            })
            .collect()
    })?
}
