//! Closed-form performance analysis: pairwise error probabilities, the
//! union bound on BER, distance metrics of a signal set seen through `H`,
//! and spatial maps of received SNR and achievable rate.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geometry::{mean_square_received_power, ChannelMatrix};
use crate::link::LinkConfig;
use crate::mappers::{hamming, make_alphabet, AlphabetKind, ComplexAlphabet, Scheme, SignalSet};

/// Gaussian tail probability `Q(x) = ½ erfc(x / √2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Reporting clamp applied to union bounds.
pub const BOUND_CLAMP: f64 = 0.5;

/// Noise deviation σ that puts the link at `eb_n0_db`, with
/// `Eb/N0 = γ̄ / η` and `γ̄ = a² P_r² / σ²`.
pub fn sigma_for_eb_n0(h: &ChannelMatrix, set: &SignalSet, eb_n0_db: f64) -> Result<f64> {
    let pr2 = mean_square_received_power(h, set)?;
    let eta = set.bits_per_use() as f64;
    if eta == 0.0 {
        return domain("signal set carries no bits");
    }
    let gamma = eta * 10f64.powf(eb_n0_db / 10.0);
    Ok((h.responsivity().powi(2) * pr2 / gamma).sqrt())
}

/// Probability that ML prefers `x2` when `x1` was sent:
/// `Q(a / (2σ) · ‖H(x2 − x1)‖)`.
pub fn pep(x1: &[f64], x2: &[f64], h: &ChannelMatrix, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("noise deviation must be positive, got {sigma}"));
    }
    h.check_tx_len(x1.len())?;
    h.check_tx_len(x2.len())?;
    let diff: Vec<f64> = x2.iter().zip(x1).map(|(b, a)| b - a).collect();
    let dist = h.apply(&diff).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(q_function(h.responsivity() * dist / (2.0 * sigma)))
}

/// Received-domain distances and label Hamming distances of every
/// unordered pair of a signal set.
#[derive(Debug, Clone)]
pub struct PairTable {
    /// `(‖H(x_j − x_i)‖², d_H(i, j))` for `i < j`.
    pairs: Vec<(f64, u32)>,
    len: usize,
    eta: u32,
    responsivity: f64,
}

impl PairTable {
    pub fn new(set: &SignalSet, h: &ChannelMatrix) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::Empty("need at least two transmit vectors".into()));
        }
        h.check_tx_len(set.n_tx())?;
        let n_r = h.n_rx();
        let mut images = vec![0.0; n_r * set.len()];
        for (img, v) in images.chunks_exact_mut(n_r).zip(set.vectors()) {
            h.apply_into(&v.intensities, img);
        }
        let mut pairs = Vec::with_capacity(set.len() * (set.len() - 1) / 2);
        for i in 0..set.len() {
            let a = &images[i * n_r..(i + 1) * n_r];
            for j in i + 1..set.len() {
                let b = &images[j * n_r..(j + 1) * n_r];
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                pairs.push((d2, hamming(set.label(i), set.label(j))));
            }
        }
        Ok(Self {
            pairs,
            len: set.len(),
            eta: set.bits_per_use(),
            responsivity: h.responsivity(),
        })
    }

    /// Unclamped union bound `(1/L) Σ_i Σ_{j≠i} Q(a‖HΔ‖/2σ) d_H / η`.
    pub fn union_bound(&self, sigma: f64) -> f64 {
        self.union_bound_capped(sigma, f64::INFINITY)
    }

    /// Union bound, abandoning the sum once it exceeds `cap`.
    ///
    /// The returned value is exact when it is `≤ cap` and some value `> cap`
    /// otherwise.
    pub fn union_bound_capped(&self, sigma: f64, cap: f64) -> f64 {
        let scale = self.responsivity / (2.0 * sigma);
        let norm = 2.0 / (self.len as f64 * self.eta as f64);
        let limit = cap / norm;
        let mut acc = 0.0;
        for &(d2, dh) in &self.pairs {
            acc += q_function(scale * d2.sqrt()) * dh as f64;
            if acc > limit {
                return acc * norm;
            }
        }
        acc * norm
    }

    /// `(d_min, d_avg)` of the squared received distances.
    pub fn dmin_davg(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        for &(d2, _) in &self.pairs {
            min = min.min(d2);
            sum += d2;
        }
        (min, sum / self.pairs.len() as f64)
    }
}

/// Raw union bound on the BER of ML detection (may exceed 1 at low SNR).
pub fn union_bound_ber_raw(set: &SignalSet, h: &ChannelMatrix, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return domain(format!("noise deviation must be positive, got {sigma}"));
    }
    Ok(PairTable::new(set, h)?.union_bound(sigma))
}

/// Union bound clamped at [`BOUND_CLAMP`] for reporting.
pub fn union_bound_ber(set: &SignalSet, h: &ChannelMatrix, sigma: f64) -> Result<f64> {
    Ok(union_bound_ber_raw(set, h, sigma)?.min(BOUND_CLAMP))
}

/// Minimum and mean of `‖H(x₂ − x₁)‖²` over the unordered distinct pairs.
pub fn dmin_davg(set: &SignalSet, h: &ChannelMatrix) -> Result<(f64, f64)> {
    Ok(PairTable::new(set, h)?.dmin_davg())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub eb_n0_db: f64,
    /// Clamped at [`BOUND_CLAMP`].
    pub ber_bound: f64,
    pub ber_bound_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundCurve {
    pub points: Vec<BoundPoint>,
}

/// Union bound evaluated over an Eb/N0 grid.
pub fn bound_curve(set: &SignalSet, h: &ChannelMatrix, eb_n0_db: &[f64]) -> Result<BoundCurve> {
    let table = PairTable::new(set, h)?;
    let points = eb_n0_db
        .iter()
        .map(|&db| {
            let raw = table.union_bound(sigma_for_eb_n0(h, set, db)?);
            Ok(BoundPoint {
                eb_n0_db: db,
                ber_bound: raw.min(BOUND_CLAMP),
                ber_bound_raw: raw,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundCurve { points })
}

/// Alphabets tried by the rate-contour search, ascending in size.
pub fn rate_ladder() -> Vec<ComplexAlphabet> {
    std::iter::once(make_alphabet(AlphabetKind::Bpsk, 2))
        .chain([4, 8, 16, 32, 64].map(|m| make_alphabet(AlphabetKind::Qam, m)))
        .collect::<Result<_>>()
        .expect("ladder alphabets are valid")
}

/// Per-cell SNR and achievable rate over the receiver plane.
///
/// Cells are stored row-major with `y` as the row index. Cells whose
/// photodiode array would leave the room carry no data.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub gamma_db: Vec<Option<f64>>,
    pub rate_bpcu: Vec<Option<u32>>,
}

impl RateMap {
    pub fn width(&self) -> usize {
        self.xs.len()
    }

    pub fn height(&self) -> usize {
        self.ys.len()
    }

    pub fn gamma_at(&self, ix: usize, iy: usize) -> Option<f64> {
        self.gamma_db[iy * self.width() + ix]
    }

    pub fn rate_at(&self, ix: usize, iy: usize) -> Option<u32> {
        self.rate_bpcu[iy * self.width() + ix]
    }

    pub fn max_rate(&self) -> u32 {
        self.rate_bpcu.iter().flatten().copied().max().unwrap_or(0)
    }

    fn cells(&self) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        let w = self.width();
        (0..self.width() * self.height()).map(move |k| (k, (self.xs[k % w], self.ys[k / w])))
    }
}

/// Grid coordinates `0, res, 2·res, …` up to and including `extent`.
pub fn grid_axis(extent: f64, resolution: f64) -> Vec<f64> {
    let n = (extent / resolution - 1e-9).ceil() as usize + 1;
    (0..n).map(|i| (i as f64 * resolution).min(extent)).collect()
}

/// Signal set in watts: one alphabet intensity unit emits the configured
/// LED power, so larger alphabets also radiate more.
pub fn powered_set(link: &LinkConfig, scheme: Scheme, alphabet: &ComplexAlphabet) -> Result<SignalSet> {
    Ok(SignalSet::enumerate(scheme, alphabet)?.scaled(link.tx.led_power_w))
}

/// `(γ̄, σ²)` at one receiver position for a powered signal set.
///
/// The shot-noise term uses the RMS received power `√P_r²`.
fn cell_snr(link: &LinkConfig, h: &ChannelMatrix, set: &SignalSet) -> Result<(f64, f64)> {
    let pr2 = mean_square_received_power(h, set)?;
    let a = h.responsivity();
    let sigma2 = link.noise.noise_variance(pr2.sqrt(), a);
    Ok((a * a * pr2 / sigma2, sigma2))
}

/// Average received SNR over the receiver plane at `resolution` metres.
pub fn snr_map(
    link: &LinkConfig,
    scheme: Scheme,
    alphabet: &ComplexAlphabet,
    resolution: f64,
) -> Result<RateMap> {
    link.validate()?;
    if !(resolution > 0.0) {
        return domain(format!("grid resolution must be positive, got {resolution}"));
    }
    let set = powered_set(link, scheme, alphabet)?;
    let xs = grid_axis(link.room.length_m, resolution);
    let ys = grid_axis(link.room.width_m, resolution);
    let mut map = RateMap {
        gamma_db: Vec::new(),
        rate_bpcu: vec![None; xs.len() * ys.len()],
        xs,
        ys,
    };
    let cells: Vec<_> = map.cells().collect();
    map.gamma_db = cells
        .par_iter()
        .map(|&(_, pos)| {
            if !link.array_fits(pos) {
                return Ok(None);
            }
            let h = link.channel_at(scheme, pos)?;
            let (gamma, _) = cell_snr(link, &h, &set)?;
            Ok(Some(10.0 * gamma.log10()))
        })
        .collect::<Result<_>>()?;
    Ok(map)
}

/// Largest rate among the ladder alphabets whose union bound meets
/// `target_ber` in every cell of `map` that has data.
pub fn rate_contours(
    map: &RateMap,
    link: &LinkConfig,
    scheme: Scheme,
    target_ber: f64,
) -> Result<RateMap> {
    if !(target_ber > 0.0 && target_ber < 1.0) {
        return domain(format!("target BER must be in (0, 1), got {target_ber}"));
    }
    let sets: Vec<SignalSet> = rate_ladder()
        .iter()
        .map(|a| powered_set(link, scheme, a))
        .collect::<Result<_>>()?;
    let cells: Vec<_> = map.cells().collect();
    let rate_bpcu = cells
        .par_iter()
        .map(|&(k, pos)| {
            if map.gamma_db[k].is_none() {
                return Ok(None);
            }
            let h = link.channel_at(scheme, pos)?;
            let mut best = 0;
            for set in &sets {
                let (_, sigma2) = cell_snr(link, &h, set)?;
                let table = PairTable::new(set, &h)?;
                if table.union_bound_capped(sigma2.sqrt(), target_ber) <= target_ber {
                    best = best.max(set.bits_per_use());
                }
            }
            Ok(Some(best))
        })
        .collect::<Result<_>>()?;
    Ok(RateMap {
        rate_bpcu,
        ..map.clone()
    })
}

/// Percentage of cells with data whose rate is at least `eta`.
pub fn coverage_percentage(map: &RateMap, eta: u32) -> f64 {
    let rates: Vec<u32> = map.rate_bpcu.iter().flatten().copied().collect();
    if rates.is_empty() {
        return 0.0;
    }
    100.0 * rates.iter().filter(|&&r| r >= eta).count() as f64 / rates.len() as f64
}
