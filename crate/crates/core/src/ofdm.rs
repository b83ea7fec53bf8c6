//! OFDM framing over QCM and DCM with zero-forcing and minimum-distance
//! frame detectors.
//!
//! A frame carries `N` alphabet symbols `v`. The transmitter sends the
//! unitary inverse DFT `s = Fᴴv` sample by sample over `N` channel uses, each
//! sample mapped onto the LEDs with the QCM or DCM rule. The channel is
//! frequency flat, so no cyclic prefix is used. The receiver either
//! equalizes every channel use (ZF), transforms back and slices each
//! subcarrier, or searches all `|𝔸|^N` candidate frames for the one whose
//! noiseless image is closest to the received block (MD).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Error, Result};
use crate::geometry::ChannelMatrix;
use crate::mappers::{dcm_map, qcm_map, wrap_phase, ComplexAlphabet};

/// Largest `N·log2|𝔸|` the minimum-distance detector accepts.
pub const MD_MAX_FRAME_BITS: u32 = 20;

/// Unitary DFT of a fixed length: `F` and `Fᴴ` both scaled by `1/√N`.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("DFT length must be positive");
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension(format!("expected {} samples, got {len}", self.n)));
        }
        Ok(())
    }

    /// Time-domain samples `s = Fᴴv`.
    pub fn modulate(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v.len())?;
        let mut buf = v.to_vec();
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        Ok(buf)
    }

    /// Subcarrier values `v = Fs`.
    pub fn demodulate(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(s.len())?;
        let mut buf = s.to_vec();
        self.forward.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        Ok(buf)
    }
}

/// `s = Fᴴv` with the unitary normalization.
pub fn ofdm_modulate(v: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::new(v.len())?.modulate(v)
}

/// `v = Fs` with the unitary normalization.
pub fn ofdm_demodulate(s: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::new(s.len())?.demodulate(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OfdmScheme {
    Qcm,
    Dcm,
}

impl OfdmScheme {
    pub fn n_tx(self) -> usize {
        match self {
            OfdmScheme::Qcm => 4,
            OfdmScheme::Dcm => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OfdmScheme::Qcm => "qcm-ofdm",
            OfdmScheme::Dcm => "dcm-ofdm",
        }
    }

    /// LED intensities of one time-domain sample.
    pub fn map(self, s: Complex64) -> Vec<f64> {
        match self {
            OfdmScheme::Qcm => qcm_map(s).to_vec(),
            OfdmScheme::Dcm => dcm_map(s).to_vec(),
        }
    }
}

impl fmt::Display for OfdmScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OfdmDetector {
    Zf,
    Md,
}

impl OfdmDetector {
    pub fn name(self) -> &'static str {
        match self {
            OfdmDetector::Zf => "zf",
            OfdmDetector::Md => "md",
        }
    }
}

impl fmt::Display for OfdmDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OfdmDetector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zf" => Ok(OfdmDetector::Zf),
            "md" => Ok(OfdmDetector::Md),
            other => domain(format!("unknown OFDM detector '{other}'")),
        }
    }
}

/// Frame format shared by transmitter and receivers.
#[derive(Debug, Clone)]
pub struct OfdmConfig {
    scheme: OfdmScheme,
    alphabet: ComplexAlphabet,
    n_subcarriers: usize,
    /// Restrict QCM active-LED identification to one LED per sign pair.
    structured_identification: bool,
    dft: Dft,
    snap_tol: f64,
}

impl OfdmConfig {
    pub fn new(scheme: OfdmScheme, alphabet: ComplexAlphabet, n_subcarriers: usize) -> Result<Self> {
        if n_subcarriers == 0 || !n_subcarriers.is_power_of_two() {
            return domain(format!(
                "number of subcarriers must be a power of two, got {n_subcarriers}"
            ));
        }
        let peak = alphabet.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
        Ok(Self {
            scheme,
            snap_tol: 1e-12 * peak * (n_subcarriers as f64).sqrt(),
            alphabet,
            n_subcarriers,
            structured_identification: false,
            dft: Dft::new(n_subcarriers)?,
        })
    }

    pub fn with_structured_identification(mut self, on: bool) -> Self {
        self.structured_identification = on;
        self
    }

    pub fn scheme(&self) -> OfdmScheme {
        self.scheme
    }

    pub fn alphabet(&self) -> &ComplexAlphabet {
        &self.alphabet
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn structured_identification(&self) -> bool {
        self.structured_identification
    }

    pub fn dft(&self) -> &Dft {
        &self.dft
    }

    pub fn n_tx(&self) -> usize {
        self.scheme.n_tx()
    }

    /// Bits carried by one frame.
    pub fn bits_per_frame(&self) -> u32 {
        self.n_subcarriers as u32 * self.alphabet.bits_per_symbol()
    }

    /// Bits per channel use, `log2|𝔸|`.
    pub fn bits_per_use(&self) -> u32 {
        self.alphabet.bits_per_symbol()
    }

    /// Time-domain samples of the frame carrying alphabet indices `symbols`.
    ///
    /// Components below the FFT round-off level are set to exactly zero, so
    /// that e.g. a real sample never gets a spurious phase of `2π − ε`.
    pub fn samples(&self, symbols: &[usize]) -> Result<Vec<Complex64>> {
        if symbols.len() != self.n_subcarriers {
            return Err(Error::Dimension(format!(
                "frame has {} subcarriers, got {} symbols",
                self.n_subcarriers,
                symbols.len()
            )));
        }
        if let Some(&k) = symbols.iter().find(|&&k| k >= self.alphabet.len()) {
            return Err(Error::IndexOutOfRange { index: k, len: self.alphabet.len() });
        }
        let v: Vec<Complex64> = symbols.iter().map(|&k| self.alphabet.point(k)).collect();
        let tol = self.snap_tol;
        let snap = |x: f64| if x.abs() <= tol { 0.0 } else { x };
        Ok(self
            .dft
            .modulate(&v)?
            .into_iter()
            .map(|z| Complex64::new(snap(z.re), snap(z.im)))
            .collect())
    }

    /// `N_t × N` intensity matrix `X`; column `n` is the mapping of `s_n`.
    pub fn transmit(&self, symbols: &[usize]) -> Result<DMatrix<f64>> {
        let s = self.samples(symbols)?;
        let n_tx = self.n_tx();
        let mut x = DMatrix::zeros(n_tx, self.n_subcarriers);
        for (n, &z) in s.iter().enumerate() {
            for (j, v) in self.scheme.map(z).into_iter().enumerate() {
                x[(j, n)] = v;
            }
        }
        Ok(x)
    }

    /// Bit labels of a frame, subcarrier 0 first.
    pub fn frame_bits(&self, symbols: &[usize]) -> Vec<u32> {
        symbols.iter().map(|&k| self.alphabet.label(k)).collect()
    }

    fn slice(&self, s_hat: &[Complex64]) -> Result<Vec<usize>> {
        Ok(self
            .dft
            .demodulate(s_hat)?
            .into_iter()
            .map(|z| self.alphabet.nearest(z))
            .collect())
    }
}

/// Transmit matrix of a QCM-OFDM frame carrying subcarrier values `v`.
pub fn qcm_ofdm_transmit(v: &[Complex64]) -> Result<DMatrix<f64>> {
    ofdm_transmit(OfdmScheme::Qcm, v)
}

/// Transmit matrix of a DCM-OFDM frame carrying subcarrier values `v`.
pub fn dcm_ofdm_transmit(v: &[Complex64]) -> Result<DMatrix<f64>> {
    ofdm_transmit(OfdmScheme::Dcm, v)
}

fn ofdm_transmit(scheme: OfdmScheme, v: &[Complex64]) -> Result<DMatrix<f64>> {
    let s = ofdm_modulate(v)?;
    let mut x = DMatrix::zeros(scheme.n_tx(), s.len());
    for (n, &z) in s.iter().enumerate() {
        for (j, val) in scheme.map(z).into_iter().enumerate() {
            x[(j, n)] = val;
        }
    }
    Ok(x)
}

/// Noiseless received block `aHX`.
pub fn frame_image(h: &ChannelMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != h.n_tx() {
        return Err(Error::Dimension(format!(
            "frame drives {} LEDs, channel has {}",
            x.nrows(),
            h.n_tx()
        )));
    }
    Ok(h.entries() * x * h.responsivity())
}

fn column(y: &DMatrix<f64>, n: usize) -> Vec<f64> {
    y.column(n).iter().copied().collect()
}

fn check_rx(y: &DMatrix<f64>, h: &ChannelMatrix, n: usize) -> Result<()> {
    if y.nrows() != h.n_rx() || y.ncols() != n {
        return Err(Error::Dimension(format!(
            "received block is {}×{}, expected {}×{n}",
            y.nrows(),
            y.ncols(),
            h.n_rx()
        )));
    }
    Ok(())
}

/// Matched-filter outputs `z_j = h_jᵀy / h_jᵀh_j` for every LED column.
fn matched_filter(y: &[f64], h: &ChannelMatrix) -> Result<Vec<f64>> {
    (0..h.n_tx())
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &yi) in y.iter().enumerate() {
                let g = h.gain(i, j);
                num += g * yi;
                den += g * g;
            }
            if den == 0.0 {
                return domain(format!("channel column {j} is zero"));
            }
            Ok(num / den)
        })
        .collect()
}

/// Index of the largest `|z_j|` among `candidates`; ties go to the first.
fn argmax_abs(z: &[f64], candidates: impl Iterator<Item = usize>) -> usize {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for j in candidates {
        if z[j].abs() > best.0 {
            best = (z[j].abs(), j);
        }
    }
    best.1
}

/// The two LEDs most likely active in one QCM channel use (0-based).
///
/// `i1` maximizes `|z_j|` over all LEDs and `i2` over the remaining ones;
/// in structured mode `i2` is restricted to the sign pair not containing
/// `i1`. Ties go to the lowest index.
pub fn identify_active_leds(y: &[f64], h: &ChannelMatrix, structured: bool) -> Result<(usize, usize)> {
    if h.n_tx() != 4 {
        return Err(Error::Dimension(format!("QCM needs 4 LEDs, channel has {}", h.n_tx())));
    }
    if y.len() != h.n_rx() {
        return Err(Error::Dimension(format!(
            "received vector has {} samples, channel has {} photodiodes",
            y.len(),
            h.n_rx()
        )));
    }
    let z = matched_filter(y, h)?;
    let i1 = argmax_abs(&z, 0..4);
    let i2 = if structured {
        let other = if i1 < 2 { 2..4 } else { 0..2 };
        argmax_abs(&z, other)
    } else {
        argmax_abs(&z, (0..4).filter(|&j| j != i1))
    };
    Ok((i1, i2))
}

/// Rows of `(H_Sᵀ H_S)⁻¹ H_Sᵀ / a` for a column pair, or `None` if singular.
fn pair_pinv(h: &ChannelMatrix, j1: usize, j2: usize) -> Option<[Vec<f64>; 2]> {
    let n_rx = h.n_rx();
    let dot = |p: usize, q: usize| (0..n_rx).map(|i| h.gain(i, p) * h.gain(i, q)).sum::<f64>();
    let (g11, g12, g22) = (dot(j1, j1), dot(j1, j2), dot(j2, j2));
    let det = g11 * g22 - g12 * g12;
    if !(det > 1e-12 * g11 * g22) {
        return None;
    }
    let s = 1.0 / (det * h.responsivity());
    let row = |a: f64, b: f64| -> Vec<f64> {
        (0..n_rx).map(|i| s * (a * h.gain(i, j1) + b * h.gain(i, j2))).collect()
    };
    Some([row(g22, -g12), row(-g12, g11)])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subcarrier decisions of a ZF receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZfDecision {
    /// Alphabet index per subcarrier.
    pub symbols: Vec<usize>,
    /// Channel uses whose identified LED pair could not be inverted; their
    /// sample is reconstructed as 0.
    pub erasures: usize,
}

/// Per-channel-use zero-forcing receiver for QCM-OFDM or DCM-OFDM.
#[derive(Debug, Clone)]
pub struct ZfDetector {
    config: OfdmConfig,
    h: ChannelMatrix,
    /// QCM: pseudo-inverse per unordered LED pair `(j1 < j2)`, keyed `4·j1 + j2`.
    /// DCM: the single entry `pinv[1]` of the two-column channel.
    pinv: Vec<Option<[Vec<f64>; 2]>>,
}

impl ZfDetector {
    pub fn new(config: &OfdmConfig, h: &ChannelMatrix) -> Result<Self> {
        if h.n_tx() != config.n_tx() {
            return Err(Error::Dimension(format!(
                "{} needs {} LEDs, channel has {}",
                config.scheme(),
                config.n_tx(),
                h.n_tx()
            )));
        }
        let pinv = match config.scheme() {
            OfdmScheme::Qcm => {
                for j in 0..4 {
                    if (0..h.n_rx()).all(|i| h.gain(i, j) == 0.0) {
                        return domain(format!("channel column {j} is zero"));
                    }
                }
                (0..16)
                    .map(|k| {
                        let (j1, j2) = (k / 4, k % 4);
                        if j1 < j2 {
                            pair_pinv(h, j1, j2)
                        } else {
                            None
                        }
                    })
                    .collect()
            }
            OfdmScheme::Dcm => {
                let p = pair_pinv(h, 0, 1).ok_or_else(|| {
                    Error::RankDeficient("DCM channel columns are linearly dependent".into())
                })?;
                vec![None, Some(p)]
            }
        };
        Ok(Self { config: config.clone(), h: h.clone(), pinv })
    }

    /// Time-domain estimate of one channel use and whether it was erased.
    fn equalize(&self, y: &[f64]) -> Result<(Complex64, bool)> {
        match self.config.scheme() {
            OfdmScheme::Qcm => {
                let (i1, i2) =
                    identify_active_leds(y, &self.h, self.config.structured_identification())?;
                let (j1, j2) = (i1.min(i2), i1.max(i2));
                let Some([r1, r2]) = &self.pinv[4 * j1 + j2] else {
                    return Ok((Complex64::new(0.0, 0.0), true));
                };
                // Each recovered magnitude enters with the sign its LED encodes.
                let mut s = Complex64::new(0.0, 0.0);
                for (j, u) in [(j1, dot(r1, y)), (j2, dot(r2, y))] {
                    match j {
                        0 => s.re += u.abs(),
                        1 => s.re -= u.abs(),
                        2 => s.im += u.abs(),
                        _ => s.im -= u.abs(),
                    }
                }
                Ok((s, false))
            }
            OfdmScheme::Dcm => {
                let [r1, r2] = self.pinv[1].as_ref().expect("checked at construction");
                let r = dot(r1, y).max(0.0);
                let phi = wrap_phase(dot(r2, y));
                Ok((Complex64::from_polar(r, phi), false))
            }
        }
    }

    pub fn detect(&self, y: &DMatrix<f64>) -> Result<ZfDecision> {
        let n = self.config.n_subcarriers();
        check_rx(y, &self.h, n)?;
        let mut s_hat = Vec::with_capacity(n);
        let mut erasures = 0;
        for k in 0..n {
            let (s, erased) = self.equalize(&column(y, k))?;
            erasures += erased as usize;
            s_hat.push(s);
        }
        Ok(ZfDecision { symbols: self.config.slice(&s_hat)?, erasures })
    }
}

/// One-shot QCM-OFDM ZF detection.
pub fn qcm_ofdm_zf_detect(y: &DMatrix<f64>, h: &ChannelMatrix, config: &OfdmConfig) -> Result<ZfDecision> {
    if config.scheme() != OfdmScheme::Qcm {
        return Err(Error::Incompatible("expected a QCM-OFDM frame format".into()));
    }
    ZfDetector::new(config, h)?.detect(y)
}

/// One-shot DCM-OFDM ZF detection.
pub fn dcm_ofdm_zf_detect(y: &DMatrix<f64>, h: &ChannelMatrix, config: &OfdmConfig) -> Result<ZfDecision> {
    if config.scheme() != OfdmScheme::Dcm {
        return Err(Error::Incompatible("expected a DCM-OFDM frame format".into()));
    }
    ZfDetector::new(config, h)?.detect(y)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Index of this node's sample value in its column's value table.
    value: u32,
    /// Children in the next level (or, at the last level, the candidate).
    start: u32,
    end: u32,
}

/// Exhaustive minimum-distance frame detector.
///
/// Candidate frames are indexed lexicographically by their alphabet indices
/// (subcarrier 0 most significant). Many candidates share the same sample on
/// a given channel use, so each column only has a small table of distinct
/// images. Candidates are arranged in a trie over the columns, visiting
/// columns with few distinct values first, and searched depth first with
/// the partial residual as a lower bound. The search is exact: the returned
/// frame minimizes `‖Y − aHX‖²_F` with ties resolved to the lowest index.
#[derive(Debug, Clone)]
pub struct MdDetector {
    config: OfdmConfig,
    n_rx: usize,
    /// Per column: distinct noiseless images `aHx`, flattened by `n_rx`.
    images: Vec<Vec<f64>>,
    /// Column visited at each trie level.
    order: Vec<usize>,
    levels: Vec<Vec<Node>>,
    /// Candidate index at each leaf (last level `start`).
    leaves: Vec<u32>,
    /// Per candidate and column, the value index (candidate-major).
    values: Vec<u32>,
}

/// Scratch space for [`MdDetector::detect_with`]; reuse it across frames.
#[derive(Debug, Clone, Default)]
pub struct MdScratch {
    costs: Vec<Vec<f64>>,
    children: Vec<Vec<(f64, u32)>>,
}

impl MdDetector {
    pub fn new(config: &OfdmConfig, h: &ChannelMatrix) -> Result<Self> {
        if h.n_tx() != config.n_tx() {
            return Err(Error::Dimension(format!(
                "{} needs {} LEDs, channel has {}",
                config.scheme(),
                config.n_tx(),
                h.n_tx()
            )));
        }
        let bits = config.bits_per_frame();
        if bits > MD_MAX_FRAME_BITS {
            return Err(Error::CandidateSpaceTooLarge { bits, limit: MD_MAX_FRAME_BITS });
        }
        let n = config.n_subcarriers();
        let m = config.alphabet().len();
        let n_rx = h.n_rx();
        let a = h.responsivity();
        let n_cand = 1usize << bits;

        let mut keys: Vec<HashMap<(i64, i64), u32>> = vec![HashMap::new(); n];
        let mut images: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut values = vec![0u32; n_cand * n];
        let mut symbols = vec![0usize; n];
        let key = |z: Complex64| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64);
        for c in 0..n_cand {
            let mut rest = c;
            for k in (0..n).rev() {
                symbols[k] = rest % m;
                rest /= m;
            }
            let s = config.samples(&symbols)?;
            for (col, &z) in s.iter().enumerate() {
                let next = keys[col].len() as u32;
                let id = *keys[col].entry(key(z)).or_insert(next);
                if id == next {
                    let x = config.scheme().map(z);
                    let img = h.apply(&x);
                    images[col].extend(img.iter().map(|g| a * g));
                }
                values[c * n + col] = id;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&col| (keys[col].len(), col));

        let mut sorted: Vec<u32> = (0..n_cand as u32).collect();
        sorted.sort_by(|&p, &q| {
            let (p, q) = (p as usize, q as usize);
            order
                .iter()
                .map(|&col| values[p * n + col].cmp(&values[q * n + col]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut levels: Vec<Vec<Node>> = vec![Vec::new(); n];
        let mut leaves = Vec::with_capacity(n_cand);
        for (pos, &c) in sorted.iter().enumerate() {
            let c = c as usize;
            // first level at which this candidate leaves its predecessor's path
            let split = if pos == 0 {
                0
            } else {
                let prev = sorted[pos - 1] as usize;
                order
                    .iter()
                    .position(|&col| values[c * n + col] != values[prev * n + col])
                    .unwrap_or(n)
            };
            for l in split..n {
                let value = values[c * n + order[l]];
                let start = if l + 1 < n { levels[l + 1].len() as u32 } else { leaves.len() as u32 };
                levels[l].push(Node { value, start, end: start });
                if l > 0 {
                    let parent = levels[l - 1].last_mut().expect("parent exists");
                    parent.end += 1;
                }
            }
            let leaf = levels[n - 1].last_mut().expect("leaf exists");
            leaf.end += 1;
            leaves.push(c as u32);
        }

        Ok(Self { config: config.clone(), n_rx, images, order, levels, leaves, values })
    }

    pub fn n_candidates(&self) -> usize {
        self.leaves.len()
    }

    /// Alphabet indices of candidate `c`.
    pub fn candidate_symbols(&self, c: usize) -> Vec<usize> {
        let m = self.config.alphabet().len();
        let n = self.config.n_subcarriers();
        let mut out = vec![0; n];
        let mut rest = c;
        for k in (0..n).rev() {
            out[k] = rest % m;
            rest /= m;
        }
        out
    }

    pub fn detect(&self, y: &DMatrix<f64>) -> Result<Vec<usize>> {
        self.detect_with(y, &mut MdScratch::default())
    }

    /// Minimum-distance decision for one received block.
    pub fn detect_with(&self, y: &DMatrix<f64>, scratch: &mut MdScratch) -> Result<Vec<usize>> {
        let n = self.config.n_subcarriers();
        if y.nrows() != self.n_rx || y.ncols() != n {
            return Err(Error::Dimension(format!(
                "received block is {}×{}, expected {}×{n}",
                y.nrows(),
                y.ncols(),
                self.n_rx
            )));
        }
        scratch.costs.resize(n, Vec::new());
        for (col, costs) in scratch.costs.iter_mut().enumerate() {
            costs.clear();
            costs.resize(self.images[col].len() / self.n_rx, f64::NAN);
        }
        scratch.children.resize(n, Vec::new());
        let mut search = Search {
            det: self,
            y,
            costs: &mut scratch.costs,
            best: (f64::INFINITY, u32::MAX),
        };
        let root = Node { value: 0, start: 0, end: self.levels[0].len() as u32 };
        search.descend(0, root, 0.0, &mut scratch.children);
        Ok(self.candidate_symbols(search.best.1 as usize))
    }

    /// `‖Y − aHX_c‖²_F` of candidate `c`, summed over columns in order.
    pub fn residual(&self, y: &DMatrix<f64>, c: usize) -> f64 {
        let n = self.config.n_subcarriers();
        (0..n)
            .map(|col| self.column_cost(y, col, self.values[c * n + col]))
            .sum()
    }

    fn column_cost(&self, y: &DMatrix<f64>, col: usize, value: u32) -> f64 {
        let img = &self.images[col][value as usize * self.n_rx..(value as usize + 1) * self.n_rx];
        img.iter()
            .enumerate()
            .map(|(i, g)| {
                let d = y[(i, col)] - g;
                d * d
            })
            .sum()
    }
}

struct Search<'a> {
    det: &'a MdDetector,
    y: &'a DMatrix<f64>,
    costs: &'a mut [Vec<f64>],
    best: (f64, u32),
}

impl Search<'_> {
    fn cost(&mut self, col: usize, value: u32) -> f64 {
        let cached = self.costs[col][value as usize];
        if !cached.is_nan() {
            return cached;
        }
        let c = self.det.column_cost(self.y, col, value);
        self.costs[col][value as usize] = c;
        c
    }

    /// Partial sums and the canonical total can differ by round-off, so the
    /// bound keeps a relative slack; leaves are compared exactly.
    fn pruned(&self, partial: f64) -> bool {
        partial > self.best.0 * (1.0 + 1e-9)
    }

    fn descend(&mut self, level: usize, parent: Node, partial: f64, stack: &mut [Vec<(f64, u32)>]) {
        let det = self.det;
        let col = det.order[level];
        let (mine, deeper) = stack.split_first_mut().expect("one buffer per level");
        mine.clear();
        for id in parent.start..parent.end {
            let node = det.levels[level][id as usize];
            let c = partial + self.cost(col, node.value);
            mine.push((c, id));
        }
        mine.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let last = level + 1 == det.levels.len();
        for &(c, id) in mine.iter() {
            if self.pruned(c) {
                break;
            }
            let node = det.levels[level][id as usize];
            if last {
                let cand = det.leaves[node.start as usize];
                let total = det.residual(self.y, cand as usize);
                if total < self.best.0 || (total == self.best.0 && cand < self.best.1) {
                    self.best = (total, cand);
                }
            } else {
                self.descend(level + 1, node, c, deeper);
            }
        }
    }
}

/// One-shot minimum-distance detection.
pub fn md_detect(y: &DMatrix<f64>, h: &ChannelMatrix, config: &OfdmConfig) -> Result<Vec<usize>> {
    MdDetector::new(config, h)?.detect(y)
}

/// `(1/N_r) E‖Hx‖²` over every channel use of every candidate frame.
pub fn ofdm_mean_square_received_power(h: &ChannelMatrix, config: &OfdmConfig) -> Result<f64> {
    if h.n_tx() != config.n_tx() {
        return Err(Error::Dimension(format!(
            "{} needs {} LEDs, channel has {}",
            config.scheme(),
            config.n_tx(),
            h.n_tx()
        )));
    }
    // Average over the distinct-sample multiset without storing frames.
    let n = config.n_subcarriers();
    let m = config.alphabet().len();
    let frames = m.checked_pow(n as u32).filter(|&f| f <= 1 << 24).ok_or_else(|| {
        Error::CandidateSpaceTooLarge { bits: config.bits_per_frame(), limit: 24 }
    })?;
    let mut symbols = vec![0usize; n];
    let mut sum = 0.0;
    for c in 0..frames {
        let mut rest = c;
        for k in (0..n).rev() {
            symbols[k] = rest % m;
            rest /= m;
        }
        for z in config.samples(&symbols)? {
            sum += h.apply(&config.scheme().map(z)).iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(sum / (frames * n * h.n_rx()) as f64)
}
