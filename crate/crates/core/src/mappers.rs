//! Complex alphabets and their mapping onto nonnegative LED intensities.
//!
//! * QCM: four LEDs carry `|Re s|` and `|Im s|`; the sign picks which LED
//!   of each pair lights up.
//! * QCM-PR: QCM applied to `e^{jθ} s`.
//! * DCM: two LEDs carry the magnitude `|s|` and the phase `arg s ∈ [0, 2π)`.
//! * SM-DCM: one index bit selects which of two DCM LED pairs is used.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphabetKind {
    Bpsk,
    Psk,
    Qam,
}

/// Constellation points with a bijective bit labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexAlphabet {
    kind: AlphabetKind,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    bits: u32,
}

#[inline]
fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn log2_exact(m: usize) -> Option<u32> {
    (m >= 2 && m.is_power_of_two()).then(|| m.trailing_zeros())
}

/// Square QAM on the odd-integer grid, Gray labeled per axis.
fn square_qam(side: usize) -> (Vec<Complex64>, Vec<u32>) {
    let b = side.trailing_zeros();
    let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
    let mut points = Vec::with_capacity(side * side);
    let mut labels = Vec::with_capacity(side * side);
    for i in 0..side {
        for q in 0..side {
            points.push(Complex64::new(level(i), level(q)));
            labels.push((gray(i as u32) << b) | gray(q as u32));
        }
    }
    (points, labels)
}

/// 32-point cross: the 8×4 Gray-labeled rectangle with its outer columns
/// `|I| = 7` folded onto the rows `|Q| = 5`.
fn cross_qam32() -> (Vec<Complex64>, Vec<u32>) {
    let mut points = Vec::with_capacity(32);
    let mut labels = Vec::with_capacity(32);
    for i in 0..8u32 {
        for q in 0..4u32 {
            let re = 2.0 * i as f64 - 7.0;
            let im = 2.0 * q as f64 - 3.0;
            let p = if re.abs() == 7.0 {
                Complex64::new(re.signum() * (4.0 - im.abs()), im.signum() * 5.0)
            } else {
                Complex64::new(re, im)
            };
            points.push(p);
            labels.push((gray(i) << 2) | gray(q));
        }
    }
    (points, labels)
}

/// Builds BPSK, M-PSK or M-QAM (square, 8-point rectangular, 32-point cross).
///
/// QAM points lie on the unnormalized odd-integer grid. `Qam` with `M = 2`
/// yields BPSK.
pub fn make_alphabet(kind: AlphabetKind, m: usize) -> Result<ComplexAlphabet> {
    let Some(bits) = log2_exact(m) else {
        return domain(format!("alphabet size must be a power of two ≥ 2, got {m}"));
    };
    let (kind, points, labels) = match (kind, m) {
        (AlphabetKind::Bpsk, 2) | (AlphabetKind::Qam, 2) => (
            AlphabetKind::Bpsk,
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            vec![0, 1],
        ),
        (AlphabetKind::Bpsk, _) => return domain(format!("BPSK has 2 points, not {m}")),
        (AlphabetKind::Psk, _) => {
            let points = (0..m)
                .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / m as f64))
                .collect();
            let labels = (0..m as u32).map(gray).collect();
            (AlphabetKind::Psk, points, labels)
        }
        (AlphabetKind::Qam, 8) => {
            let mut points = Vec::with_capacity(8);
            let mut labels = Vec::with_capacity(8);
            for i in 0..4u32 {
                for q in 0..2u32 {
                    points.push(Complex64::new(2.0 * i as f64 - 3.0, 2.0 * q as f64 - 1.0));
                    labels.push((gray(i) << 1) | q);
                }
            }
            (AlphabetKind::Qam, points, labels)
        }
        (AlphabetKind::Qam, 32) => {
            let (p, l) = cross_qam32();
            (AlphabetKind::Qam, p, l)
        }
        (AlphabetKind::Qam, _) if bits % 2 == 0 => {
            let (p, l) = square_qam(1 << (bits / 2));
            (AlphabetKind::Qam, p, l)
        }
        (AlphabetKind::Qam, _) => return domain(format!("unsupported QAM size {m}")),
    };
    Ok(ComplexAlphabet {
        kind,
        points,
        labels,
        bits,
    })
}

impl ComplexAlphabet {
    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> Complex64 {
        self.points[i]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Index of the point closest to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Short name used in config files and output file names.
    pub fn name(&self) -> String {
        match self.kind {
            AlphabetKind::Bpsk => "bpsk".into(),
            AlphabetKind::Psk => format!("psk-{}", self.len()),
            AlphabetKind::Qam => format!("qam-{}", self.len()),
        }
    }
}

impl FromStr for ComplexAlphabet {
    type Err = Error;

    /// Parses `bpsk`, `psk-M` or `qam-M`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "bpsk" {
            return make_alphabet(AlphabetKind::Bpsk, 2);
        }
        let (kind, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Domain(format!("unknown modulation '{s}'")))?;
        let m: usize = m
            .parse()
            .map_err(|_| Error::Domain(format!("bad alphabet size in '{s}'")))?;
        match kind {
            "psk" => make_alphabet(AlphabetKind::Psk, m),
            "qam" => make_alphabet(AlphabetKind::Qam, m),
            _ => domain(format!("unknown modulation '{s}'")),
        }
    }
}

/// QCM mapping of one complex symbol onto four LED intensities.
pub fn qcm_map(s: Complex64) -> [f64; 4] {
    let split = |v: f64| if v >= 0.0 { (v, 0.0) } else { (0.0, -v) };
    let (x1, x2) = split(s.re);
    let (x3, x4) = split(s.im);
    [x1, x2, x3, x4]
}

/// QCM of the rotated symbol `e^{jθ} s`.
///
/// Rotation round-off below `1e-12 |s|` is flushed to zero so that exactly
/// axis-aligned results keep a single active LED.
pub fn qcm_pr_map(s: Complex64, theta_rad: f64) -> [f64; 4] {
    let r = s * Complex64::from_polar(1.0, theta_rad);
    let tol = 1e-12 * s.norm();
    let snap = |v: f64| if v.abs() <= tol { 0.0 } else { v };
    qcm_map(Complex64::new(snap(r.re), snap(r.im)))
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// DCM mapping `[|s|, arg s]` with the phase in `[0, 2π)`.
pub fn dcm_map(s: Complex64) -> [f64; 2] {
    [s.norm(), wrap_phase(s.arg())]
}

/// SM-DCM mapping: index bit 0 drives BLOCK 1 (positions 1, 2), index bit 1
/// drives BLOCK 2 (positions 3, 4).
pub fn smdcm_map(s: Complex64, index_bit: bool) -> [f64; 4] {
    let [r, phi] = dcm_map(s);
    if index_bit {
        [0.0, 0.0, r, phi]
    } else {
        [r, phi, 0.0, 0.0]
    }
}

/// Inverse of [`qcm_map`].
pub fn qcm_unmap(x: &[f64]) -> Complex64 {
    Complex64::new(x[0] - x[1], x[2] - x[3])
}

/// Inverse of [`dcm_map`].
pub fn dcm_unmap(x: &[f64]) -> Complex64 {
    Complex64::from_polar(x[0], x[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Qcm,
    QcmPr { theta_rad: f64 },
    Dcm,
    SmDcm,
}

impl Scheme {
    pub fn n_tx(&self) -> usize {
        match self {
            Scheme::Dcm => 2,
            _ => 4,
        }
    }

    /// Bits carried by the LED index on top of the symbol bits.
    pub fn index_bits(&self) -> u32 {
        match self {
            Scheme::SmDcm => 1,
            _ => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Qcm => "qcm",
            Scheme::QcmPr { .. } => "qcm-pr",
            Scheme::Dcm => "dcm",
            Scheme::SmDcm => "sm-dcm",
        }
    }

    /// Intensity vector for symbol `s` and index bits `index`.
    pub fn map(&self, s: Complex64, index: u32) -> Vec<f64> {
        match *self {
            Scheme::Qcm => qcm_map(s).to_vec(),
            Scheme::QcmPr { theta_rad } => qcm_pr_map(s, theta_rad).to_vec(),
            Scheme::Dcm => dcm_map(s).to_vec(),
            Scheme::SmDcm => smdcm_map(s, index & 1 == 1).to_vec(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitVector {
    pub intensities: Vec<f64>,
    /// Bit label, most significant bit first, `bits_per_use` wide.
    pub label: u32,
}

/// Every transmit vector a scheme can emit, with its bit label.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    scheme: Scheme,
    vectors: Vec<TransmitVector>,
    bits_per_use: u32,
    n_tx: usize,
}

impl SignalSet {
    /// Enumerates one vector per symbol (and per index bit for SM-DCM).
    ///
    /// Vector order is index-bit major, then alphabet order. Labels are
    /// `[index bits ‖ symbol bits]`.
    pub fn enumerate(scheme: Scheme, alphabet: &ComplexAlphabet) -> Result<Self> {
        let ib = scheme.index_bits();
        let sb = alphabet.bits_per_symbol();
        let mut vectors = Vec::with_capacity(alphabet.len() << ib);
        for index in 0..(1u32 << ib) {
            for (s, &lab) in alphabet.points().iter().zip(alphabet.labels()) {
                vectors.push(TransmitVector {
                    intensities: scheme.map(*s, index),
                    label: (index << sb) | lab,
                });
            }
        }
        Ok(Self {
            scheme,
            vectors,
            bits_per_use: ib + sb,
            n_tx: scheme.n_tx(),
        })
    }

    /// Builds a set from raw intensity vectors labeled `0, 1, 2, …`.
    pub fn from_vectors(scheme: Scheme, vectors: Vec<Vec<f64>>, bits_per_use: u32) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Empty("signal set".into()));
        }
        if vectors.len() != 1usize << bits_per_use {
            return domain(format!(
                "{} vectors cannot carry {bits_per_use} bits",
                vectors.len()
            ));
        }
        let n_tx = vectors[0].len();
        if vectors.iter().any(|v| v.len() != n_tx) {
            return Err(Error::Dimension("transmit vectors differ in length".into()));
        }
        if vectors.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return domain("intensities must be finite and nonnegative");
        }
        Ok(Self {
            scheme,
            vectors: vectors
                .into_iter()
                .enumerate()
                .map(|(i, intensities)| TransmitVector {
                    intensities,
                    label: i as u32,
                })
                .collect(),
            bits_per_use,
            n_tx,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn vectors(&self) -> &[TransmitVector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &TransmitVector {
        &self.vectors[i]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Rate η in bits per channel use.
    pub fn bits_per_use(&self) -> u32 {
        self.bits_per_use
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn label(&self, i: usize) -> u32 {
        self.vectors[i].label
    }

    /// Bit label of vector `i`, most significant bit first.
    pub fn demap(&self, i: usize) -> Result<Vec<u8>> {
        let v = self.vectors.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })?;
        Ok((0..self.bits_per_use)
            .rev()
            .map(|b| ((v.label >> b) & 1) as u8)
            .collect())
    }

    /// Largest intensity any LED emits over the set.
    pub fn peak_intensity(&self) -> f64 {
        self.vectors
            .iter()
            .flat_map(|v| v.intensities.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Copy with every intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            for x in &mut v.intensities {
                *x *= factor;
            }
        }
        out
    }

    /// Copy whose `i`-th vector is `self.vector(order[i])`; every vector
    /// keeps its bit label.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() || !order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true)) {
            return domain("order must be a permutation of the vector indices");
        }
        let mut out = self.clone();
        out.vectors = order.iter().map(|&i| self.vectors[i].clone()).collect();
        Ok(out)
    }

    /// Copy scaled so that the brightest LED level equals `peak`.
    pub fn with_peak(&self, peak: f64) -> Self {
        let p = self.peak_intensity();
        if p > 0.0 {
            self.scaled(peak / p)
        } else {
            self.clone()
        }
    }
}

/// Hamming distance between two labels.
#[inline]
pub fn hamming(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}
