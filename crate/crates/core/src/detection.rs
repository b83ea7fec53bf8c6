//! Per-channel-use ML detection over `y = aHx + n`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::ChannelMatrix;
use crate::mappers::SignalSet;

/// Photodiode currents for one channel use (A).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedVector {
    pub samples: Vec<f64>,
}

impl ReceivedVector {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("received samples must be finite".into()));
        }
        Ok(Self { samples })
    }
}

/// Random stream `stream_id` of the generator family seeded by `master_seed`.
///
/// ChaCha8 with a 64-bit stream selector: the draws of a stream depend on
/// `(master_seed, stream_id)` only, never on which thread consumes them.
pub fn stream_rng(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// `y = aHx + n` with i.i.d. `n ~ N(0, σ²)` per photodiode.
pub fn awgn_channel<R: Rng + ?Sized>(
    x: &[f64],
    h: &ChannelMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<ReceivedVector> {
    h.check_tx_len(x.len())?;
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise deviation must be ≥ 0, got {sigma}")));
    }
    let a = h.responsivity();
    let mut y = h.apply(x);
    for v in &mut y {
        let n: f64 = rng.sample(StandardNormal);
        *v = a * *v + sigma * n;
    }
    Ok(ReceivedVector { samples: y })
}

/// Exhaustive ML detector with the noiseless images `aHx` precomputed.
#[derive(Debug, Clone)]
pub struct MlDetector {
    n_rx: usize,
    images: Vec<f64>,
    labels: Vec<u32>,
}

impl MlDetector {
    pub fn new(h: &ChannelMatrix, set: &SignalSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Empty("signal set".into()));
        }
        h.check_tx_len(set.n_tx())?;
        let n_rx = h.n_rx();
        let a = h.responsivity();
        let mut images = vec![0.0; n_rx * set.len()];
        for (img, v) in images.chunks_exact_mut(n_rx).zip(set.vectors()) {
            h.apply_into(&v.intensities, img);
            img.iter_mut().for_each(|g| *g *= a);
        }
        Ok(Self {
            n_rx,
            images,
            labels: set.vectors().iter().map(|v| v.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.n_rx..(i + 1) * self.n_rx]
    }

    /// Index of `argmin ‖y − aHx‖²`; ties resolve to the lowest index.
    #[inline]
    pub fn detect_index(&self, y: &[f64]) -> usize {
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        for (i, img) in self.images.chunks_exact(self.n_rx).enumerate() {
            let d: f64 = img.iter().zip(y).map(|(g, v)| (v - g) * (v - g)).sum();
            if d < best {
                best = d;
                best_i = i;
            }
        }
        best_i
    }

    /// Detected vector index and its bit label.
    pub fn detect(&self, y: &ReceivedVector) -> Result<(usize, u32)> {
        if y.samples.len() != self.n_rx {
            return Err(Error::Dimension(format!(
                "received vector has {} samples, channel has {} photodiodes",
                y.samples.len(),
                self.n_rx
            )));
        }
        let i = self.detect_index(&y.samples);
        Ok((i, self.labels[i]))
    }
}

/// One-shot ML detection; see [`MlDetector`] for repeated use.
pub fn ml_detect(y: &ReceivedVector, h: &ChannelMatrix, set: &SignalSet) -> Result<(usize, u32)> {
    MlDetector::new(h, set)?.detect(y)
}
