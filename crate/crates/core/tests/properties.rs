//! Property suites over randomly drawn inputs.
//!
//! Every property is a plain function taking the number of cases so other
//! test targets can run the same suites; the `#[test]` wrappers below use
//! [`CASES`] each.

#![allow(dead_code)]

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Rotation3, Unit};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use vlcmod::analysis::{
    coverage_percentage, dmin_davg, pep, sigma_for_eb_n0, union_bound_ber, union_bound_ber_raw, RateMap,
};
use vlcmod::detection::{ml_detect, ReceivedVector};
use vlcmod::geometry::{
    average_received_snr, build_channel_matrix, detector_array, generate_placement, los_gain, ChannelMatrix,
    Detector, Luminaire, NoiseModel, PlacementKind, RoomConfig, TransceiverLayout, Vec3,
};
use vlcmod::link::LinkConfig;
use vlcmod::mappers::{
    dcm_map, dcm_unmap, make_alphabet, qcm_map, qcm_pr_map, qcm_unmap, smdcm_map, AlphabetKind, ComplexAlphabet,
    Scheme, SignalSet,
};
use vlcmod::montecarlo::{simulate_ber, Modulation, SimSpec, StopRule};
use vlcmod::ofdm::{
    frame_image, identify_active_leds, ofdm_demodulate, ofdm_modulate, MdDetector, OfdmConfig, OfdmScheme,
    ZfDetector,
};

pub const CASES: u32 = 10_000;

pub type Property = fn(u32) -> Result<(), String>;

/// Every suite, by name.
pub const PROPERTIES: &[(&str, Property)] = &[
    ("los_gain_nonnegative", los_gain_nonnegative),
    ("los_gain_decreases_with_distance", los_gain_decreases_with_distance),
    ("los_gain_rotation_invariant", los_gain_rotation_invariant),
    ("channel_mirror_permutes_entries", channel_mirror_permutes_entries),
    ("noise_variance_affine", noise_variance_affine),
    ("snr_scales_inversely_with_noise", snr_scales_inversely_with_noise),
    ("qcm_round_trip", qcm_round_trip),
    ("dcm_round_trip", dcm_round_trip),
    ("smdcm_single_block", smdcm_single_block),
    ("signal_set_structure", signal_set_structure),
    ("qcm_pr_quarter_turn_symmetry", qcm_pr_quarter_turn_symmetry),
    ("ml_detect_matches_oracle", ml_detect_matches_oracle),
    ("ml_detect_scale_invariant", ml_detect_scale_invariant),
    ("pep_symmetric", pep_symmetric),
    ("union_bound_monotone", union_bound_monotone),
    ("union_bound_relabel_invariant", union_bound_relabel_invariant),
    ("davg_at_least_dmin", davg_at_least_dmin),
    ("coverage_non_increasing", coverage_non_increasing),
    ("dft_round_trip", dft_round_trip),
    ("zf_inverts_noiseless_frames", zf_inverts_noiseless_frames),
    ("md_optimality_certificate", md_optimality_certificate),
    ("qcm_ofdm_identifies_active_pair", qcm_ofdm_identifies_active_pair),
    ("ber_counts_consistent", ber_counts_consistent),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 256,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

fn lib<T>(r: vlcmod::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| fail(e.to_string()))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn unit_vector() -> impl Strategy<Value = Vec3> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()))
}

fn point(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn complex(range: f64) -> impl Strategy<Value = Complex64> {
    (-range..range, -range..range).prop_map(|(re, im)| Complex64::new(re, im))
}

fn alphabet(kinds: &'static [(AlphabetKind, usize)]) -> impl Strategy<Value = ComplexAlphabet> {
    prop::sample::select(kinds).prop_map(|(k, m)| make_alphabet(k, m).unwrap())
}

const ALL_ALPHABETS: &[(AlphabetKind, usize)] = &[
    (AlphabetKind::Bpsk, 2),
    (AlphabetKind::Psk, 4),
    (AlphabetKind::Psk, 8),
    (AlphabetKind::Qam, 4),
    (AlphabetKind::Qam, 8),
    (AlphabetKind::Qam, 16),
    (AlphabetKind::Qam, 32),
    (AlphabetKind::Qam, 64),
];

const SMALL_QAM: &[(AlphabetKind, usize)] = &[(AlphabetKind::Qam, 4), (AlphabetKind::Qam, 8), (AlphabetKind::Qam, 16)];

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::Qcm),
        (0.0..2.0 * PI).prop_map(|t| Scheme::QcmPr { theta_rad: t }),
        Just(Scheme::Dcm),
        Just(Scheme::SmDcm),
    ]
}

/// Nonnegative channel with `n_rx` rows and `n_tx` columns.
fn channel(n_rx: usize, n_tx: usize) -> impl Strategy<Value = ChannelMatrix> {
    (prop::collection::vec(0.0..1e-5f64, n_rx * n_tx), 0.1..2.0f64)
        .prop_map(move |(g, a)| ChannelMatrix::new(DMatrix::from_vec(n_rx, n_tx, g), a).unwrap())
}

// ---------------------------------------------------------------- geometry

pub fn los_gain_nonnegative(cases: u32) -> Result<(), String> {
    check(cases, (point(5.0), unit_vector(), point(5.0), unit_vector(), 1.0..89.0f64, 1.0..90.0f64), |(lp, ln, pp, pn, phi, fov)| {
        prop_assume!((pp - lp).norm() > 1e-6);
        let led = lib(Luminaire::new(lp, ln, phi))?;
        let pd = lib(Detector::new(pp, pn, 1e-4, fov, 1.0))?;
        let g = lib(los_gain(&led, &pd))?;
        prop_assert!(g >= 0.0 && g.is_finite(), "gain {g}");
        Ok(())
    })
}

pub fn los_gain_decreases_with_distance(cases: u32) -> Result<(), String> {
    let s = (point(3.0), unit_vector(), unit_vector(), unit_vector(), 0.1..3.0f64, 1.01..3.0f64, 5.0..85.0f64);
    check(cases, s, |(lp, ln, pn, dir, r1, k, phi)| {
        let led = lib(Luminaire::new(lp, ln, phi))?;
        let at = |r: f64| lib(Detector::new(lp + dir * r, pn, 1e-4, 90.0, 1.0));
        let (g1, g2) = (lib(los_gain(&led, &at(r1)?))?, lib(los_gain(&led, &at(r1 * k)?))?);
        if g1 > 0.0 {
            prop_assert!(g2 < g1, "gain grew from {g1} at {r1} to {g2} at {}", r1 * k);
        } else {
            prop_assert_eq!(g2, 0.0);
        }
        Ok(())
    })
}

pub fn los_gain_rotation_invariant(cases: u32) -> Result<(), String> {
    let s = (point(3.0), point(3.0), unit_vector(), unit_vector(), unit_vector(), 0.0..2.0 * PI, 5.0..85.0f64);
    check(cases, s, |(lp, pp, ln, pn, axis, angle, phi)| {
        prop_assume!((pp - lp).norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let gain = |lp: Vec3, ln: Vec3, pp: Vec3, pn: Vec3| -> Result<f64, TestCaseError> {
            let led = lib(Luminaire::new(lp, ln.normalize(), phi))?;
            let pd = lib(Detector::new(pp, pn.normalize(), 1e-4, 90.0, 1.0))?;
            lib(los_gain(&led, &pd))
        };
        let g = gain(lp, ln, pp, pn)?;
        let gr = gain(rot * lp, rot * ln, rot * pp, rot * pn)?;
        // Geometries that sit on the edge of the radiation or acceptance
        // cone may legitimately flip to zero under round-off.
        let led_cos = (pp - lp).normalize().dot(&ln);
        let pd_cos = (lp - pp).normalize().dot(&pn);
        prop_assume!(led_cos.abs() > 1e-9 && pd_cos.abs() > 1e-9);
        prop_assert!(rel_close(g, gr, 1e-9) || (g < 1e-25 && gr < 1e-25), "{g} vs {gr}");
        Ok(())
    })
}

pub fn channel_mirror_permutes_entries(cases: u32) -> Result<(), String> {
    let room = RoomConfig::default();
    // Mirroring about x = 2.5 swaps west and east:
    // LEDs (NW, SE, NE, SW) → (NE, SW, NW, SE), PDs (NW, NE, SW, SE) → (NE, NW, SE, SW).
    let led_perm = [2, 3, 0, 1];
    let pd_perm = [1, 0, 3, 2];
    let s = (0.2..2.0f64, 1.5..3.5f64, 1.5..3.5f64, 0.3..4.7f64, 0.3..4.7f64);
    check(cases, s, |(d_tx, tx, ty, rx, ry)| {
        let layout = |tx: f64, rx: f64| -> Result<ChannelMatrix, TestCaseError> {
            let leds = lib(generate_placement(PlacementKind::QcmGrid, d_tx, (tx, ty), 3.0, &room))?;
            let pds = detector_array((rx, ry), 0.1, 0.8);
            let layout = lib(TransceiverLayout::new(
                room,
                leds.into_iter().map(Luminaire::downward).collect(),
                pds.into_iter().map(Detector::upward).collect(),
                d_tx,
                0.1,
            ))?;
            lib(build_channel_matrix(&layout))
        };
        let h = layout(tx, rx)?;
        let m = layout(5.0 - tx, 5.0 - rx)?;
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (m.gain(i, j), h.gain(pd_perm[i], led_perm[j]));
                prop_assert!(rel_close(a, b, 1e-9), "H'[{i}][{j}] = {a}, permuted H = {b}");
            }
        }
        Ok(())
    })
}

pub fn noise_variance_affine(cases: u32) -> Result<(), String> {
    let s = (
        (1e-20..1e-18f64, 1e-4..1e-1f64, 0.1..1.0f64, 1e-9..1e-6f64, 1e6..1e9f64, 1e-13..1e-11f64),
        0.1..2.0f64,
        prop::collection::vec(0.0..10.0f64, 3),
    );
    check(cases, s, |((q, ia, i2, t, ba, rho), a, p)| {
        let nm = NoiseModel {
            q,
            ambient_current_ia: ia,
            noise_bw_factor_i2: i2,
            symbol_interval_t: t,
            amp_bandwidth_ba: ba,
            amp_noise_density_rho: rho,
        };
        let slope = 2.0 * q * a * i2 / t;
        let at = |x: f64| nm.noise_variance(x, a);
        prop_assert!(rel_close(at(p[0]) + slope * (p[1] - p[0]), at(p[1]), 1e-12));
        // three points are collinear
        let lhs = (at(p[1]) - at(p[0])) * (p[2] - p[0]);
        let rhs = (at(p[2]) - at(p[0])) * (p[1] - p[0]);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * at(10.0) * 10.0);
        Ok(())
    })
}

pub fn snr_scales_inversely_with_noise(cases: u32) -> Result<(), String> {
    let s = (scheme(), alphabet(SMALL_QAM), 1e-12..1e-6f64, 1.5..1e3f64);
    check(cases, s, |(scheme, alph, sigma2, k)| {
        let set = lib(SignalSet::enumerate(scheme, &alph))?;
        let h = lib(LinkConfig::default().channel(scheme))?;
        let g1 = lib(average_received_snr(&h, &set, sigma2))?;
        let gk = lib(average_received_snr(&h, &set, sigma2 * k))?;
        prop_assert!(rel_close(g1, gk * k, 1e-12), "{g1} vs {}", gk * k);
        Ok(())
    })
}

// ----------------------------------------------------------------- mappers

pub fn qcm_round_trip(cases: u32) -> Result<(), String> {
    check(cases, complex(1e3), |s| {
        let x = qcm_map(s);
        prop_assert_eq!(qcm_unmap(&x), s);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!(x[0] == 0.0 || x[1] == 0.0);
        prop_assert!(x[2] == 0.0 || x[3] == 0.0);
        Ok(())
    })
}

pub fn dcm_round_trip(cases: u32) -> Result<(), String> {
    check(cases, complex(1e3), |s| {
        let x = dcm_map(s);
        prop_assert!(x[0] >= 0.0 && (0.0..2.0 * PI).contains(&x[1]));
        prop_assert!((dcm_unmap(&x) - s).norm() <= 1e-12 * s.norm().max(1.0));
        Ok(())
    })
}

pub fn smdcm_single_block(cases: u32) -> Result<(), String> {
    check(cases, (complex(1e3), any::<bool>()), |(s, bit)| {
        let x = smdcm_map(s, bit);
        let (on, off) = if bit { (&x[2..], &x[..2]) } else { (&x[..2], &x[2..]) };
        prop_assert_eq!(off, &[0.0, 0.0][..]);
        prop_assert_eq!(on, &dcm_map(s)[..]);
        Ok(())
    })
}

pub fn signal_set_structure(cases: u32) -> Result<(), String> {
    check(cases, (scheme(), alphabet(ALL_ALPHABETS)), |(scheme, alph)| {
        let set = lib(SignalSet::enumerate(scheme, &alph))?;
        let eta = alph.bits_per_symbol() + scheme.index_bits();
        prop_assert_eq!(set.bits_per_use(), eta);
        prop_assert_eq!(set.len(), 1usize << eta);
        let labels: HashSet<u32> = set.vectors().iter().map(|v| v.label).collect();
        prop_assert_eq!(labels.len(), set.len());
        prop_assert!(labels.iter().all(|&l| l < (1 << eta)));
        for (i, v) in set.vectors().iter().enumerate() {
            prop_assert_eq!(v.intensities.len(), scheme.n_tx());
            prop_assert!(v.intensities.iter().all(|&x| x >= 0.0 && x.is_finite()));
            prop_assert_eq!(lib(set.demap(i))?.len(), eta as usize);
            let nz = |r: std::ops::Range<usize>| v.intensities[r].iter().filter(|&&x| x != 0.0).count();
            match scheme {
                Scheme::Qcm if alph.kind() == AlphabetKind::Qam => {
                    prop_assert!(nz(0..2) == 1 && nz(2..4) == 1)
                }
                Scheme::Qcm | Scheme::QcmPr { .. } => prop_assert!(nz(0..2) <= 1 && nz(2..4) <= 1),
                Scheme::SmDcm => prop_assert!(nz(0..2) == 0 || nz(2..4) == 0),
                Scheme::Dcm => {}
            }
        }
        Ok(())
    })
}

fn sorted_vectors(set: &SignalSet) -> Vec<Vec<f64>> {
    let mut v: Vec<Vec<f64>> = set.vectors().iter().map(|t| t.intensities.clone()).collect();
    v.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    v
}

pub fn qcm_pr_quarter_turn_symmetry(cases: u32) -> Result<(), String> {
    const SQUARE: &[(AlphabetKind, usize)] = &[(AlphabetKind::Qam, 4), (AlphabetKind::Qam, 16), (AlphabetKind::Qam, 64)];
    check(cases, (alphabet(SQUARE), 0.0..2.0 * PI), |(alph, theta)| {
        let vecs = |t: f64| -> Result<Vec<Vec<f64>>, TestCaseError> {
            Ok(sorted_vectors(&lib(SignalSet::enumerate(Scheme::QcmPr { theta_rad: t }, &alph))?))
        };
        let (a, b) = (vecs(theta)?, vecs(theta + PI / 2.0)?);
        // Sorting can interleave entries that differ only by round-off, so
        // match greedily with a tolerance instead of comparing in order.
        let mut used = vec![false; b.len()];
        for x in &a {
            let hit = b.iter().enumerate().position(|(k, y)| {
                !used[k] && x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs()))
            });
            match hit {
                Some(k) => used[k] = true,
                None => return Err(fail(format!("vector {x:?} at θ has no partner at θ + 90°"))),
            }
        }
        let _ = qcm_pr_map(Complex64::new(1.0, 1.0), theta);
        Ok(())
    })
}

// --------------------------------------------------------------- detection

fn brute_force(y: &[f64], h: &ChannelMatrix, set: &SignalSet) -> usize {
    let a = h.responsivity();
    let mut best = (f64::INFINITY, 0);
    for (i, v) in set.vectors().iter().enumerate() {
        let mut d = 0.0;
        for (r, yr) in y.iter().enumerate() {
            let img: f64 = (0..h.n_tx()).map(|j| h.gain(r, j) * v.intensities[j]).sum::<f64>() * a;
            d += (yr - img) * (yr - img);
        }
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn set_and_channel() -> impl Strategy<Value = (SignalSet, ChannelMatrix)> {
    (scheme(), alphabet(SMALL_QAM)).prop_flat_map(|(scheme, alph)| {
        let set = SignalSet::enumerate(scheme, &alph).unwrap();
        let n_tx = set.n_tx();
        (Just(set), (1usize..=4).prop_flat_map(move |n_rx| channel(n_rx, n_tx)))
    })
}

pub fn ml_detect_matches_oracle(cases: u32) -> Result<(), String> {
    let s = set_and_channel().prop_flat_map(|(set, h)| {
        let n = h.n_rx();
        (Just(set), Just(h), prop::collection::vec(-1e-4..1e-4f64, n))
    });
    check(cases, s, |(set, h, y)| {
        let (i, label) = lib(ml_detect(&lib(ReceivedVector::new(y.clone()))?, &h, &set))?;
        prop_assert_eq!(i, brute_force(&y, &h, &set));
        prop_assert_eq!(label, set.label(i));
        Ok(())
    })
}

pub fn ml_detect_scale_invariant(cases: u32) -> Result<(), String> {
    let s = set_and_channel().prop_flat_map(|(set, h)| {
        let n = h.n_rx();
        (Just(set), Just(h), prop::collection::vec(-1e-4..1e-4f64, n), prop::sample::select(&[0.25, 0.5, 2.0, 4.0, 8.0][..]))
    });
    check(cases, s, |(set, h, y, k)| {
        // Powers of two scale without rounding, so ties are preserved.
        let hk = lib(ChannelMatrix::new(h.entries().clone(), h.responsivity() * k))?;
        let yk: Vec<f64> = y.iter().map(|v| v * k).collect();
        let i = lib(ml_detect(&lib(ReceivedVector::new(y))?, &h, &set))?;
        let ik = lib(ml_detect(&lib(ReceivedVector::new(yk))?, &hk, &set))?;
        prop_assert_eq!(i, ik);
        Ok(())
    })
}

// ---------------------------------------------------------------- analysis

pub fn pep_symmetric(cases: u32) -> Result<(), String> {
    let s = (1usize..=4, 2usize..=4).prop_flat_map(|(n_rx, n_tx)| {
        (
            prop::collection::vec(0.0..10.0f64, n_tx),
            prop::collection::vec(0.0..10.0f64, n_tx),
            channel(n_rx, n_tx),
            1e-9..1e-4f64,
        )
    });
    check(cases, s, |(x1, x2, h, sigma)| {
        let (p12, p21) = (lib(pep(&x1, &x2, &h, sigma))?, lib(pep(&x2, &x1, &h, sigma))?);
        prop_assert_eq!(p12, p21);
        prop_assert!(p12 > 0.0 || x1 != x2);
        prop_assert!(p12 <= 0.5);
        Ok(())
    })
}

pub fn union_bound_monotone(cases: u32) -> Result<(), String> {
    let s = (scheme(), alphabet(SMALL_QAM), 0.0..45.0f64, 0.01..5.0f64);
    check(cases, s, |(scheme, alph, db, step)| {
        let set = lib(SignalSet::enumerate(scheme, &alph))?;
        let h = lib(LinkConfig::default().channel(scheme))?;
        let lo = lib(union_bound_ber_raw(&set, &h, lib(sigma_for_eb_n0(&h, &set, db))?))?;
        let hi = lib(union_bound_ber_raw(&set, &h, lib(sigma_for_eb_n0(&h, &set, db + step))?))?;
        // Q(x) underflows to 0 beyond x ≈ 38; strictness is only observable
        // while the larger value is still a normal float.
        if lo > 1e-290 {
            prop_assert!(hi < lo, "bound did not decrease: {lo} at {db} dB, {hi} at {} dB", db + step);
        } else {
            prop_assert!(hi <= lo);
        }
        let clamped = lib(union_bound_ber(&set, &h, lib(sigma_for_eb_n0(&h, &set, db))?))?;
        prop_assert!((0.0..=0.5).contains(&clamped));
        Ok(())
    })
}

pub fn union_bound_relabel_invariant(cases: u32) -> Result<(), String> {
    let s = (scheme(), alphabet(SMALL_QAM)).prop_flat_map(|(scheme, alph)| {
        let set = SignalSet::enumerate(scheme, &alph).unwrap();
        let order: Vec<usize> = (0..set.len()).collect();
        (Just(set), Just(order).prop_shuffle(), 10.0..50.0f64)
    });
    check(cases, s, |(set, order, db)| {
        let h = lib(LinkConfig::default().channel(set.scheme()))?;
        let sigma = lib(sigma_for_eb_n0(&h, &set, db))?;
        let shuffled = lib(set.permuted(&order))?;
        let (a, b) = (lib(union_bound_ber_raw(&set, &h, sigma))?, lib(union_bound_ber_raw(&shuffled, &h, sigma))?);
        prop_assert!(rel_close(a, b, 1e-12), "{a} vs {b}");
        Ok(())
    })
}

pub fn davg_at_least_dmin(cases: u32) -> Result<(), String> {
    let s = (1u32..=3, 2usize..=4, 1usize..=4).prop_flat_map(|(bits, n_tx, n_rx)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..4.0f64, n_tx), 1usize << bits),
            Just(bits),
            channel(n_rx, n_tx),
        )
    });
    check(cases, s, |(vectors, bits, h)| {
        let set = lib(SignalSet::from_vectors(Scheme::Qcm, vectors, bits))?;
        let (dmin, davg) = lib(dmin_davg(&set, &h))?;
        prop_assert!(davg >= dmin * (1.0 - 1e-12), "d_avg {davg} < d_min {dmin}");
        let mut d = Vec::new();
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                let diff: Vec<f64> = set.vector(i).intensities.iter().zip(&set.vector(j).intensities).map(|(a, b)| a - b).collect();
                d.push(h.apply(&diff).iter().map(|v| v * v).sum::<f64>());
            }
        }
        let all_equal = d.iter().all(|&x| rel_close(x, d[0], 1e-9));
        if all_equal {
            prop_assert!(rel_close(davg, dmin, 1e-9));
        } else {
            prop_assert!(davg > dmin);
        }
        Ok(())
    })
}

pub fn coverage_non_increasing(cases: u32) -> Result<(), String> {
    let s = prop::collection::vec(prop::option::weighted(0.9, 0u32..=7), 1..200);
    check(cases, s, |rates| {
        let n = rates.len();
        let map = RateMap {
            xs: (0..n).map(|i| i as f64).collect(),
            ys: vec![0.0],
            gamma_db: rates.iter().map(|r| r.map(f64::from)).collect(),
            rate_bpcu: rates,
        };
        let cov: Vec<f64> = (0..=8).map(|eta| coverage_percentage(&map, eta)).collect();
        prop_assert!(cov.windows(2).all(|w| w[1] <= w[0]), "{cov:?}");
        prop_assert!(cov.iter().all(|c| (0.0..=100.0).contains(c)));
        Ok(())
    })
}

// -------------------------------------------------------------------- ofdm

pub fn dft_round_trip(cases: u32) -> Result<(), String> {
    let s = (0u32..=6).prop_flat_map(|k| prop::collection::vec(complex(10.0), 1usize << k));
    check(cases, s, |v| {
        let s = lib(ofdm_modulate(&v))?;
        let back = lib(ofdm_demodulate(&s))?;
        let scale = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(v.iter().zip(&back).all(|(a, b)| (a - b).norm() <= 1e-12 * scale));
        let (e_v, e_s): (f64, f64) = (v.iter().map(|z| z.norm_sqr()).sum(), s.iter().map(|z| z.norm_sqr()).sum());
        prop_assert!((e_v - e_s).abs() <= 1e-12 * e_v.max(1.0));
        Ok(())
    })
}

fn ofdm_frame(n: usize) -> impl Strategy<Value = (OfdmScheme, Vec<usize>)> {
    prop_oneof![Just(OfdmScheme::Qcm), Just(OfdmScheme::Dcm)].prop_flat_map(move |s| (Just(s), prop::collection::vec(0usize..4, n)))
}

pub fn zf_inverts_noiseless_frames(cases: u32) -> Result<(), String> {
    let qam4 = make_alphabet(AlphabetKind::Qam, 4).unwrap();
    let link = LinkConfig::default();
    let mut det = Vec::new();
    for scheme in [OfdmScheme::Qcm, OfdmScheme::Dcm] {
        let cfg = OfdmConfig::new(scheme, qam4.clone(), 8).map_err(|e| e.to_string())?;
        let h = link.channel(if scheme == OfdmScheme::Qcm { Scheme::Qcm } else { Scheme::Dcm }).map_err(|e| e.to_string())?;
        let zf = ZfDetector::new(&cfg, &h).map_err(|e| e.to_string())?;
        det.push((cfg, h, zf));
    }
    check(cases, ofdm_frame(8), |(scheme, symbols)| {
        let (cfg, h, zf) = &det[usize::from(scheme == OfdmScheme::Dcm)];
        let y = lib(frame_image(h, &lib(cfg.transmit(&symbols))?))?;
        let d = lib(zf.detect(&y))?;
        prop_assert_eq!(d.erasures, 0);
        prop_assert_eq!(d.symbols, symbols);
        Ok(())
    })
}

pub fn md_optimality_certificate(cases: u32) -> Result<(), String> {
    let qam4 = make_alphabet(AlphabetKind::Qam, 4).unwrap();
    let link = LinkConfig::default();
    let mut det = Vec::new();
    for scheme in [OfdmScheme::Qcm, OfdmScheme::Dcm] {
        let cfg = OfdmConfig::new(scheme, qam4.clone(), 4).map_err(|e| e.to_string())?;
        let h = link.channel(if scheme == OfdmScheme::Qcm { Scheme::Qcm } else { Scheme::Dcm }).map_err(|e| e.to_string())?;
        let md = MdDetector::new(&cfg, &h).map_err(|e| e.to_string())?;
        det.push((cfg, h, md));
    }
    let s = ofdm_frame(4).prop_flat_map(|(scheme, symbols)| (Just(scheme), Just(symbols), prop::collection::vec(-1.0..1.0f64, 16)));
    check(cases, s, |(scheme, symbols, noise)| {
        let (cfg, h, md) = &det[usize::from(scheme == OfdmScheme::Dcm)];
        let clean = lib(frame_image(h, &lib(cfg.transmit(&symbols))?))?;
        let scale = clean.abs().max() * 0.5;
        let y = &clean + DMatrix::from_vec(clean.nrows(), clean.ncols(), noise[..clean.len()].to_vec()) * scale;
        let got = lib(md.detect(&y))?;
        let index = |s: &[usize]| s.iter().fold(0, |acc, &v| acc * 4 + v);
        let (r_got, r_true) = (md.residual(&y, index(&got)), md.residual(&y, index(&symbols)));
        prop_assert!(r_got <= r_true * (1.0 + 1e-12), "decision residual {r_got} > transmitted {r_true}");
        // the decision is the global minimum over all candidates
        let best = (0..md.n_candidates()).map(|c| md.residual(&y, c)).fold(f64::INFINITY, f64::min);
        prop_assert!(r_got <= best * (1.0 + 1e-12));
        Ok(())
    })
}

pub fn qcm_ofdm_identifies_active_pair(cases: u32) -> Result<(), String> {
    let qam4 = make_alphabet(AlphabetKind::Qam, 4).unwrap();
    let cfg = OfdmConfig::new(OfdmScheme::Qcm, qam4, 8).map_err(|e| e.to_string())?;
    let h = LinkConfig::default().channel(Scheme::Qcm).map_err(|e| e.to_string())?;
    check(cases, prop::collection::vec(0usize..4, 8), |symbols| {
        let x = lib(cfg.transmit(&symbols))?;
        let y = lib(frame_image(&h, &x))?;
        for n in 0..x.ncols() {
            let active: Vec<usize> = (0..4).filter(|&j| x[(j, n)] != 0.0).collect();
            if active.len() != 2 {
                continue;
            }
            let col: Vec<f64> = y.column(n).iter().copied().collect();
            let (i1, i2) = lib(identify_active_leds(&col, &h, false))?;
            let mut got = [i1, i2];
            got.sort_unstable();
            prop_assert_eq!(&got[..], &active[..], "channel use {}", n);
        }
        Ok(())
    })
}

// -------------------------------------------------------------- montecarlo

pub fn ber_counts_consistent(cases: u32) -> Result<(), String> {
    let qam4 = make_alphabet(AlphabetKind::Qam, 4).unwrap();
    let link = LinkConfig::default();
    let s = (0.0..45.0f64, 1u64..300, 1u64..20_000, any::<u64>());
    check(cases, s, |(db, min_errors, max_bits, seed)| {
        let mut spec = SimSpec::new(link.clone(), Modulation::Single(Scheme::Qcm), qam4.clone(), vec![db]);
        spec.stop = StopRule { min_bit_errors: min_errors, max_bits };
        spec.master_seed = seed;
        spec.workers = 1;
        let p = lib(simulate_ber(&spec))?.points[0];
        prop_assert!((0.0..=1.0).contains(&p.ber));
        prop_assert_eq!(p.ber, p.errors as f64 / p.bits as f64);
        prop_assert!(p.errors >= min_errors || p.bits >= max_bits, "{p:?}");
        Ok(())
    })
}

macro_rules! suites {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = super::$name(super::CASES) {
                    panic!("{e}");
                }
            }
        )*
    };
}

#[cfg(test)]
mod suites {
    suites!(
        los_gain_nonnegative,
        los_gain_decreases_with_distance,
        los_gain_rotation_invariant,
        channel_mirror_permutes_entries,
        noise_variance_affine,
        snr_scales_inversely_with_noise,
        qcm_round_trip,
        dcm_round_trip,
        smdcm_single_block,
        signal_set_structure,
        qcm_pr_quarter_turn_symmetry,
        ml_detect_matches_oracle,
        ml_detect_scale_invariant,
        pep_symmetric,
        union_bound_monotone,
        union_bound_relabel_invariant,
        davg_at_least_dmin,
        coverage_non_increasing,
        dft_round_trip,
        zf_inverts_noiseless_frames,
        md_optimality_certificate,
        qcm_ofdm_identifies_active_pair,
        ber_counts_consistent,
    );
}

#[test]
fn every_suite_is_listed() {
    assert_eq!(PROPERTIES.len(), 23);
}
