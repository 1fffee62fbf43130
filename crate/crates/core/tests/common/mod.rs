//! Property checks shared by the `properties` and `acceptance` targets.
//! Each check runs a deterministic proptest runner and reports the first
//! failing case as a message.
#![allow(dead_code)]

use koopinv::eval::{argmin_width, normalized_error, MetricReport, WidthErrors};
use koopinv::learner::{build_dataset, train_mlp, FeatureSpec, MinMax, TrainConfig};
use koopinv::lti::{
    identify_relative_degree_from_step, normal_form, relative_degree, transfer_function, StateSpace, TransferFunction,
    DEFAULT_TOL,
};
use koopinv::poly::roots;
use koopinv::signals::{add_awgn_channels, filter_signal, finite_difference_34, DEFAULT_CUTOFF};
use koopinv::trajectory::Trajectory;
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

pub type Check = (&'static str, fn() -> Result<(), String>);

pub const CHECKS: [Check; 10] = [
    ("normal-form round trip", normal_form_round_trip),
    ("eig(A4) = numerator roots", zero_dynamics_match_zeros),
    ("relative degree = step identification", relative_degree_matches_step),
    ("stencil polynomial exactness", stencil_exactness),
    ("metric identities", metric_identities),
    ("normalization round trip", normalization_round_trip),
    ("feature translation consistency", feature_translation),
    ("filter derivative consistency", filter_derivative_consistency),
    ("determinism", determinism),
    ("width selection scale invariance", selection_scale_invariance),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    match runner(cases).run(&strategy, test) {
        Ok(()) => Ok(()),
        Err(TestError::Fail(why, value)) => Err(format!("{why} for {value:?}")),
        Err(TestError::Abort(why)) => Err(format!("aborted: {why}")),
    }
}

/// Ascending coefficients of `gain * prod (s - root)` for real and conjugate-pair roots.
pub fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)], gain: f64) -> Vec<f64> {
    let mut p = vec![gain];
    let mul = |p: &[f64], q: &[f64]| {
        let mut out = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &z in real {
        p = mul(&p, &[-z, 1.0]);
    }
    for &(re, im) in pairs {
        p = mul(&p, &[re * re + im * im, -2.0 * re, 1.0]);
    }
    p
}

/// A random minimum-phase system in scrambled coordinates together with
/// its generating zeros and relative degree.
#[derive(Clone, Debug)]
pub struct RandomSystem {
    pub sys: StateSpace,
    pub zeros: Vec<Complex<f64>>,
    pub r: usize,
}

fn distinct(values: &[f64], gap: f64) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[1] - w[0] >= gap)
}

pub fn random_system(max_order: usize) -> impl Strategy<Value = RandomSystem> {
    (1..=max_order)
        .prop_flat_map(|n| (Just(n), 1..=n))
        .prop_flat_map(|(n, r)| {
            let m = n - r;
            (
                Just(r),
                prop::collection::vec(-12.0..-0.3f64, m),
                any::<bool>(),
                (-4.0..-0.3f64, 0.3..3.0f64),
                prop::collection::vec(-8.0..1.0f64, n),
                prop_oneof![0.5..20.0f64, -20.0..-0.5f64],
                prop::collection::vec(-0.3..0.3f64, n * n),
            )
        })
        .prop_filter_map("clustered zeros or singular transform", |(r, reals, pair, (re, im), poles, gain, scramble)| {
            let n = poles.len();
            let m = n - r;
            let (real_zeros, pairs) = if pair && m >= 2 { (reals[2..].to_vec(), vec![(re, im)]) } else { (reals, vec![]) };
            if !distinct(&real_zeros, 0.3) {
                return None;
            }
            let num = poly_from_roots(&real_zeros, &pairs, gain);
            let den = poly_from_roots(&poles, &[], 1.0);
            let tf = TransferFunction::new(num, den).ok()?;
            let t = DMatrix::identity(n, n) + DMatrix::from_row_slice(n, n, &scramble);
            let svd = t.clone().svd(false, false);
            if svd.singular_values.min() < 0.3 {
                return None;
            }
            let sys = StateSpace::controller_canonical(&tf).ok()?.transformed(&t).ok()?;
            let mut zeros: Vec<Complex<f64>> = real_zeros.iter().map(|&z| Complex::new(z, 0.0)).collect();
            for (re, im) in pairs {
                zeros.push(Complex::new(re, im));
                zeros.push(Complex::new(re, -im));
            }
            Some(RandomSystem { sys, zeros, r })
        })
}

fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * a.amax().max(b.amax()).max(1.0)
}

pub fn normal_form_round_trip() -> Result<(), String> {
    run(96, (random_system(6), prop::collection::vec(-1.0..1.0f64, 6)), |(rs, xs)| {
        let nf = normal_form(&rs.sys, DEFAULT_TOL).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let n = rs.sys.order();
        prop_assert_eq!(nf.r, rs.r);
        let transformed = &nf.s * rs.sys.a() * &nf.s_inv;
        prop_assert!(rel_close(&transformed, &nf.block_matrix(), 1e-6), "S A S^-1 differs from the block form");
        let sb = DMatrix::from_column_slice(n, 1, (&nf.s * rs.sys.b()).as_slice());
        let bin = DMatrix::from_column_slice(n, 1, nf.block_input().as_slice());
        prop_assert!(rel_close(&sb, &bin, 1e-6), "S B differs from the block input");
        let cs = rs.sys.c() * &nf.s_inv;
        let mut e1 = DMatrix::zeros(1, n);
        e1[(0, 0)] = 1.0;
        prop_assert!(rel_close(&DMatrix::from_row_slice(1, n, cs.as_slice()), &e1, 1e-6), "C S^-1 is not e1");
        let x = DVector::from_column_slice(&xs[..n]);
        let (xi, eta) = nf.split(&x);
        let back = nf.join(&xi, &eta);
        prop_assert!((&back - &x).amax() <= 1e-6 * x.amax().max(1.0));
        Ok(())
    })
}

pub fn zero_dynamics_match_zeros() -> Result<(), String> {
    run(96, random_system(6), |rs| {
        let nf = normal_form(&rs.sys, DEFAULT_TOL).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let got = nf.zero_dynamics_spectrum().map_err(|e| TestCaseError::fail(e.to_string()))?;
        let tf = transfer_function(&rs.sys).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let key = |a: &Complex<f64>, b: &Complex<f64>| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        let mut roots = roots(&tf.num).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut generating = rs.zeros.clone();
        roots.sort_by(key);
        generating.sort_by(key);
        prop_assert_eq!(got.len(), roots.len());
        prop_assert_eq!(got.len(), generating.len());
        for ((g, w), z) in got.iter().zip(&roots).zip(&generating) {
            prop_assert!((g - w).norm() <= 1e-8 * w.norm().max(1.0), "eigenvalue {} vs numerator root {}", g, w);
            // generating zeros carry the conditioning of the scrambled realization
            prop_assert!((g - z).norm() <= 1e-6 * z.norm().max(1.0), "eigenvalue {} vs zero {}", g, z);
        }
        Ok(())
    })
}

pub fn relative_degree_matches_step() -> Result<(), String> {
    run(48, random_system(5), |rs| {
        let algebraic = relative_degree(&rs.sys, DEFAULT_TOL).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(algebraic, rs.r);
        let identified =
            identify_relative_degree_from_step(&rs.sys, 1e-3, 5.0).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(identified, rs.r);
        Ok(())
    })
}

pub fn stencil_exactness() -> Result<(), String> {
    let coeffs = prop::collection::vec(-3.0..3.0f64, 5);
    run(128, (coeffs, 0.001..0.05f64, -2.0..2.0f64), |(c, dt, t0)| {
        // quartic a(t), exact a' and a''
        let a = |t: f64| c.iter().rev().fold(0.0, |acc, k| acc * t + k);
        let da = |t: f64| c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t + 4.0 * c[4] * t.powi(3);
        let dda = |t: f64| 2.0 * c[2] + 6.0 * c[3] * t + 12.0 * c[4] * t * t;
        let ts: Vec<f64> = (0..9).map(|i| t0 + i as f64 * dt).collect();
        let samples: Vec<f64> = ts.iter().map(|&t| a(t)).collect();
        let st = finite_difference_34(&samples, dt).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let scale = samples.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for m in st.valid.clone() {
            prop_assert!((st.d3[m] - da(ts[m])).abs() <= 1e-9 * scale / dt);
            prop_assert!((st.d4[m] - dda(ts[m])).abs() <= 1e-9 * scale / (dt * dt));
        }
        Ok(())
    })
}

pub fn metric_identities() -> Result<(), String> {
    let signal = prop::collection::vec(-5.0..5.0f64, 2..40);
    run(128, (signal, 0.1..10.0f64, -1.0..1.0f64), |(u, scale, shift)| {
        prop_assume!(u.iter().any(|v| v.abs() > 1e-3));
        let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert_eq!(normalized_error(&u, &u).unwrap(), 0.0);
        let shifted: Vec<f64> = u.iter().map(|v| v + shift).collect();
        let e = normalized_error(&shifted, &u).unwrap();
        prop_assert!((e - 100.0 * shift.abs() / peak).abs() <= 1e-9 * e.max(1.0));
        let su: Vec<f64> = u.iter().map(|v| v * scale).collect();
        let ss: Vec<f64> = shifted.iter().map(|v| v * scale).collect();
        prop_assert!((normalized_error(&ss, &su).unwrap() - e).abs() <= 1e-9 * e.max(1.0));
        let w = WidthErrors::new(5, u.iter().map(|v| v.abs()).collect());
        prop_assert!(w.mean <= w.max + 1e-12);
        prop_assert!(normalized_error(&u, &vec![0.0; u.len()]).is_err());
        Ok(())
    })
}

pub fn normalization_round_trip() -> Result<(), String> {
    let matrix = (1usize..6, 2usize..30).prop_flat_map(|(w, n)| (Just(w), Just(n), prop::collection::vec(-50.0..50.0f64, w * n)));
    run(96, matrix, |(w, n, values)| {
        let x = DMatrix::from_row_slice(n, w, &values);
        let rows: Vec<usize> = (0..n).collect();
        let mm = MinMax::fit(&x, &rows).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for i in 0..n {
            for j in 0..w {
                let v = x[(i, j)];
                let z = mm.forward(j, v);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z) || mm.is_degenerate());
                prop_assert!((mm.inverse(j, z) - v).abs() <= 1e-10 * v.abs().max(1.0));
            }
        }
        Ok(())
    })
}

fn synthetic_record(len: usize, phase: f64) -> Trajectory {
    let dt = 0.01;
    let t = |i: usize| i as f64 * dt;
    let mut samples = DMatrix::zeros(len, 6);
    for i in 0..len {
        let x = t(i) + phase;
        for j in 0..6 {
            samples[(i, j)] = ((j + 1) as f64 * 0.7 * x).sin() + 0.1 * j as f64;
        }
    }
    let names = ["u", "y", "dy", "ddy", "d3y", "d4y"].iter().map(|s| s.to_string()).collect();
    Trajectory::new(dt, 0.0, names, samples).unwrap()
}

pub fn feature_translation() -> Result<(), String> {
    let specs = prop_oneof![
        (0..=4usize).prop_map(|l| FeatureSpec::history_derivatives(0.2, 0.05, l)),
        Just(FeatureSpec::narx(0.2, 0.05)),
        Just(FeatureSpec::narx_star(0.1, 0.02)),
    ];
    run(48, (specs, 1usize..40), |(spec, shift)| {
        let long = synthetic_record(200, 0.0);
        let dt = long.dt();
        let short = synthetic_record(200 - shift, shift as f64 * dt);
        let a = build_dataset(&long, &spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = build_dataset(&short, &spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(a.len(), b.len() + shift);
        for i in 0..b.len() {
            prop_assert!(a.row(i + shift).iter().zip(b.row(i)).all(|(p, q)| (p - q).abs() <= 1e-12));
            prop_assert!((a.y[i + shift] - b.y[i]).abs() <= 1e-12);
        }
        Ok(())
    })
}

pub fn filter_derivative_consistency() -> Result<(), String> {
    run(24, (0.2..4.0f64, 0.0..6.3f64, 0.1..3.0f64, 0.5..12.0f64), |(w, phase, amp, cutoff)| {
        let y0 = move |t: f64| amp * (w * t + phase).sin();
        let dt = 0.01;
        let f = filter_signal(&y0, 0.0, dt, 801, cutoff).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for order in 0..4 {
            let lo = f.channel(order);
            let hi = f.channel(order + 1);
            // |y^(i+1)| is bounded by the larger of its own peak and cutoff times the lower peak
            let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = peak(&hi).max(cutoff * peak(&lo));
            for k in 0..lo.len() - 2 {
                // Simpson step of the next-higher channel over two samples
                let simpson = dt / 3.0 * (hi[k] + 4.0 * hi[k + 1] + hi[k + 2]);
                prop_assert!(
                    (lo[k + 2] - lo[k] - simpson).abs() <= 1e-3 * dt * scale,
                    "order {} at sample {}", order, k
                );
            }
        }
        Ok(())
    })
}

pub fn determinism() -> Result<(), String> {
    let record = synthetic_record(600, 0.3);
    let spec = FeatureSpec::history_derivatives(0.1, 0.05, 2);
    let ds = build_dataset(&record, &spec).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { max_iters: 8, row_stride: 3, cycle_seconds: 2.0, ..TrainConfig::default() };
    run(4, (any::<u64>(), 2usize..6), |(seed, hidden)| {
        let (m1, r1) = train_mlp(&ds, hidden, seed, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let (m2, r2) = train_mlp(&ds, hidden, seed, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(m1.to_json().unwrap(), m2.to_json().unwrap());
        prop_assert_eq!(r1.train_mse.to_bits(), r2.train_mse.to_bits());
        let n1 = add_awgn_channels(&record, &["y", "dy"], 20.0, seed).unwrap();
        let n2 = add_awgn_channels(&record, &["y", "dy"], 20.0, seed).unwrap();
        prop_assert!(n1.samples().iter().zip(n2.samples().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let n3 = add_awgn_channels(&record, &["y", "dy"], 20.0, seed ^ 1).unwrap();
        prop_assert!(n1.samples() != n3.samples());
        let f1 = filter_signal(&|t: f64| t.sin(), 0.0, 0.01, 50, DEFAULT_CUTOFF).unwrap();
        let f2 = filter_signal(&|t: f64| t.sin(), 0.0, 0.01, 50, DEFAULT_CUTOFF).unwrap();
        prop_assert!(f1.derivatives.samples() == f2.derivatives.samples());
        Ok(())
    })
}

pub fn selection_scale_invariance() -> Result<(), String> {
    let widths = prop::collection::btree_map(1usize..200, 0.0..10.0f64, 1..8);
    run(128, (widths, 0.01..100.0f64), |(errors, scale)| {
        let pairs: Vec<(usize, f64)> = errors.into_iter().collect();
        let scaled: Vec<(usize, f64)> = pairs.iter().map(|&(n, e)| (n, e * scale)).collect();
        prop_assert_eq!(argmin_width(&pairs), argmin_width(&scaled));
        let report = MetricReport::from_widths(pairs.iter().map(|&(n, e)| WidthErrors::new(n, vec![e])).collect()).unwrap();
        let min = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(report.e_u, min);
        let first = pairs.iter().find(|p| p.1 == min).unwrap().0;
        prop_assert_eq!(report.best_hidden, first);
        Ok(())
    })
}
