//! Property suites shared by the `properties` and `acceptance` targets.

use marv::{
    apply_tm, mu_j_rect, nu_inf_0_rect, nu_m0_rect, nu_m_j_rect, spike_cover_number,
    CoefficientSeq, UpperRect, WindowSeq,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("metric axioms and diameter", metric_axioms),
    ("T^m exact linearity", tm_linearity_exact),
    ("T^m linearity on reals", tm_linearity_real),
    ("T^m continuity modulus", tm_continuity),
    ("cone labels are scale invariant", cone_scale_invariance),
    ("mu_j reductions", mu_j_reductions),
    ("closed-form homogeneity", closed_form_homogeneity),
    ("integration homogeneity", integration_homogeneity),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_global_rejects: cases.saturating_mul(50),
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Non-negative sequences on a short window with a fair share of zeros.
pub fn seq() -> impl Strategy<Value = WindowSeq> {
    (
        -12i64..12,
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..5.0f64, 0.0..1e4f64], 0..10),
    )
        .prop_map(|(lo, v)| WindowSeq::new(lo, v).unwrap())
}

/// Sequences whose entries are small integers, so sums and dyadic products are exact.
fn int_seq() -> impl Strategy<Value = WindowSeq> {
    (-8i64..8, prop::collection::vec(0u32..1024, 0..8))
        .prop_map(|(lo, v)| WindowSeq::new(lo, v.into_iter().map(f64::from).collect()).unwrap())
}

fn psi_real(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        0.05..3.0f64,
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], 0..max_len),
    )
        .prop_map(|(p0, rest)| {
            let mut psi = vec![p0];
            psi.extend(rest);
            psi
        })
}

fn upper_rect(span: i64, max_len: usize) -> impl Strategy<Value = UpperRect> {
    prop::collection::btree_map(-span..=span, 0.1..10.0f64, 1..=max_len)
        .prop_map(|m| UpperRect::new(m).unwrap())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn metric_axioms(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(seq(), seq(), seq()), |(x, y, z)| {
        let dxy = x.dist(&y);
        prop_assert_eq!(x.dist(&x), 0.0);
        prop_assert_eq!(dxy, y.dist(&x));
        prop_assert!((0.0..=1.5).contains(&dxy));
        prop_assert_eq!(dxy == 0.0, x == y);
        prop_assert!(dxy <= x.dist(&z) + z.dist(&y) + 1e-15);
        Ok(())
    }))
}

pub fn tm_linearity_exact(cases: u32) -> Result<(), String> {
    // dyadic coefficients and integer data keep every intermediate exact
    let psi = prop::collection::vec(0u32..64, 0..5).prop_flat_map(|rest| {
        (1u32..64).prop_map(move |p0| {
            let mut psi = vec![f64::from(p0) / 16.0];
            psi.extend(rest.iter().map(|&r| f64::from(r) / 16.0));
            psi
        })
    });
    report(runner(cases).run(
        &(psi, int_seq(), int_seq(), 1u32..16, 1u32..16),
        |(psi, x, y, a, b)| {
            let c = CoefficientSeq::explicit(psi.clone()).unwrap();
            let m = psi.len() - 1;
            let (a, b) = (f64::from(a), f64::from(b));
            let lhs = apply_tm(&c, m, &x.scale(a).unwrap().add(&y.scale(b).unwrap()));
            let rhs = apply_tm(&c, m, &x)
                .scale(a)
                .unwrap()
                .add(&apply_tm(&c, m, &y).scale(b).unwrap());
            prop_assert_eq!(lhs, rhs);
            Ok(())
        },
    ))
}

pub fn tm_linearity_real(cases: u32) -> Result<(), String> {
    report(runner(cases).run(
        &(psi_real(6), seq(), seq(), 0.01..100.0f64, 0.01..100.0f64),
        |(psi, x, y, a, b)| {
            let c = CoefficientSeq::explicit(psi.clone()).unwrap();
            let m = psi.len() - 1;
            let lhs = apply_tm(&c, m, &x.scale(a).unwrap().add(&y.scale(b).unwrap()));
            let rhs = apply_tm(&c, m, &x)
                .scale(a)
                .unwrap()
                .add(&apply_tm(&c, m, &y).scale(b).unwrap());
            let lo = lhs.lo().min(rhs.lo());
            let hi = lhs.hi().unwrap_or(lo).max(rhs.hi().unwrap_or(lo));
            for i in lo..=hi {
                prop_assert!(rel_close(lhs.get(i), rhs.get(i), 1e-13), "index {}", i);
            }
            // homogeneity alone is a single rounding per coordinate
            let h = apply_tm(&c, m, &x.scale(a).unwrap());
            let g = apply_tm(&c, m, &x).scale(a).unwrap();
            for i in g.iter().map(|p| p.0) {
                prop_assert!(rel_close(h.get(i), g.get(i), 1e-14));
            }
            Ok(())
        },
    ))
}

/// Pairs sitting just inside the modulus: the budget is spent either on one
/// near coordinate or spread over all of them, plus a huge jump far out.
pub fn tm_continuity(cases: u32) -> Result<(), String> {
    let strat = (
        psi_real(5),
        seq(),
        -3.0..0.0f64,
        prop::collection::vec(-1.0..1.0f64, 1..40),
        any::<bool>(),
        any::<bool>(),
    );
    report(
        runner(cases).run(&strat, |(psi, x, log_eps, dirs, concentrate, far_jump)| {
            let c = CoefficientSeq::explicit(psi.clone()).unwrap();
            let m = psi.len() - 1;
            let eps = 10f64.powf(log_eps);
            let delta = marv::tm_continuity_modulus(&c, m, eps).unwrap();
            let budget = 0.99 * delta;
            let half = (dirs.len() / 2) as i64;
            let mut y: Vec<(i64, f64)> = Vec::new();
            let share = if concentrate {
                1.0
            } else {
                1.0 / dirs.len() as f64
            };
            for (n, &d) in dirs.iter().enumerate() {
                if concentrate && n > 0 {
                    break;
                }
                let i = n as i64 - half;
                let w = marv::sequence::coordinate_weight(i);
                // keep below the cap at 1 so the spent weight is exactly |diff| * w
                let diff = (d * share * budget / w).clamp(-0.999, 0.999);
                y.push((i, (x.get(i) + diff).max(0.0)));
            }
            let kept: Vec<(i64, f64)> = x
                .iter()
                .filter(|(i, _)| !y.iter().any(|p| p.0 == *i))
                .collect();
            let mut ys = WindowSeq::from_pairs(kept.into_iter().chain(y)).unwrap();
            if far_jump {
                // weight 2^-(k+1) < delta / 200
                let k = (200.0 / delta).log2().ceil() as i64;
                let spike = WindowSeq::spike(k + 20, 1e9).unwrap();
                ys = ys.add(&spike);
            }
            let d_in = x.dist(&ys);
            prop_assume!(d_in < delta);
            let d_out = apply_tm(&c, m, &x).dist(&apply_tm(&c, m, &ys));
            prop_assert!(
                d_out < eps,
                "d_in={} delta={} d_out={} eps={}",
                d_in,
                delta,
                d_out,
                eps
            );
            Ok(())
        }),
    )
}

pub fn cone_scale_invariance(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(seq(), 1e-6..1e6f64), |(x, lam)| {
        prop_assert_eq!(x.scale(lam).unwrap().cone_label(), x.cone_label());
        let label = x.cone_label();
        prop_assert!(label.within(label.positive_count()));
        if label.positive_count() > 0 {
            prop_assert!(!label.within(label.positive_count() - 1));
        }
        Ok(())
    }))
}

pub fn mu_j_reductions(cases: u32) -> Result<(), String> {
    report(runner(cases).run(
        &(upper_rect(6, 6), 0usize..6, 0.2..4.0f64),
        |(rect, j, alpha)| {
            let v = mu_j_rect(j, alpha, &rect).unwrap();
            let k = rect.len();
            if k == j + 1 {
                let expect: f64 = rect.thresholds().map(|a| a.powf(-alpha)).product();
                prop_assert!(rel_close(v.value, expect, 1e-14));
            } else if k > j + 1 {
                prop_assert_eq!(v.value, 0.0);
            } else {
                prop_assert!(v.is_infinite());
            }
            Ok(())
        },
    ))
}

pub fn closed_form_homogeneity(cases: u32) -> Result<(), String> {
    let strat = (
        psi_real(5),
        upper_rect(4, 4),
        0.2..4.0f64,
        0.05..20.0f64,
        0usize..4,
        0.2..0.9f64,
    );
    report(
        runner(cases).run(&strat, |(psi, rect, alpha, lam, j, rho)| {
            let scaled = rect.scaled(lam).unwrap();
            let c = CoefficientSeq::explicit(psi.clone()).unwrap();
            let m = psi.len() - 1;

            let a = mu_j_rect(j, alpha, &rect).unwrap();
            let b = mu_j_rect(j, alpha, &scaled).unwrap();
            if a.value.is_finite() {
                prop_assert!(rel_close(
                    b.value,
                    lam.powf(-((j + 1) as f64) * alpha) * a.value,
                    1e-12
                ));
            } else {
                prop_assert!(b.is_infinite());
            }

            let a = nu_m0_rect(&c, m, alpha, &rect).unwrap();
            let b = nu_m0_rect(&c, m, alpha, &scaled).unwrap();
            prop_assert!(rel_close(b.value, lam.powf(-alpha) * a.value, 1e-12));

            let g = CoefficientSeq::geometric(rho).unwrap();
            let a = nu_inf_0_rect(&g, alpha, &rect, 1e-12).unwrap();
            let b = nu_inf_0_rect(&g, alpha, &scaled, 1e-12).unwrap();
            let slack = a.truncation_bound.unwrap_or(0.0) * lam.powf(-alpha)
                + b.truncation_bound.unwrap_or(0.0);
            prop_assert!((b.value - lam.powf(-alpha) * a.value).abs() <= 1e-12 * b.value + slack);
            Ok(())
        }),
    )
}

pub fn integration_homogeneity(cases: u32) -> Result<(), String> {
    let strat = (
        psi_real(3),
        upper_rect(3, 3),
        0.5..3.0f64,
        0.1..10.0f64,
        1usize..3,
        any::<u64>(),
    );
    report(
        runner(cases).run(&strat, |(psi, rect, alpha, lam, j, seed)| {
            let c = CoefficientSeq::explicit(psi.clone()).unwrap();
            let m = psi.len() - 1;
            prop_assume!(spike_cover_number(&c, m, &rect).unwrap() > j);
            let scaled = rect.scaled(lam).unwrap();
            let a = nu_m_j_rect(&c, m, alpha, j, &rect, 400, seed).unwrap();
            let b = nu_m_j_rect(&c, m, alpha, j, &scaled, 400, seed).unwrap();
            let factor = lam.powf(-((j + 1) as f64) * alpha);
            let se = (b.stderr().powi(2) + (factor * a.stderr()).powi(2)).sqrt();
            prop_assert!(
                (b.value - factor * a.value).abs() <= 3.0 * se + 1e-9 * b.value,
                "a={:?} b={:?} factor={}",
                a,
                b,
                factor
            );
            Ok(())
        }),
    )
}
