#![allow(dead_code)]

use marv::UpperRect;

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `int int 1{T^m(z1 e_p + z2 e_q) in rect} nu_alpha(dz1) nu_alpha(dz2)` for
/// one pair of spike positions, computed without any sampling.
///
/// In `u = z^-alpha` both measures become Lebesgue on `(0, inf)`. For fixed
/// `z1` the admissible `z2` form a half line `(z2min, inf)`, so the inner
/// integral is `z2min^-alpha` and only the outer one is done numerically.
/// Returns `None` when the pair has infinite mass.
pub fn pair_integral(psi: &[f64], alpha: f64, rect: &UpperRect, p: i64, q: i64) -> Option<f64> {
    let coef = |k: i64, pos: i64| -> f64 {
        let lag = k - pos;
        if lag < 0 || lag as usize >= psi.len() {
            0.0
        } else {
            psi[lag as usize]
        }
    };
    let cons: Vec<(f64, f64, f64)> = rect
        .iter()
        .map(|(k, a)| (a, coef(k, p), coef(k, q)))
        .collect();

    // constraints q cannot touch pin z1 from below
    let mut z1_floor = 0.0f64;
    for &(a, c1, c2) in &cons {
        if c2 == 0.0 {
            if c1 == 0.0 {
                return Some(0.0);
            }
            z1_floor = z1_floor.max(a / c1);
        }
    }
    if z1_floor == 0.0 {
        return None;
    }
    if cons.iter().all(|&(_, c1, _)| c1 > 0.0) {
        return None;
    }
    let u1_max = z1_floor.powf(-alpha);
    let inner = |u1: f64| -> f64 {
        if u1 <= 0.0 {
            // z1 = inf: only constraints p cannot touch remain
            let zmin = cons
                .iter()
                .filter(|c| c.1 == 0.0)
                .map(|&(a, _, c2)| a / c2)
                .fold(0.0, f64::max);
            return zmin.powf(-alpha);
        }
        let z1 = u1.powf(-1.0 / alpha);
        let mut zmin = 0.0f64;
        for &(a, c1, c2) in &cons {
            if c2 > 0.0 {
                zmin = zmin.max((a - c1 * z1) / c2);
            }
        }
        if zmin <= 0.0 {
            f64::INFINITY
        } else {
            zmin.powf(-alpha)
        }
    };
    let v = adaptive_simpson(&inner, 0.0, u1_max, 1e-13);
    v.is_finite().then_some(v)
}

/// Sum of `pair_integral` over all strictly increasing position pairs that
/// can reach the rectangle.
pub fn quadrature_nu_m_1(psi: &[f64], alpha: f64, rect: &UpperRect) -> f64 {
    let m = psi.len() as i64 - 1;
    let lo = rect.min_index() - m;
    let hi = rect.max_index();
    let mut total = 0.0;
    for p in lo..=hi {
        for q in p + 1..=hi {
            total += pair_integral(psi, alpha, rect, p, q).expect("pair with infinite mass");
        }
    }
    total
}

pub fn rect(pairs: &[(i64, f64)]) -> UpperRect {
    UpperRect::new(pairs.iter().copied()).unwrap()
}
