//! Adaptive Simpson integration, used for the Maxwell-weighted velocity
//! moments behind the closed-form collimation predictions.

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-panel Richardson error estimates; usually a strong
    /// overestimate of the true error.
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Integrate `f` over [a, b] to relative tolerance `rel_tol`.
///
/// Classic adaptive Simpson: a panel is accepted when the Richardson estimate
/// |S_halves - S_whole| / 15 fits in its share of the error budget. The
/// absolute budget comes from rel_tol times a 64-panel pilot estimate of the
/// integral's magnitude, so the routine works at any scale.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Quadrature {
    assert!(b > a, "integration interval must be ordered");
    assert!(rel_tol > 0.0, "relative tolerance must be positive");

    let mut evals = 0usize;
    let mut eval = |x: f64| {
        evals += 1;
        f(x)
    };

    // Pilot: composite Simpson on 64 panels for a magnitude estimate.
    let n = 64usize;
    let h = (b - a) / n as f64;
    let mut pilot_abs = 0.0;
    let mut prev = eval(a);
    for i in 0..n {
        let xm = a + (i as f64 + 0.5) * h;
        let xr = a + (i as f64 + 1.0) * h;
        let fm = eval(xm);
        let fr = eval(xr);
        pilot_abs += (h / 6.0) * (prev.abs() + 4.0 * fm.abs() + fr.abs());
        prev = fr;
    }
    let abs_tol = (rel_tol * pilot_abs).max(f64::MIN_POSITIVE);

    let fa = eval(a);
    let m = 0.5 * (a + b);
    let fm = eval(m);
    let fb = eval(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (value, error_estimate) =
        refine(&mut eval, a, m, b, fa, fm, fb, whole, abs_tol, 52);

    Quadrature {
        value,
        error_estimate,
        evaluations: evals,
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson extrapolation: S + (S_fine - S_coarse)/15 is O(h^6).
        (left + right + delta / 15.0, delta.abs() / 15.0)
    } else {
        let (lv, le) = refine(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (rv, re) = refine(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
}
