//! Two-Gaussian decomposition of a density profile.
//!
//! After the lens, a cloud snapshot is a narrow refocused core on top of a
//! broad pedestal of atoms that passed through the beam wings; fitting the
//! sum of two concentric Gaussians separates the populations. The solver is
//! a small hand-rolled Levenberg-Marquardt: five parameters and a few
//! hundred bins do not justify pulling in a full optimization stack, and
//! keeping it local makes the fits reproducible to the bit.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FitError {
    #[error("cannot fit an empty or all-zero profile")]
    EmptyProfile,
    #[error("need at least 6 bins to fit 5 parameters, got {0}")]
    TooFewBins(usize),
}

/// Sum of two concentric Gaussians,
/// A_n exp(-(x-c)^2/(2 s_n^2)) + A_w exp(-(x-c)^2/(2 s_w^2)),
/// with s_narrow <= s_wide by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiGaussianFit {
    pub center: f64,
    pub amp_narrow: f64,
    pub amp_wide: f64,
    pub sigma_narrow: f64,
    pub sigma_wide: f64,
    /// ||residual|| / ||data||, a scale-free fit quality number.
    pub residual_norm: f64,
    /// False only when the iteration cap ran out before the cost settled.
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 200;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_CEILING: f64 = 1e12;

fn model(p: &[f64; 5], u: f64) -> f64 {
    let d = u - p[0];
    p[1] * (-d * d / (2.0 * p[2] * p[2])).exp() + p[3] * (-d * d / (2.0 * p[4] * p[4])).exp()
}

/// One Jacobian row: derivatives of the model with respect to
/// [center, amp1, sigma1, amp2, sigma2].
fn jacobian_row(p: &[f64; 5], u: f64) -> [f64; 5] {
    let d = u - p[0];
    let e1 = (-d * d / (2.0 * p[2] * p[2])).exp();
    let e2 = (-d * d / (2.0 * p[4] * p[4])).exp();
    [
        p[1] * e1 * d / (p[2] * p[2]) + p[3] * e2 * d / (p[4] * p[4]),
        e1,
        p[1] * e1 * d * d / (p[2] * p[2] * p[2]),
        e2,
        p[3] * e2 * d * d / (p[4] * p[4] * p[4]),
    ]
}

fn cost(p: &[f64; 5], us: &[f64], vs: &[f64]) -> f64 {
    us.iter()
        .zip(vs)
        .map(|(&u, &v)| {
            let r = model(p, u) - v;
            r * r
        })
        .sum()
}

/// Solve a 5x5 linear system by Gaussian elimination with partial pivoting.
/// None when the matrix is numerically singular.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let pivot_row = (col..5)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..5 {
            let factor = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let mut acc = b[row];
        for k in row + 1..5 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Fit two concentric Gaussians to samples (`xs`, `ys`).
///
/// `ys` are typically bin counts and must not be all zero. Starting guesses
/// come from the profile itself (centroid, RMS width and peak height), so no
/// user-supplied seed is needed; the fit is run in centroid-centered,
/// RMS-scaled coordinates to keep the normal equations well conditioned.
pub fn fit_two_gaussians(xs: &[f64], ys: &[f64]) -> Result<BiGaussianFit, FitError> {
    assert_eq!(xs.len(), ys.len(), "xs and ys must have equal length");
    if xs.is_empty() {
        return Err(FitError::EmptyProfile);
    }
    if xs.len() < 6 {
        return Err(FitError::TooFewBins(xs.len()));
    }
    let weight: f64 = ys.iter().map(|&y| y.max(0.0)).sum();
    if !(weight > 0.0) {
        return Err(FitError::EmptyProfile);
    }
    let centroid = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| x * y.max(0.0))
        .sum::<f64>()
        / weight;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x - centroid) * (x - centroid) * y.max(0.0))
        .sum::<f64>()
        / weight)
        .sqrt();
    let spacing = ((xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64).abs();
    let x_scale = if rms > 0.0 {
        rms
    } else if spacing > 0.0 {
        spacing
    } else {
        1.0
    };
    let peak = ys.iter().fold(f64::MIN, |a, &b| a.max(b));

    let us: Vec<f64> = xs.iter().map(|&x| (x - centroid) / x_scale).collect();
    let vs: Vec<f64> = ys.iter().map(|&y| y / peak).collect();

    // Narrow component started at a quarter of the overall width (but no
    // finer than half a bin), halves of the peak split between the two.
    let s_narrow_guess = 0.25f64.max(0.5 * spacing / x_scale);
    let mut p = [0.0, 0.5, s_narrow_guess, 0.5, 1.0];
    let mut current_cost = cost(&p, &us, &vs);
    let mut lambda = LAMBDA_START;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = [[0.0; 5]; 5];
        let mut jtr = [0.0; 5];
        for (&u, &v) in us.iter().zip(&vs) {
            let row = jacobian_row(&p, u);
            let r = model(&p, u) - v;
            for i in 0..5 {
                jtr[i] += row[i] * r;
                for j in i..5 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        for i in 0..5 {
            for j in 0..i {
                jtj[i][j] = jtj[j][i];
            }
        }
        let trace: f64 = (0..5).map(|i| jtj[i][i]).sum();
        let floor = 1e-12 * (trace / 5.0) + f64::MIN_POSITIVE;

        let mut damped = jtj;
        for i in 0..5 {
            damped[i][i] += lambda * jtj[i][i].max(floor);
        }
        let rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3], -jtr[4]];
        let step = solve5(damped, rhs);

        let accepted = step.and_then(|delta| {
            let mut trial = p;
            for i in 0..5 {
                trial[i] += delta[i];
            }
            let trial_cost = cost(&trial, &us, &vs);
            (trial_cost.is_finite() && trial_cost < current_cost).then_some((trial, trial_cost))
        });
        match accepted {
            Some((trial, trial_cost)) => {
                let improvement = current_cost - trial_cost;
                p = trial;
                current_cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                if improvement <= 1e-12 * current_cost.max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            }
            None => {
                lambda *= 10.0;
                if lambda > LAMBDA_CEILING {
                    // No direction improves any more: as settled as the data
                    // allows.
                    converged = true;
                    break;
                }
            }
        }
    }

    let norm_y: f64 = vs.iter().map(|&v| v * v).sum::<f64>().sqrt();
    let residual_norm = current_cost.sqrt() / norm_y;

    // Map back to data coordinates and order the components.
    let (mut g1, mut g2) = (
        (p[1] * peak, p[2].abs() * x_scale),
        (p[3] * peak, p[4].abs() * x_scale),
    );
    if g1.1 > g2.1 {
        std::mem::swap(&mut g1, &mut g2);
    }
    Ok(BiGaussianFit {
        center: centroid + p[0] * x_scale,
        amp_narrow: g1.0,
        amp_wide: g2.0,
        sigma_narrow: g1.1,
        sigma_wide: g2.1,
        residual_norm,
        converged,
    })
}
