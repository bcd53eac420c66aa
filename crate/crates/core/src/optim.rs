//! Small dense optimisers used by the maximum-likelihood fits.
//!
//! Every likelihood in this crate has two or three parameters, so the
//! machinery is deliberately simple: a Nelder–Mead simplex for objectives
//! whose gradient is awkward (grouped-data likelihoods) and BFGS with a
//! backtracking line search when an analytic gradient is available. Both
//! minimise; callers hand in the negative log-likelihood. A central-difference
//! Hessian supplies observed information for standard errors.

/// Outcome of a minimisation.
#[derive(Debug, Clone)]
pub struct OptimResult {
    /// Location of the best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    pub iterations: usize,
    /// Whether the stopping tolerance was met before the iteration cap.
    pub converged: bool,
}

/// Nelder–Mead settings. The defaults suit well-scaled two-parameter
/// objectives evaluated in a transformed (log / logit) space.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the simplex's objective spread falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-10,
            x_tol: 1e-9,
        }
    }
}

/// Minimises `f` with the Nelder–Mead simplex method.
///
/// `scale` sets the size of the initial simplex along each coordinate;
/// non-finite objective values are treated as infinitely bad, which lets
/// callers fence off invalid regions instead of panicking inside `f`.
pub fn minimize_nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    scale: &[f64],
    opts: NelderMeadOptions,
) -> OptimResult {
    let n = start.len();
    debug_assert_eq!(scale.len(), n);
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // initial simplex: start plus one displaced vertex per coordinate
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += if scale[i] != 0.0 { scale[i] } else { 0.1 };
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;

        let spread = if worst.is_finite() {
            worst - best
        } else {
            f64::INFINITY
        };
        let diameter = (0..n)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(v, _)| v[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if spread < opts.f_tol && diameter < opts.x_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }

        let point_at = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + coef * (centroid[i] - simplex[n].0[i]))
                .collect()
        };

        let reflected = point_at(ALPHA);
        let f_reflected = eval(&reflected);
        if f_reflected < simplex[0].1 {
            let expanded = point_at(GAMMA);
            let f_expanded = eval(&expanded);
            simplex[n] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < simplex[n - 1].1 {
            simplex[n] = (reflected, f_reflected);
            continue;
        }
        // contraction, outside or inside depending on the reflection
        let (contracted, f_contracted) = if f_reflected < simplex[n].1 {
            let c = point_at(RHO);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = point_at(-RHO);
            let fc = eval(&c);
            (c, fc)
        };
        if f_contracted < simplex[n].1.min(f_reflected) {
            simplex[n] = (contracted, f_contracted);
            continue;
        }
        // shrink everything toward the best vertex
        let best_v = simplex[0].0.clone();
        for (v, fv) in simplex.iter_mut().skip(1) {
            for i in 0..n {
                v[i] = best_v[i] + SIGMA * (v[i] - best_v[i]);
            }
            *fv = eval(v);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    OptimResult {
        x,
        value,
        iterations,
        converged,
    }
}

/// BFGS settings.
#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the infinity norm of the gradient drops below this.
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            grad_tol: 1e-9,
        }
    }
}

/// Minimises `f` by BFGS with an Armijo backtracking line search.
///
/// `f` returns the objective and its gradient. The inverse-Hessian
/// approximation starts at the identity and is updated only when the
/// curvature condition holds, so the search direction stays a descent
/// direction throughout.
pub fn minimize_bfgs(
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
    start: &[f64],
    opts: BfgsOptions,
) -> OptimResult {
    let n = start.len();
    let mut x = start.to_vec();
    let (mut fx, mut grad) = f(&x);
    // inverse Hessian approximation, dense row-major
    let mut h_inv = identity(n);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }

        // direction = -H_inv * grad
        let mut dir = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                dir[i] -= h_inv[i * n + j] * grad[j];
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // numerical breakdown: reset to steepest descent
            h_inv = identity(n);
            for i in 0..n {
                dir[i] = -grad[i];
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();

        // Armijo backtracking
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no admissible step along the descent direction: give up here
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            // standard BFGS inverse update
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += h_inv[i * n + j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        }

        x = x_new;
        fx = f_new;
        grad = g_new;
    }

    OptimResult {
        x,
        value: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Central-difference gradient with steps scaled to the coordinates.
pub fn numerical_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian. The step along each coordinate scales with the
/// coordinate's magnitude; accuracy is roughly square-root of what the
/// objective itself delivers, which is ample for standard errors.
pub fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|xi| 1e-4 * xi.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h[i];
        xm[i] -= h[i];
        hess[i][i] = (f(&xp) - 2.0 * f0 + f(&xm)) / (h[i] * h[i]);
        for j in (i + 1)..n {
            let mut xpp = x.to_vec();
            let mut xpm = x.to_vec();
            let mut xmp = x.to_vec();
            let mut xmm = x.to_vec();
            xpp[i] += h[i];
            xpp[j] += h[j];
            xpm[i] += h[i];
            xpm[j] -= h[j];
            xmp[i] -= h[i];
            xmp[j] += h[j];
            xmm[i] -= h[i];
            xmm[j] -= h[j];
            let v = (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Inverts a small symmetric matrix, returning `None` when it is singular or
/// not positive definite enough to trust.
pub fn invert_symmetric(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let inv = dm.try_inverse()?;
    let out: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
        .collect();
    if out
        .iter()
        .flat_map(|row| row.iter())
        .all(|v| v.is_finite())
    {
        Some(out)
    } else {
        None
    }
}
