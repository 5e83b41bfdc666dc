//! BFGS ascent with a step-halving line search, and central-difference
//! Hessians of an analytic gradient.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Optimiser and covariance settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence when `max|score| < gradient_tolerance·(1 + |loglik|)`.
    pub gradient_tolerance: f64,
    pub step_halving_limit: usize,
    /// Relative step of the central-difference Hessian.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-7,
            step_halving_limit: 30,
            hessian_step: 1e-5,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.step_halving_limit > 0
            && self.hessian_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "fit options must all be positive: {self:?}"
            )))
        }
    }
}

/// A smooth objective to maximise.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, at: &DVector<f64>) -> f64;
    fn gradient(&self, at: &DVector<f64>) -> DVector<f64>;

    /// Box constraints per coordinate; unbounded by default.
    fn bounds(&self, _coord: usize) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub argmax: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AscentResult {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.amax()
    }
}

/// Largest single-coordinate move per line-search trial.
const MAX_STEP: f64 = 5.0;
const ARMIJO: f64 = 1e-4;
const POLISH_STEPS: usize = 3;

fn project<O: Objective + ?Sized>(f: &O, x: &mut DVector<f64>) {
    for j in 0..x.len() {
        let (lo, hi) = f.bounds(j);
        x[j] = x[j].clamp(lo, hi);
    }
}

/// Gradient with components zeroed where a bound is active and the gradient
/// points outward.
fn projected_gradient<O: Objective + ?Sized>(f: &O, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(g.len(), |j, _| {
        let (lo, hi) = f.bounds(j);
        if (x[j] <= lo && g[j] < 0.0) || (x[j] >= hi && g[j] > 0.0) {
            0.0
        } else {
            g[j]
        }
    })
}

fn tolerance(opts: &FitOptions, value: f64) -> f64 {
    opts.gradient_tolerance * (1.0 + value.abs())
}

/// Central-difference Hessian of `f.gradient`, symmetrised.
pub fn numerical_hessian<O: Objective + ?Sized>(f: &O, at: &DVector<f64>, rel_step: f64) -> DMatrix<f64> {
    let p = at.len();
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        let step = rel_step * at[j].abs().max(1.0);
        let mut up = at.clone();
        let mut down = at.clone();
        up[j] += step;
        down[j] -= step;
        let col = (f.gradient(&up) - f.gradient(&down)) / (2.0 * step);
        h.set_column(j, &col);
    }
    (&h + h.transpose()) * 0.5
}

/// Inverse of `−hessian` when it is positive definite.
pub fn inverse_information(hessian: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let info = -hessian;
    info.cholesky().map(|c| c.inverse())
}

/// Pseudo-inverse of `−hessian` keeping only positive curvature directions,
/// so the result is symmetric positive semi-definite.
pub fn pseudo_inverse_information(hessian: &DMatrix<f64>) -> DMatrix<f64> {
    let info = -hessian;
    let eig = SymmetricEigen::new(info);
    let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let p = eig.eigenvalues.len();
    let mut out = DMatrix::zeros(p, p);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * max {
            let v = eig.eigenvectors.column(i);
            out += v * v.transpose() / lambda;
        }
    }
    out
}

/// Maximises `f` from `start`.
///
/// The inverse-Hessian approximation is seeded with the inverse observed
/// information at the start (scaled identity when that is not positive
/// definite) and refreshed the same way whenever the line search stalls.
/// After convergence up to three Newton polishing steps are taken.
pub fn maximize<O: Objective + ?Sized>(f: &O, start: DVector<f64>, opts: &FitOptions) -> AscentResult {
    let p = f.dim();
    let mut x = start;
    project(f, &mut x);
    let mut value = f.value(&x);
    let mut grad = f.gradient(&x);
    let mut inv_h = seed_inverse_hessian(f, &x, &grad, opts);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let pg = projected_gradient(f, &x, &grad);
        if pg.amax() < tolerance(opts, value) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir = &inv_h * &pg;
        if dir.dot(&pg) <= 0.0 || !dir.iter().all(|d| d.is_finite()) {
            dir = pg.clone();
        }
        let max_move = dir.amax();
        let mut t = if max_move > MAX_STEP { MAX_STEP / max_move } else { 1.0 };
        let slope = dir.dot(&pg);

        let mut accepted = None;
        for _ in 0..=opts.step_halving_limit {
            let mut trial = &x + &dir * t;
            project(f, &mut trial);
            let v = f.value(&trial);
            if v.is_finite() && v >= value + ARMIJO * t * slope {
                accepted = Some((trial, v));
                break;
            }
            t *= 0.5;
        }

        match accepted {
            Some((trial, v)) => {
                let g_new = f.gradient(&trial);
                let s = &trial - &x;
                // Minimisation form: gradient of −f.
                let yv = &grad - &g_new;
                let sy = s.dot(&yv);
                if sy > 1e-12 * s.norm() * yv.norm() {
                    let rho = 1.0 / sy;
                    let eye = DMatrix::<f64>::identity(p, p);
                    let left = &eye - (&s * yv.transpose()) * rho;
                    let right = &eye - (&yv * s.transpose()) * rho;
                    inv_h = &left * &inv_h * &right + (&s * s.transpose()) * rho;
                }
                let gain = v - value;
                x = trial;
                value = v;
                grad = g_new;
                fresh = false;
                if gain <= f64::EPSILON * value.abs() {
                    // Flat progress: refresh curvature for the next round.
                    inv_h = seed_inverse_hessian(f, &x, &grad, opts);
                    fresh = true;
                }
            }
            None if !fresh => {
                inv_h = seed_inverse_hessian(f, &x, &grad, opts);
                fresh = true;
            }
            None => break,
        }
    }

    if converged {
        polish(f, &mut x, &mut value, &mut grad, opts);
    } else if projected_gradient(f, &x, &grad).amax() < tolerance(opts, value) {
        converged = true;
    }

    AscentResult {
        gradient: projected_gradient(f, &x, &grad),
        argmax: x,
        value,
        iterations,
        converged,
    }
}

fn seed_inverse_hessian<O: Objective + ?Sized>(
    f: &O,
    x: &DVector<f64>,
    grad: &DVector<f64>,
    opts: &FitOptions,
) -> DMatrix<f64> {
    let p = x.len();
    let h = numerical_hessian(f, x, opts.hessian_step);
    if let Some(inv) = inverse_information(&h) {
        if inv.iter().all(|v| v.is_finite()) {
            return inv;
        }
    }
    let scale = 1.0 / grad.amax().max(1.0);
    DMatrix::identity(p, p) * scale
}

/// Newton steps from an already converged point; kept only when they do not
/// lower the objective.
fn polish<O: Objective + ?Sized>(
    f: &O,
    x: &mut DVector<f64>,
    value: &mut f64,
    grad: &mut DVector<f64>,
    opts: &FitOptions,
) {
    for _ in 0..POLISH_STEPS {
        let pg = projected_gradient(f, x, grad);
        if pg.amax() == 0.0 {
            return;
        }
        let h = numerical_hessian(f, x, opts.hessian_step);
        let Some(inv) = inverse_information(&h) else {
            return;
        };
        let mut trial = &*x + inv * &pg;
        project(f, &mut trial);
        let v = f.value(&trial);
        if !(v.is_finite() && v >= *value) {
            return;
        }
        let g = f.gradient(&trial);
        let improved = projected_gradient(f, &trial, &g).amax() < pg.amax();
        *x = trial;
        *value = v;
        *grad = g;
        if !improved {
            return;
        }
    }
}
