//! Rotation averaging: chordal L2 mean and the Weiszfeld L1 geodesic median.

use super::{GeomError, Quat, Vec3};
use crate::scalar::Real;

const POWER_MAX_ITERS: usize = 200;
const POWER_RESIDUAL: f64 = 1e-12;

/// Weiszfeld stops once the tangent step is shorter than this (radians).
pub const WEISZFELD_STEP_TOL: f64 = 1e-9;
pub const WEISZFELD_MAX_ITERS: usize = 100;
/// Residuals shorter than this are anchors and left out of the update.
pub const WEISZFELD_ANCHOR_EPS: f64 = 1e-12;

const MAX_STEP_HALVINGS: usize = 30;

/// Rotation maximizing `Σ (q·qᵢ)²`: the principal eigenvector of `Σ qᵢqᵢᵀ`.
///
/// Found by power iteration started from the sign-aligned sum of the inputs.
pub fn chordal_l2_mean<T: Real>(qs: &[Quat<T>]) -> Result<Quat<T>, GeomError> {
    let first = *qs.first().ok_or(GeomError::EmptyInput)?;

    let mut acc = [[T::zero(); 4]; 4];
    for q in qs {
        let a = q.to_array();
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] = acc[i][j] + a[i] * a[j];
            }
        }
    }
    let scale = (0..4).fold(T::zero(), |s, i| s + acc[i][i]).max(T::one());

    let first_arr = first.to_array();
    let mut v = [T::zero(); 4];
    for q in qs {
        let a = q.to_array();
        let sign = if q.dot(first) < T::zero() { -T::one() } else { T::one() };
        for i in 0..4 {
            v[i] = v[i] + sign * a[i];
        }
    }
    if norm4(&v) < T::lit(1e-6) {
        v = first_arr;
    }
    normalize4(&mut v);

    let tol = T::tol(POWER_RESIDUAL) * scale;
    for _ in 0..POWER_MAX_ITERS {
        let mv = matvec4(&acc, &v);
        let lambda = dot4(&v, &mv);
        let residual = (0..4)
            .map(|i| mv[i] - lambda * v[i])
            .fold(T::zero(), |s, r| s + r * r)
            .sqrt();
        if residual <= tol {
            break;
        }
        v = mv;
        normalize4(&mut v);
    }
    Quat::from_array(v)
}

/// Sum of geodesic angles (radians) from `r` to each of `qs`.
pub fn l1_geodesic_cost<T: Real>(r: Quat<T>, qs: &[Quat<T>]) -> T {
    qs.iter().fold(T::zero(), |s, q| s + r.angle_rad(*q))
}

/// Diagnostics of one Weiszfeld run.
#[derive(Debug, Clone)]
pub struct MedianTrace<T> {
    pub rotation: Quat<T>,
    /// L1 cost at the initializer followed by the cost after each accepted step.
    pub costs: Vec<T>,
    pub iterations: usize,
    /// Norm of the last tangent step (radians).
    pub last_step: T,
    pub converged: bool,
}

/// Rotation minimizing the sum of geodesic distances (L1 median on SO(3)).
pub fn l1_geodesic_median<T: Real>(qs: &[Quat<T>]) -> Result<Quat<T>, GeomError> {
    l1_geodesic_median_traced(qs).map(|t| t.rotation)
}

/// Weiszfeld iteration in the tangent space, initialized at the chordal mean.
///
/// Each step moves `R ← R·exp(Δ)` with
/// `Δ = (Σ vᵢ/‖vᵢ‖) / (Σ 1/‖vᵢ‖)`, `vᵢ = log(Rᵀ Rᵢ)`. A step that would
/// raise the cost is halved until it does not; if no halving helps, the
/// iteration stops at the current estimate.
pub fn l1_geodesic_median_traced<T: Real>(qs: &[Quat<T>]) -> Result<MedianTrace<T>, GeomError> {
    let mut r = chordal_l2_mean(qs)?;
    let mut cost = l1_geodesic_cost(r, qs);
    let mut costs = vec![cost];
    let anchor = T::lit(WEISZFELD_ANCHOR_EPS);
    let step_tol = T::tol(WEISZFELD_STEP_TOL);
    let mut last_step = T::zero();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < WEISZFELD_MAX_ITERS {
        iterations += 1;
        let r_inv = r.conj();
        let mut num = Vec3::zero();
        let mut den = T::zero();
        for q in qs {
            let v = (r_inv * *q).log();
            let n = v.norm();
            if n < anchor {
                continue;
            }
            num += v / n;
            den = den + T::one() / n;
        }
        if den == T::zero() {
            last_step = T::zero();
            converged = true;
            break;
        }
        let mut delta = num / den;
        last_step = delta.norm();
        if last_step < step_tol {
            converged = true;
            break;
        }

        let mut accepted = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let candidate = r * Quat::exp(delta);
            let c = l1_geodesic_cost(candidate, qs);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            delta = delta * T::lit(0.5);
            if delta.norm() < step_tol {
                break;
            }
        }
        match accepted {
            Some((candidate, c)) => {
                r = candidate;
                cost = c;
                costs.push(c);
            }
            None => {
                // No descent along the Weiszfeld direction: r is a fixed point
                // up to rounding.
                last_step = T::zero();
                converged = true;
                break;
            }
        }
    }

    Ok(MedianTrace {
        rotation: r,
        costs,
        iterations,
        last_step,
        converged,
    })
}

fn dot4<T: Real>(a: &[T; 4], b: &[T; 4]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn norm4<T: Real>(a: &[T; 4]) -> T {
    dot4(a, a).sqrt()
}

fn normalize4<T: Real>(a: &mut [T; 4]) {
    let n = norm4(a);
    for c in a.iter_mut() {
        *c = *c / n;
    }
}

fn matvec4<T: Real>(m: &[[T; 4]; 4], v: &[T; 4]) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for i in 0..4 {
        out[i] = dot4(&m[i], v);
    }
    out
}
