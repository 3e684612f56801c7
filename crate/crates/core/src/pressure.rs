//! Pressure-head functionals and the elliptic identity they satisfy.
//!
//! With `R = |grad psi|^2/2 + gY - Q/2 + Gamma_hat(psi)`, the modified heads
//! are `T = R - varpi psi` and `S = R + Lambda(psi)`, where `Lambda` is the
//! primitive of a multiplier `lambda`. The quantity
//! `W = |grad psi|^2/2 + Gamma_hat(psi) + Lambda(psi)` satisfies
//! `Delta W + (L1 W_X + L2 W_Y)/|grad psi|^2 = lambda'|grad psi|^2 + (2 lambda + gamma) lambda`
//! with `L1 = -2[W_X - (2 lambda + gamma) psi_X]` and similarly for `L2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Accum, PlanarField, ResidualEntry, WaveField};
use crate::vorticity::VorticityFn;

/// Points used to evaluate the admissibility flags of a multiplier.
pub const ADMISSIBILITY_POINTS: usize = 1000;

/// Multiplier `lambda` on `[0, B]`, stored like a vorticity function.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierFn(pub VorticityFn);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admissibility {
    pub nonpositive: bool,
    pub combined_nonpositive: bool,
    pub nondecreasing: bool,
}

impl Admissibility {
    pub fn all(&self) -> bool {
        self.nonpositive && self.combined_nonpositive && self.nondecreasing
    }
}

impl MultiplierFn {
    pub fn zero(b: f64) -> Result<Self> {
        Ok(Self(VorticityFn::zero(b)?))
    }

    pub fn lambda(&self, r: f64) -> f64 {
        self.0.gamma_clamped(r)
    }

    pub fn lambda_prime(&self, r: f64) -> f64 {
        self.0.gamma_prime(r.clamp(0.0, self.0.b())).unwrap_or(0.0)
    }

    /// `Lambda(r) = int_0^r lambda`.
    pub fn big_lambda(&self, r: f64) -> f64 {
        self.0.gamma_hat_clamped(r)
    }

    /// `lambda <= 0`, `2 lambda + gamma <= 0` and `lambda' >= 0` on a grid.
    pub fn admissibility(&self, gamma: &VorticityFn) -> Admissibility {
        let b = self.0.b();
        let mut a = Admissibility { nonpositive: true, combined_nonpositive: true, nondecreasing: true };
        for k in 0..ADMISSIBILITY_POINTS {
            let r = b * k as f64 / (ADMISSIBILITY_POINTS - 1) as f64;
            let l = self.lambda(r);
            a.nonpositive &= l <= 0.0;
            a.combined_nonpositive &= 2.0 * l + gamma.gamma_clamped(r) <= 0.0;
            a.nondecreasing &= self.lambda_prime(r) >= 0.0;
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    R,
    T,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureHeadField {
    pub kind: HeadKind,
    /// Node values in the order of [`WaveField::psi`].
    #[serde(skip)]
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub argmin: [f64; 2],
    pub argmax: [f64; 2],
    pub varpi: f64,
}

/// Head value at a point from `psi` and its gradient.
#[allow(clippy::too_many_arguments)]
fn head(kind: HeadKind, vfn: &VorticityFn, lam: Option<&MultiplierFn>, varpi: f64, g: f64, q: f64, y: f64, psi: f64, grad: [f64; 2]) -> f64 {
    let r = 0.5 * (grad[0] * grad[0] + grad[1] * grad[1]) + g * y - 0.5 * q + vfn.gamma_hat_clamped(psi);
    match kind {
        HeadKind::R => r,
        HeadKind::T => r - varpi * psi,
        HeadKind::S => r + lam.map(|l| l.big_lambda(psi)).unwrap_or(0.0),
    }
}

/// Pressure head of the requested kind at every grid node.
pub fn pressure_head(w: &WaveField, kind: HeadKind, lam: Option<&MultiplierFn>) -> Result<PressureHeadField> {
    if kind == HeadKind::S && lam.is_none() {
        return Err(Error::Precondition("kind S needs a multiplier".into()));
    }
    let varpi = w.vorticity.varpi();
    let mut values = Vec::with_capacity(w.psi.len());
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut argmin, mut argmax) = ([0.0; 2], [0.0; 2]);
    for i in 0..w.nx() {
        for j in 0..w.ny {
            let y = w.y(i, j);
            let v = head(kind, &w.vorticity, lam, varpi, w.g, w.q, y, w.at(i, j), w.gradient(i, j));
            if v < min {
                min = v;
                argmin = [w.x[i], y];
            }
            if v > max {
                max = v;
                argmax = [w.x[i], y];
            }
            values.push(v);
        }
    }
    Ok(PressureHeadField { kind, values, min, max, argmin, argmax, varpi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SperbResidual {
    pub residual: ResidualEntry,
    pub evaluated: usize,
    pub excluded: usize,
    pub cutoff: f64,
}

/// Default gradient cutoff as a fraction of the largest gradient.
pub const SPERB_CUTOFF: f64 = 1e-4;

/// Residual of the elliptic identity for `W` at interior grid nodes, by
/// second-order differences of the nodal `W` values.
pub fn sperb_residual(w: &WaveField, lam: &MultiplierFn) -> Result<SperbResidual> {
    let grads = w.gradients();
    let gmax = grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let cutoff = SPERB_CUTOFF * gmax;
    let vfn = &w.vorticity;
    // W as a nodal field; reuse the mapped stencils by swapping the values
    let mut wf = w.clone();
    for (k, gr) in grads.iter().enumerate() {
        let p = w.psi[k];
        wf.psi[k] = 0.5 * (gr[0] * gr[0] + gr[1] * gr[1]) + vfn.gamma_hat_clamped(p) + lam.big_lambda(p);
    }
    let mut acc = Accum::default();
    let (mut evaluated, mut excluded) = (0, 0);
    for (i, j) in w.interior_nodes() {
        let k = i * w.ny + j;
        let [px, py] = grads[k];
        let g2 = px * px + py * py;
        if !(g2.sqrt() > cutoff) {
            excluded += 1;
            continue;
        }
        let p = w.psi[k];
        let [wx, wy] = wf.gradient(i, j);
        let res = identity_residual(vfn, lam, p, [px, py], [wx, wy], wf.laplacian(i, j));
        acc.push(res, w.x[i], w.y(i, j));
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::AllNodesExcluded { cutoff });
    }
    Ok(SperbResidual { residual: acc.finish(), evaluated, excluded, cutoff })
}

fn identity_residual(vfn: &VorticityFn, lam: &MultiplierFn, psi: f64, gp: [f64; 2], gw: [f64; 2], lap_w: f64) -> f64 {
    let g2 = gp[0] * gp[0] + gp[1] * gp[1];
    let l = lam.lambda(psi);
    let c = 2.0 * l + vfn.gamma_clamped(psi);
    let l1 = -2.0 * (gw[0] - c * gp[0]);
    let l2 = -2.0 * (gw[1] - c * gp[1]);
    lap_w + (l1 * gw[0] + l2 * gw[1]) / g2 - lam.lambda_prime(psi) * g2 - c * l
}

/// Pointwise version of [`sperb_residual`] for flows with a continuous
/// gradient: `W` is formed from [`PlanarField::grad`] and differentiated by
/// fourth-order differences with step `h`.
pub fn sperb_residual_at(field: &impl PlanarField, vfn: &VorticityFn, lam: &MultiplierFn, points: &[[f64; 2]], h: f64) -> Result<SperbResidual> {
    let wfun = |x: f64, y: f64| {
        let [a, b] = field.grad(x, y);
        let p = field.psi(x, y);
        0.5 * (a * a + b * b) + vfn.gamma_hat_clamped(p) + lam.big_lambda(p)
    };
    let gmax = points.iter().map(|p| {
        let g = field.grad(p[0], p[1]);
        g[0].hypot(g[1])
    });
    let cutoff = SPERB_CUTOFF * gmax.fold(0.0, f64::max);
    let mut acc = Accum::default();
    let (mut evaluated, mut excluded) = (0, 0);
    for &[x, y] in points {
        let gp = field.grad(x, y);
        if !(gp[0].hypot(gp[1]) > cutoff) {
            excluded += 1;
            continue;
        }
        let d1 = |f: &dyn Fn(f64) -> f64| (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h);
        let d2 = |f: &dyn Fn(f64) -> f64| (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * f(0.0) + 16.0 * f(1.0) - f(2.0)) / (12.0 * h * h);
        let fx = |k: f64| wfun(x + k * h, y);
        let fy = |k: f64| wfun(x, y + k * h);
        let gw = [d1(&fx), d1(&fy)];
        let lap = d2(&fx) + d2(&fy);
        acc.push(identity_residual(vfn, lam, field.psi(x, y), gp, gw, lap), x, y);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::AllNodesExcluded { cutoff });
    }
    Ok(SperbResidual { residual: acc.finish(), evaluated, excluded, cutoff })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NqtCheck {
    pub holds: bool,
    /// `min (E - min_S |grad psi|^2)` over nodes, `E = |grad psi|^2 + 2 Gamma_hat(psi)`.
    pub lower_margin: f64,
    /// `min (max_S |grad psi|^2 - E)` over nodes.
    pub upper_margin: f64,
    pub surface_min: f64,
    pub surface_max: f64,
}

/// Tolerance on the two-sided bound.
pub const NQT_TOL: f64 = 1e-6;

/// Check `min_S |grad psi|^2 <= |grad psi|^2 + 2 Gamma_hat(psi) <= max_S |grad psi|^2`.
pub fn nqt_check(w: &WaveField) -> Result<NqtCheck> {
    let grads = w.gradients();
    let top = w.ny - 1;
    let gmax = grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..w.nx() {
        let [a, b] = grads[i * w.ny + top];
        let g2 = a * a + b * b;
        smin = smin.min(g2);
        smax = smax.max(g2);
    }
    let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
    for i in 0..w.nx() {
        for j in 0..top {
            let k = i * w.ny + j;
            let [a, b] = grads[k];
            if a.hypot(b) <= 1e-12 * gmax.max(f64::MIN_POSITIVE) {
                return Err(Error::StagnationInterior { x: w.x[i], y: w.y(i, j) });
            }
            let e = a * a + b * b + 2.0 * w.vorticity.gamma_hat_clamped(w.psi[k]);
            lower = lower.min(e - smin);
            upper = upper.min(smax - e);
        }
    }
    Ok(NqtCheck {
        holds: lower >= -NQT_TOL && upper >= -NQT_TOL,
        lower_margin: lower,
        upper_margin: upper,
        surface_min: smin,
        surface_max: smax,
    })
}

/// Ratio beyond which the square-root bound is reported as unbounded.
pub const SQRT_BOUND_LIMIT: f64 = 1e6;

/// Smallest `K` with `|grad psi|^2 <= K |Y|` on the grid, for fields
/// normalised so that `Q = 0`. Nodes with `|Y|` below the grid spacing are
/// skipped.
pub fn sqrt_bound_fit(w: &WaveField) -> Result<f64> {
    if w.q.abs() > 1e-12 * (1.0 + w.g) {
        return Err(Error::Precondition(format!("field must be shifted to Q = 0 (Q = {})", w.q)));
    }
    let hmax = (0..w.nx()).map(|i| w.column_height(i)).fold(0.0, f64::max);
    let spacing = w.dx().max(w.dsigma() * hmax);
    let mut k: f64 = 0.0;
    for i in 0..w.nx() {
        for j in 0..w.ny {
            let y = w.y(i, j);
            if y.abs() < spacing {
                continue;
            }
            let [a, b] = w.gradient(i, j);
            k = k.max((a * a + b * b) / y.abs());
        }
    }
    if k > SQRT_BOUND_LIMIT {
        return Err(Error::Unbounded { ratio: k });
    }
    Ok(k)
}
