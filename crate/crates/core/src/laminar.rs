//! X-independent (laminar) exact solutions.
//!
//! A laminar stream with surface speed squared `lambda` has the first
//! integral `psi_Y^2 + 2 gamma_hat(psi) = lambda`, so the height of the
//! streamline `psi = r` below the surface is `Upsilon_lambda(r) =
//! int_0^r (lambda - 2 gamma_hat)^{-1/2}`. The Bernoulli closure then reads
//! `Q - 2 g F = lambda + 2 g Upsilon_lambda(B) = f(lambda)`, which is the
//! function of [`crate::vorticity::QBound`]. `lambda = 0` with `gamma(0) < 0`
//! is the trivial extreme wave.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;
use crate::vorticity::{cs_q_bound, VorticityFn};

/// Samples kept in [`LaminarWave::profile`].
pub const PROFILE_SAMPLES: usize = 129;

#[derive(Debug, Clone, Serialize)]
pub struct LaminarWave {
    #[serde(skip)]
    pub vorticity: VorticityFn,
    pub g: f64,
    /// Bed height `F`.
    pub bed: f64,
    pub depth: f64,
    pub q: f64,
    /// Surface speed squared.
    pub lambda: f64,
    pub is_extreme: bool,
    /// `(Y, psi)` from the bed up to the surface.
    pub profile: Vec<(f64, f64)>,
}

/// Which depth to take when the Bernoulli closure has two roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthRoot {
    /// Largest depth (slow stream).
    #[default]
    Deepest,
    /// Smallest depth (fast stream).
    Shallowest,
}

impl LaminarWave {
    fn build(vorticity: VorticityFn, g: f64, bed: f64, lambda: f64, is_extreme: bool) -> Result<Self> {
        let depth = vorticity.upsilon(lambda, vorticity.b())?;
        let q = lambda + 2.0 * g * (bed + depth);
        let mut wave = Self { vorticity, g, bed, depth, q, lambda, is_extreme, profile: Vec::new() };
        let n = PROFILE_SAMPLES;
        wave.profile = (0..n)
            .map(|k| {
                let y = bed + depth * k as f64 / (n - 1) as f64;
                wave.psi_at(y).map(|p| (y, p))
            })
            .collect::<Result<_>>()?;
        Ok(wave)
    }

    pub fn b(&self) -> f64 {
        self.vorticity.b()
    }

    pub fn surface(&self) -> f64 {
        self.bed + self.depth
    }

    /// Stream function at height `y`, by solving `Upsilon_lambda(psi) = surface - y`.
    pub fn psi_at(&self, y: f64) -> Result<f64> {
        let s = self.surface() - y;
        if s < -1e-12 * self.depth || s > self.depth * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain { value: y, lo: self.bed, hi: self.surface() });
        }
        let b = self.b();
        if s <= 0.0 {
            return Ok(0.0);
        }
        if s >= self.depth {
            return Ok(b);
        }
        // Newton in u = sqrt(psi) with a bisection safeguard
        let v = &self.vorticity;
        let lam = self.lambda;
        let phi = |u: f64| -> Result<f64> { Ok(v.upsilon(lam, (u * u).min(b))? - s) };
        let dphi = |u: f64| -> f64 {
            let t = (u * u).min(b);
            let denom = lam - 2.0 * v.gamma_hat(t).unwrap_or(f64::NAN);
            if u == 0.0 {
                let g0 = v.gamma_clamped(0.0);
                if lam > 0.0 {
                    return 0.0;
                }
                return 2.0 / (-2.0 * g0).sqrt();
            }
            2.0 * u / denom.sqrt()
        };
        let (mut lo, mut hi) = (0.0, b.sqrt());
        let mut u = (s / self.depth).clamp(0.0, 1.0) * hi;
        for _ in 0..200 {
            let val = phi(u)?;
            if val > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let d = dphi(u);
            let mut next = u - val / d;
            if !(next.is_finite() && next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= f64::EPSILON * u.max(1e-300) || hi - lo <= f64::EPSILON * hi {
                u = next;
                break;
            }
            u = next;
        }
        Ok((u * u).min(b))
    }

    /// `psi_Y` at height `y` from the first integral.
    pub fn psi_y_at(&self, y: f64) -> Result<f64> {
        let p = self.psi_at(y)?;
        let v = self.lambda - 2.0 * self.vorticity.gamma_hat(p)?;
        Ok(-v.max(0.0).sqrt())
    }
}

/// The trivial extreme wave: flat surface made entirely of stagnation points.
pub fn trivial_extreme(vfn: &VorticityFn, g: f64, bed: f64) -> Result<LaminarWave> {
    if !(g > 0.0) {
        return Err(Error::Precondition(format!("g must be positive, got {g}")));
    }
    let g0 = vfn.gamma(0.0)?;
    if !(g0 < 0.0) {
        return Err(Error::InvalidVorticity(format!(
            "trivial extreme wave needs gamma(0) < 0, got {g0}"
        )));
    }
    if !vfn.is_nonpositive() {
        return Err(Error::InvalidVorticity("trivial extreme wave needs gamma <= 0 on [0, B]".into()));
    }
    LaminarWave::build(vfn.clone(), g, bed, 0.0, true)
}

/// Laminar stream with Bernoulli constant `q` above a bed at height `bed`.
pub fn laminar_regular(vfn: &VorticityFn, g: f64, q: f64, bed: f64, root: DepthRoot) -> Result<LaminarWave> {
    if !(g > 0.0) {
        return Err(Error::Precondition(format!("g must be positive, got {g}")));
    }
    let qb = cs_q_bound(vfn, g)?;
    let target = q - 2.0 * g * bed;
    let tol = 1e-12 * target.abs().max(1.0);
    let lambda0 = qb.lambda0;
    let fmin = qb.f(lambda0)?;
    if target < fmin - tol {
        return Err(Error::NoRoot { q, lo: qb.lower, hi: lambda0 });
    }
    let lambda = if (target - fmin).abs() <= tol {
        lambda0
    } else {
        let mut roots = Vec::new();
        // slow branch on [lower, lambda0], where f decreases
        match qb.f(qb.lower) {
            Ok(fl) if (fl - target).abs() <= tol => roots.push(qb.lower),
            Ok(fl) if fl > target => {
                roots.push(quad::bisect(|l| Ok(qb.f(l)? - target), qb.lower, lambda0, 1e-15 * (1.0 + lambda0))?)
            }
            Ok(_) => {}
            Err(_) => {
                // f blows up at the left end; find a finite left bracket
                let span = lambda0 - qb.lower;
                let mut off = 0.5 * span;
                let mut found = None;
                for _ in 0..60 {
                    if qb.f(qb.lower + off).map(|v| v > target).unwrap_or(true) {
                        found = Some(qb.lower + off);
                        break;
                    }
                    off *= 0.1;
                }
                if let Some(lo) = found {
                    if qb.f(lo).is_ok() {
                        roots.push(quad::bisect(|l| Ok(qb.f(l)? - target), lo, lambda0, 1e-15 * (1.0 + lambda0))?);
                    }
                }
            }
        }
        // fast branch on [lambda0, inf)
        let mut hi = 2.0 * lambda0.max(1e-3);
        let mut guard = 0;
        while qb.f(hi)? < target {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::NoRoot { q, lo: qb.lower, hi });
            }
        }
        roots.push(quad::bisect(|l| Ok(qb.f(l)? - target), lambda0, hi, 1e-15 * (1.0 + hi))?);
        match root {
            DepthRoot::Deepest => roots[0],
            DepthRoot::Shallowest => *roots.last().unwrap(),
        }
    };
    let is_extreme = lambda == 0.0;
    let mut wave = LaminarWave::build(vfn.clone(), g, bed, lambda, is_extreme)?;
    // keep the requested constant exactly
    wave.q = q;
    Ok(wave)
}
