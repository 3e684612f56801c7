//! Local analysis at a stagnation point: the Stokes corner flow and its
//! two-angle generalisation, the limiting free-boundary problem, rescaling,
//! corner-angle estimation and cone lower bounds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fmt_f, Accum, Extent, PlanarField, ResidualEntry, SurfaceProfile, WaveField};
use crate::vorticity::VorticityFn;

/// Harmonic flow in the wedge below the rays `Y = -tan(a+) X` (X >= 0) and
/// `Y = tan(a-) X` (X <= 0):
/// `psi = beta * Re[(i e^{i delta} Z)^p]`, `delta = (a+ - a-)/2`,
/// `p = pi / (pi - a+ - a-)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerFlow {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub g: f64,
}

/// The Stokes corner: both half-angles `pi/6`, strength `(2/3) sqrt(g)`.
pub fn stokes_corner(g: f64) -> Result<CornerFlow> {
    corner_family(PI / 6.0, PI / 6.0, 2.0 / 3.0 * g.sqrt(), g)
}

pub fn corner_family(alpha_plus: f64, alpha_minus: f64, beta: f64, g: f64) -> Result<CornerFlow> {
    let ok = |a: f64| (0.0..=PI / 2.0).contains(&a);
    if !ok(alpha_plus) || !ok(alpha_minus) || !(alpha_plus + alpha_minus < PI) {
        return Err(Error::Precondition(format!("half-angles ({alpha_plus}, {alpha_minus}) out of range")));
    }
    if !(beta >= 0.0) || !(g > 0.0) {
        return Err(Error::Precondition("beta must be nonnegative and g positive".into()));
    }
    Ok(CornerFlow { alpha_plus, alpha_minus, beta, g })
}

impl CornerFlow {
    pub fn exponent(&self) -> f64 {
        PI / (PI - self.alpha_plus - self.alpha_minus)
    }

    fn rotation(&self) -> Complex64 {
        Complex64::i() * Complex64::from_polar(1.0, 0.5 * (self.alpha_plus - self.alpha_minus))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        y <= self.surface_height(x)
    }

    /// Full wedge opening in radians.
    pub fn aperture(&self) -> f64 {
        PI - self.alpha_plus - self.alpha_minus
    }

    /// Samples on a window as a [`WaveField`] with `Q = 0` and no bed.
    pub fn window_field(&self, x0: f64, x1: f64, bottom: f64, nx: usize, ny: usize) -> Result<WaveField> {
        let vort = VorticityFn::zero(1.0)?;
        let mut w = WaveField::tabulate(
            Extent::Window { x0, x1 },
            nx,
            ny,
            bottom,
            |x| self.surface_height(x),
            |x, y| self.psi(x, y),
            vort,
            self.g,
            0.0,
        )?;
        // the surface row is zero by construction
        for i in 0..nx {
            w.psi[i * ny + ny - 1] = 0.0;
        }
        w.symmetric = self.alpha_plus == self.alpha_minus;
        Ok(w)
    }
}

impl PlanarField for CornerFlow {
    fn psi(&self, x: f64, y: f64) -> f64 {
        if !self.contains(x, y) || self.beta == 0.0 {
            return 0.0;
        }
        let w = (self.rotation() * Complex64::new(x, y)).powf(self.exponent());
        (self.beta * w.re).max(0.0)
    }

    fn surface_height(&self, x: f64) -> f64 {
        if x >= 0.0 {
            -self.alpha_plus.tan() * x
        } else {
            self.alpha_minus.tan() * x
        }
    }

    /// Exact gradient `beta * (Re f', -Im f')` with `f = (cZ)^p`.
    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        if self.beta == 0.0 || (x == 0.0 && y == 0.0) {
            return [0.0, 0.0];
        }
        let c = self.rotation();
        let p = self.exponent();
        let d = c * p * (c * Complex64::new(x, y)).powf(p - 1.0) * self.beta;
        [d.re, -d.im]
    }
}

/// Outcome of [`verify_blow`]. Each entry is a sup/rms/argmax triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowReport {
    /// Laplacian of `psi` at interior samples.
    pub harmonic: ResidualEntry,
    /// Violation of `psi >= 0` and `psi_Y <= 0`.
    pub sign: ResidualEntry,
    /// `psi` on the free boundary.
    pub boundary: ResidualEntry,
    /// `|grad psi|^2 + 2 g Y` on the free boundary.
    pub bernoulli: ResidualEntry,
    pub tol: f64,
    pub pass: bool,
}

/// Sampling used by [`verify_blow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowSampling {
    /// Samples cover `[-radius, radius] x [-radius, 0]` around the origin.
    pub radius: f64,
    /// Interior grid is `n x n`.
    pub n: usize,
    pub boundary_samples: usize,
    /// Samples closer than `inner * radius` to the origin are skipped.
    pub inner: f64,
    pub tol: f64,
}

impl Default for BlowSampling {
    fn default() -> Self {
        Self { radius: 1.0, n: 128, boundary_samples: 200, inner: 0.05, tol: 1e-6 }
    }
}

/// Check the limiting problem: harmonic in the fluid, `psi >= 0`,
/// `psi_Y <= 0`, `psi = 0` and `|grad psi|^2 + 2gY = 0` on the boundary.
pub fn verify_blow(field: &(impl PlanarField + Sync), g: f64, opts: &BlowSampling) -> Result<BlowReport> {
    let r0 = opts.radius;
    // the surface must fall away from the crest on both sides
    let m = 4 * opts.boundary_samples;
    for k in 1..=m {
        let x = r0 * k as f64 / m as f64;
        let xp = r0 * (k - 1) as f64 / m as f64;
        if field.surface_height(x) > field.surface_height(xp) + 1e-12 {
            return Err(Error::NonMonotoneSurface { x });
        }
        if field.surface_height(-x) > field.surface_height(-xp) + 1e-12 {
            return Err(Error::NonMonotoneSurface { x: -x });
        }
    }

    let n = opts.n;
    let pts: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (-r0 + 2.0 * r0 * (i as f64 + 0.5) / n as f64, -r0 * (j as f64 + 0.5) / n as f64))
        .collect();
    let evals: Vec<Option<(f64, f64, f64, f64, f64)>> = pts
        .par_iter()
        .map(|&(x, y)| {
            let r = x.hypot(y);
            if r < opts.inner * r0 {
                return None;
            }
            let h = 0.01 * r;
            // keep the whole stencil inside the fluid
            let clear = (-2..=2).all(|k| {
                let xs = x + k as f64 * h;
                y + 2.0 * h < field.surface_height(xs) - 1e-3 * r
            });
            if !clear {
                return None;
            }
            let f = |a: f64, b: f64| field.psi(a, b);
            let c = f(x, y);
            let d2 = |p2: f64, p1: f64, m1: f64, m2: f64| (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
            let lap = d2(f(x + 2.0 * h, y), f(x + h, y), f(x - h, y), f(x - 2.0 * h, y))
                + d2(f(x, y + 2.0 * h), f(x, y + h), f(x, y - h), f(x, y - 2.0 * h));
            let gy = field.grad(x, y)[1];
            Some((x, y, lap, (-c).max(0.0), gy.max(0.0)))
        })
        .collect();
    let mut harmonic = Accum::default();
    let mut sign = Accum::default();
    for (x, y, lap, neg, up) in evals.into_iter().flatten() {
        harmonic.push(lap, x, y);
        sign.push(neg.max(up), x, y);
    }

    let mut boundary = Accum::default();
    let mut bern = Accum::default();
    let half = opts.boundary_samples / 2;
    for k in 0..half {
        let t = opts.inner + (1.0 - opts.inner) * k as f64 / (half - 1).max(1) as f64;
        for x in [t * r0, -t * r0] {
            let y = field.surface_height(x);
            let [gx, gy] = field.grad(x, y);
            boundary.push(field.psi(x, y), x, y);
            bern.push(gx * gx + gy * gy + 2.0 * g * y, x, y);
        }
    }
    let (harmonic, sign, boundary, bernoulli) = (harmonic.finish(), sign.finish(), boundary.finish(), bern.finish());
    let pass = [harmonic, sign, boundary, bernoulli].iter().all(|e| e.sup <= opts.tol);
    Ok(BlowReport { harmonic, sign, boundary, bernoulli, tol: opts.tol, pass })
}

/// Least-squares strength for which the corner family best satisfies the
/// Bernoulli condition on the boundary samples.
pub fn fit_strength(alpha_plus: f64, alpha_minus: f64, g: f64, opts: &BlowSampling) -> Result<f64> {
    let unit = corner_family(alpha_plus, alpha_minus, 1.0, g)?;
    let half = opts.boundary_samples / 2;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..half {
        let t = opts.inner + (1.0 - opts.inner) * k as f64 / (half - 1).max(1) as f64;
        for x in [t * opts.radius, -t * opts.radius] {
            let y = unit.surface_height(x);
            let [gx, gy] = unit.grad(x, y);
            let a = gx * gx + gy * gy;
            num += a * (-2.0 * g * y);
            den += a * a;
        }
    }
    Ok(if den > 0.0 { (num / den).max(0.0).sqrt() } else { 0.0 })
}

/// Rectangular sampling window of a blow-up frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for FrameWindow {
    fn default() -> Self {
        Self { x0: -1.0, x1: 1.0, y0: -1.0, y1: 0.0, nx: 65, ny: 33 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFrame {
    pub eps: f64,
    pub center: [f64; 2],
    pub window: FrameWindow,
    /// Row-major over `x` then `y`: `psi[i * ny + j]`.
    pub psi: Vec<f64>,
    /// Rescaled surface `eta(eps x)/eps` at the window abscissae.
    pub surface: Vec<f64>,
}

impl BlowupFrame {
    pub fn xs(&self) -> Vec<f64> {
        let w = &self.window;
        (0..w.nx).map(|i| w.x0 + (w.x1 - w.x0) * i as f64 / (w.nx - 1) as f64).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        let w = &self.window;
        (0..w.ny).map(|j| w.y0 + (w.y1 - w.y0) * j as f64 / (w.ny - 1) as f64).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.psi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_difference(&self, other: &BlowupFrame) -> f64 {
        self.psi.iter().zip(&other.psi).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|psi(x) - psi(-x)|`; meaningful for windows symmetric about 0.
    pub fn evenness_defect(&self) -> f64 {
        let (nx, ny) = (self.window.nx, self.window.ny);
        let mut worst: f64 = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                worst = worst.max((self.psi[i * ny + j] - self.psi[(nx - 1 - i) * ny + j]).abs());
            }
        }
        worst
    }

    /// Frame in the grid CSV format (no bed, `Q = 0`).
    pub fn to_csv(&self, g: f64) -> String {
        let mut s = String::new();
        let w = &self.window;
        let _ = writeln!(s, "# g,B,L,F,Q,Nx,Ny");
        let _ = writeln!(s, "# {},,{},,{},{},{}", fmt_f(g), fmt_f(0.5 * (w.x1 - w.x0)), fmt_f(0.0), w.nx, w.ny);
        let _ = writeln!(s, "X,Y,psi");
        let (xs, ys) = (self.xs(), self.ys());
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", fmt_f(*x), fmt_f(*y), fmt_f(self.psi[i * w.ny + j]));
            }
        }
        s
    }
}

/// Horizontal and vertical reach of a source field, for window checks.
pub trait SourceDomain {
    /// `(half-width, lowest admissible Y)`; `None` for unbounded flows.
    fn reach(&self) -> (Option<f64>, Option<f64>) {
        (None, None)
    }
}

impl SourceDomain for CornerFlow {}

impl SourceDomain for WaveField {
    fn reach(&self) -> (Option<f64>, Option<f64>) {
        let half = match self.extent {
            Extent::Periodic { half_period } => half_period,
            Extent::Window { x0, x1 } => x0.abs().min(x1.abs()),
        };
        (Some(half), Some(self.bottom))
    }
}

/// `psi^eps(X, Y) = eps^{-3/2} psi(eps X, eps Y)` around the origin.
pub fn rescale(field: &(impl PlanarField + SourceDomain + Sync), eps: f64, window: &FrameWindow) -> Result<BlowupFrame> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("scale must be positive, got {eps}")));
    }
    let (reach_x, reach_y) = field.reach();
    let wx = window.x0.abs().max(window.x1.abs());
    let mut max_eps = f64::INFINITY;
    if let Some(l) = reach_x {
        max_eps = max_eps.min(l / wx);
    }
    if let Some(b) = reach_y {
        if window.y0 < 0.0 && b < 0.0 {
            max_eps = max_eps.min(b / window.y0);
        }
    }
    if eps > max_eps {
        return Err(Error::WindowOutsideDomain { max_eps });
    }
    let frame = BlowupFrame { eps, center: [0.0, 0.0], window: *window, psi: Vec::new(), surface: Vec::new() };
    let (xs, ys) = (frame.xs(), frame.ys());
    let scale = eps.powf(-1.5);
    let psi: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&x| ys.iter().map(move |&y| (x, y)).collect::<Vec<_>>())
        .map(|(x, y)| scale * field.psi(eps * x, eps * y))
        .collect();
    let surface = xs.iter().map(|&x| field.surface_height(eps * x) / eps).collect();
    Ok(BlowupFrame { psi, surface, ..frame })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerClass {
    Corner,
    Flat,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideAngle {
    /// Limit of `-v/|u|` along the profile.
    pub q: f64,
    /// Spread of the estimate over the last three fitting ranges.
    pub drift: f64,
    /// `|u|` bounds of the smallest fitting range.
    pub fit_range: [f64; 2],
    pub class: CornerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerAngle {
    pub q_plus: SideAngle,
    pub q_minus: SideAngle,
}

/// Estimate the one-sided slopes `q = lim -v/|u|` of a profile at a crest at
/// the origin by through-origin regression over dyadic ranges.
pub fn corner_angle(profile: &SurfaceProfile) -> Result<CornerAngle> {
    let pts = profile.points();
    let side = |sign: f64| -> Result<SideAngle> {
        let mut s: Vec<(f64, f64)> =
            pts.iter().filter(|p| p.0 * sign > 0.0).map(|&(u, v)| (u.abs(), v)).collect();
        s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in s.windows(2) {
            if w[1].1 > w[0].1 + 1e-14 {
                return Err(Error::NonMonotoneSurface { x: sign * w[1].0 });
            }
        }
        let smax = s.last().map(|p| p.0).ok_or(Error::InsufficientResolution { found: 0 })?;
        let mut estimates = Vec::new();
        let mut ranges = Vec::new();
        let mut last_count = 0;
        for k in 0..60 {
            let hi = smax * 2f64.powi(-k);
            let lo = hi * 0.125;
            let inr: Vec<&(f64, f64)> = s.iter().filter(|p| p.0 >= lo && p.0 <= hi).collect();
            last_count = inr.len();
            if inr.len() < 8 {
                break;
            }
            let num: f64 = inr.iter().map(|p| -p.1 * p.0).sum();
            let den: f64 = inr.iter().map(|p| p.0 * p.0).sum();
            estimates.push(num / den);
            ranges.push([lo, hi]);
        }
        if estimates.len() < 3 {
            return Err(Error::InsufficientResolution { found: last_count });
        }
        let tail = &estimates[estimates.len() - 3..];
        let drift = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - tail.iter().copied().fold(f64::INFINITY, f64::min);
        let q = *estimates.last().unwrap();
        let class = if drift >= 0.01 {
            CornerClass::Inconclusive
        } else if (q - 1.0 / 3f64.sqrt()).abs() < 0.01 {
            CornerClass::Corner
        } else if q.abs() < 0.01 {
            CornerClass::Flat
        } else {
            CornerClass::Inconclusive
        };
        Ok(SideAngle { q, drift, fit_range: *ranges.last().unwrap(), class })
    };
    Ok(CornerAngle { q_plus: side(1.0)?, q_minus: side(-1.0)? })
}

/// Truncated cone with vertex at the origin. Angles in radians, the axis
/// measured from the positive `X` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub axis: f64,
    pub half_aperture: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ConeOutcome {
    /// Lower bound `psi >= kappa r^mu cos(mu t)` holds on the samples.
    Kappa { kappa: f64, mu: f64 },
    /// The ratio decays along a ray across three dyadic scales.
    Violation { mu: f64, point: [f64; 2], ratios: [f64; 3] },
}

/// Scales and angles sampled by [`oddson_cone_check`].
pub const CONE_SCALES: usize = 16;
pub const CONE_ANGLES: usize = 31;

/// Fit `kappa = min psi / (r^mu cos(mu t))` over the cone, `mu = pi/(2 a)`.
pub fn oddson_cone_check(field: &impl PlanarField, cone: &Cone, delta: f64) -> Result<ConeOutcome> {
    let a = cone.half_aperture;
    if !(a > 0.0 && a < PI) || !(cone.r0 > 0.0) {
        return Err(Error::Precondition("cone needs 0 < half-aperture < pi and r0 > 0".into()));
    }
    let mu = PI / (2.0 * a);
    // closed containment: both edges and the arc inside the fluid, psi < delta
    let edge_samples = 64;
    for k in 1..=edge_samples {
        let r = cone.r0 * k as f64 / edge_samples as f64;
        for t in [-a, a] {
            let th = cone.axis + t;
            let (x, y) = (r * th.cos(), r * th.sin());
            let top = field.surface_height(x);
            if y > top + 1e-9 * (1.0 + r) {
                return Err(Error::ConeNotContained(format!(
                    "edge point ({x}, {y}) lies above the surface ({top})"
                )));
            }
        }
    }
    for k in 0..=edge_samples {
        let th = cone.axis - a + 2.0 * a * k as f64 / edge_samples as f64;
        let (x, y) = (cone.r0 * th.cos(), cone.r0 * th.sin());
        if y > field.surface_height(x) + 1e-9 {
            return Err(Error::ConeNotContained(format!("arc point ({x}, {y}) lies above the surface")));
        }
        if !(field.psi(x, y) < delta) {
            return Err(Error::ConeNotContained(format!("psi >= delta at ({x}, {y})")));
        }
    }
    let mut kappa = f64::INFINITY;
    for ka in 0..CONE_ANGLES {
        let t = -a + 2.0 * a * (ka as f64 + 0.5) / CONE_ANGLES as f64;
        let th = cone.axis + t;
        let ratios: Vec<(f64, [f64; 2])> = (0..CONE_SCALES)
            .map(|m| {
                let r = cone.r0 * 2f64.powi(-(m as i32));
                let (x, y) = (r * th.cos(), r * th.sin());
                (field.psi(x, y) / (r.powf(mu) * (mu * t).cos()), [x, y])
            })
            .collect();
        for w in ratios.windows(3).rev().take(1) {
            let dec = |p: f64, q: f64| q < p * (1.0 - 1e-6);
            if dec(w[0].0, w[1].0) && dec(w[1].0, w[2].0) {
                return Ok(ConeOutcome::Violation { mu, point: w[2].1, ratios: [w[0].0, w[1].0, w[2].0] });
            }
        }
        kappa = ratios.iter().fold(kappa, |m, r| m.min(r.0));
    }
    Ok(ConeOutcome::Kappa { kappa, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::shift_datum;
    use crate::laminar::trivial_extreme;

    #[test]
    fn stokes_point_values() {
        let s = stokes_corner(1.0).unwrap();
        assert!((s.psi(0.0, -1.0) - 2.0 / 3.0).abs() < 1e-15);
        let y = -1.0 / 3f64.sqrt();
        assert!(s.psi(1.0, y).abs() < 1e-15);
        let [gx, gy] = s.grad(1.0, y);
        let g2 = gx * gx + gy * gy;
        assert!((g2 - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((g2 + 2.0 * y).abs() < 1e-12);
    }

    #[test]
    fn stokes_matches_complex_formula() {
        // (2/3) sqrt(g) Im(i (iZ)^{3/2}) written out directly
        let g = 2.5;
        let s = stokes_corner(g).unwrap();
        for &(x, y) in &[(0.3, -0.9), (-0.2, -0.4), (0.0, -2.0), (0.7, -0.41)] {
            let z = Complex64::new(x, y);
            let i = Complex64::i();
            let direct = 2.0 / 3.0 * g.sqrt() * (i * (i * z).powf(1.5)).im;
            assert!((s.psi(x, y) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn family_reduces_to_stokes_and_uniform_stream() {
        let s = stokes_corner(1.0).unwrap();
        let f = corner_family(PI / 6.0, PI / 6.0, 2.0 / 3.0, 1.0).unwrap();
        let u = corner_family(0.0, 0.0, 1.0, 1.0).unwrap();
        for k in 0..50 {
            let x = -1.0 + 2.0 * k as f64 / 49.0;
            for y in [-0.6, -1.3, -2.0] {
                assert!((s.psi(x, y) - f.psi(x, y)).abs() < 1e-12);
                assert!((u.psi(x, y) + y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn family_vanishes_on_rays_and_is_harmonic() {
        let f = corner_family(0.4, 0.9, 1.3, 1.0).unwrap();
        for k in 1..20 {
            let r = k as f64 / 10.0;
            let (a, b) = (f.alpha_plus, f.alpha_minus);
            assert!(f.psi(r * a.cos(), -r * a.sin()).abs() < 1e-10);
            assert!(f.psi(-r * b.cos(), -r * b.sin()).abs() < 1e-10);
        }
        let opts = BlowSampling { n: 24, inner: 0.2, ..Default::default() };
        let rep = verify_blow(&f, 1.0, &opts).unwrap();
        assert!(rep.harmonic.sup <= 1e-8, "{:?}", rep.harmonic);
        assert!(rep.boundary.sup <= 1e-10);
    }

    #[test]
    fn verify_blow_examples() {
        let s = stokes_corner(1.0).unwrap();
        let rep = verify_blow(&s, 1.0, &BlowSampling::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
        let trivial = corner_family(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(verify_blow(&trivial, 1.0, &BlowSampling::default()).unwrap().pass);
        let quarter = corner_family(PI / 4.0, PI / 4.0, 1.0, 1.0).unwrap();
        let rep = verify_blow(&quarter, 1.0, &BlowSampling::default()).unwrap();
        assert!(!rep.pass && rep.bernoulli.sup > 1e-6);
        assert!(rep.harmonic.sup <= 1e-6 && rep.boundary.sup <= 1e-6);
    }

    #[test]
    fn fitted_strength_recovers_stokes() {
        let beta = fit_strength(PI / 6.0, PI / 6.0, 1.0, &BlowSampling::default()).unwrap();
        assert!((beta - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(fit_strength(0.0, 0.0, 1.0, &BlowSampling::default()).unwrap(), 0.0);
    }

    struct Bumpy;
    impl PlanarField for Bumpy {
        fn psi(&self, _: f64, y: f64) -> f64 {
            -y
        }
        fn surface_height(&self, x: f64) -> f64 {
            0.1 * (10.0 * x).sin()
        }
    }

    #[test]
    fn non_monotone_surface_rejected() {
        assert!(matches!(
            verify_blow(&Bumpy, 1.0, &BlowSampling::default()),
            Err(Error::NonMonotoneSurface { .. })
        ));
    }

    #[test]
    fn stokes_rescale_is_scale_invariant() {
        let s = stokes_corner(1.0).unwrap();
        let win = FrameWindow::default();
        let base = rescale(&s, 1.0, &win).unwrap();
        for k in 1..=6 {
            let fr = rescale(&s, 10f64.powi(-k), &win).unwrap();
            assert!(fr.max_difference(&base) <= 1e-8);
        }
        assert!(base.evenness_defect() < 1e-12);
        assert!(base.min_value() >= 0.0);
    }

    #[test]
    fn identity_rescale() {
        let s = stokes_corner(1.0).unwrap();
        let win = FrameWindow { nx: 9, ny: 5, ..Default::default() };
        let fr = rescale(&s, 1.0, &win).unwrap();
        let (xs, ys) = (fr.xs(), fr.ys());
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                assert_eq!(fr.psi[i * 5 + j], s.psi(*x, *y));
            }
        }
    }

    fn shifted_extreme(n: usize) -> WaveField {
        let v = VorticityFn::constant(-1.0, 1.0).unwrap();
        let lw = trivial_extreme(&v, 1.0, 0.0).unwrap();
        let w = WaveField::from_laminar(&lw, 1.0, n, n).unwrap();
        let shift = w.q / (2.0 * w.g);
        shift_datum(&w, shift)
    }

    #[test]
    fn extreme_rescale_decays_like_sqrt_eps() {
        let w = shifted_extreme(32);
        assert_eq!(w.q, 0.0);
        let win = FrameWindow::default();
        let a = rescale(&w, 1e-2, &win).unwrap().sup_norm();
        let b = rescale(&w, 1e-4, &win).unwrap().sup_norm();
        assert!((a / b - 10.0).abs() < 1e-6, "{}", a / b);
        assert!((a - 0.1 * 0.5).abs() < 1e-9);
    }

    #[test]
    fn rescale_window_outside_domain() {
        let w = shifted_extreme(16);
        match rescale(&w, 2.0, &FrameWindow::default()) {
            Err(Error::WindowOutsideDomain { max_eps }) => assert!((max_eps - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    fn graph(f: impl Fn(f64) -> f64) -> SurfaceProfile {
        let x: Vec<f64> = (-2000..=2000).map(|k| k as f64 / 2000.0).collect();
        let eta = x.iter().map(|&v| f(v)).collect();
        SurfaceProfile::Graph { x, eta }
    }

    #[test]
    fn corner_angle_examples() {
        let c = corner_angle(&graph(|x| -x.abs() / 3f64.sqrt())).unwrap();
        for s in [c.q_plus, c.q_minus] {
            assert!((s.q - 1.0 / 3f64.sqrt()).abs() < 1e-3);
            assert_eq!(s.class, CornerClass::Corner);
        }
        let f = corner_angle(&graph(|_| 0.0)).unwrap();
        assert_eq!(f.q_plus.q, 0.0);
        assert_eq!(f.q_minus.class, CornerClass::Flat);
        let v = corner_angle(&graph(|x| -x.abs())).unwrap();
        assert!((v.q_plus.q - 1.0).abs() < 1e-12);
        assert_eq!(v.q_plus.class, CornerClass::Inconclusive);
    }

    #[test]
    fn corner_angle_needs_resolution() {
        let x: Vec<f64> = (-10..=10).map(|k| k as f64 / 10.0).collect();
        let eta = x.iter().map(|v: &f64| -v.abs()).collect();
        assert!(matches!(
            corner_angle(&SurfaceProfile::Graph { x, eta }),
            Err(Error::InsufficientResolution { .. })
        ));
    }

    #[test]
    fn cone_examples() {
        let s = stokes_corner(1.0).unwrap();
        let full = Cone { axis: -PI / 2.0, half_aperture: PI / 3.0, r0: 1.0 };
        match oddson_cone_check(&s, &full, 10.0).unwrap() {
            ConeOutcome::Kappa { kappa, mu } => {
                assert!((mu - 1.5).abs() < 1e-15);
                assert!((kappa - 2.0 / 3.0).abs() < 1e-9, "{kappa}");
            }
            v => panic!("{v:?}"),
        }
        let wide = Cone { half_aperture: 65f64.to_radians(), ..full };
        assert!(matches!(oddson_cone_check(&s, &wide, 10.0), Err(Error::ConeNotContained(_))));

        let w = shifted_extreme(64);
        let flat = Cone { axis: -PI / 2.0, half_aperture: 85f64.to_radians(), r0: 0.5 };
        assert!(matches!(oddson_cone_check(&w, &flat, 1.0).unwrap(), ConeOutcome::Violation { .. }));
    }

    #[test]
    fn window_field_has_zero_surface() {
        let s = stokes_corner(1.0).unwrap();
        let w = s.window_field(-1.0, 1.0, -1.0, 33, 17).unwrap();
        assert!(w.symmetric);
        assert!(w.evenness_defect() < 1e-15);
        assert_eq!(w.q, 0.0);
        assert_eq!(w.bed(), None);
    }
}
