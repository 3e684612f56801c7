//! The turning-angle integral equation on the half line,
//!
//! ```text
//! theta(x) = 1/(3 pi) * int_0^inf log|(x+y)/(x-y)| sin theta(y) / C(y) dy,
//! C(y) = int_0^y sin theta,
//! ```
//!
//! its fixed-point solution, the lower bound `2/(9 pi)` and the
//! reconstruction of the free boundary from `theta`.
//!
//! Everything is done in the variable `t = ln y`, where the kernel becomes
//! the even convolution kernel `k(u) = log|coth(u/2)|` with total mass
//! `pi^2/2`. Grids are geometric in `y`, hence uniform in `t`, so the
//! product-integration weights depend only on the node offset.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Lower bound on every admissible solution.
pub const VSQ_BOUND: f64 = 2.0 / (9.0 * PI);

/// `int_R k = pi^2 / 2`.
pub const KERNEL_MASS: f64 = PI * PI / 2.0;

/// `log|coth(u/2)| = log|(1 + e^u)/(1 - e^u)|`.
pub fn kernel(u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return f64::INFINITY;
    }
    if a > 40.0 {
        return 2.0 * (-a).exp();
    }
    ((1.0 + a.exp()) / a.exp_m1()).ln()
}

/// `k(u) + log|u|`, smooth through the origin.
fn kernel_regular(u: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 2f64.ln();
    }
    if a > 40.0 {
        return kernel(a) + a.ln();
    }
    ((1.0 + a.exp()) * a / a.exp_m1()).ln()
}

/// `int_a^inf k` for `a >= 0`.
fn kernel_tail(a: f64) -> f64 {
    if a >= 0.5 {
        // log coth(w/2) = 2 sum_{n odd} e^{-n w} / n
        let mut s = 0.0;
        let mut n = 1.0;
        loop {
            let term = (-n * a).exp() / (n * n);
            s += term;
            if term < 1e-19 * s {
                break;
            }
            n += 2.0;
        }
        2.0 * s
    } else {
        // near the origin k(w) = -log(w/2) + smooth
        let (z, w) = quad::gauss_legendre(20);
        let smooth: f64 = z
            .iter()
            .zip(&w)
            .map(|(zi, wi)| {
                let x = 0.5 * a * (zi + 1.0);
                let r = if x == 0.0 { 0.0 } else { ((1.0 + x.exp()) * x / (2.0 * x.exp_m1())).ln() };
                0.5 * a * wi * r
            })
            .sum();
        let head = if a == 0.0 { 0.0 } else { a - a * (0.5 * a).ln() };
        0.25 * PI * PI - head - smooth
    }
}

/// `int_{-inf}^v k`.
pub fn kernel_cdf(v: f64) -> f64 {
    if v <= 0.0 {
        kernel_tail(-v)
    } else {
        KERNEL_MASS - kernel_tail(v)
    }
}

/// `int_0^inf log|(x+y)/(x-y)| f(y) dy` for a function `f`.
///
/// `breaks` lists interior points where `f` is not smooth. The singular
/// part next to `y = x` is integrated exactly after subtracting the local
/// value of `y f(y)`; the kernel decays like `2x/y` in the far tail.
pub fn log_kernel_integral<F: Fn(f64) -> f64 + Sync>(x: f64, f: F, breaks: &[f64]) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::NonPositiveAbscissa(x));
    }
    let s = x.ln();
    let g = |t: f64| {
        let y = t.exp();
        y * f(y)
    };
    let span = 45.0;
    let mut cuts = vec![s - span, s - 1.0, s, s + 1.0, s + span];
    for &b in breaks {
        if b > 0.0 {
            let tb = b.ln();
            if tb > s - span && tb < s + span {
                cuts.push(tb);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let nudge = 1e-12 * s.abs().max(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let touches = (a - s).abs() < 1e-14 || (b - s).abs() < 1e-14;
        let near = b > s - 1.0 - 1e-14 && a < s + 1.0 + 1e-14;
        let piece = if touches || near {
            // subtract the value of g at the singular end (one-sided)
            let gs = if b <= s + 1e-14 { g(s - nudge) } else { g(s + nudge) };
            let smooth = quad::integrate(|t| if t == s { 0.0 } else { kernel(t - s) * (g(t) - gs) }, a, b, 1e-15, 1e-13)?;
            smooth + gs * (kernel_cdf(b - s) - kernel_cdf(a - s))
        } else {
            quad::integrate(|t| kernel(t - s) * g(t), a, b, 1e-15, 1e-13)?
        };
        total += piece;
    }
    Ok(total)
}

/// Geometric grid of `n` points on `[x_min, x_max]`.
pub fn geometric_grid(n: usize, x_min: f64, x_max: f64) -> Vec<f64> {
    let (a, b) = (x_min.ln(), x_max.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Default grid: 2048 nodes on `[1e-6, 1e6]`.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(2048, 1e-6, 1e6)
}

/// Log-step of a geometric grid, checked for uniformity.
fn log_step(x: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::Precondition("theta grid needs at least 3 nodes".into()));
    }
    if !(x[0] > 0.0) {
        return Err(Error::NonPositiveAbscissa(x[0]));
    }
    let h = (x[x.len() - 1].ln() - x[0].ln()) / (x.len() - 1) as f64;
    for (i, w) in x.windows(2).enumerate() {
        let hi = (w[1] / w[0]).ln();
        if !((hi - h).abs() <= 1e-9 * h) {
            return Err(Error::Precondition(format!("theta grid is not geometric at node {i}")));
        }
    }
    Ok(h)
}

/// `theta` on a geometric grid, extended by constants outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSolution {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ThetaSolution {
    pub fn new(x: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if x.len() != theta.len() {
            return Err(Error::Precondition("grid and theta lengths differ".into()));
        }
        log_step(&x)?;
        if let Some(i) = theta.iter().position(|t| !(*t >= 0.0 && *t <= 0.5 * PI)) {
            return Err(Error::Precondition(format!("theta[{i}] = {} outside [0, pi/2]", theta[i])));
        }
        Ok(Self { x, theta })
    }

    pub fn constant(x: Vec<f64>, c: f64) -> Result<Self> {
        let n = x.len();
        Self::new(x, vec![c; n])
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let theta = x.iter().map(|&y| f(y)).collect();
        Self::new(x, theta)
    }

    pub fn min(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation from a constant.
    pub fn sup_error(&self, c: f64) -> f64 {
        self.theta.iter().fold(0.0, |a, t| a.max((t - c).abs()))
    }

    /// `C(x_i) = int_0^{x_i} sin theta` with `sin theta` linear in `ln y`
    /// on each panel (exact for constants).
    pub fn cumulative(&self) -> Result<Vec<f64>> {
        let h = log_step(&self.x)?;
        let s: Vec<f64> = self.theta.iter().map(|t| t.sin()).collect();
        let em = h.exp_m1();
        let (ca, cb) = ((em - h) / h, (h * (em + 1.0) - em) / h);
        let mut c = Vec::with_capacity(self.x.len());
        let mut acc = self.x[0] * s[0];
        c.push(acc);
        for i in 1..self.x.len() {
            acc += self.x[i - 1] * (s[i - 1] * ca + s[i] * cb);
            c.push(acc);
        }
        Ok(c)
    }

    /// Errors with `QuaViolated` at the first node where `C <= 0`.
    pub fn check_qua(&self) -> Result<Vec<f64>> {
        let c = self.cumulative()?;
        if let Some(i) = c.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::QuaViolated { x: self.x[i] });
        }
        Ok(c)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,theta\n");
        for (x, t) in self.x.iter().zip(&self.theta) {
            let _ = writeln!(s, "{x:.16e},{t:.16e}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Product-integration weights of `k(t - t_i)` against hat functions on a
/// uniform `t` grid. Panel `[t_m, t_m + h]` seen from `t_i` has offset
/// `p = m - i`; `left[p]` and `right[p]` are the weights of its two ends.
struct PanelWeights {
    n: usize,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PanelWeights {
    fn new(n: usize, h: f64) -> Self {
        let (z, w) = quad::gauss_legendre(16);
        let count = 2 * n;
        let mut left = vec![0.0; count];
        let mut right = vec![0.0; count];
        let offsets: Vec<isize> = (0..count).map(|k| k as isize - n as isize).collect();
        let vals: Vec<(f64, f64)> = offsets
            .par_iter()
            .map(|&p| {
                let pf = p as f64;
                let base = pf * h;
                if (-8..8).contains(&p) {
                    // -log|u| part exactly, the rest by Gauss
                    let (ua, ub) = (base, base + h);
                    let f0 = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
                    let f1 = |u: f64| if u == 0.0 { 0.0 } else { 0.5 * u * u * u.abs().ln() - 0.25 * u * u };
                    let i0 = f0(ub) - f0(ua);
                    let i1 = f1(ub) - f1(ua);
                    let log_a = (1.0 + pf) * i0 - i1 / h;
                    let log_b = i1 / h - pf * i0;
                    let (mut ra, mut rb) = (0.0, 0.0);
                    for (zi, wi) in z.iter().zip(&w) {
                        let tau = 0.5 * h * (zi + 1.0);
                        let r = kernel_regular(base + tau) * 0.5 * h * wi;
                        ra += r * (1.0 - tau / h);
                        rb += r * tau / h;
                    }
                    (ra - log_a, rb - log_b)
                } else {
                    let (mut a, mut b) = (0.0, 0.0);
                    for (zi, wi) in z.iter().zip(&w) {
                        let tau = 0.5 * h * (zi + 1.0);
                        let k = kernel(base + tau) * 0.5 * h * wi;
                        a += k * (1.0 - tau / h);
                        b += k * tau / h;
                    }
                    (a, b)
                }
            })
            .collect();
        for (k, (a, b)) in vals.into_iter().enumerate() {
            left[k] = a;
            right[k] = b;
        }
        Self { n, left, right }
    }

    #[inline]
    fn node_weight(&self, i: usize, j: usize) -> f64 {
        let n = self.n as isize;
        let d = j as isize - i as isize;
        let mut w = 0.0;
        if j > 0 {
            w += self.right[(d - 1 + n) as usize];
        }
        if j + 1 < self.n {
            w += self.left[(d + n) as usize];
        }
        w
    }
}

/// `int_0^inf log|(x_i+y)/(x_i-y)| f(y) dy` at every node of a geometric
/// grid, given `y f(y)` at the nodes (linear in `ln y`, constant outside).
pub fn log_kernel_on_grid(x: &[f64], yf: &[f64]) -> Result<Vec<f64>> {
    let h = log_step(x)?;
    let n = x.len();
    let pw = PanelWeights::new(n, h);
    let t0 = x[0].ln();
    let tn = x[n - 1].ln();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let ti = x[i].ln();
            let mut s = yf[0] * kernel_cdf(t0 - ti) + yf[n - 1] * (KERNEL_MASS - kernel_cdf(tn - ti));
            for j in 0..n {
                s += pw.node_weight(i, j) * yf[j];
            }
            s
        })
        .collect())
}

/// The right-hand side of the equation at every node.
pub fn theta_rhs(sol: &ThetaSolution) -> Result<Vec<f64>> {
    let c = sol.check_qua()?;
    let yf: Vec<f64> = sol.x.iter().zip(&sol.theta).zip(&c).map(|((y, t), ci)| y * t.sin() / ci).collect();
    let v = log_kernel_on_grid(&sol.x, &yf)?;
    Ok(v.into_iter().map(|s| s / (3.0 * PI)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relaxation weight after the first (full) step.
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { omega: 0.5, tol: 1e-10, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sup_update: f64,
    pub min_theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaLog {
    pub records: Vec<IterationRecord>,
    /// Whether the iterate after the first full step obeys `min theta >= 2/(9 pi)`.
    pub bound_after_first: Option<bool>,
}

impl ThetaLog {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fixed-point iteration filling a caller-owned log, so the history
/// survives `MaxIterExceeded`.
///
/// The first step applies the right-hand side undamped; later steps use
/// `theta <- (1 - omega) theta + omega rhs(theta)`.
pub fn solve_theta_logged(init: &ThetaSolution, opts: &SolveOptions, log: &mut ThetaLog) -> Result<ThetaSolution> {
    if !(opts.omega > 0.0 && opts.omega <= 1.0) || !(opts.tol > 0.0) {
        return Err(Error::Precondition("omega must lie in (0, 1] and tol must be positive".into()));
    }
    init.check_qua()?;
    let mut cur = init.clone();
    let mut last = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let rhs = theta_rhs(&cur)?;
        let w = if it == 1 { 1.0 } else { opts.omega };
        let mut sup = 0.0f64;
        for (t, r) in cur.theta.iter_mut().zip(&rhs) {
            let next = ((1.0 - w) * *t + w * r).clamp(0.0, 0.5 * PI);
            sup = sup.max((next - *t).abs());
            *t = next;
        }
        let min_theta = cur.min();
        log.records.push(IterationRecord { iteration: it, sup_update: sup, min_theta });
        if it == 1 {
            log.bound_after_first = Some(min_theta >= VSQ_BOUND - 1e-9);
        }
        last = sup;
        if sup <= opts.tol {
            return Ok(cur);
        }
    }
    Err(Error::MaxIterExceeded { iterations: opts.max_iter, last_update: last })
}

pub fn solve_theta(init: &ThetaSolution, opts: &SolveOptions) -> Result<(ThetaSolution, ThetaLog)> {
    let mut log = ThetaLog::default();
    let sol = solve_theta_logged(init, opts, &mut log)?;
    Ok((sol, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsqCheck {
    pub holds: bool,
    pub inf_theta: f64,
    /// Minimum of one application of the right-hand side, when defined.
    pub rhs_min: Option<f64>,
    pub rhs_holds: bool,
}

pub fn vsq_bound_check(sol: &ThetaSolution) -> VsqCheck {
    let inf_theta = sol.min();
    let rhs_min = theta_rhs(sol).ok().map(|v| v.into_iter().fold(f64::INFINITY, f64::min));
    VsqCheck {
        holds: inf_theta >= VSQ_BOUND - 1e-9,
        inf_theta,
        rhs_min,
        rhs_holds: rhs_min.is_some_and(|m| m >= VSQ_BOUND - 1e-9),
    }
}

/// Random admissible profile: a smooth random function of `ln x` squeezed
/// into `(0, pi/2)`, so `C > 0` everywhere. Deterministic in `seed`.
pub fn random_admissible(x: Vec<f64>, seed: u64) -> Result<ThetaSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> =
        (0..6).map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.05..1.5), rng.gen_range(0.0..2.0 * PI))).collect();
    let base: f64 = rng.gen_range(-1.5..1.5);
    ThetaSolution::from_fn(x, |y| {
        let t = y.ln();
        let s: f64 = base + modes.iter().map(|(a, k, p)| a * (k * t + p).sin()).sum::<f64>();
        0.5 * PI / (1.0 + (-s).exp())
    })
}

/// Boundary samples `(U(t), V(t))` at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedBoundary {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub g: f64,
}

impl ReconstructedBoundary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,U,V\n");
        for i in 0..self.t.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.t[i], self.u[i], self.v[i]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Largest gap between `arctan(-dV/dU)` on each chord and the mean of
    /// `theta` at its ends, relative to that mean.
    pub fn slope_defect(&self, sol: &ThetaSolution) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.t.len() {
            let ang = (-(self.v[i] - self.v[i - 1])).atan2(-(self.u[i] - self.u[i - 1]));
            let mean = 0.5 * (sol.theta[i] + sol.theta[i - 1]);
            if mean > 0.0 {
                worst = worst.max((ang - mean).abs() / mean);
            }
        }
        worst
    }
}

/// Rebuild the boundary from `theta`:
/// `(-2 g V)^{1/2} = (3 g C)^{1/3}` and `U' = -cos theta (-2 g V)^{-1/2}`,
/// `U(0) = 0`, so `U < 0` and `V < 0` on `t > 0`.
pub fn reconstruct_surface(sol: &ThetaSolution, g: f64) -> Result<ReconstructedBoundary> {
    if !(g > 0.0) {
        return Err(Error::Precondition("gravity must be positive".into()));
    }
    let c = sol.check_qua()?;
    let h = log_step(&sol.x)?;
    let speed: Vec<f64> = c.iter().map(|ci| (3.0 * g * ci).cbrt()).collect();
    let v: Vec<f64> = speed.iter().map(|q| -q * q / (2.0 * g)).collect();
    // in t = ln y the integrand y cos(theta)/q is locally exponential;
    // integrate it exactly as such
    let integrand: Vec<f64> = (0..sol.x.len()).map(|i| sol.x[i] * sol.theta[i].cos() / speed[i]).collect();
    let x0 = sol.x[0];
    let (s0, c0) = (sol.theta[0].sin(), sol.theta[0].cos());
    let mut acc = c0 * 1.5 * x0.powf(2.0 / 3.0) / (3.0 * g * s0).cbrt();
    let mut u = Vec::with_capacity(sol.x.len());
    u.push(-acc);
    for i in 1..sol.x.len() {
        let (a, b) = (integrand[i - 1], integrand[i]);
        let panel = if a > 0.0 && b > 0.0 && (b / a - 1.0).abs() > 1e-12 {
            h * (b - a) / (b / a).ln()
        } else {
            0.5 * h * (a + b)
        };
        acc += panel;
        u.push(-acc);
    }
    Ok(ReconstructedBoundary { t: sol.x.clone(), u, v, g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_mass_and_cdf() {
        assert!((kernel_cdf(0.0) - 0.25 * PI * PI).abs() < 1e-14);
        assert!((kernel_cdf(60.0) - KERNEL_MASS).abs() < 1e-14);
        // the two branches of the tail agree at the switch point
        let a = 0.5;
        let series = kernel_tail(a);
        let direct = quad::integrate(kernel, a, 60.0, 1e-16, 1e-14).unwrap();
        assert!((series - direct).abs() < 1e-12);
        let small = kernel_tail(0.3);
        let direct = quad::integrate(kernel, 0.3, 60.0, 1e-16, 1e-14).unwrap();
        assert!((small - direct).abs() < 1e-12, "{small} {direct}");
    }

    #[test]
    fn reciprocal_gives_half_pi_squared() {
        for x in [0.1, 1.0, 10.0] {
            let v = log_kernel_integral(x, |y| 1.0 / y, &[]).unwrap();
            assert!((v - KERNEL_MASS).abs() < 1e-8 * KERNEL_MASS, "{x}: {v}");
        }
    }

    #[test]
    fn indicator_at_its_edge() {
        let v = log_kernel_integral(1.0, |y| if y <= 1.0 { 1.0 } else { 0.0 }, &[1.0]).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-8, "{v}");
    }

    #[test]
    fn zero_integrand_and_bad_abscissa() {
        assert_eq!(log_kernel_integral(2.0, |_| 0.0, &[]).unwrap(), 0.0);
        assert!(matches!(log_kernel_integral(0.0, |_| 1.0, &[]), Err(Error::NonPositiveAbscissa(_))));
    }

    #[test]
    fn grid_operator_matches_adaptive() {
        let x = geometric_grid(801, 1e-4, 1e4);
        let f = |y: f64| 1.0 / (1.0 + y * y);
        let yf: Vec<f64> = x.iter().map(|y| y * f(*y)).collect();
        let v = log_kernel_on_grid(&x, &yf).unwrap();
        for i in [200, 400, 600] {
            let exact = log_kernel_integral(x[i], f, &[]).unwrap();
            assert!((v[i] - exact).abs() < 1e-4 * exact, "{i}: {} {exact}", v[i]);
        }
    }

    #[test]
    fn cumulative_is_exact_for_constants() {
        let s = ThetaSolution::constant(geometric_grid(50, 1e-2, 1e2), 0.7).unwrap();
        let c = s.cumulative().unwrap();
        for (y, ci) in s.x.iter().zip(&c) {
            assert!((ci - y * 0.7f64.sin()).abs() < 1e-13 * y);
        }
    }

    #[test]
    fn constants_collapse_in_one_step() {
        for c in [PI / 6.0, 0.2, PI / 2.0] {
            let s = ThetaSolution::constant(default_grid(), c).unwrap();
            let r = theta_rhs(&s).unwrap();
            let err = r.iter().fold(0.0f64, |a, t| a.max((t - PI / 6.0).abs()));
            assert!(err < 1e-8, "{c}: {err}");
        }
    }

    #[test]
    fn zero_theta_violates_qua() {
        let s = ThetaSolution::constant(default_grid(), 0.0).unwrap();
        assert!(matches!(theta_rhs(&s), Err(Error::QuaViolated { .. })));
        assert!(matches!(solve_theta(&s, &SolveOptions::default()), Err(Error::QuaViolated { .. })));
        assert!(matches!(reconstruct_surface(&s, 1.0), Err(Error::QuaViolated { .. })));
    }

    #[test]
    fn constant_init_converges_fast() {
        let s = ThetaSolution::constant(default_grid(), PI / 4.0).unwrap();
        let (sol, log) = solve_theta(&s, &SolveOptions::default()).unwrap();
        assert!(sol.sup_error(PI / 6.0) <= 1e-10);
        assert!(log.records.len() <= 3);
        assert_eq!(log.bound_after_first, Some(true));
    }

    #[test]
    fn ramp_init_converges() {
        let s = ThetaSolution::from_fn(default_grid(), |x| 0.5 * PI * x / (1.0 + x)).unwrap();
        let opts = SolveOptions { tol: 1e-9, max_iter: 200, ..Default::default() };
        let (sol, log) = solve_theta(&s, &opts).unwrap();
        assert!(sol.sup_error(PI / 6.0) <= 1e-6, "{}", sol.sup_error(PI / 6.0));
        assert!(log.records.iter().all(|r| r.min_theta >= VSQ_BOUND - 1e-9));
    }

    #[test]
    fn bound_checks() {
        let s = ThetaSolution::constant(default_grid(), PI / 6.0).unwrap();
        let v = vsq_bound_check(&s);
        assert!(v.holds && v.rhs_holds);
        let s = ThetaSolution::constant(default_grid(), PI / 2.0).unwrap();
        assert!(vsq_bound_check(&s).holds);
        let dip = ThetaSolution::from_fn(default_grid(), |x| if (1.0..10.0).contains(&x) { 0.01 } else { PI / 6.0 }).unwrap();
        let v = vsq_bound_check(&dip);
        assert!(!v.holds);
        assert!(v.rhs_holds, "{:?}", v.rhs_min);
    }

    #[test]
    fn reconstruction_of_the_corner() {
        let s = ThetaSolution::constant(default_grid(), PI / 6.0).unwrap();
        let r = reconstruct_surface(&s, 1.0).unwrap();
        for i in 0..r.t.len() {
            assert!((r.v[i] + r.u[i].abs() / 3f64.sqrt()).abs() <= 1e-6 * r.u[i].abs().max(1.0));
            // V = -(3 C)^{2/3} / 2 with C = y/2
            let exact = -0.5 * (1.5 * r.t[i]).powf(2.0 / 3.0);
            assert!((r.v[i] - exact).abs() < 1e-12 * exact.abs());
            assert!(r.v[i] < 0.0 && r.u[i] < 0.0);
        }
        assert!(r.slope_defect(&s) < 0.02);
    }
}
