//! Families of symmetric periodic waves by Newton continuation in amplitude.
//!
//! The free-boundary problem is posed in height-function form: `Y = h(q, p)`
//! gives the height of the streamline `psi = p` above the bed at `X = q`.
//! Then `psi_Y = 1/h_p`, `psi_X = -h_q/h_p` and the problem becomes
//!
//! ```text
//! (1 + h_q^2) h_pp - 2 h_q h_p h_pq + h_p^2 h_qq = gamma(p) h_p^3   0 < p < B
//! (1 + h_q^2)/h_p^2 + 2 g h = Q                                     p = 0
//! h = 0                                                             p = B
//! ```
//!
//! on the fixed rectangle `[0, L] x [0, B]`, even and `2L`-periodic in `q`.
//! It is discretised by collocation with a cosine series in `q` and
//! Chebyshev-Lobatto points in `p`. The unknowns are the nodal heights and
//! `Q`; the amplitude `h(0, 0) - h(L, 0)` closes the system.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{strong_residuals, Extent, ResidualReport, WaveField};
use crate::laminar::LaminarWave;
use crate::quad;
use crate::vorticity::{check_zxc_hypotheses, cs_q_bound, VorticityFn};

/// Discretisation and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Collocation points in `q` on `[0, L]`.
    pub modes_q: usize,
    /// Chebyshev intervals in `p`.
    pub modes_p: usize,
    /// Upper limit on `modes_q` when the spectral tail is too heavy.
    pub max_modes_q: usize,
    /// Newton stops once the sup-norm of the collocation residual is below this.
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Relative size of the trailing cosine coefficients that triggers refinement.
    pub tail_tol: f64,
    /// Grid of the exported fields.
    pub export_nx: usize,
    pub export_ny: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            modes_q: 32,
            modes_p: 24,
            max_modes_q: 72,
            tol: 1e-10,
            max_newton: 40,
            max_halvings: 30,
            tail_tol: 1e-9,
            export_nx: 128,
            export_ny: 128,
        }
    }
}

/// Physical parameters of a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchParams {
    pub vorticity: VorticityFn,
    pub g: f64,
    /// Half-period `L`.
    pub half_period: f64,
}

impl BranchParams {
    pub fn b(&self) -> f64 {
        self.vorticity.b()
    }

    pub fn wavenumber(&self) -> f64 {
        PI / self.half_period
    }
}

/// Collocation operators on an `m x (n+1)` grid.
#[derive(Debug, Clone)]
struct Grid {
    m: usize,
    n: usize,
    l: f64,
    b: f64,
    p: Vec<f64>,
    dq: DMatrix<f64>,
    dqq: DMatrix<f64>,
    dp: DMatrix<f64>,
    dpp: DMatrix<f64>,
}

impl Grid {
    fn new(m: usize, n: usize, l: f64, b: f64) -> Result<Self> {
        if m < 4 || n < 4 {
            return Err(Error::Precondition(format!("collocation grid {m}x{n} is too small")));
        }
        let c = DMatrix::from_fn(m, m, |i, k| (k as f64 * PI * i as f64 / (m - 1) as f64).cos());
        let c1 = DMatrix::from_fn(m, m, |i, k| {
            let kk = k as f64 * PI / l;
            -kk * (k as f64 * PI * i as f64 / (m - 1) as f64).sin()
        });
        let c2 = DMatrix::from_fn(m, m, |i, k| {
            let kk = k as f64 * PI / l;
            -kk * kk * c[(i, k)]
        });
        let cinv = c.clone().try_inverse().ok_or_else(|| Error::Precondition("singular cosine matrix".into()))?;
        let dq = &c1 * &cinv;
        let dqq = &c2 * &cinv;
        let x: Vec<f64> = (0..=n).map(|j| (j as f64 * PI / n as f64).cos()).collect();
        let dx = cheb_matrix(&x);
        let dp = dx * (-2.0 / b);
        let dpp = &dp * &dp;
        let p = x.iter().map(|xj| 0.5 * b * (1.0 - xj)).collect();
        Ok(Self { m, n, l, b, p, dq, dqq, dp, dpp })
    }

    /// Index of unknown `h(i, j)` for `j < n`.
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    fn unknowns(&self) -> usize {
        self.m * self.n + 1
    }
}

/// Chebyshev differentiation matrix on the points `x_j = cos(j pi / n)`.
fn cheb_matrix(x: &[f64]) -> DMatrix<f64> {
    let n = x.len() - 1;
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d
}

/// A converged (or seeded) collocation state.
#[derive(Debug, Clone)]
pub struct SpectralWave {
    grid_m: usize,
    grid_n: usize,
    pub half_period: f64,
    pub b: f64,
    pub g: f64,
    pub q: f64,
    /// Nodal heights `h[i * (n + 1) + j]`, bed row included.
    h: Vec<f64>,
    /// `p` nodes from the surface (0) to the bed (B).
    p: Vec<f64>,
}

impl SpectralWave {
    fn from_grid(grid: &Grid, h: Vec<f64>, q: f64, g: f64) -> Self {
        Self { grid_m: grid.m, grid_n: grid.n, half_period: grid.l, b: grid.b, g, q, h, p: grid.p.clone() }
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.grid_m, self.grid_n)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.h[i * (self.grid_n + 1) + j]
    }

    pub fn amplitude(&self) -> f64 {
        self.at(0, 0) - self.at(self.grid_m - 1, 0)
    }

    /// Surface height at the `q` collocation points, crest first.
    pub fn surface_nodes(&self) -> Vec<f64> {
        (0..self.grid_m).map(|i| self.at(i, 0)).collect()
    }

    /// Cosine coefficients of each `p` row.
    fn row_coefficients(&self) -> Vec<Vec<f64>> {
        let m = self.grid_m;
        let c = DMatrix::from_fn(m, m, |i, k| (k as f64 * PI * i as f64 / (m - 1) as f64).cos());
        let lu = c.lu();
        (0..=self.grid_n)
            .map(|j| {
                let v = DVector::from_fn(m, |i, _| self.at(i, j));
                lu.solve(&v).map(|s| s.iter().copied().collect()).unwrap_or_else(|| vec![0.0; m])
            })
            .collect()
    }

    /// Largest of the last two surface cosine coefficients relative to the largest one.
    pub fn spectral_tail(&self) -> f64 {
        let coef = &self.row_coefficients()[0];
        let big = coef[1..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if big == 0.0 {
            return 0.0;
        }
        let m = coef.len();
        coef[m - 2].abs().max(coef[m - 1].abs() * 0.5) / big
    }

    /// Heights at `(|x|, p_j)` for all `j`, by cosine interpolation.
    fn column_at(&self, coef: &[Vec<f64>], x: f64) -> Vec<f64> {
        let l = self.half_period;
        let xr = x.abs().rem_euclid(2.0 * l);
        let xr = if xr > l { 2.0 * l - xr } else { xr };
        coef.iter()
            .map(|c| c.iter().enumerate().map(|(k, a)| a * (k as f64 * PI * xr / l).cos()).sum())
            .collect()
    }

    /// Resample the state on a new collocation grid.
    fn resample(&self, grid: &Grid) -> Vec<f64> {
        let coef = self.row_coefficients();
        let mut out = vec![0.0; grid.m * (grid.n + 1)];
        for i in 0..grid.m {
            let q = grid.l * i as f64 / (grid.m - 1) as f64;
            let col = self.column_at(&coef, q);
            for (j, pj) in grid.p.iter().enumerate() {
                out[i * (grid.n + 1) + j] = cheb_interp(&self.p, &col, *pj);
            }
        }
        out
    }

    /// Export to a periodic [`WaveField`] on `[-L, L)` by inverting
    /// `h(X, p) = Y` along each column.
    pub fn to_field(&self, vorticity: &VorticityFn, nx: usize, ny: usize) -> Result<WaveField> {
        let coef = self.row_coefficients();
        let l = self.half_period;
        let extent = Extent::Periodic { half_period: l };
        let mut x = Vec::with_capacity(nx);
        let mut eta = Vec::with_capacity(nx);
        let mut psi = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let xi = -l + 2.0 * l * i as f64 / nx as f64;
            let col = self.column_at(&coef, xi);
            let top = col[0];
            if !(top > 0.0) {
                return Err(Error::DegenerateGrid { column: i, height: top });
            }
            x.push(xi);
            eta.push(top);
            for j in 0..ny {
                let y = top * j as f64 / (ny - 1) as f64;
                let p = if j == 0 {
                    self.b
                } else if j == ny - 1 {
                    0.0
                } else {
                    // h decreases in p; bisection on the Chebyshev interpolant
                    let (mut lo, mut hi) = (0.0, self.b);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if cheb_interp(&self.p, &col, mid) > y {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                };
                psi.push(p);
            }
        }
        Ok(WaveField {
            g: self.g,
            b: self.b,
            q: self.q,
            extent,
            bottom: 0.0,
            x,
            eta,
            ny,
            psi,
            symmetric: true,
            vorticity: vorticity.clone(),
        })
    }

    /// `|grad psi|` at the crest, `1/|h_p(0, 0)|`.
    pub fn crest_speed(&self, grid_dp_row0: &[f64]) -> f64 {
        let hp: f64 = (0..=self.grid_n).map(|j| grid_dp_row0[j] * self.at(0, j)).sum();
        1.0 / hp.abs()
    }
}

/// Barycentric interpolation on Chebyshev-Lobatto points.
fn cheb_interp(p: &[f64], v: &[f64], t: f64) -> f64 {
    let n = p.len() - 1;
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..=n {
        let d = t - p[j];
        if d == 0.0 {
            return v[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n {
            w *= 0.5;
        }
        num += w / d * v[j];
        den += w / d;
    }
    num / den
}

/// Collocation residual and, optionally, its Jacobian.
fn assemble(grid: &Grid, vfn: &VorticityFn, g: f64, amp: f64, u: &DVector<f64>, jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let (m, n) = (grid.m, grid.n);
    let nu = grid.unknowns();
    let q = u[nu - 1];
    let h = |i: usize, j: usize| if j == n { 0.0 } else { u[grid.idx(i, j)] };
    // derivatives at all nodes
    let mut hq = DMatrix::<f64>::zeros(m, n + 1);
    let mut hqq = DMatrix::zeros(m, n + 1);
    let mut hp = DMatrix::zeros(m, n + 1);
    let mut hpp = DMatrix::zeros(m, n + 1);
    for i in 0..m {
        for j in 0..=n {
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..m {
                let v = h(k, j);
                a += grid.dq[(i, k)] * v;
                b += grid.dqq[(i, k)] * v;
            }
            hq[(i, j)] = a;
            hqq[(i, j)] = b;
            let (mut c, mut d) = (0.0, 0.0);
            for k in 0..=n {
                let v = h(i, k);
                c += grid.dp[(j, k)] * v;
                d += grid.dpp[(j, k)] * v;
            }
            hp[(i, j)] = c;
            hpp[(i, j)] = d;
        }
    }
    let mut hpq = DMatrix::<f64>::zeros(m, n + 1);
    for i in 0..m {
        for j in 0..=n {
            hpq[(i, j)] = (0..=n).map(|k| grid.dp[(j, k)] * hq[(i, k)]).sum();
        }
    }
    let gam: Vec<f64> = grid.p.iter().map(|&p| vfn.gamma_clamped(p)).collect();
    let mut f = DVector::zeros(nu);
    let mut jm = if jac { Some(DMatrix::zeros(nu, nu)) } else { None };
    for i in 0..m {
        for j in 0..n {
            let row = grid.idx(i, j);
            let (a, b, c, d, e) = (hq[(i, j)], hqq[(i, j)], hp[(i, j)], hpp[(i, j)], hpq[(i, j)]);
            if j == 0 {
                f[row] = (1.0 + a * a) / (c * c) + 2.0 * g * h(i, 0) - q;
                if let Some(jm) = jm.as_mut() {
                    let cq = 2.0 * a / (c * c);
                    let cp = -2.0 * (1.0 + a * a) / (c * c * c);
                    for k in 0..m {
                        jm[(row, grid.idx(k, 0))] += cq * grid.dq[(i, k)];
                    }
                    for k in 0..n {
                        jm[(row, grid.idx(i, k))] += cp * grid.dp[(0, k)];
                    }
                    jm[(row, grid.idx(i, 0))] += 2.0 * g;
                    jm[(row, nu - 1)] = -1.0;
                }
            } else {
                f[row] = (1.0 + a * a) * d - 2.0 * a * c * e + c * c * b - gam[j] * c * c * c;
                if let Some(jm) = jm.as_mut() {
                    let c_q = 2.0 * a * d - 2.0 * c * e;
                    let c_qq = c * c;
                    let c_p = -2.0 * a * e + 2.0 * c * b - 3.0 * gam[j] * c * c;
                    let c_pp = 1.0 + a * a;
                    let c_pq = -2.0 * a * c;
                    for k in 0..m {
                        jm[(row, grid.idx(k, j))] += c_q * grid.dq[(i, k)] + c_qq * grid.dqq[(i, k)];
                    }
                    for k in 0..n {
                        jm[(row, grid.idx(i, k))] += c_p * grid.dp[(j, k)] + c_pp * grid.dpp[(j, k)];
                    }
                    for kp in 0..n {
                        let w = c_pq * grid.dp[(j, kp)];
                        if w != 0.0 {
                            for k in 0..m {
                                jm[(row, grid.idx(k, kp))] += w * grid.dq[(i, k)];
                            }
                        }
                    }
                }
            }
        }
    }
    let last = nu - 1;
    f[last] = h(0, 0) - h(m - 1, 0) - amp;
    if let Some(jm) = jm.as_mut() {
        jm[(last, grid.idx(0, 0))] = 1.0;
        jm[(last, grid.idx(m - 1, 0))] = -1.0;
    }
    (f, jm)
}

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Damped Newton: the step is halved until the residual sup-norm decreases.
fn newton(grid: &Grid, vfn: &VorticityFn, g: f64, amp: f64, mut u: DVector<f64>, opts: &SolverOptions) -> Result<(DVector<f64>, f64)> {
    let (mut f, _) = assemble(grid, vfn, g, amp, &u, false);
    let mut res = sup(&f);
    for _ in 0..opts.max_newton {
        if res.is_finite() && res <= opts.tol {
            return Ok((u, res));
        }
        let (_, jm) = assemble(grid, vfn, g, amp, &u, true);
        let step = jm
            .expect("jacobian requested")
            .lu()
            .solve(&f)
            .ok_or(Error::NewtonDivergence { amplitude: amp, residual: res })?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &u - &step * t;
            let (ft, _) = assemble(grid, vfn, g, amp, &trial, false);
            let rt = sup(&ft);
            if rt.is_finite() && rt < res {
                u = trial;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence { amplitude: amp, residual: res });
        }
    }
    if res <= opts.tol {
        Ok((u, res))
    } else {
        Err(Error::NewtonDivergence { amplitude: amp, residual: res })
    }
}

/// Linearisation about the laminar stream with surface speed squared `lambda`:
/// `w'' = 3 gamma H_p^2 w' + k^2 H_p^2 w`, `w(B) = 0`, and
/// `2 lambda^{3/2} w'(0) + 2 g w(0) = 0` at the surface.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    vfn: VorticityFn,
    g: f64,
    k: f64,
    steps: usize,
    /// `Gamma_hat` and `gamma` on the half-step grid from `p = 0` to `B`.
    ghat: Vec<f64>,
    gam: Vec<f64>,
}

impl LinearProblem {
    pub fn new(params: &BranchParams, steps: usize) -> Result<Self> {
        let vfn = params.vorticity.clone();
        let b = vfn.b();
        let pts = 2 * steps + 1;
        let mut ghat = Vec::with_capacity(pts);
        let mut gam = Vec::with_capacity(pts);
        for s in 0..pts {
            let p = b * s as f64 / (pts - 1) as f64;
            ghat.push(vfn.gamma_hat(p)?);
            gam.push(vfn.gamma(p)?);
        }
        Ok(Self { vfn, g: params.g, k: params.wavenumber(), steps, ghat, gam })
    }

    /// Integrate from the bed to the surface; returns `(w, w')` on the
    /// half-step grid, index 0 at the surface.
    pub fn shoot(&self, lambda: f64) -> Result<Vec<(f64, f64)>> {
        let b = self.vfn.b();
        let hstep = b / self.steps as f64;
        let rhs = |s: usize, w: f64, wp: f64| -> Result<(f64, f64)> {
            let d = lambda - 2.0 * self.ghat[s];
            if !(d > 0.0) {
                return Err(Error::Precondition(format!("lambda {lambda} below the laminar range")));
            }
            let hp2 = 1.0 / d;
            Ok((wp, 3.0 * self.gam[s] * hp2 * wp + self.k * self.k * hp2 * w))
        };
        let pts = 2 * self.steps + 1;
        let mut out = vec![(0.0, 0.0); pts];
        let (mut w, mut wp) = (0.0, 1.0);
        out[pts - 1] = (w, wp);
        let mut s = pts - 1;
        while s >= 2 {
            // step from index s to s-2 (p decreasing)
            let h = -hstep;
            let (k1a, k1b) = rhs(s, w, wp)?;
            let (k2a, k2b) = rhs(s - 1, w + 0.5 * h * k1a, wp + 0.5 * h * k1b)?;
            let (k3a, k3b) = rhs(s - 1, w + 0.5 * h * k2a, wp + 0.5 * h * k2b)?;
            let (k4a, k4b) = rhs(s - 2, w + h * k3a, wp + h * k3b)?;
            let mid = (w + 0.5 * h * k1a + 0.125 * h * h * (k1b - k2b), 0.0);
            w += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            wp += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            out[s - 1] = (mid.0, 0.5 * (out[s].1 + wp));
            out[s - 2] = (w, wp);
            s -= 2;
        }
        Ok(out)
    }

    /// Surface condition, scaled by the solution size to avoid overflow.
    pub fn dispersion(&self, lambda: f64) -> Result<f64> {
        let sol = self.shoot(lambda)?;
        let (w, wp) = sol[0];
        let scale = w.abs().max(wp.abs()).max(1e-300);
        Ok((2.0 * lambda.powf(1.5) * wp + 2.0 * self.g * w) / scale)
    }
}

/// Surface speed squared of the laminar stream from which the first cosine
/// mode bifurcates: the smallest root of the dispersion relation.
pub fn bifurcation_lambda(params: &BranchParams) -> Result<f64> {
    let lp = LinearProblem::new(params, 400)?;
    let qb = cs_q_bound(&params.vorticity, params.g)?;
    let scale = (params.g * params.b()).powf(2.0 / 3.0).max(qb.lower).max(1e-12);
    let mut prev: Option<(f64, f64)> = None;
    for m in 0..=90 {
        let lam = qb.lower + scale * 10f64.powf(-4.0 + 7.0 * m as f64 / 90.0);
        let d = match lp.dispersion(lam) {
            Ok(d) => d,
            Err(_) => continue,
        };
        if let Some((l0, d0)) = prev {
            if (d0 < 0.0) != (d < 0.0) {
                return quad::bisect(|l| lp.dispersion(l), l0, lam, 1e-14 * lam);
            }
        }
        prev = Some((lam, d));
    }
    Err(Error::SeedFailure("no bifurcation point found in the laminar range".into()))
}

/// One member of a continuation family.
#[derive(Debug, Clone)]
pub struct Member {
    pub amplitude: f64,
    pub q: f64,
    pub crest_speed: f64,
    /// Largest `psi_Y` over the collocation nodes (negative for regular waves).
    pub max_psi_y: f64,
    pub collocation_residual: f64,
    pub spectral_tail: f64,
    pub modes: (usize, usize),
    pub field: WaveField,
    pub state: Option<SpectralWave>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truncation {
    pub target: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ContinuationFamily {
    pub params: BranchParams,
    pub lambda_star: f64,
    pub seed_q: f64,
    pub members: Vec<Member>,
    pub truncated: Option<Truncation>,
}

impl ContinuationFamily {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.amplitude).collect()
    }

    pub fn qs(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.q).collect()
    }
}

/// Laminar heights `H(p_j)` at `lambda` and the linear mode at the nodes.
fn seed_state(params: &BranchParams, grid: &Grid, lambda: f64, amp: f64) -> Result<DVector<f64>> {
    let vfn = &params.vorticity;
    let b = vfn.b();
    let depth = vfn.upsilon(lambda, b)?;
    let lp = LinearProblem::new(params, 400)?;
    let sol = lp.shoot(lambda)?;
    let pts = sol.len();
    let mode_at = |p: f64| -> f64 {
        let t = p / b * (pts - 1) as f64;
        let base = (t.floor() as isize - 1).clamp(0, pts as isize - 4) as usize;
        let w = quad::lagrange4(t - base as f64);
        (0..4).map(|k| w[k] * sol[base + k].0).sum()
    };
    let w0 = mode_at(0.0);
    if w0 == 0.0 {
        return Err(Error::SeedFailure("linear mode vanishes at the surface".into()));
    }
    let eps = amp / (2.0 * w0);
    let mut u = DVector::zeros(grid.unknowns());
    for i in 0..grid.m {
        let qi = grid.l * i as f64 / (grid.m - 1) as f64;
        for j in 0..grid.n {
            let p = grid.p[j];
            let base = depth - vfn.upsilon(lambda, p)?;
            u[grid.idx(i, j)] = base + eps * mode_at(p) * (PI * qi / grid.l).cos();
        }
    }
    u[grid.unknowns() - 1] = lambda + 2.0 * params.g * depth;
    Ok(u)
}

fn state_vector(grid: &Grid, h: &[f64], q: f64) -> DVector<f64> {
    let mut u = DVector::zeros(grid.unknowns());
    for i in 0..grid.m {
        for j in 0..grid.n {
            u[grid.idx(i, j)] = h[i * (grid.n + 1) + j];
        }
    }
    u[grid.unknowns() - 1] = q;
    u
}

fn full_heights(grid: &Grid, u: &DVector<f64>) -> Vec<f64> {
    let mut h = vec![0.0; grid.m * (grid.n + 1)];
    for i in 0..grid.m {
        for j in 0..grid.n {
            h[i * (grid.n + 1) + j] = u[grid.idx(i, j)];
        }
    }
    h
}

fn make_member(params: &BranchParams, grid: &Grid, u: &DVector<f64>, res: f64, opts: &SolverOptions) -> Result<Member> {
    let q = u[grid.unknowns() - 1];
    let wave = SpectralWave::from_grid(grid, full_heights(grid, u), q, params.g);
    let row0: Vec<f64> = (0..=grid.n).map(|k| grid.dp[(0, k)]).collect();
    let crest_speed = wave.crest_speed(&row0);
    let mut max_psi_y = f64::NEG_INFINITY;
    for i in 0..grid.m {
        for j in 0..=grid.n {
            let hp: f64 = (0..=grid.n).map(|k| grid.dp[(j, k)] * wave.at(i, k)).sum();
            max_psi_y = max_psi_y.max(1.0 / hp);
        }
    }
    let field = wave.to_field(&params.vorticity, opts.export_nx, opts.export_ny)?;
    Ok(Member {
        amplitude: wave.amplitude(),
        q,
        crest_speed,
        max_psi_y,
        collocation_residual: res,
        spectral_tail: wave.spectral_tail(),
        modes: (grid.m, grid.n),
        field,
        state: Some(wave),
    })
}

/// The zero-amplitude member: the laminar stream at `lambda`.
fn laminar_member(params: &BranchParams, lambda: f64, opts: &SolverOptions) -> Result<Member> {
    let grid = Grid::new(opts.modes_q, opts.modes_p, params.half_period, params.b())?;
    let u = seed_state(params, &grid, lambda, 0.0)?;
    let (f, _) = assemble(&grid, &params.vorticity, params.g, 0.0, &u, false);
    make_member(params, &grid, &u, sup(&f), opts)
}

/// Solve at one amplitude, refining in `q` while the spectral tail is heavy.
fn solve_at(params: &BranchParams, grid: &mut Grid, guess: DVector<f64>, amp: f64, opts: &SolverOptions) -> Result<(DVector<f64>, f64)> {
    let (mut u, mut res) = newton(grid, &params.vorticity, params.g, amp, guess, opts)?;
    loop {
        let wave = SpectralWave::from_grid(grid, full_heights(grid, &u), u[grid.unknowns() - 1], params.g);
        if wave.spectral_tail() <= opts.tail_tol || grid.m >= opts.max_modes_q {
            return Ok((u, res));
        }
        let m = (grid.m + grid.m / 2).min(opts.max_modes_q);
        let finer = Grid::new(m, grid.n, grid.l, grid.b)?;
        let guess = state_vector(&finer, &wave.resample(&finer), wave.q);
        let (u2, r2) = newton(&finer, &params.vorticity, params.g, amp, guess, opts)?;
        *grid = finer;
        u = u2;
        res = r2;
    }
}

/// Continue the branch bifurcating from the laminar stream through the
/// requested amplitudes (which must be nonnegative and increasing).
pub fn continue_family(params: &BranchParams, targets: &[f64], opts: &SolverOptions) -> Result<ContinuationFamily> {
    let vfn = &params.vorticity;
    let irrotational = (0..=20).all(|k| vfn.gamma_clamped(vfn.b() * k as f64 / 20.0) == 0.0);
    if !irrotational && !check_zxc_hypotheses(vfn) {
        return Err(Error::SeedFailure("vorticity fails the hypotheses for a bounded branch".into()));
    }
    if targets.windows(2).any(|w| !(w[1] > w[0])) || targets.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::Precondition("amplitude targets must be nonnegative and increasing".into()));
    }
    let lambda_star = bifurcation_lambda(params)?;
    let seed_q = lambda_star + 2.0 * params.g * vfn.upsilon(lambda_star, vfn.b())?;
    let mut fam = ContinuationFamily { params: params.clone(), lambda_star, seed_q, members: Vec::new(), truncated: None };
    let mut grid = Grid::new(opts.modes_q, opts.modes_p, params.half_period, params.b())?;
    // previous solutions as (amplitude, state) on the current grid
    let mut history: Vec<(f64, DVector<f64>)> = Vec::new();
    for &target in targets {
        if target == 0.0 {
            fam.members.push(laminar_member(params, lambda_star, opts)?);
            continue;
        }
        let attempt = |grid: &mut Grid, history: &mut Vec<(f64, DVector<f64>)>, amp: f64| -> Result<(DVector<f64>, f64)> {
            let guess = match history.len() {
                0 => seed_state(params, grid, lambda_star, amp)?,
                1 => {
                    let (a0, u0) = &history[0];
                    let mut g = u0.clone();
                    // rescale the wave part linearly in amplitude
                    let lam = seed_state(params, grid, lambda_star, 0.0)?;
                    let r = amp / a0;
                    g = &lam + (&g - &lam) * r;
                    g
                }
                _ => {
                    let (a1, u1) = &history[history.len() - 2];
                    let (a2, u2) = &history[history.len() - 1];
                    let t = (amp - a2) / (a2 - a1);
                    u2 + (u2 - u1) * t
                }
            };
            let m_before = grid.m;
            let out = solve_at(params, grid, guess, amp, opts)?;
            if grid.m != m_before {
                // keep the secant history on the refined grid
                let resampled: Vec<(f64, DVector<f64>)> = history
                    .iter()
                    .map(|(a, u)| {
                        let old = Grid::new(m_before, grid.n, grid.l, grid.b).expect("grid");
                        let w = SpectralWave::from_grid(&old, full_heights(&old, u), u[old.unknowns() - 1], params.g);
                        (*a, state_vector(grid, &w.resample(grid), w.q))
                    })
                    .collect();
                *history = resampled;
            }
            history.push((amp, out.0.clone()));
            Ok(out)
        };
        // try the target directly, then through intermediate amplitudes
        let start = history.last().map(|h| h.0).unwrap_or(0.0);
        let mut result = None;
        let mut last_err = None;
        for pieces in [1usize, 2, 4, 8] {
            let mut g2 = grid.clone();
            let mut h2 = history.clone();
            let mut ok = None;
            for s in 1..=pieces {
                let amp = start + (target - start) * s as f64 / pieces as f64;
                match attempt(&mut g2, &mut h2, amp) {
                    Ok(v) => ok = Some(v),
                    Err(e) => {
                        ok = None;
                        last_err = Some(e);
                        break;
                    }
                }
            }
            if let Some(v) = ok {
                grid = g2;
                history = h2;
                result = Some(v);
                break;
            }
        }
        match result {
            Some((u, res)) => fam.members.push(make_member(params, &grid, &u, res, opts)?),
            None => {
                let reason = last_err.map(|e| e.to_string()).unwrap_or_default();
                fam.truncated = Some(Truncation { target, reason });
                break;
            }
        }
    }
    if fam.members.is_empty() {
        if let Some(t) = &fam.truncated {
            return Err(Error::SeedFailure(format!("no member converged: {}", t.reason)));
        }
    }
    Ok(fam)
}

/// Checks against the laminar closed forms: the laminar stream at any
/// admissible `lambda` must satisfy the discrete equations with zero amplitude.
pub fn validate_against_laminar(params: &BranchParams, lambda: f64, opts: &SolverOptions) -> Result<f64> {
    let grid = Grid::new(opts.modes_q, opts.modes_p, params.half_period, params.b())?;
    let u = seed_state(params, &grid, lambda, 0.0)?;
    let (f, _) = assemble(&grid, &params.vorticity, params.g, 0.0, &u, false);
    Ok(sup(&f))
}

/// Build the laminar member directly from a [`LaminarWave`] (for reporting).
pub fn laminar_field(wave: &LaminarWave, half_period: f64, opts: &SolverOptions) -> Result<WaveField> {
    WaveField::from_laminar(wave, half_period, opts.export_nx, opts.export_ny)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberDiagnostics {
    pub amplitude: f64,
    pub q: f64,
    pub crest_speed: f64,
    pub max_psi_y: f64,
    pub max_gradient: f64,
    pub trough_height: f64,
    pub crest_height: f64,
    /// Arclength of the surface from crest to trough.
    pub arclength: f64,
    pub collocation_residual: f64,
    pub spectral_tail: f64,
    pub modes: (usize, usize),
    pub monotone: bool,
    pub strong: ResidualReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExiReport {
    pub sup_q: f64,
    pub crest_speeds: Vec<f64>,
    /// Slope and intercept of crest speed against amplitude (least squares).
    pub crest_fit: Option<[f64; 2]>,
    /// Amplitude at which the fitted crest speed reaches zero.
    pub extrapolated_amplitude: Option<f64>,
    pub crest_speed_decreasing: bool,
    pub max_gradient: f64,
    pub min_trough: f64,
    pub members: Vec<MemberDiagnostics>,
}

fn diagnose_member(m: &Member) -> Result<MemberDiagnostics> {
    let f = &m.field;
    let max_gradient = f.gradients().iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let nx = f.nx();
    let crest = nx / 2;
    let mut arclength = 0.0;
    let mut monotone = true;
    for i in crest..nx {
        let next = if i + 1 == nx { 0 } else { i + 1 };
        let dx = f.dx();
        arclength += (dx * dx + (f.eta[next] - f.eta[i]).powi(2)).sqrt();
        if f.eta[next] > f.eta[i] + 1e-12 {
            monotone = false;
        }
    }
    Ok(MemberDiagnostics {
        amplitude: m.amplitude,
        q: m.q,
        crest_speed: m.crest_speed,
        max_psi_y: m.max_psi_y,
        max_gradient,
        trough_height: f.eta[0],
        crest_height: f.eta[crest],
        arclength,
        collocation_residual: m.collocation_residual,
        spectral_tail: m.spectral_tail,
        modes: m.modes,
        monotone,
        strong: strong_residuals(f)?,
    })
}

/// Summary statistics along a family.
pub fn exi_diagnostics(fam: &ContinuationFamily) -> Result<ExiReport> {
    if fam.members.is_empty() {
        return Err(Error::Precondition("family is empty".into()));
    }
    let members: Vec<MemberDiagnostics> = fam.members.iter().map(diagnose_member).collect::<Result<_>>()?;
    let crest_speeds: Vec<f64> = members.iter().map(|m| m.crest_speed).collect();
    let amps: Vec<f64> = members.iter().map(|m| m.amplitude).collect();
    let crest_fit = (members.len() >= 2).then(|| {
        let n = amps.len() as f64;
        let ma = amps.iter().sum::<f64>() / n;
        let mc = crest_speeds.iter().sum::<f64>() / n;
        let sxy: f64 = amps.iter().zip(&crest_speeds).map(|(a, c)| (a - ma) * (c - mc)).sum();
        let sxx: f64 = amps.iter().map(|a| (a - ma).powi(2)).sum();
        let slope = sxy / sxx;
        [slope, mc - slope * ma]
    });
    let extrapolated_amplitude = crest_fit.and_then(|[s, c]| (s < 0.0).then(|| -c / s));
    Ok(ExiReport {
        sup_q: members.iter().map(|m| m.q).fold(f64::NEG_INFINITY, f64::max),
        crest_speed_decreasing: crest_speeds.windows(2).all(|w| w[1] < w[0]),
        crest_speeds,
        crest_fit,
        extrapolated_amplitude,
        max_gradient: members.iter().map(|m| m.max_gradient).fold(0.0, f64::max),
        min_trough: members.iter().map(|m| m.trough_height).fold(f64::INFINITY, f64::min),
        members,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub diagnostics: MemberDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub g: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub lambda_star: f64,
    pub seed_q: f64,
    pub members: Vec<ManifestEntry>,
    pub truncated: Option<Truncation>,
}

/// Write every member as CSV plus a JSON manifest into `dir`.
pub fn write_family(fam: &ContinuationFamily, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let report = exi_diagnostics(fam)?;
    let mut members = Vec::new();
    for (k, (m, d)) in fam.members.iter().zip(report.members).enumerate() {
        let file = format!("member_{k:03}.csv");
        m.field.write_csv(&dir.join(&file))?;
        members.push(ManifestEntry { file, diagnostics: d });
    }
    let manifest = Manifest {
        g: fam.params.g,
        b: fam.params.b(),
        l: fam.params.half_period,
        lambda_star: fam.lambda_star,
        seed_q: fam.seed_q,
        members,
        truncated: fam.truncated.clone(),
    };
    std::fs::write(dir.join("manifest.json"), crate::report::to_json(&manifest)?)?;
    Ok(manifest)
}
