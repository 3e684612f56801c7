//! The `WaveField` data model and residual verifiers.
//!
//! A field stores the stream function on a boundary-fitted tensor grid. Column
//! `i` sits at abscissa `x[i]` and carries `ny` nodes equally spaced in the
//! stretched coordinate `sigma = (Y - bottom) / (eta - bottom)`, so that the
//! bottom row is `sigma = 0` and the free surface is the row `sigma = 1`.
//! Periodic fields cover one period `[-L, L)` with the bed as bottom; window
//! fields cover a closed interval and their bottom row is only a cut through
//! the fluid.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminar::LaminarWave;
use crate::quad;
use crate::vorticity::VorticityFn;

/// Horizontal extent of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Extent {
    /// One period `[-L, L)`, `nx` equally spaced columns starting at `-L`.
    Periodic { half_period: f64 },
    /// Closed window `[x0, x1]`, `nx` equally spaced columns including both ends.
    Window { x0: f64, x1: f64 },
}

/// Continuous access to a planar stream function, used by the blow-up and
/// pressure modules on both exact and sampled flows.
pub trait PlanarField {
    /// Stream function at `(x, y)`. Points above the free surface return 0.
    fn psi(&self, x: f64, y: f64) -> f64;

    /// Free-surface height over `x`.
    fn surface_height(&self, x: f64) -> f64;

    /// Gradient of the stream function; centred differences by default.
    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let h = 1e-6 * (1.0 + x.abs().max(y.abs()));
        [
            (self.psi(x + h, y) - self.psi(x - h, y)) / (2.0 * h),
            (self.psi(x, y + h) - self.psi(x, y - h)) / (2.0 * h),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct WaveField {
    pub g: f64,
    /// Flux `B`; the value of `psi` on the bed.
    pub b: f64,
    pub q: f64,
    pub extent: Extent,
    /// Bed height `F` for periodic fields, lower cut for windows.
    pub bottom: f64,
    pub x: Vec<f64>,
    /// Surface height at each column.
    pub eta: Vec<f64>,
    pub ny: usize,
    /// Column-major values, `psi[i * ny + j]`.
    pub psi: Vec<f64>,
    /// Whether the field is meant to be even in `X`.
    pub symmetric: bool,
    pub vorticity: VorticityFn,
}

/// Free-surface samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceProfile {
    Graph { x: Vec<f64>, eta: Vec<f64> },
    Parametric { s: Vec<f64>, u: Vec<f64>, v: Vec<f64> },
}

/// `(sup, l2, argmax)` triple. `l2` is the root mean square over the sampled
/// nodes; `argmax` is `None` when nothing was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ResidualEntry {
    pub sup: f64,
    pub l2: f64,
    pub argmax: Option<[f64; 2]>,
}

#[derive(Default)]
pub(crate) struct Accum {
    sup: f64,
    sumsq: f64,
    n: usize,
    at: Option<[f64; 2]>,
}

impl Accum {
    pub(crate) fn push(&mut self, v: f64, x: f64, y: f64) {
        let a = v.abs();
        if self.at.is_none() || a > self.sup || a.is_nan() {
            self.sup = a;
            self.at = Some([x, y]);
        }
        self.sumsq += a * a;
        self.n += 1;
    }

    pub(crate) fn finish(self) -> ResidualEntry {
        ResidualEntry {
            sup: self.sup,
            l2: if self.n == 0 { 0.0 } else { (self.sumsq / self.n as f64).sqrt() },
            argmax: self.at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub interior_pde: ResidualEntry,
    pub kinematic_surface: ResidualEntry,
    pub kinematic_bed: ResidualEntry,
    pub bernoulli: ResidualEntry,
    pub weak_form: ResidualEntry,
    pub range: ResidualEntry,
}

impl ResidualReport {
    /// Largest sup-norm among the strong entries (weak form excluded).
    pub fn max_strong(&self) -> f64 {
        [self.interior_pde, self.kinematic_surface, self.kinematic_bed, self.bernoulli, self.range]
            .iter()
            .map(|e| e.sup)
            .fold(0.0, f64::max)
    }
}

/// Compactly supported test function `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFn {
    Zero,
    /// `(1 - rho^2/R^2)^4` for `rho < R`, a C^3 radial bump.
    Bump { cx: f64, cy: f64, radius: f64 },
}

impl TestFn {
    pub fn bump(cx: f64, cy: f64, radius: f64) -> Self {
        TestFn::Bump { cx, cy, radius }
    }

    /// Value and gradient at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match *self {
            TestFn::Zero => (0.0, [0.0, 0.0]),
            TestFn::Bump { cx, cy, radius } => {
                let (dx, dy) = (x - cx, y - cy);
                let t = 1.0 - (dx * dx + dy * dy) / (radius * radius);
                if t <= 0.0 {
                    return (0.0, [0.0, 0.0]);
                }
                let d = -8.0 * t.powi(3) / (radius * radius);
                (t.powi(4), [d * dx, d * dy])
            }
        }
    }
}

impl WaveField {
    /// Build a field by tabulating `surface` and `psi` on the grid.
    #[allow(clippy::too_many_arguments)]
    pub fn tabulate(
        extent: Extent,
        nx: usize,
        ny: usize,
        bottom: f64,
        surface: impl Fn(f64) -> f64,
        psi: impl Fn(f64, f64) -> f64,
        vorticity: VorticityFn,
        g: f64,
        q: f64,
    ) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Precondition(format!("grid {nx}x{ny} is too small")));
        }
        let x = column_abscissae(extent, nx);
        let eta: Vec<f64> = x.iter().map(|&xi| surface(xi)).collect();
        let mut vals = Vec::with_capacity(nx * ny);
        for (i, &xi) in x.iter().enumerate() {
            let h = eta[i] - bottom;
            if !(h > 0.0) {
                return Err(Error::DegenerateGrid { column: i, height: h });
            }
            for j in 0..ny {
                let s = j as f64 / (ny - 1) as f64;
                vals.push(psi(xi, bottom + s * h));
            }
        }
        let b = vorticity.b();
        Ok(Self { g, b, q, extent, bottom, x, eta, ny, psi: vals, symmetric: false, vorticity })
    }

    /// Periodic field of a laminar stream over one period `[-L, L)`.
    pub fn from_laminar(wave: &LaminarWave, half_period: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Precondition(format!("grid {nx}x{ny} is too small")));
        }
        let mut column = Vec::with_capacity(ny);
        for j in 0..ny {
            let y = wave.bed + wave.depth * j as f64 / (ny - 1) as f64;
            column.push(if j == 0 {
                wave.b()
            } else if j == ny - 1 {
                0.0
            } else {
                wave.psi_at(y)?
            });
        }
        let extent = Extent::Periodic { half_period };
        let x = column_abscissae(extent, nx);
        let psi = (0..nx).flat_map(|_| column.iter().copied()).collect();
        Ok(Self {
            g: wave.g,
            b: wave.b(),
            q: wave.q,
            extent,
            bottom: wave.bed,
            eta: vec![wave.surface(); nx],
            x,
            ny,
            psi,
            symmetric: true,
            vorticity: wave.vorticity.clone(),
        })
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.extent, Extent::Periodic { .. })
    }

    /// Bed height `F`, absent for windows.
    pub fn bed(&self) -> Option<f64> {
        self.is_periodic().then_some(self.bottom)
    }

    /// Half-period for periodic fields, half-width for windows.
    pub fn half_period(&self) -> f64 {
        match self.extent {
            Extent::Periodic { half_period } => half_period,
            Extent::Window { x0, x1 } => 0.5 * (x1 - x0),
        }
    }

    pub fn dx(&self) -> f64 {
        match self.extent {
            Extent::Periodic { half_period } => 2.0 * half_period / self.nx() as f64,
            Extent::Window { x0, x1 } => (x1 - x0) / (self.nx() - 1) as f64,
        }
    }

    pub fn dsigma(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    pub fn sigma(&self, j: usize) -> f64 {
        j as f64 / (self.ny - 1) as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.psi[i * self.ny + j]
    }

    pub fn column_height(&self, i: usize) -> f64 {
        self.eta[i] - self.bottom
    }

    /// Physical height of node `(i, j)`.
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.bottom + self.sigma(j) * self.column_height(i)
    }

    pub fn profile(&self) -> SurfaceProfile {
        SurfaceProfile::Graph { x: self.x.clone(), eta: self.eta.clone() }
    }

    fn check_grid(&self) -> Result<()> {
        for i in 0..self.nx() {
            let h = self.column_height(i);
            if !(h > 0.0) {
                return Err(Error::DegenerateGrid { column: i, height: h });
            }
        }
        Ok(())
    }

    /// Neighbour indices `(i-1, i+1)` if a centred stencil exists at column `i`.
    fn x_neighbours(&self, i: usize) -> Option<(usize, usize)> {
        let n = self.nx();
        if self.is_periodic() {
            Some(((i + n - 1) % n, (i + 1) % n))
        } else if i == 0 || i == n - 1 {
            None
        } else {
            Some((i - 1, i + 1))
        }
    }

    /// Second-order first derivative in `X` of a per-column quantity.
    fn ddx(&self, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        let h = self.dx();
        let n = self.nx();
        match self.x_neighbours(i) {
            Some((a, b)) => (f(b) - f(a)) / (2.0 * h),
            None if i == 0 => (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h),
            None => (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h),
        }
    }

    /// `(H', H'')` at column `i`; one-sided at window ends.
    fn height_derivatives(&self, i: usize) -> (f64, f64) {
        let h = self.dx();
        let d1 = self.ddx(i, |k| self.eta[k]);
        let n = self.nx();
        let d2 = match self.x_neighbours(i) {
            Some((a, b)) => (self.eta[b] - 2.0 * self.eta[i] + self.eta[a]) / (h * h),
            None if i == 0 => (2.0 * self.eta[0] - 5.0 * self.eta[1] + 4.0 * self.eta[2] - self.eta[3]) / (h * h),
            None => {
                (2.0 * self.eta[n - 1] - 5.0 * self.eta[n - 2] + 4.0 * self.eta[n - 3] - self.eta[n - 4]) / (h * h)
            }
        };
        (d1, d2)
    }

    /// Physical gradient `(psi_X, psi_Y)` at node `(i, j)` by fourth-order
    /// differences in the mapped coordinates. Boundary rows and window ends
    /// use one-sided stencils, so nothing is extrapolated across the surface.
    pub fn gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let hgt = self.column_height(i);
        let per = self.is_periodic();
        let hp = diff4(self.nx(), per, i, self.dx(), |k| self.eta[k]);
        let ps = diff4(self.ny, false, j, self.dsigma(), |k| self.at(i, k));
        let px = diff4(self.nx(), per, i, self.dx(), |k| self.at(k, j));
        let sx = -self.sigma(j) * hp / hgt;
        [px + sx * ps, ps / hgt]
    }

    /// All node gradients, column-major like `psi`.
    pub fn gradients(&self) -> Vec<[f64; 2]> {
        (0..self.nx()).flat_map(|i| (0..self.ny).map(move |j| (i, j))).map(|(i, j)| self.gradient(i, j)).collect()
    }

    /// Nodes where the centred Laplacian is available.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.nx();
        let (lo, hi) = if self.is_periodic() { (0, n) } else { (1, n - 1) };
        (lo..hi).flat_map(move |i| (1..self.ny - 1).map(move |j| (i, j)))
    }

    /// Laplacian at an interior node by centred differences in `(X, sigma)`.
    pub fn laplacian(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.x_neighbours(i).expect("interior column");
        let dx = self.dx();
        let ds = self.dsigma();
        let hgt = self.column_height(i);
        let (hp, hpp) = self.height_derivatives(i);
        let s = self.sigma(j);
        let sx = -s * hp / hgt;
        let sxx = -s * hpp / hgt + 2.0 * s * hp * hp / (hgt * hgt);
        let pxx = (self.at(b, j) - 2.0 * self.at(i, j) + self.at(a, j)) / (dx * dx);
        let pss = (self.at(i, j + 1) - 2.0 * self.at(i, j) + self.at(i, j - 1)) / (ds * ds);
        let ps = (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * ds);
        let pxs = (self.at(b, j + 1) - self.at(b, j - 1) - self.at(a, j + 1) + self.at(a, j - 1)) / (4.0 * dx * ds);
        pxx + 2.0 * sx * pxs + (sx * sx + 1.0 / (hgt * hgt)) * pss + sxx * ps
    }

    /// Default test functions for the report: three bumps straddling the
    /// surface, kept clear of the bottom and of window edges.
    fn default_test_fns(&self) -> Vec<TestFn> {
        let l = self.half_period();
        let mid = match self.extent {
            Extent::Periodic { .. } => 0.0,
            Extent::Window { x0, x1 } => 0.5 * (x0 + x1),
        };
        let hmin = self.eta.iter().copied().fold(f64::INFINITY, f64::min) - self.bottom;
        let radius = 0.3 * hmin.min(0.5 * l);
        [-0.5 * l, 0.0, 0.5 * l]
            .iter()
            .map(|&off| {
                let cx = mid + off;
                let cy = self.surface_at(cx) - 0.5 * radius;
                TestFn::bump(cx, cy, radius)
            })
            .collect()
    }

    /// Surface height by cubic interpolation between columns.
    pub fn surface_at(&self, x: f64) -> f64 {
        let (base, s) = self.stencil_x(x);
        let w = quad::lagrange4(s);
        (0..4).map(|k| w[k] * self.eta[self.wrap(base + k as isize)]).sum()
    }

    fn wrap(&self, k: isize) -> usize {
        let n = self.nx() as isize;
        if self.is_periodic() {
            k.rem_euclid(n) as usize
        } else {
            k.clamp(0, n - 1) as usize
        }
    }

    /// First column of a 4-point stencil around `x` and the offset of `x` from it.
    fn stencil_x(&self, x: f64) -> (isize, f64) {
        let h = self.dx();
        let t = (x - self.x[0]) / h;
        let mut base = t.floor() as isize - 1;
        if !self.is_periodic() {
            base = base.clamp(0, self.nx() as isize - 4);
        }
        (base, t - base as f64)
    }

    /// Stream function interpolated along column `i` at height `y`
    /// (zero above the surface).
    fn column_value(&self, i: usize, y: f64) -> f64 {
        let hgt = self.column_height(i);
        let s = (y - self.bottom) / hgt;
        if s >= 1.0 {
            return 0.0;
        }
        let t = s * (self.ny - 1) as f64;
        let base = (t.floor() as isize - 1).clamp(0, self.ny as isize - 4) as usize;
        let w = quad::lagrange4(t - base as f64);
        (0..4).map(|k| w[k] * self.at(i, base + k)).sum()
    }

    /// Shift every height by `-g_shift`; see [`shift_datum`].
    fn shifted(&self, g_shift: f64) -> Self {
        let mut out = self.clone();
        out.bottom -= g_shift;
        for e in &mut out.eta {
            *e -= g_shift;
        }
        out.q -= 2.0 * self.g * g_shift;
        out
    }

    /// Largest `|psi(X) - psi(-X)|` over mirrored node pairs.
    pub fn evenness_defect(&self) -> f64 {
        let n = self.nx();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let m = match self.extent {
                Extent::Periodic { .. } => (n - i) % n,
                Extent::Window { .. } => n - 1 - i,
            };
            for j in 0..self.ny {
                worst = worst.max((self.at(i, j) - self.at(m, j)).abs());
            }
            worst = worst.max((self.eta[i] - self.eta[m]).abs());
        }
        worst
    }

    /// Write the grid in the CSV exchange format.
    pub fn to_csv(&self) -> String {
        self.to_csv_with(&self.psi, "psi")
    }

    /// CSV with the `psi` column replaced by `values` (same node order).
    pub fn to_csv_with(&self, values: &[f64], column: &str) -> String {
        let mut s = String::new();
        let bed = self.bed().map(fmt_f).unwrap_or_default();
        let _ = writeln!(s, "# g,B,L,F,Q,Nx,Ny");
        let _ = writeln!(
            s,
            "# {},{},{},{},{},{},{}",
            fmt_f(self.g),
            fmt_f(self.b),
            fmt_f(self.half_period()),
            bed,
            fmt_f(self.q),
            self.nx(),
            self.ny
        );
        let _ = writeln!(s, "X,Y,{column}");
        for i in 0..self.nx() {
            for j in 0..self.ny {
                let _ = writeln!(s, "{},{},{}", fmt_f(self.x[i]), fmt_f(self.y(i, j)), fmt_f(values[i * self.ny + j]));
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse the CSV exchange format. The vorticity function is not stored in
    /// the file and must be supplied.
    pub fn from_csv(text: &str, vorticity: VorticityFn) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        if head.trim() != "# g,B,L,F,Q,Nx,Ny" {
            return Err(Error::Parse(format!("unexpected header `{head}`")));
        }
        let meta = lines.next().ok_or_else(|| Error::Parse("missing parameter line".into()))?;
        let meta: Vec<&str> = meta.trim_start_matches('#').trim().split(',').collect();
        if meta.len() != 7 {
            return Err(Error::Parse("parameter line needs 7 fields".into()));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let (g, b, l, q) = (num(meta[0])?, num(meta[1])?, num(meta[2])?, num(meta[4])?);
        let bed = if meta[3].trim().is_empty() { None } else { Some(num(meta[3])?) };
        let nx: usize = meta[5].trim().parse().map_err(|e| Error::Parse(format!("Nx: {e}")))?;
        let ny: usize = meta[6].trim().parse().map_err(|e| Error::Parse(format!("Ny: {e}")))?;
        if !lines.next().is_some_and(|l| l.trim().starts_with("X,Y,")) {
            return Err(Error::Parse("missing column header".into()));
        }
        let mut x = vec![0.0; nx];
        let mut eta = vec![0.0; nx];
        let mut psi = Vec::with_capacity(nx * ny);
        let mut bottom = 0.0;
        for k in 0..nx * ny {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("expected {} rows, got {k}", nx * ny)))?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("row {k}: expected 3 fields")));
            }
            let (xi, yi, pi) = (num(f[0])?, num(f[1])?, num(f[2])?);
            let (i, j) = (k / ny, k % ny);
            if j == 0 {
                x[i] = xi;
                if i == 0 {
                    bottom = yi;
                }
            }
            if j == ny - 1 {
                eta[i] = yi;
            }
            psi.push(pi);
        }
        let extent = match bed {
            Some(_) => Extent::Periodic { half_period: l },
            None => Extent::Window { x0: x[0], x1: x[nx - 1] },
        };
        if let Some(f) = bed {
            bottom = f;
        }
        Ok(Self { g, b, q, extent, bottom, x, eta, ny, psi, symmetric: false, vorticity })
    }
}

impl PlanarField for WaveField {
    fn psi(&self, x: f64, y: f64) -> f64 {
        if y >= self.surface_at(x) {
            return 0.0;
        }
        let (base, s) = self.stencil_x(x);
        let w = quad::lagrange4(s);
        (0..4).map(|k| w[k] * self.column_value(self.wrap(base + k as isize), y)).sum()
    }

    fn surface_height(&self, x: f64) -> f64 {
        self.surface_at(x)
    }
}

/// Fourth-order first derivative at index `i` of `n` equally spaced samples.
fn diff4(n: usize, periodic: bool, i: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    const FWD0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const FWD1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let dot = |c: &[f64; 5], idx: &dyn Fn(usize) -> usize| (0..5).map(|k| c[k] * f(idx(k))).sum::<f64>();
    if periodic {
        let w = |o: isize| f((i as isize + o).rem_euclid(n as isize) as usize);
        return (w(-2) - 8.0 * w(-1) + 8.0 * w(1) - w(2)) / (12.0 * h);
    }
    if i >= 2 && i + 2 < n {
        (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / (12.0 * h)
    } else if i == 0 {
        dot(&FWD0, &|k| k) / (12.0 * h)
    } else if i == 1 {
        dot(&FWD1, &|k| k) / (12.0 * h)
    } else if i == n - 1 {
        -dot(&FWD0, &|k| n - 1 - k) / (12.0 * h)
    } else {
        -dot(&FWD1, &|k| n - 1 - k) / (12.0 * h)
    }
}

fn column_abscissae(extent: Extent, nx: usize) -> Vec<f64> {
    match extent {
        Extent::Periodic { half_period } => {
            (0..nx).map(|i| -half_period + 2.0 * half_period * i as f64 / nx as f64).collect()
        }
        Extent::Window { x0, x1 } => (0..nx).map(|i| x0 + (x1 - x0) * i as f64 / (nx - 1) as f64).collect(),
    }
}

/// Float formatting used by every exported file: 17 significant digits.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Residuals of the strong form on the grid.
pub fn strong_residuals(w: &WaveField) -> Result<ResidualReport> {
    if w.nx() < 8 || w.ny < 8 {
        return Err(Error::Precondition(format!("grid {}x{} is smaller than 8x8", w.nx(), w.ny)));
    }
    w.check_grid()?;
    let mut pde = Accum::default();
    for (i, j) in w.interior_nodes() {
        let r = w.laplacian(i, j) + w.vorticity.gamma_clamped(w.at(i, j));
        pde.push(r, w.x[i], w.y(i, j));
    }
    let top = w.ny - 1;
    let mut surf = Accum::default();
    let mut bern = Accum::default();
    let mut bed = Accum::default();
    for i in 0..w.nx() {
        surf.push(w.at(i, top), w.x[i], w.eta[i]);
        let [gx, gy] = w.gradient(i, top);
        bern.push(gx * gx + gy * gy + 2.0 * w.g * w.eta[i] - w.q, w.x[i], w.eta[i]);
        if w.is_periodic() {
            bed.push(w.at(i, 0) - w.b, w.x[i], w.bottom);
        }
    }
    let mut range = Accum::default();
    for i in 0..w.nx() {
        for j in 0..w.ny {
            let p = w.at(i, j);
            let over = if w.is_periodic() { p - w.b } else { f64::NEG_INFINITY };
            range.push((-p).max(over).max(0.0), w.x[i], w.y(i, j));
        }
    }
    let mut weak = Accum::default();
    for z in w.default_test_fns() {
        if let (Ok(v), TestFn::Bump { cx, cy, .. }) = (weak_residual(w, &z), z) {
            weak.push(v, cx, cy);
        }
    }
    Ok(ResidualReport {
        interior_pde: pde.finish(),
        kinematic_surface: surf.finish(),
        kinematic_bed: bed.finish(),
        bernoulli: bern.finish(),
        weak_form: weak.finish(),
        range: range.finish(),
    })
}

/// Weak-form residual against a compactly supported test function:
/// `int grad psi . grad zeta - int gamma(psi) zeta + int_S (Q - 2gY)^{1/2} zeta`.
pub fn weak_residual(w: &WaveField, zeta: &TestFn) -> Result<f64> {
    let (cx, cy, radius) = match *zeta {
        TestFn::Zero => return Ok(0.0),
        TestFn::Bump { cx, cy, radius } => (cx, cy, radius),
    };
    if cy - radius <= w.bottom {
        return Err(Error::UnsupportedTestFn { lowest: cy - radius, bed: w.bottom });
    }
    if let Extent::Window { x0, x1 } = w.extent {
        if cx - radius <= x0 || cx + radius >= x1 {
            return Err(Error::Precondition("test function support leaves the window".into()));
        }
    }
    if let Extent::Periodic { half_period } = w.extent {
        if radius >= half_period {
            return Err(Error::Precondition("test function wider than a period".into()));
        }
    }
    w.check_grid()?;
    let nx = w.nx();
    let period = match w.extent {
        Extent::Periodic { half_period } => Some(2.0 * half_period),
        Extent::Window { .. } => None,
    };
    // nearest periodic image of the bump centre
    let image = |x: f64| -> f64 {
        match period {
            Some(p) => x - p * ((x - cx) / p).round(),
            None => x,
        }
    };
    let ws = quad::gregory_weights(w.ny, w.dsigma());
    let wx = match period {
        Some(_) => vec![w.dx(); nx],
        None => quad::gregory_weights(nx, w.dx()),
    };
    let mut area = 0.0;
    for i in 0..nx {
        let xi = image(w.x[i]);
        if (xi - cx).abs() >= radius {
            continue;
        }
        let hgt = w.column_height(i);
        let mut col = 0.0;
        for j in 0..w.ny {
            let y = w.y(i, j);
            let (z, gz) = zeta.eval(xi, y);
            if z == 0.0 && gz == [0.0, 0.0] {
                continue;
            }
            let [px, py] = w.gradient(i, j);
            let integrand = px * gz[0] + py * gz[1] - w.vorticity.gamma_clamped(w.at(i, j)) * z;
            col += ws[j] * integrand;
        }
        area += wx[i] * hgt * col;
    }
    // surface polyline
    let segs = if period.is_some() { nx } else { nx - 1 };
    let surf_weight = |i: usize, x: f64| -> f64 {
        let (z, _) = zeta.eval(x, w.eta[i]);
        (w.q - 2.0 * w.g * w.eta[i]).max(0.0).sqrt() * z
    };
    let mut line = 0.0;
    for k in 0..segs {
        let a = k;
        let b = (k + 1) % nx;
        let xa = image(w.x[a]);
        let xb = xa + w.dx();
        let len = (w.dx().powi(2) + (w.eta[b] - w.eta[a]).powi(2)).sqrt();
        line += 0.5 * len * (surf_weight(a, xa) + surf_weight(b, xb));
    }
    Ok(area + line)
}

/// Translate the vertical datum down by `g_shift`; `Q` becomes `Q - 2 g G`.
pub fn shift_datum(w: &WaveField, g_shift: f64) -> WaveField {
    w.shifted(g_shift)
}

/// Surface nodes with `|Q - 2 g Y| <= tol`, one per period.
pub fn stagnation_points(w: &WaveField, tol: f64) -> Vec<[f64; 2]> {
    (0..w.nx())
        .filter(|&i| (w.q - 2.0 * w.g * w.eta[i]).abs() <= tol)
        .map(|i| [w.x[i], w.eta[i]])
        .collect()
}

impl SurfaceProfile {
    pub fn len(&self) -> usize {
        match self {
            SurfaceProfile::Graph { x, .. } => x.len(),
            SurfaceProfile::Parametric { s, .. } => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(u, v)` sample points.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self {
            SurfaceProfile::Graph { x, eta } => x.iter().copied().zip(eta.iter().copied()).collect(),
            SurfaceProfile::Parametric { u, v, .. } => u.iter().copied().zip(v.iter().copied()).collect(),
        }
    }

    /// Check the structural invariants. For graphs with `monotone` set, the
    /// profile must not rise on `(0, L)`.
    pub fn validate(&self, monotone: bool) -> Result<()> {
        match self {
            SurfaceProfile::Graph { x, eta } => {
                if x.len() != eta.len() {
                    return Err(Error::Validation("graph profile lengths differ".into()));
                }
                if x.iter().chain(eta).any(|v| !v.is_finite()) {
                    return Err(Error::Validation("graph profile has non-finite samples".into()));
                }
                if x.windows(2).any(|p| !(p[1] > p[0])) {
                    return Err(Error::Validation("graph abscissae must increase".into()));
                }
                if monotone {
                    for k in 1..x.len() {
                        if x[k - 1] >= 0.0 && eta[k] > eta[k - 1] + 1e-12 {
                            return Err(Error::NonMonotoneSurface { x: x[k] });
                        }
                    }
                }
                Ok(())
            }
            SurfaceProfile::Parametric { s, u, v } => {
                if s.len() != u.len() || u.len() != v.len() {
                    return Err(Error::Validation("parametric profile lengths differ".into()));
                }
                if u.windows(2).any(|p| p[1] < p[0]) {
                    return Err(Error::Validation("u must be nondecreasing".into()));
                }
                let pts = self.points();
                let n = pts.len();
                for a in 0..n.saturating_sub(1) {
                    for b in a + 2..n - 1 {
                        if segments_cross(pts[a], pts[a + 1], pts[b], pts[b + 1]) {
                            return Err(Error::Validation(format!("profile self-intersects near s = {}", s[a])));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            SurfaceProfile::Graph { x, eta } => {
                out.push_str("X,eta\n");
                for (a, b) in x.iter().zip(eta) {
                    let _ = writeln!(out, "{},{}", fmt_f(*a), fmt_f(*b));
                }
            }
            SurfaceProfile::Parametric { s, u, v } => {
                out.push_str("s,u,v\n");
                for k in 0..s.len() {
                    let _ = writeln!(out, "{},{},{}", fmt_f(s[k]), fmt_f(u[k]), fmt_f(v[k]));
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty profile".into()))?.trim();
        let rows: Vec<Vec<f64>> = lines
            .map(|l| {
                l.split(',')
                    .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{f}`: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
        match head {
            "X,eta" if rows.iter().all(|r| r.len() == 2) => Ok(SurfaceProfile::Graph { x: col(0), eta: col(1) }),
            "s,u,v" if rows.iter().all(|r| r.len() == 3) => {
                Ok(SurfaceProfile::Parametric { s: col(0), u: col(1), v: col(2) })
            }
            _ => Err(Error::Parse(format!("unrecognised profile header `{head}`"))),
        }
    }
}

fn segments_cross(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), p4: (f64, f64)) -> bool {
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminar::{laminar_regular, trivial_extreme, DepthRoot};

    fn extreme_field(n: usize) -> WaveField {
        let v = VorticityFn::constant(-1.0, 1.0).unwrap();
        let lw = trivial_extreme(&v, 1.0, 0.0).unwrap();
        WaveField::from_laminar(&lw, 1.0, n, n).unwrap()
    }

    #[test]
    fn extreme_field_strong_residuals() {
        let w = extreme_field(64);
        let r = strong_residuals(&w).unwrap();
        assert!(r.max_strong() <= 1e-8, "{r:?}");
        assert!(r.weak_form.sup <= 1e-4, "{:?}", r.weak_form);
    }

    #[test]
    fn perturbation_is_located() {
        let mut w = extreme_field(64);
        let (i, j) = (20, 30);
        w.psi[i * w.ny + j] += 1e-3;
        let r = strong_residuals(&w).unwrap();
        let ds = w.dsigma() * w.column_height(i);
        assert!(r.interior_pde.sup >= 1e-3 / (ds * ds));
        assert_eq!(r.interior_pde.argmax, Some([w.x[i], w.y(i, j)]));
    }

    #[test]
    fn linear_stream_is_exact() {
        let z = VorticityFn::zero(1.0).unwrap();
        let lw = laminar_regular(&z, 1.0, 3.0, 0.0, DepthRoot::Deepest).unwrap();
        let w = WaveField::from_laminar(&lw, 1.0, 32, 32).unwrap();
        let r = strong_residuals(&w).unwrap();
        assert!(r.bernoulli.sup <= 1e-12, "{r:?}");
        assert!(r.interior_pde.sup <= 1e-12, "{r:?}");
        assert!(stagnation_points(&w, 1e-6).is_empty());
    }

    #[test]
    fn too_small_grid_rejected() {
        let v = VorticityFn::constant(-1.0, 1.0).unwrap();
        let lw = trivial_extreme(&v, 1.0, 0.0).unwrap();
        let w = WaveField::from_laminar(&lw, 1.0, 6, 6).unwrap();
        assert!(matches!(strong_residuals(&w), Err(Error::Precondition(_))));
    }

    #[test]
    fn degenerate_column_rejected() {
        let mut w = extreme_field(16);
        w.eta[3] = w.bottom;
        assert!(matches!(strong_residuals(&w), Err(Error::DegenerateGrid { column: 3, .. })));
    }

    #[test]
    fn weak_residual_zero_test_fn() {
        assert_eq!(weak_residual(&extreme_field(16), &TestFn::Zero).unwrap(), 0.0);
    }

    #[test]
    fn weak_residual_interior_and_straddling_bumps() {
        let w = extreme_field(256);
        let depth = 2f64.sqrt();
        let v = weak_residual(&w, &TestFn::bump(0.0, 0.5 * depth, 0.3)).unwrap();
        assert!(v.abs() <= 1e-6, "{v}");
        let v = weak_residual(&w, &TestFn::bump(0.1, depth, 0.3)).unwrap();
        assert!(v.abs() <= 1e-5, "{v}");
    }

    #[test]
    fn weak_residual_detects_wrong_surface_flux() {
        let mut w = extreme_field(128);
        // pretending Q is larger adds a positive surface flux term
        w.q += 0.5;
        let v = weak_residual(&w, &TestFn::bump(0.0, 2f64.sqrt(), 0.3)).unwrap();
        assert!(v > 1e-2);
    }

    #[test]
    fn bump_touching_bed_rejected() {
        let w = extreme_field(32);
        assert!(matches!(
            weak_residual(&w, &TestFn::bump(0.0, 0.2, 0.3)),
            Err(Error::UnsupportedTestFn { .. })
        ));
    }

    #[test]
    fn shift_datum_examples() {
        let w = extreme_field(32);
        let s = shift_datum(&w, 0.5);
        assert!((s.q - (2.0 * 2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(s.bed(), Some(-0.5));
        let same = shift_datum(&w, 0.0);
        assert_eq!(same.psi, w.psi);
        assert_eq!(same.eta, w.eta);
        assert_eq!(same.q, w.q);
        let a = shift_datum(&shift_datum(&w, 0.3), 0.45);
        let b = shift_datum(&w, 0.75);
        for (p, q) in a.eta.iter().zip(&b.eta) {
            assert!((p - q).abs() <= 1e-14);
        }
        assert!((a.q - b.q).abs() <= 1e-14 && (a.bottom - b.bottom).abs() <= 1e-14);
    }

    #[test]
    fn shift_preserves_residuals_and_stagnation() {
        let w = extreme_field(32);
        let s = shift_datum(&w, 0.37);
        let (r0, r1) = (strong_residuals(&w).unwrap(), strong_residuals(&s).unwrap());
        assert!((r0.interior_pde.sup - r1.interior_pde.sup).abs() <= 1e-14);
        assert!((r0.bernoulli.sup - r1.bernoulli.sup).abs() <= 1e-14);
        let p0 = stagnation_points(&w, 1e-10);
        let p1 = stagnation_points(&s, 1e-10);
        assert_eq!(p0.len(), w.nx());
        assert_eq!(p0.len(), p1.len());
    }

    #[test]
    fn csv_round_trip() {
        let w = extreme_field(12);
        let text = w.to_csv();
        assert!(text.starts_with("# g,B,L,F,Q,Nx,Ny\n"));
        let back = WaveField::from_csv(&text, w.vorticity.clone()).unwrap();
        assert_eq!(back.psi, w.psi);
        assert_eq!(back.eta, w.eta);
        assert_eq!(back.x, w.x);
        assert_eq!(back.q, w.q);
        assert_eq!(back.extent, w.extent);
    }

    #[test]
    fn window_csv_has_empty_bed() {
        let z = VorticityFn::zero(1.0).unwrap();
        let w = WaveField::tabulate(
            Extent::Window { x0: -1.0, x1: 1.0 },
            9,
            9,
            -1.0,
            |_| 0.0,
            |_, y| -y,
            z.clone(),
            1.0,
            0.0,
        )
        .unwrap();
        let text = w.to_csv();
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        let back = WaveField::from_csv(&text, z).unwrap();
        assert_eq!(back.extent, Extent::Window { x0: -1.0, x1: 1.0 });
        assert_eq!(back.bottom, -1.0);
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let w = extreme_field(32);
        let s2 = 2f64.sqrt();
        for &(x, y) in &[(0.13, 0.4), (-0.77, 1.2), (0.99, 0.01)] {
            let p = w.psi(x, y);
            assert!((p - (s2 - y).powi(2) / 2.0).abs() < 1e-13, "{p}");
        }
        assert_eq!(w.psi(0.0, 1.5), 0.0);
    }

    #[test]
    fn evenness_of_laminar_field() {
        assert_eq!(extreme_field(16).evenness_defect(), 0.0);
    }

    #[test]
    fn profile_validation() {
        let good = SurfaceProfile::Graph { x: vec![0.0, 0.5, 1.0], eta: vec![1.0, 0.9, 0.8] };
        good.validate(true).unwrap();
        let bad = SurfaceProfile::Graph { x: vec![0.0, 0.5, 1.0], eta: vec![1.0, 1.1, 0.8] };
        assert!(matches!(bad.validate(true), Err(Error::NonMonotoneSurface { .. })));
        let back = SurfaceProfile::Parametric {
            s: vec![0.0, 1.0, 2.0],
            u: vec![0.0, 1.0, 0.5],
            v: vec![0.0, 1.0, 0.0],
        };
        assert!(matches!(back.validate(false), Err(Error::Validation(_))));
        let vertical = SurfaceProfile::Parametric {
            s: vec![0.0, 1.0, 2.0, 3.0],
            u: vec![0.0, 1.0, 1.0, 2.0],
            v: vec![0.0, 1.0, 2.0, 2.0],
        };
        vertical.validate(false).unwrap();
        let p = SurfaceProfile::from_csv(&good.to_csv()).unwrap();
        assert_eq!(p, good);
    }
}
