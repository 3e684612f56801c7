//! Vorticity functions and the scalar functionals built from them.
//!
//! A [`VorticityFn`] is either a polynomial in the stream value or a
//! monotone cubic through a table of samples. Everything downstream only
//! needs point values, the derivative, and the antiderivative
//! `gamma_hat(r) = int_0^r gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, MonotoneCubic};

/// Quadrature tolerance for every integral of the vorticity data.
pub const QUAD_TOL: f64 = 1e-12;

/// Points used for sampled sign and monotonicity checks.
pub const CHECK_POINTS: usize = 1001;

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Poly(Vec<f64>),
    Table { interp: MonotoneCubic, cumulative: Vec<f64> },
}

/// Vorticity function gamma on `[0, B]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VorticitySpec", into = "VorticitySpec")]
pub struct VorticityFn {
    form: Form,
    b: f64,
}

/// Wire form of a vorticity function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VorticitySpec {
    Poly {
        coeffs: Vec<f64>,
        #[serde(rename = "B")]
        b: f64,
    },
    Table {
        r: Vec<f64>,
        gamma: Vec<f64>,
        #[serde(rename = "B")]
        b: f64,
    },
}

impl TryFrom<VorticitySpec> for VorticityFn {
    type Error = Error;

    fn try_from(spec: VorticitySpec) -> Result<Self> {
        match spec {
            VorticitySpec::Poly { coeffs, b } => VorticityFn::poly(coeffs, b),
            VorticitySpec::Table { r, gamma, b } => VorticityFn::table(r, gamma, b),
        }
    }
}

impl From<VorticityFn> for VorticitySpec {
    fn from(v: VorticityFn) -> Self {
        match v.form {
            Form::Poly(coeffs) => VorticitySpec::Poly { coeffs, b: v.b },
            Form::Table { interp, .. } => VorticitySpec::Table {
                r: interp.x().to_vec(),
                gamma: interp.y().to_vec(),
                b: v.b,
            },
        }
    }
}

fn check_b(b: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidVorticity(format!("B must be positive and finite, got {b}")));
    }
    Ok(())
}

impl VorticityFn {
    /// `gamma(r) = sum_k coeffs[k] r^k`.
    pub fn poly(coeffs: Vec<f64>, b: f64) -> Result<Self> {
        check_b(b)?;
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVorticity("polynomial needs finite coefficients".into()));
        }
        Ok(Self { form: Form::Poly(coeffs), b })
    }

    pub fn constant(value: f64, b: f64) -> Result<Self> {
        Self::poly(vec![value], b)
    }

    /// Irrotational flow, `gamma = 0`.
    pub fn zero(b: f64) -> Result<Self> {
        Self::poly(vec![0.0], b)
    }

    /// Monotone cubic through `(r_k, gamma_k)`; the table must cover `[0, B]`.
    pub fn table(r: Vec<f64>, gamma: Vec<f64>, b: f64) -> Result<Self> {
        check_b(b)?;
        if r.len() < 4 {
            return Err(Error::InvalidVorticity(format!("table needs at least 4 nodes, got {}", r.len())));
        }
        if r.len() != gamma.len() {
            return Err(Error::InvalidVorticity("r and gamma differ in length".into()));
        }
        if r.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidVorticity("table entries must be finite".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidVorticity("table abscissae must be strictly increasing".into()));
        }
        let slack = 1e-12 * b;
        if r[0] > slack || *r.last().unwrap() < b - slack {
            return Err(Error::InvalidVorticity(format!(
                "table covers [{}, {}] but must cover [0, {b}]",
                r[0],
                r.last().unwrap()
            )));
        }
        let interp = MonotoneCubic::new(r, gamma)?;
        let xs = interp.x().to_vec();
        let mut cumulative = vec![0.0; xs.len()];
        for k in 1..xs.len() {
            let seg = quad::integrate(|t| interp.eval(t), xs[k - 1], xs[k], QUAD_TOL, QUAD_TOL)?;
            cumulative[k] = cumulative[k - 1] + seg;
        }
        Ok(Self { form: Form::Table { interp, cumulative }, b })
    }

    /// Half-boundary stream value `B`.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn smoothness(&self) -> &'static str {
        match self.form {
            Form::Poly(_) => "C-infinity (polynomial)",
            Form::Table { .. } => "C1 (monotone cubic)",
        }
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if r.is_nan() || r < 0.0 || r > self.b {
            return Err(Error::OutOfDomain { value: r, lo: 0.0, hi: self.b });
        }
        Ok(())
    }

    fn eval_unchecked(&self, r: f64) -> (f64, f64) {
        match &self.form {
            Form::Poly(c) => {
                let mut v = 0.0;
                let mut d = 0.0;
                for ck in c.iter().rev() {
                    d = d * r + v;
                    v = v * r + ck;
                }
                (v, d)
            }
            Form::Table { interp, .. } => interp.eval_with_derivative(r),
        }
    }

    pub fn gamma(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(self.eval_unchecked(r).0)
    }

    pub fn gamma_prime(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(self.eval_unchecked(r).1)
    }

    /// Evaluates gamma after clamping into `[0, B]`; for grid values that
    /// sit a rounding error outside the range.
    pub fn gamma_clamped(&self, r: f64) -> f64 {
        self.eval_unchecked(r.clamp(0.0, self.b)).0
    }

    /// `int_0^r gamma(t) dt` by adaptive quadrature.
    pub fn gamma_hat(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        match &self.form {
            Form::Poly(_) => quad::integrate(|t| self.eval_unchecked(t).0, 0.0, r, QUAD_TOL, QUAD_TOL),
            Form::Table { interp, cumulative } => {
                let xs = interp.x();
                // last node at or below r (r >= 0 >= xs[0] is guaranteed)
                let k = match xs.binary_search_by(|v| v.partial_cmp(&r).unwrap()) {
                    Ok(k) => k,
                    Err(k) => k - 1,
                };
                // cumulative is anchored at xs[0]; shift so the origin is 0
                let origin = if xs[0] < 0.0 {
                    quad::integrate(|t| interp.eval(t), xs[0], 0.0, QUAD_TOL, QUAD_TOL)?
                } else {
                    0.0
                };
                let tail = quad::integrate(|t| interp.eval(t), xs[k], r, QUAD_TOL, QUAD_TOL)?;
                Ok(cumulative[k] + tail - origin)
            }
        }
    }

    pub fn gamma_hat_clamped(&self, r: f64) -> f64 {
        self.gamma_hat(r.clamp(0.0, self.b)).unwrap_or(f64::NAN)
    }

    fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..n).map(move |k| self.b * k as f64 / (n - 1) as f64)
    }

    /// `max_{[0,B]} gamma_hat`. Candidates are the endpoints and the
    /// down-crossings of gamma; `gamma_hat(0) = 0` is always a candidate, so
    /// a nonpositive gamma gives exactly zero.
    pub fn gamma_hat_max(&self) -> Result<f64> {
        let mut best = 0.0_f64;
        best = best.max(self.gamma_hat(self.b)?);
        let pts: Vec<f64> = self.grid(4 * CHECK_POINTS).collect();
        for w in pts.windows(2) {
            let (g0, g1) = (self.eval_unchecked(w[0]).0, self.eval_unchecked(w[1]).0);
            if g0 > 0.0 && g1 <= 0.0 {
                let root = quad::bisect(|t| Ok(self.eval_unchecked(t).0), w[0], w[1], 1e-15 * self.b)?;
                best = best.max(self.gamma_hat(root)?);
            }
        }
        Ok(best)
    }

    /// `max_{[0,B]} gamma` (sampled, then refined by golden section).
    pub fn gamma_max(&self) -> f64 {
        let n = 4 * CHECK_POINTS;
        let pts: Vec<f64> = self.grid(n).collect();
        let (mut kbest, mut vbest) = (0, f64::NEG_INFINITY);
        for (k, &t) in pts.iter().enumerate() {
            let v = self.eval_unchecked(t).0;
            if v > vbest {
                kbest = k;
                vbest = v;
            }
        }
        let lo = pts[kbest.saturating_sub(1)];
        let hi = pts[(kbest + 1).min(n - 1)];
        let (mut a, mut b) = (lo, hi);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if self.eval_unchecked(c).0 > self.eval_unchecked(d).0 {
                b = d;
            } else {
                a = c;
            }
        }
        vbest.max(self.eval_unchecked(0.5 * (a + b)).0)
    }

    /// `varpi = max{0, max gamma} / 2`.
    pub fn varpi(&self) -> f64 {
        0.5 * self.gamma_max().max(0.0)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.grid(CHECK_POINTS).all(|t| self.eval_unchecked(t).0 <= 0.0)
    }

    /// `int_0^r (lambda - 2 gamma_hat(t))^{-1/2} dt`, through the substitution
    /// `t = u^2` so that the endpoint singularity at `t = 0` (present when
    /// `lambda = 2 gamma_hat(0) = 0`) becomes a bounded integrand.
    pub fn upsilon(&self, lambda: f64, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        let bad = std::cell::Cell::new(false);
        let integrand = |u: f64| {
            let t = u * u;
            let denom = lambda - 2.0 * self.gamma_hat(t.min(self.b)).unwrap_or(f64::NAN);
            if !(denom > 0.0) {
                bad.set(true);
                return 0.0;
            }
            2.0 * u / denom.sqrt()
        };
        let v = quad::integrate(integrand, 0.0, r.sqrt(), QUAD_TOL, QUAD_TOL)?;
        if bad.get() {
            return Err(Error::InvalidVorticity(format!(
                "lambda - 2 gamma_hat vanishes on (0, {r}] for lambda = {lambda}"
            )));
        }
        Ok(v)
    }

    /// `int_0^B (lambda - 2 gamma_hat)^{-3/2} dr`, used by `f'(lambda)`.
    fn upsilon_prime_integral(&self, lambda: f64) -> Result<f64> {
        let bad = std::cell::Cell::new(false);
        let integrand = |u: f64| {
            let t = u * u;
            let denom = lambda - 2.0 * self.gamma_hat(t.min(self.b)).unwrap_or(f64::NAN);
            if !(denom > 0.0) {
                bad.set(true);
                return 0.0;
            }
            2.0 * u / (denom * denom.sqrt())
        };
        let v = quad::integrate(integrand, 0.0, self.b.sqrt(), QUAD_TOL, QUAD_TOL)?;
        if bad.get() {
            return Err(Error::InvalidVorticity(format!("lambda = {lambda} is not above 2 gamma_hat_max")));
        }
        Ok(v)
    }
}

/// Result of the size condition on the vorticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JhbCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates
/// `int_0^B [pi^2 (B-r)^2 / L^2 * D^{1/2} + D^{3/2}] dr < g B^2`
/// with `D = 2 gamma_hat_max - 2 gamma_hat(r)`.
pub fn check_jhb(vfn: &VorticityFn, g: f64, l: f64) -> Result<JhbCheck> {
    if !(g > 0.0 && l > 0.0) {
        return Err(Error::Precondition(format!("g and L must be positive (g = {g}, L = {l})")));
    }
    let b = vfn.b();
    let ghmax = vfn.gamma_hat_max()?;
    let pi2 = std::f64::consts::PI.powi(2);
    let lhs = quad::integrate(
        |r| {
            let d = (2.0 * ghmax - 2.0 * vfn.gamma_hat(r).unwrap_or(f64::NAN)).max(0.0);
            pi2 * (b - r).powi(2) / (l * l) * d.sqrt() + d * d.sqrt()
        },
        0.0,
        b,
        QUAD_TOL,
        QUAD_TOL,
    )?;
    let rhs = g * b * b;
    Ok(JhbCheck { holds: lhs < rhs, lhs, rhs })
}

/// The function `f(lambda) = lambda + 2 g int_0^B (lambda - 2 gamma_hat)^{-1/2}`
/// together with its unique critical point `lambda0`.
#[derive(Debug, Clone)]
pub struct QBound {
    pub lambda0: f64,
    /// Left end of the domain of `f`, `2 gamma_hat_max`.
    pub lower: f64,
    pub g: f64,
    vfn: VorticityFn,
}

impl QBound {
    /// `f(lambda)`; also accepts `lambda = lower` when the integral converges
    /// there (e.g. `gamma(0) < 0` with `gamma <= 0`).
    pub fn f(&self, lambda: f64) -> Result<f64> {
        if lambda < self.lower {
            return Err(Error::OutOfDomain { value: lambda, lo: self.lower, hi: f64::INFINITY });
        }
        Ok(lambda + 2.0 * self.g * self.vfn.upsilon(lambda, self.vfn.b())?)
    }

    pub fn f_prime(&self, lambda: f64) -> Result<f64> {
        f_prime(&self.vfn, self.g, lambda)
    }

    pub fn f_at_lambda0(&self) -> Result<f64> {
        self.f(self.lambda0)
    }
}

fn f_prime(vfn: &VorticityFn, g: f64, lambda: f64) -> Result<f64> {
    Ok(1.0 - g * vfn.upsilon_prime_integral(lambda)?)
}

/// Locates `lambda0` by bisection on `f'`, starting from the bracket
/// `[2 gamma_hat_max + 1e-8 g B, 2 gamma_hat_max + 1e3 g B]` and widening it
/// geometrically when `f'` has no sign change.
pub fn cs_q_bound(vfn: &VorticityFn, g: f64) -> Result<QBound> {
    if !(g > 0.0) {
        return Err(Error::Precondition(format!("g must be positive, got {g}")));
    }
    let lower = 2.0 * vfn.gamma_hat_max()?;
    let scale = g * vfn.b();
    let mut lo_off = 1e-8 * scale;
    let mut hi_off = 1e3 * scale;
    let mut fl = f_prime(vfn, g, lower + lo_off)?;
    let mut fh = f_prime(vfn, g, lower + hi_off)?;
    let mut widen = 0;
    while !(fl < 0.0 && fh > 0.0) {
        if widen > 12 {
            return Err(Error::NoCriticalPoint { lo: lower + lo_off, hi: lower + hi_off });
        }
        if fl >= 0.0 {
            lo_off *= 1e-2;
            fl = f_prime(vfn, g, lower + lo_off)?;
        }
        if fh <= 0.0 {
            hi_off *= 1e2;
            fh = f_prime(vfn, g, lower + hi_off)?;
        }
        widen += 1;
    }
    // bisect in log(lambda - lower): the bracket spans many decades
    let (mut a, mut b) = (lo_off.ln(), hi_off.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f_prime(vfn, g, lower + m.exp())?;
        if fm < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if (b - a) < 1e-13 {
            break;
        }
    }
    let lambda0 = lower + (0.5 * (a + b)).exp();
    Ok(QBound { lambda0, lower, g, vfn: vfn.clone() })
}

/// True iff `gamma(0) < 0`, `gamma <= 0` and `gamma' >= -1e-12` on a
/// 1001-point grid.
pub fn check_zxc_hypotheses(vfn: &VorticityFn) -> bool {
    let n = CHECK_POINTS;
    let b = vfn.b();
    if !(vfn.eval_unchecked(0.0).0 < 0.0) {
        return false;
    }
    (0..n).all(|k| {
        let (v, d) = vfn.eval_unchecked(b * k as f64 / (n - 1) as f64);
        v <= 0.0 && d >= -1e-12
    })
}
