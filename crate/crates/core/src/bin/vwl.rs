//! `vwl`: command-line front end.
//!
//! Every subcommand prints a JSON report on stdout and, with `--out`, writes
//! its CSV/JSON artifacts there. The exit code is 0 when every check passes;
//! otherwise it names the first failing category (see [`Category`]).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use vwl::blowup::{self, BlowSampling, Cone, ConeOutcome, CornerFlow, FrameWindow};
use vwl::config::{self, RunConfig};
use vwl::field::{self, PlanarField, SurfaceProfile, TestFn, WaveField};
use vwl::inteq::{self, SolveOptions, ThetaSolution};
use vwl::laminar::{self, DepthRoot};
use vwl::pressure::{self, HeadKind, MultiplierFn};
use vwl::report::to_json;
use vwl::vorticity;
use vwl::wavegen::{self, BranchParams, SolverOptions};
use vwl::{Error, Result, VorticityFn};

#[derive(Parser)]
#[command(name = "vwl", version, about = "Numerical laboratory for steady periodic water waves with vorticity")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    group: Group,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid size, e.g. 128x128.
    #[arg(long, global = true, value_name = "NxM")]
    grid: Option<String>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Group {
    /// Vorticity functions and the bounds built from them.
    Vort {
        #[command(subcommand)]
        cmd: VortCmd,
    },
    /// Laminar (X-independent) flows.
    Laminar {
        #[command(subcommand)]
        cmd: LaminarCmd,
    },
    /// Residual checks on tabulated fields.
    Field {
        #[command(subcommand)]
        cmd: FieldCmd,
    },
    /// Pressure-head functionals.
    Pressure {
        #[command(subcommand)]
        cmd: PressureCmd,
    },
    /// Wave families by continuation.
    Wavegen {
        #[command(subcommand)]
        cmd: WavegenCmd,
    },
    /// Blow-up limits at stagnation points.
    Blowup {
        #[command(subcommand)]
        cmd: BlowupCmd,
    },
    /// The turning-angle integral equation.
    Theta {
        #[command(subcommand)]
        cmd: ThetaCmd,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum VortCmd {
    /// Tabulate γ and its hat transform at params.r.
    Hat,
    /// Check the hypotheses for the laminar construction.
    Jhb,
    /// λ₀ and the upper bound f(λ₀) for Q.
    Qbound,
    /// Hypotheses needed for a bounded branch.
    Zxc,
}

#[derive(Subcommand, Clone, Copy)]
enum LaminarCmd {
    /// The laminar flow with a stagnation point on the surface.
    Extreme,
    /// Laminar flow with given Q (params.q).
    Regular,
}

#[derive(Subcommand, Clone, Copy)]
enum FieldCmd {
    /// Strong residuals of a field CSV.
    Residuals,
    /// Weak-form residual against a bump test function.
    Weak,
    /// Move the height datum by params.shift.
    Shift,
    /// List stagnation points of a field.
    Stagnation,
}

#[derive(Subcommand, Clone, Copy)]
enum PressureCmd {
    /// Pressure head functionals R, T and S.
    Head,
    /// Pointwise Sperb inequality.
    Sperb,
    /// Two-sided bound on |∇ψ|² + 2Γ̂(ψ) by its surface extremes.
    Nqt,
    /// Fit the constant in the square-root velocity bound.
    Sqrtfit,
}

#[derive(Subcommand, Clone, Copy)]
enum WavegenCmd {
    /// Continue a wave family from the laminar seed.
    Continue,
    /// Recheck a written family from its manifest.
    Diagnose,
}

#[derive(Subcommand, Clone, Copy)]
enum BlowupCmd {
    /// The Stokes corner flow and its blow-up check.
    Corner,
    /// Corner flow for given angles, strength fitted unless params.beta is set.
    Family,
    /// Verify the blow-up limit of a corner flow or field.
    Verify,
    /// Rescaled frames at shrinking scales params.eps.
    Rescale,
    /// Corner angle of a surface profile CSV.
    Angle,
    /// Cone condition below the stagnation point.
    Cone,
}

#[derive(Subcommand, Clone, Copy)]
enum ThetaCmd {
    /// Check the log-kernel quadrature against its exact mass.
    Quad,
    /// Solve the turning-angle equation.
    Solve,
    /// Check the lower bound on an initial θ.
    Vsq,
    /// Rebuild the surface from θ.
    Reconstruct,
}

/// Failing-check categories and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Hypothesis = 10,
    Residual = 11,
    Pressure = 12,
    Bound = 13,
    Blowup = 14,
    Cone = 15,
    Theta = 16,
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Schema { .. } | Error::Validation(_) | Error::Parse(_) => 2,
        Error::Io(_) | Error::Json(_) => 3,
        _ => 4,
    }
}

/// A report plus the checks that failed, in order.
struct Outcome {
    report: Value,
    failed: Vec<Category>,
}

impl Outcome {
    fn new(report: Value) -> Self {
        Self { report, failed: Vec::new() }
    }

    fn check(mut self, ok: bool, cat: Category) -> Self {
        if !ok {
            self.failed.push(cat);
        }
        self
    }
}

struct Ctx {
    cfg: RunConfig,
    has_config: bool,
    out: Option<PathBuf>,
}

impl Ctx {
    fn require_config(&self) -> Result<()> {
        if self.has_config {
            Ok(())
        } else {
            Err(Error::Schema { path: "gamma".into(), message: "this subcommand needs --config with a vorticity".into() })
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<Option<String>> {
        match &self.out {
            None => Ok(None),
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(name);
                std::fs::write(&p, text)?;
                Ok(Some(p.display().to_string()))
            }
        }
    }

    fn input_field(&self) -> Result<WaveField> {
        let path = self
            .cfg
            .param_str("input")?
            .ok_or_else(|| Error::Schema { path: "params.input".into(), message: "missing field CSV".into() })?;
        let text = std::fs::read_to_string(path)?;
        WaveField::from_csv(&text, self.cfg.vorticity.clone())
    }

    fn multiplier(&self) -> Result<Option<MultiplierFn>> {
        Ok(self.cfg.param_vorticity("multiplier")?.map(MultiplierFn))
    }

    fn root(&self) -> Result<DepthRoot> {
        match self.cfg.param_str("root")? {
            None | Some("deepest") => Ok(DepthRoot::Deepest),
            Some("shallowest") => Ok(DepthRoot::Shallowest),
            Some(other) => Err(Error::Schema { path: "params.root".into(), message: format!("expected deepest or shallowest, got {other}") }),
        }
    }
}

fn load(common: &Common) -> Result<Ctx> {
    let (mut cfg, has_config) = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            (config::parse_config_in(&text, p.parent())?, true)
        }
        None => (RunConfig::with_vorticity(VorticityFn::zero(1.0)?), false),
    };
    if let Some(g) = &common.grid {
        (cfg.nx, cfg.ny) = config::parse_grid(g)?;
    }
    if let Some(t) = common.tol {
        cfg.tol = config::check_tol(t)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common.out.clone().or_else(|| cfg.out.clone());
    Ok(Ctx { cfg, has_config, out })
}

fn vort(ctx: &Ctx, cmd: VortCmd) -> Result<Outcome> {
    ctx.require_config()?;
    let c = &ctx.cfg;
    let v = &c.vorticity;
    Ok(match cmd {
        VortCmd::Hat => {
            let r = c.param_list("r")?.unwrap_or_else(|| (0..=10).map(|k| c.b * k as f64 / 10.0).collect());
            let gamma: Vec<f64> = r.iter().map(|&x| v.gamma(x)).collect::<Result<_>>()?;
            let hat: Vec<f64> = r.iter().map(|&x| v.gamma_hat(x)).collect::<Result<_>>()?;
            Outcome::new(json!({"r": r, "gamma": gamma, "gamma_hat": hat, "gamma_hat_max": v.gamma_hat_max()?}))
        }
        VortCmd::Jhb => {
            let j = vorticity::check_jhb(v, c.g, c.l)?;
            Outcome::new(serde_json::to_value(j)?).check(j.holds, Category::Hypothesis)
        }
        VortCmd::Qbound => {
            let q = vorticity::cs_q_bound(v, c.g)?;
            let f0 = q.f_at_lambda0()?;
            let f_lower = q.f(q.lower).ok();
            Outcome::new(json!({"lambda0": q.lambda0, "f_lambda0": f0, "lower": q.lower, "f_lower": f_lower}))
        }
        VortCmd::Zxc => {
            let ok = vorticity::check_zxc_hypotheses(v);
            Outcome::new(json!({"holds": ok})).check(ok, Category::Hypothesis)
        }
    })
}

fn residual_json(w: &WaveField, tol: f64) -> Result<(Value, bool)> {
    let r = field::strong_residuals(w)?;
    let pass = r.max_strong() <= tol;
    Ok((json!({"residuals": r, "max_strong": r.max_strong(), "tol": tol, "pass": pass}), pass))
}

fn laminar_cmd(ctx: &Ctx, cmd: LaminarCmd) -> Result<Outcome> {
    ctx.require_config()?;
    let c = &ctx.cfg;
    let wave = match cmd {
        LaminarCmd::Extreme => laminar::trivial_extreme(&c.vorticity, c.g, 0.0)?,
        LaminarCmd::Regular => {
            let q = c.param_f64("q")?.ok_or_else(|| Error::Schema { path: "params.q".into(), message: "missing".into() })?;
            laminar::laminar_regular(&c.vorticity, c.g, q, 0.0, ctx.root()?)?
        }
    };
    let w = WaveField::from_laminar(&wave, c.l, c.nx, c.ny)?;
    let (res, pass) = residual_json(&w, c.tol)?;
    let file = ctx.write("laminar.csv", &w.to_csv())?;
    let stag = field::stagnation_points(&w, c.tol.sqrt());
    Ok(Outcome::new(json!({
        "depth": wave.depth, "Q": wave.q, "lambda": wave.lambda, "is_extreme": wave.is_extreme,
        "stagnation_points": stag.len(), "check": res, "file": file,
    }))
    .check(pass, Category::Residual))
}

fn field_cmd(ctx: &Ctx, cmd: FieldCmd) -> Result<Outcome> {
    ctx.require_config()?;
    let c = &ctx.cfg;
    let w = ctx.input_field()?;
    Ok(match cmd {
        FieldCmd::Residuals => {
            let (res, pass) = residual_json(&w, c.tol)?;
            Outcome::new(res).check(pass, Category::Residual)
        }
        FieldCmd::Weak => {
            let get = |k: &str| c.param_f64(k)?.ok_or_else(|| Error::Schema { path: format!("params.{k}"), message: "missing".into() });
            let zeta = TestFn::bump(get("cx")?, get("cy")?, get("radius")?);
            let r = field::weak_residual(&w, &zeta)?;
            Outcome::new(json!({"weak_residual": r, "tol": c.tol})).check(r.abs() <= c.tol, Category::Residual)
        }
        FieldCmd::Shift => {
            let d = c.param_f64("shift")?.ok_or_else(|| Error::Schema { path: "params.shift".into(), message: "missing".into() })?;
            let s = field::shift_datum(&w, d);
            let file = ctx.write("shifted.csv", &s.to_csv())?;
            Outcome::new(json!({"Q": s.q, "bottom": s.bottom, "file": file}))
        }
        FieldCmd::Stagnation => {
            let pts = field::stagnation_points(&w, c.tol);
            Outcome::new(json!({"count": pts.len(), "points": pts}))
        }
    })
}

fn pressure_cmd(ctx: &Ctx, cmd: PressureCmd) -> Result<Outcome> {
    ctx.require_config()?;
    let c = &ctx.cfg;
    let w = ctx.input_field()?;
    let lam = ctx.multiplier()?;
    Ok(match cmd {
        PressureCmd::Head => {
            let kind = match c.param_str("kind")?.unwrap_or("T") {
                "R" => HeadKind::R,
                "T" => HeadKind::T,
                "S" => HeadKind::S,
                k => return Err(Error::Schema { path: "params.kind".into(), message: format!("expected R, T or S, got {k}") }),
            };
            let h = pressure::pressure_head(&w, kind, lam.as_ref())?;
            let file = ctx.write("head.csv", &w.to_csv_with(&h.values, "head"))?;
            let pass = h.max <= c.tol;
            Outcome::new(json!({"kind": kind, "min": h.min, "max": h.max, "argmin": h.argmin, "argmax": h.argmax, "varpi": h.varpi, "file": file, "pass": pass}))
                .check(pass, Category::Pressure)
        }
        PressureCmd::Sperb => {
            let lam = lam.unwrap_or(MultiplierFn::zero(c.b)?);
            let s = pressure::sperb_residual(&w, &lam)?;
            Outcome::new(serde_json::to_value(s)?)
        }
        PressureCmd::Nqt => {
            let n = pressure::nqt_check(&w)?;
            Outcome::new(serde_json::to_value(n)?).check(n.holds, Category::Pressure)
        }
        PressureCmd::Sqrtfit => {
            let k = pressure::sqrt_bound_fit(&w)?;
            let pass = (1.0..=2.0).contains(&k);
            Outcome::new(json!({"K": k, "within_bounds": pass})).check(pass, Category::Bound)
        }
    })
}

fn solver_options(c: &RunConfig) -> Result<SolverOptions> {
    let mut o = SolverOptions { export_nx: c.nx, export_ny: c.ny, ..Default::default() };
    if let Some(m) = c.param_usize("modes_q")? {
        o.modes_q = m;
        o.max_modes_q = o.max_modes_q.max(m);
    }
    if let Some(n) = c.param_usize("modes_p")? {
        o.modes_p = n;
    }
    if let Some(t) = c.param_f64("newton_tol")? {
        o.tol = t;
    }
    Ok(o)
}

/// Bound, pressure-head and nqt checks along a family of fields.
fn family_checks(fields: &[(f64, WaveField)], vfn: &VorticityFn, g: f64, tol: f64) -> Result<(Value, Vec<Category>)> {
    let qb = vorticity::cs_q_bound(vfn, g)?;
    let f0 = qb.f_at_lambda0()?;
    let mut rows = Vec::new();
    let (mut head_ok, mut nqt_ok, mut bound_ok) = (true, true, true);
    for (amp, w) in fields {
        let t = pressure::pressure_head(w, HeadKind::T, None)?;
        let n = pressure::nqt_check(w)?;
        head_ok &= t.max <= tol;
        nqt_ok &= n.holds;
        bound_ok &= w.q <= f0 + 1e-6;
        rows.push(json!({"amplitude": amp, "Q": w.q, "T_max": t.max, "nqt": n}));
    }
    let mut failed = Vec::new();
    if !head_ok || !nqt_ok {
        failed.push(Category::Pressure);
    }
    if !bound_ok {
        failed.push(Category::Bound);
    }
    Ok((json!({"f_lambda0": f0, "lambda0": qb.lambda0, "members": rows, "T_ok": head_ok, "nqt_ok": nqt_ok, "q_bound_ok": bound_ok}), failed))
}

fn wavegen_cmd(ctx: &Ctx, cmd: WavegenCmd) -> Result<Outcome> {
    ctx.require_config()?;
    let c = &ctx.cfg;
    match cmd {
        WavegenCmd::Continue => {
            let params = BranchParams { vorticity: c.vorticity.clone(), g: c.g, half_period: c.l };
            let amps = c.param_list("amplitudes")?.unwrap_or_else(|| (1..=10).map(|k| 0.02 * k as f64).collect());
            let fam = wavegen::continue_family(&params, &amps, &solver_options(c)?)?;
            let diag = wavegen::exi_diagnostics(&fam)?;
            if let Some(dir) = &ctx.out {
                wavegen::write_family(&fam, dir)?;
            }
            let fields: Vec<(f64, WaveField)> = fam.members.iter().map(|m| (m.amplitude, m.field.clone())).collect();
            let (checks, failed) = family_checks(&fields, &c.vorticity, c.g, c.tol.max(1e-6))?;
            let mut out = Outcome::new(json!({
                "lambda_star": fam.lambda_star, "seed_Q": fam.seed_q, "truncated": fam.truncated,
                "diagnostics": diag, "checks": checks,
            }));
            out.failed = failed;
            Ok(out)
        }
        WavegenCmd::Diagnose => {
            let path = c
                .param_str("input")?
                .ok_or_else(|| Error::Schema { path: "params.input".into(), message: "missing family directory".into() })?;
            let dir = if Path::new(path).is_dir() { PathBuf::from(path) } else { Path::new(path).parent().unwrap_or(Path::new(".")).to_path_buf() };
            let manifest: wavegen::Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
            let mut fields = Vec::new();
            for m in &manifest.members {
                let text = std::fs::read_to_string(dir.join(&m.file))?;
                fields.push((m.diagnostics.amplitude, WaveField::from_csv(&text, c.vorticity.clone())?));
            }
            let (checks, failed) = family_checks(&fields, &c.vorticity, c.g, c.tol.max(1e-6))?;
            let mut out = Outcome::new(json!({"members": manifest.members.len(), "checks": checks}));
            out.failed = failed;
            Ok(out)
        }
    }
}

fn source_field(ctx: &Ctx) -> Result<Source> {
    let c = &ctx.cfg;
    match c.param_str("source")?.unwrap_or("stokes") {
        "stokes" => Ok(Source::Corner(blowup::stokes_corner(c.g)?)),
        "trivial" => {
            let v = if ctx.has_config { c.vorticity.clone() } else { VorticityFn::constant(-1.0, 1.0)? };
            let lw = laminar::trivial_extreme(&v, c.g, 0.0)?;
            let w = WaveField::from_laminar(&lw, c.l, c.nx, c.ny)?;
            let shift = w.q / (2.0 * w.g);
            Ok(Source::Field(Box::new(field::shift_datum(&w, shift))))
        }
        "input" => Ok(Source::Field(Box::new(ctx.input_field()?))),
        other => Err(Error::Schema { path: "params.source".into(), message: format!("expected stokes, trivial or input, got {other}") }),
    }
}

enum Source {
    Corner(CornerFlow),
    Field(Box<WaveField>),
}

fn sampling(c: &RunConfig) -> Result<BlowSampling> {
    let mut s = BlowSampling { n: c.nx, tol: if c.tol < 1e-6 { 1e-6 } else { c.tol }, ..Default::default() };
    if let Some(r) = c.param_f64("radius")? {
        s.radius = r;
    }
    if let Some(m) = c.param_usize("boundary_samples")? {
        s.boundary_samples = m;
    }
    Ok(s)
}

fn blowup_cmd(ctx: &Ctx, cmd: BlowupCmd) -> Result<Outcome> {
    let c = &ctx.cfg;
    Ok(match cmd {
        BlowupCmd::Corner => {
            let s = blowup::stokes_corner(c.g)?;
            let rep = blowup::verify_blow(&s, c.g, &sampling(c)?)?;
            let w = s.window_field(-1.0, 1.0, -1.0, c.nx, c.ny)?;
            let file = ctx.write("stokes_corner.csv", &w.to_csv())?;
            let y = -1.0 / 3f64.sqrt();
            let gr = s.grad(1.0, y);
            Outcome::new(json!({"report": rep, "grad_sq_at_1": gr[0] * gr[0] + gr[1] * gr[1], "file": file})).check(rep.pass, Category::Blowup)
        }
        BlowupCmd::Family => {
            let get = |k: &str| c.param_f64(k)?.ok_or_else(|| Error::Schema { path: format!("params.{k}"), message: "missing".into() });
            let (ap, am) = (get("alpha_plus")?, get("alpha_minus")?);
            let opts = sampling(c)?;
            let beta = match c.param_f64("beta")? {
                Some(b) => b,
                None => blowup::fit_strength(ap, am, c.g, &opts)?,
            };
            let f = blowup::corner_family(ap, am, beta, c.g)?;
            let rep = blowup::verify_blow(&f, c.g, &opts)?;
            Outcome::new(json!({"beta": beta, "exponent": f.exponent(), "report": rep})).check(rep.pass, Category::Blowup)
        }
        BlowupCmd::Verify => {
            let opts = sampling(c)?;
            let rep = match source_field(ctx)? {
                Source::Corner(s) => blowup::verify_blow(&s, c.g, &opts)?,
                Source::Field(w) => blowup::verify_blow(w.as_ref(), c.g, &opts)?,
            };
            Outcome::new(serde_json::to_value(rep)?).check(rep.pass, Category::Blowup)
        }
        BlowupCmd::Rescale => {
            let eps = c.param_list("eps")?.unwrap_or_else(|| (1..=6).map(|k| 10f64.powi(-k)).collect());
            let win = FrameWindow::default();
            let src = source_field(ctx)?;
            let mut rows = Vec::new();
            let mut frames = Vec::new();
            for (k, &e) in eps.iter().enumerate() {
                let fr = match &src {
                    Source::Corner(s) => blowup::rescale(s, e, &win)?,
                    Source::Field(w) => blowup::rescale(w.as_ref(), e, &win)?,
                };
                let file = ctx.write(&format!("frame_{k:02}.csv"), &fr.to_csv(c.g))?;
                rows.push(json!({"eps": e, "sup_norm": fr.sup_norm(), "min": fr.min_value(), "file": file}));
                frames.push(fr);
            }
            let spread = frames.windows(2).map(|w| w[0].max_difference(&w[1])).fold(0.0, f64::max);
            Outcome::new(json!({"frames": rows, "max_consecutive_difference": spread}))
        }
        BlowupCmd::Angle => {
            let path = c
                .param_str("input")?
                .ok_or_else(|| Error::Schema { path: "params.input".into(), message: "missing profile CSV".into() })?;
            let prof = SurfaceProfile::from_csv(&std::fs::read_to_string(path)?)?;
            let a = blowup::corner_angle(&prof)?;
            Outcome::new(serde_json::to_value(a)?)
        }
        BlowupCmd::Cone => {
            let aperture = c.param_f64("aperture_deg")?.unwrap_or(120.0).to_radians();
            let cone = Cone {
                axis: c.param_f64("axis")?.unwrap_or(-0.5 * PI),
                half_aperture: 0.5 * aperture,
                r0: c.param_f64("r0")?.unwrap_or(0.5),
            };
            let delta = c.param_f64("delta")?.unwrap_or(1e-3);
            let out = match source_field(ctx)? {
                Source::Corner(s) => blowup::oddson_cone_check(&s, &cone, delta)?,
                Source::Field(w) => blowup::oddson_cone_check(w.as_ref(), &cone, delta)?,
            };
            let ok = matches!(out, ConeOutcome::Kappa { .. });
            Outcome::new(serde_json::to_value(out)?).check(ok, Category::Cone)
        }
    })
}

fn theta_init(c: &RunConfig, x: Vec<f64>) -> Result<ThetaSolution> {
    match c.param_str("init")?.unwrap_or("constant") {
        "constant" => ThetaSolution::constant(x, c.param_f64("value")?.unwrap_or(PI / 4.0)),
        "ramp" => ThetaSolution::from_fn(x, |y| 0.5 * PI * y / (1.0 + y)),
        "random" => inteq::random_admissible(x, c.seed),
        other => Err(Error::Schema { path: "params.init".into(), message: format!("expected constant, ramp or random, got {other}") }),
    }
}

fn theta_cmd(ctx: &Ctx, cmd: ThetaCmd) -> Result<Outcome> {
    let c = &ctx.cfg;
    let n = c.param_usize("nodes")?.unwrap_or(2048);
    let x = inteq::geometric_grid(n, c.param_f64("x_min")?.unwrap_or(1e-6), c.param_f64("x_max")?.unwrap_or(1e6));
    Ok(match cmd {
        ThetaCmd::Quad => {
            let xs = c.param_list("x")?.unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
            let vals: Vec<f64> = xs.iter().map(|&xi| inteq::log_kernel_integral(xi, |y| 1.0 / y, &[])).collect::<Result<_>>()?;
            let err = vals.iter().fold(0.0f64, |a, v| a.max((v - inteq::KERNEL_MASS).abs()));
            let pass = err <= c.tol.max(1e-12);
            Outcome::new(json!({"x": xs, "value": vals, "exact": inteq::KERNEL_MASS, "max_error": err})).check(pass, Category::Theta)
        }
        ThetaCmd::Solve => {
            let init = theta_init(c, x)?;
            let opts = SolveOptions {
                omega: c.param_f64("omega")?.unwrap_or(0.5),
                tol: c.param_f64("iter_tol")?.unwrap_or(1e-10),
                max_iter: c.param_usize("max_iter")?.unwrap_or(500),
            };
            let mut log = inteq::ThetaLog::default();
            let res = inteq::solve_theta_logged(&init, &opts, &mut log);
            ctx.write("theta_log.json", &log.to_json()?)?;
            let sol = res?;
            let file = ctx.write("theta.csv", &sol.to_csv())?;
            let err = sol.sup_error(PI / 6.0);
            let bound = log.bound_after_first.unwrap_or(false);
            Outcome::new(json!({"iterations": log.records.len(), "sup_error": err, "min_theta": sol.min(), "bound_after_first": bound, "file": file}))
                .check(err <= 1e-5 && bound, Category::Theta)
        }
        ThetaCmd::Vsq => {
            let sol = theta_init(c, x)?;
            let v = inteq::vsq_bound_check(&sol);
            Outcome::new(serde_json::to_value(v)?).check(v.holds, Category::Theta)
        }
        ThetaCmd::Reconstruct => {
            let sol = theta_init(c, x)?;
            let r = inteq::reconstruct_surface(&sol, c.g)?;
            let file = ctx.write("boundary.csv", &r.to_csv())?;
            let dev = (0..r.t.len()).fold(0.0f64, |a, i| a.max((r.v[i] + r.u[i].abs() / 3f64.sqrt()).abs() / r.u[i].abs().max(1.0)));
            Outcome::new(json!({"samples": r.t.len(), "corner_deviation": dev, "slope_defect": r.slope_defect(&sol), "file": file}))
        }
    })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let ctx = load(&cli.common)?;
    match &cli.group {
        Group::Vort { cmd } => vort(&ctx, *cmd),
        Group::Laminar { cmd } => laminar_cmd(&ctx, *cmd),
        Group::Field { cmd } => field_cmd(&ctx, *cmd),
        Group::Pressure { cmd } => pressure_cmd(&ctx, *cmd),
        Group::Wavegen { cmd } => wavegen_cmd(&ctx, *cmd),
        Group::Blowup { cmd } => blowup_cmd(&ctx, *cmd),
        Group::Theta { cmd } => theta_cmd(&ctx, *cmd),
    }
}

fn init_threads() {
    let n = std::env::var("VWL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        // a second initialisation only fails if something already built the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(out) => {
            let failed: Vec<String> = out.failed.iter().map(|c| format!("{c:?}").to_lowercase()).collect();
            let doc = json!({"result": out.report, "failed": failed});
            match to_json(&doc) {
                Ok(s) => print!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(error_code(&e));
                }
            }
            match out.failed.first() {
                None => ExitCode::SUCCESS,
                Some(c) => ExitCode::from(*c as u8),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
