//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 3 asks for `Q_j <= f(lambda0) + 1e-6` along the rotational
//! family. The branch bifurcates from the laminar stream at `lambda* <
//! lambda0`, where `Q = f(lambda*) > f(lambda0)` already, and `Q` grows with
//! amplitude. The check is run exactly as stated and is expected to fail; the
//! test asserts that it is the only failure, and also reports the bounds that
//! do hold on this family (`Q_j < f(crest speed_j^2)` and `Q_j <= f(0+)`).
//!
//! Runs without the libtest harness so the lines are printed on success too.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use vwl::blowup::{
    corner_angle, corner_family, fit_strength, oddson_cone_check, rescale, stokes_corner, verify_blow, BlowSampling, Cone, ConeOutcome,
    CornerClass, FrameWindow,
};
use vwl::field::{shift_datum, stagnation_points, strong_residuals, PlanarField, SurfaceProfile, WaveField};
use vwl::inteq::{
    default_grid, log_kernel_integral, random_admissible, reconstruct_surface, solve_theta, theta_rhs, SolveOptions, ThetaSolution, KERNEL_MASS,
    VSQ_BOUND,
};
use vwl::laminar::trivial_extreme;
use vwl::pressure::{nqt_check, pressure_head, HeadKind};
use vwl::vorticity::cs_q_bound;
use vwl::wavegen::{continue_family, BranchParams, ContinuationFamily, SolverOptions};
use vwl::{Error, VorticityFn};

struct Line {
    id: usize,
    pass: bool,
}

fn report(lines: &mut Vec<Line>, id: usize, name: &str, limit: Duration, start: Instant, pass: bool, detail: String) {
    let took = start.elapsed();
    let pass = pass && took < limit;
    println!(
        "criterion {id:>2} [{}] {name}: {detail} ({:.2} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        limit.as_secs()
    );
    lines.push(Line { id, pass });
}

fn gamma_minus_one() -> VorticityFn {
    VorticityFn::constant(-1.0, 1.0).unwrap()
}

/// The trivial extreme wave moved so that its flat stagnant surface is `Y = 0`.
fn shifted_extreme(n: usize) -> WaveField {
    let lw = trivial_extreme(&gamma_minus_one(), 1.0, 0.0).unwrap();
    let w = WaveField::from_laminar(&lw, 1.0, n, n).unwrap();
    let shift = w.q / (2.0 * w.g);
    shift_datum(&w, shift)
}

fn criterion_1(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let v = gamma_minus_one();
    let lw = trivial_extreme(&v, 1.0, 0.0).unwrap();
    let w = WaveField::from_laminar(&lw, 1.0, 128, 128).unwrap();
    let r = strong_residuals(&w).unwrap();
    let stag = stagnation_points(&w, 1e-8);
    let depth_err = (lw.depth - 2f64.sqrt()).abs();
    let q_err = (lw.q - 2.0 * 2f64.sqrt()).abs();
    let pass = r.max_strong() <= 1e-8 && depth_err <= 1e-10 && q_err <= 1e-10 && stag.len() == w.nx();
    report(
        lines,
        1,
        "trivial extreme wave",
        Duration::from_secs(1),
        t,
        pass,
        format!("max strong residual {:.2e}, |depth-sqrt2| {depth_err:.1e}, |Q-2sqrt2| {q_err:.1e}, stagnant {}/{}", r.max_strong(), stag.len(), w.nx()),
    );
}

fn rotational_family() -> ContinuationFamily {
    let params = BranchParams { vorticity: gamma_minus_one(), g: 1.0, half_period: PI };
    let amps: Vec<f64> = (1..=10).map(|k| 0.02 * k as f64).collect();
    // 256 columns keep the finite-difference error in T below 1e-6 near the crest
    let opts = SolverOptions { export_nx: 256, export_ny: 128, ..Default::default() };
    continue_family(&params, &amps, &opts).unwrap()
}

fn criterion_2(lines: &mut Vec<Line>) -> ContinuationFamily {
    let t = Instant::now();
    let fam = rotational_family();
    let mut worst_t = f64::NEG_INFINITY;
    let mut nqt_all = true;
    let mut min_margin = f64::INFINITY;
    for m in &fam.members {
        let h = pressure_head(&m.field, HeadKind::T, None).unwrap();
        let n = nqt_check(&m.field).unwrap();
        worst_t = worst_t.max(h.max);
        nqt_all &= n.holds;
        min_margin = min_margin.min(n.lower_margin.min(n.upper_margin));
    }
    let count = fam.members.len();
    let pass = count >= 10 && fam.truncated.is_none() && worst_t <= 1e-6 && nqt_all;
    report(
        lines,
        2,
        "pressure head and nqt along the family",
        Duration::from_secs(300),
        t,
        pass,
        format!("{count} members, max T {worst_t:.2e}, nqt holds {nqt_all} (min margin {min_margin:.2e})"),
    );
    fam
}

fn criterion_3(lines: &mut Vec<Line>, fam: &ContinuationFamily) {
    let t = Instant::now();
    let qb = cs_q_bound(&gamma_minus_one(), 1.0).unwrap();
    let f0 = qb.f_at_lambda0().unwrap();
    let f_top = qb.f(qb.lower).unwrap();
    let qmax = fam.qs().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let literal = fam.members.iter().all(|m| m.q <= f0 + 1e-6);
    let crest_bound = fam.members.iter().all(|m| m.q < qb.f(m.crest_speed * m.crest_speed).unwrap());
    let top_bound = fam.members.iter().all(|m| m.q <= f_top);
    report(
        lines,
        3,
        "Q_j <= f(lambda0) + 1e-6",
        Duration::from_secs(1),
        t,
        literal,
        format!(
            "lambda0 {:.4}, f(lambda0) {f0:.6}, lambda* {:.4}, max Q {qmax:.6}; Q_j < f(crest^2) {crest_bound}, Q_j <= f(0+) = {f_top:.6} {top_bound}",
            qb.lambda0, fam.lambda_star
        ),
    );
    // the bounds that the theory does give must hold regardless
    assert!(crest_bound && top_bound);
}

fn criterion_4(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let s = stokes_corner(1.0).unwrap();
    let rep = verify_blow(&s, 1.0, &BlowSampling::default()).unwrap();
    let gr = s.grad(1.0, -1.0 / 3f64.sqrt());
    let err = (gr[0] * gr[0] + gr[1] * gr[1] - 2.0 / 3f64.sqrt()).abs();
    let pass = rep.pass && rep.harmonic.sup <= 1e-6 && rep.boundary.sup <= 1e-6 && rep.bernoulli.sup <= 1e-6 && err <= 1e-10;
    report(
        lines,
        4,
        "Stokes corner flow",
        Duration::from_secs(1),
        t,
        pass,
        format!(
            "harmonic {:.1e}, boundary {:.1e}, Bernoulli {:.1e}, |grad|^2 error {err:.1e}",
            rep.harmonic.sup, rep.boundary.sup, rep.bernoulli.sup
        ),
    );
}

fn criterion_5(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let s = ThetaSolution::constant(default_grid(), PI / 6.0).unwrap();
    let rhs = theta_rhs(&s).unwrap();
    let fp = rhs.iter().fold(0.0f64, |a, v| a.max((v - PI / 6.0).abs()));
    let mut kern = 0.0f64;
    for x in [0.1, 1.0, 10.0] {
        kern = kern.max((log_kernel_integral(x, |y| 1.0 / y, &[]).unwrap() - KERNEL_MASS).abs());
    }
    report(
        lines,
        5,
        "fixed point and kernel identity",
        Duration::from_secs(10),
        t,
        fp <= 1e-8 && kern <= 1e-8,
        format!("max |rhs(pi/6) - pi/6| {fp:.1e}, max kernel identity error {kern:.1e}"),
    );
}

fn criterion_6(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let opts = SolveOptions { tol: 1e-9, ..Default::default() };
    let (mut worst_err, mut worst_min, mut first_min) = (0.0f64, f64::INFINITY, f64::INFINITY);
    let mut failures = 0;
    for seed in 0..100 {
        let init = random_admissible(default_grid(), seed).unwrap();
        match solve_theta(&init, &opts) {
            Ok((sol, log)) => {
                worst_err = worst_err.max(sol.sup_error(PI / 6.0));
                first_min = first_min.min(log.records[0].min_theta);
                for r in log.records.iter().skip(1) {
                    worst_min = worst_min.min(r.min_theta);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let pass = failures == 0 && worst_err <= 1e-5 && worst_min >= VSQ_BOUND - 1e-9;
    report(
        lines,
        6,
        "uniqueness shadow",
        Duration::from_secs(300),
        t,
        pass,
        format!(
            "100 seeds, {failures} failed, worst sup error {worst_err:.1e}, min theta after the first iteration {worst_min:.4} (bound {VSQ_BOUND:.4}; first iterate min {first_min:.4})"
        ),
    );
}

fn criterion_7(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let s = ThetaSolution::constant(default_grid(), PI / 6.0).unwrap();
    let r = reconstruct_surface(&s, 1.0).unwrap();
    let dev = (0..r.t.len()).fold(0.0f64, |a, i| a.max((r.v[i] + r.u[i].abs() / 3f64.sqrt()).abs()));
    report(
        lines,
        7,
        "reconstruction matches the corner",
        Duration::from_secs(1),
        t,
        dev <= 1e-6,
        format!("max |V + |U|/sqrt3| {dev:.1e} over {} samples", r.t.len()),
    );
}

fn criterion_8(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let win = FrameWindow::default();
    let s = stokes_corner(1.0).unwrap();
    let base = rescale(&s, 1.0, &win).unwrap();
    let mut invariance = 0.0f64;
    for k in 1..=6 {
        let fr = rescale(&s, 10f64.powi(-k), &win).unwrap();
        invariance = invariance.max(fr.max_difference(&base));
    }
    let w = shifted_extreme(128);
    let norms: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| rescale(&w, e, &win).unwrap().sup_norm()).collect();
    let slopes: Vec<f64> = norms.windows(2).map(|p| (p[0] / p[1]).log10()).collect();
    let exp_ok = slopes.iter().all(|s| (s - 0.5).abs() <= 0.02);
    let x: Vec<f64> = (-2000..=2000).map(|k| k as f64 / 2000.0).collect();
    let eta = x.iter().map(|v| -v.abs() / 3f64.sqrt()).collect();
    let star = corner_angle(&SurfaceProfile::Graph { x: x.clone(), eta }).unwrap();
    let flat = corner_angle(&w.profile()).unwrap();
    let star_ok = [star.q_plus, star.q_minus].iter().all(|a| (a.q - 1.0 / 3f64.sqrt()).abs() <= 1e-3 && a.class == CornerClass::Corner);
    let flat_ok = [flat.q_plus, flat.q_minus].iter().all(|a| a.q.abs() <= 1e-12 && a.class == CornerClass::Flat);
    report(
        lines,
        8,
        "blow-up dichotomy",
        Duration::from_secs(30),
        t,
        invariance <= 1e-8 && exp_ok && star_ok && flat_ok,
        format!(
            "Stokes invariance {invariance:.1e}, extreme exponents {:?}, eta* slope {:.6}, flat slope {:.1e}",
            slopes.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>(),
            star.q_plus.q,
            flat.q_plus.q
        ),
    );
}

fn criterion_9(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let opts = BlowSampling::default();
    let mut fitted_pass = Vec::new();
    let mut zero_pass = Vec::new();
    for k in 0..50 {
        for m in 0..50 {
            let (ap, am) = (k as f64 * PI / 102.0, m as f64 * PI / 102.0);
            let beta = fit_strength(ap, am, 1.0, &opts).unwrap();
            if verify_blow(&corner_family(ap, am, beta, 1.0).unwrap(), 1.0, &opts).unwrap().pass {
                fitted_pass.push((k, m, beta));
            }
            if verify_blow(&corner_family(ap, am, 0.0, 1.0).unwrap(), 1.0, &opts).unwrap().pass {
                zero_pass.push((k, m));
            }
        }
    }
    // k = 17 is pi/6; the flat pair (0, 0) is where the fitted strength is 0
    let stokes = fitted_pass.iter().any(|&(k, m, b)| k == 17 && m == 17 && (b - 2.0 / 3.0).abs() < 1e-9);
    let only = fitted_pass.iter().all(|&(k, m, b)| (k == 17 && m == 17) || (k == 0 && m == 0 && b == 0.0));
    let zero_only_flat = zero_pass == vec![(0, 0)];
    report(
        lines,
        9,
        "corner-family scan",
        Duration::from_secs(120),
        t,
        stokes && only && zero_only_flat,
        format!("fitted-strength passes {:?}, zero-strength passes {:?}", fitted_pass.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), zero_pass),
    );
}

fn criterion_10(lines: &mut Vec<Line>) {
    let t = Instant::now();
    let s = stokes_corner(1.0).unwrap();
    let cone = Cone { axis: -PI / 2.0, half_aperture: PI / 3.0, r0: 1.0 };
    let kappa = match oddson_cone_check(&s, &cone, 10.0) {
        Ok(ConeOutcome::Kappa { kappa, .. }) => kappa,
        _ => f64::NAN,
    };
    let wide = Cone { half_aperture: 65f64.to_radians(), ..cone };
    let not_contained = matches!(oddson_cone_check(&s, &wide, 10.0), Err(Error::ConeNotContained(_)));
    let w = shifted_extreme(64);
    let flat = Cone { axis: -PI / 2.0, half_aperture: 85f64.to_radians(), r0: 0.5 };
    let violation = matches!(oddson_cone_check(&w, &flat, 1.0), Ok(ConeOutcome::Violation { .. }));
    let pass = ((kappa - 2.0 / 3.0) / (2.0 / 3.0)).abs() <= 0.05 && not_contained && violation;
    report(
        lines,
        10,
        "cone obstruction",
        Duration::from_secs(10),
        t,
        pass,
        format!("kappa {kappa:.6}, 130 deg not contained {not_contained}, 170 deg violation {violation}"),
    );
}

fn main() {
    let mut lines = Vec::new();
    criterion_1(&mut lines);
    let fam = criterion_2(&mut lines);
    criterion_3(&mut lines, &fam);
    criterion_4(&mut lines);
    criterion_5(&mut lines);
    criterion_6(&mut lines);
    criterion_7(&mut lines);
    criterion_8(&mut lines);
    criterion_9(&mut lines);
    criterion_10(&mut lines);
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("failed criteria: {failed:?}");
    assert_eq!(failed, vec![3], "only the Q <= f(lambda0) criterion is expected to fail");
}
