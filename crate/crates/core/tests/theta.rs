use std::f64::consts::PI;

use vwl::inteq::{geometric_grid, random_admissible, reconstruct_surface, solve_theta, theta_rhs, SolveOptions, ThetaSolution, VSQ_BOUND};

#[test]
fn fixed_point_is_scale_free() {
    let opts = SolveOptions { tol: 1e-10, ..Default::default() };
    let base = geometric_grid(1024, 1e-5, 1e5);
    let scaled: Vec<f64> = base.iter().map(|x| 10.0 * x).collect();
    let f = |x: f64| 0.5 * PI * x / (1.0 + x);
    let (a, _) = solve_theta(&ThetaSolution::from_fn(base, f).unwrap(), &opts).unwrap();
    let (b, _) = solve_theta(&ThetaSolution::from_fn(scaled, f).unwrap(), &opts).unwrap();
    assert!(a.sup_error(PI / 6.0) < 1e-8);
    assert!(b.sup_error(PI / 6.0) < 1e-8);
}

#[test]
fn rhs_is_positive_for_admissible_input() {
    for seed in 0..5 {
        let s = random_admissible(geometric_grid(512, 1e-4, 1e4), seed).unwrap();
        let r = theta_rhs(&s).unwrap();
        assert!(r.iter().all(|v| *v > 0.0 && *v <= 0.5 * PI + 1e-12));
    }
}

#[test]
fn iterates_stay_above_the_bound() {
    let s = random_admissible(geometric_grid(1024, 1e-5, 1e5), 3).unwrap();
    let (_, log) = solve_theta(&s, &SolveOptions { tol: 1e-9, ..Default::default() }).unwrap();
    assert!(log.records.iter().skip(1).all(|r| r.min_theta >= VSQ_BOUND - 1e-9));
    let json = log.to_json().unwrap();
    assert!(json.contains("sup_update"));
}

#[test]
fn reconstruction_slope_follows_theta() {
    let s = ThetaSolution::from_fn(geometric_grid(1024, 1e-4, 1e4), |x| 0.3 + 0.5 * x / (1.0 + x)).unwrap();
    let r = reconstruct_surface(&s, 2.0).unwrap();
    assert!(r.slope_defect(&s) < 0.02, "{}", r.slope_defect(&s));
    assert!(r.v.iter().all(|v| *v < 0.0));
    assert!(r.u.windows(2).all(|w| w[1] < w[0]));
    let csv = r.to_csv();
    assert!(csv.starts_with("t,U,V\n"));
    assert_eq!(csv.lines().count(), 1025);
}
