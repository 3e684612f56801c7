use std::f64::consts::PI;

use vwl::field::strong_residuals;
use vwl::laminar::{laminar_regular, DepthRoot};
use vwl::wavegen::{continue_family, exi_diagnostics, validate_against_laminar, write_family, BranchParams, Manifest, SolverOptions};
use vwl::VorticityFn;

fn irrotational() -> BranchParams {
    BranchParams { vorticity: VorticityFn::zero(1.0).unwrap(), g: 1.0, half_period: PI }
}

#[test]
fn members_are_regular_symmetric_and_monotone() {
    let p = BranchParams { vorticity: VorticityFn::constant(-1.0, 1.0).unwrap(), g: 1.0, half_period: PI };
    let opts = SolverOptions { export_nx: 64, export_ny: 48, ..Default::default() };
    let fam = continue_family(&p, &[0.04, 0.08, 0.12], &opts).unwrap();
    let rep = exi_diagnostics(&fam).unwrap();
    assert!(rep.crest_speed_decreasing);
    assert!(rep.min_trough > 0.0);
    assert!(fam.amplitudes().windows(2).all(|w| w[1] > w[0]));
    for (m, d) in fam.members.iter().zip(&rep.members) {
        assert!(d.monotone);
        assert!(m.field.evenness_defect() < 1e-12);
        assert!(m.max_psi_y < 0.0);
        for (i, j) in m.field.interior_nodes() {
            assert!(m.field.gradient(i, j)[1] < 0.0);
        }
        assert!(m.collocation_residual <= opts.tol);
    }
    // Q grows with amplitude on this branch; the crest slows down
    assert!(fam.qs().windows(2).all(|w| w[1] > w[0]));
    assert!(rep.extrapolated_amplitude.unwrap() > 0.12);
}

#[test]
fn strong_residuals_converge_at_second_order() {
    let p = irrotational();
    let coarse = SolverOptions { export_nx: 48, export_ny: 48, ..Default::default() };
    let fine = SolverOptions { export_nx: 96, export_ny: 96, ..Default::default() };
    let a = continue_family(&p, &[0.1], &coarse).unwrap();
    let b = continue_family(&p, &[0.1], &fine).unwrap();
    let ra = strong_residuals(&a.members[0].field).unwrap();
    let rb = strong_residuals(&b.members[0].field).unwrap();
    assert!(ra.max_strong() / rb.max_strong() >= 3.0, "{} -> {}", ra.max_strong(), rb.max_strong());
    assert!(ra.interior_pde.sup / rb.interior_pde.sup >= 3.0);
}

#[test]
fn seed_matches_the_laminar_module() {
    let p = irrotational();
    let opts = SolverOptions { export_nx: 32, export_ny: 32, ..Default::default() };
    let fam = continue_family(&p, &[0.0], &opts).unwrap();
    let m = &fam.members[0];
    // the same stream from the laminar solver, picked by its Q
    let lw = laminar_regular(&p.vorticity, 1.0, m.q, 0.0, DepthRoot::Shallowest).unwrap();
    let alt = laminar_regular(&p.vorticity, 1.0, m.q, 0.0, DepthRoot::Deepest).unwrap();
    let depth = m.field.eta[0];
    let closest = if (lw.depth - depth).abs() < (alt.depth - depth).abs() { lw } else { alt };
    assert!((closest.depth - depth).abs() < 1e-10, "{} vs {depth}", closest.depth);
    assert!((closest.lambda - fam.lambda_star).abs() < 1e-8);
    assert!(validate_against_laminar(&p, fam.lambda_star, &opts).unwrap() < 1e-10);
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = irrotational();
    let opts = SolverOptions { export_nx: 32, export_ny: 24, ..Default::default() };
    let fam = continue_family(&p, &[0.02, 0.04], &opts).unwrap();
    let written = write_family(&fam, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let back: Manifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back.members.len(), 2);
    assert_eq!(back.members[1].file, written.members[1].file);
    assert_eq!(back.members[1].diagnostics.q, fam.members[1].q);
    for e in &back.members {
        assert!(dir.path().join(&e.file).exists());
    }
}

#[test]
fn unreachable_target_truncates_the_family() {
    let p = irrotational();
    let opts = SolverOptions { export_nx: 32, export_ny: 24, max_newton: 8, ..Default::default() };
    // far beyond the highest wave of this depth
    let fam = continue_family(&p, &[0.05, 3.0], &opts).unwrap();
    assert_eq!(fam.members.len(), 1);
    let t = fam.truncated.expect("truncation recorded");
    assert_eq!(t.target, 3.0);
}
