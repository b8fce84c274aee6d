//! Theorem instances on concrete discretizations: equality cases against
//! closed forms, strictness on perturbed geometries, verdict logic.

use std::f64::consts::PI;

use hmbounds_core::bounds::{
    bound_ext_closed, bound_ext_steklov, bound_genus_neumann, bound_neumann_conformal,
    bound_reilly, bound_steklov_genus, bound_steklov_relconf, ExtrinsicAmbient, Verdict,
};
use hmbounds_core::conformal::{conformal_volume_sup, OptimizerConfig};
use hmbounds_core::extrinsic::{mean_curvature_field, newton_tensor};
use hmbounds_core::mesh::{build_surface, SurfaceSpec};
use hmbounds_core::spectral::{assemble_fem, neumann_spectrum, steklov_spectrum};

#[test]
fn round_sphere_equalities() {
    let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 4 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 5).unwrap();

    let genus = bound_genus_neumann(&mesh, &spec).unwrap();
    assert_eq!(genus.verdict, Verdict::HoldsAtEquality);
    assert!((genus.lhs - 2.0).abs() < 0.02, "lhs {}", genus.lhs);
    assert!((genus.rhs - 2.0).abs() < 0.02, "rhs {}", genus.rhs);

    let reilly = bound_reilly(&mesh, 0.0, &spec).unwrap();
    assert_eq!(reilly.verdict, Verdict::HoldsAtEquality);
    assert!(reilly.relative_gap.abs() < 0.01);
    let d = &reilly.diagnostics;
    assert!(d.eigenvalue_spread < 0.01, "spread {}", d.eigenvalue_spread);
    assert!((d.predicted_radius - 1.0).abs() < 0.01);
    assert!((d.measured_radius - 1.0).abs() < 0.01);
    assert!(d.takahashi_residual.unwrap() < 0.01);

    // Extrinsic bound with T = I: both sides near 128 pi^2.
    let curv = mean_curvature_field(&mesh).unwrap();
    let t0 = newton_tensor(&curv, 0).unwrap();
    let ext = bound_ext_closed(&mesh, &curv, &t0, ExtrinsicAmbient::Euclidean, &spec).unwrap();
    let target = 128.0 * PI * PI;
    assert!((ext.lhs - target).abs() / target < 0.02, "lhs {}", ext.lhs);
    assert!((ext.rhs - target).abs() / target < 0.02, "rhs {}", ext.rhs);
    assert_eq!(ext.verdict, Verdict::HoldsAtEquality);

    // T = T_1 (equal to I on the unit sphere): equality within fit error.
    let t1 = newton_tensor(&curv, 1).unwrap();
    let ext1 = bound_ext_closed(&mesh, &curv, &t1, ExtrinsicAmbient::Euclidean, &spec).unwrap();
    assert_eq!(ext1.verdict, Verdict::HoldsAtEquality);
    assert!(ext1.diagnostics.trace_t_constancy.unwrap() < 0.01);

    // Conformal bound with the identity map.
    let vc = conformal_volume_sup(&mesh, &mesh.coords, 3, &OptimizerConfig::default()).unwrap();
    let conf = bound_neumann_conformal(&mesh, &vc, &spec).unwrap();
    assert_eq!(conf.verdict, Verdict::HoldsAtEquality);
    assert!(conf.advisory.is_none(), "unexpected advisory {:?}", conf.advisory);

    // Harmonic-mean context columns are monotone.
    for w in genus.hmean_columns.windows(2) {
        assert!(w[0] <= w[1] + 1e-12);
    }
}

#[test]
fn clifford_torus_sphere_ambient_equalities() {
    let mesh = build_surface(&SurfaceSpec::CliffordTorus { n_grid: 32 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 5).unwrap();

    let reilly = bound_reilly(&mesh, 1.0, &spec).unwrap();
    assert_eq!(reilly.verdict, Verdict::HoldsAtEquality);
    assert!((reilly.lhs - 2.0).abs() < 0.03, "lhs {}", reilly.lhs);
    assert!((reilly.rhs - 2.0).abs() < 0.03, "rhs {}", reilly.rhs);
    // lambda_1 -> m forces the great-sphere branch.
    assert!(reilly.diagnostics.minimal_in_sphere_branch);
    assert!((reilly.diagnostics.predicted_radius - PI / 2.0).abs() < 1e-12);
    assert!(reilly.diagnostics.takahashi_residual.unwrap() < 0.02);

    // Sphere-ambient tensor bound with T = I: both sides 32 pi^4.
    let curv = mean_curvature_field(&mesh).unwrap();
    let t0 = newton_tensor(&curv, 0).unwrap();
    let ext = bound_ext_closed(&mesh, &curv, &t0, ExtrinsicAmbient::Sphere, &spec).unwrap();
    let target = 32.0 * PI.powi(4);
    assert!((ext.lhs - target).abs() / target < 0.03, "lhs {}", ext.lhs);
    assert!((ext.rhs - target).abs() / target < 0.03, "rhs {}", ext.rhs);
    assert_eq!(ext.verdict, Verdict::HoldsAtEquality);
}

#[test]
fn poincare_sphere_hyperbolic_reilly_equality() {
    let mesh = build_surface(&SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 4 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 4).unwrap();
    let report = bound_reilly(&mesh, -1.0, &spec).unwrap();
    let oracle = 2.0 / 1f64.sinh().powi(2);
    assert!((report.lhs - oracle).abs() / oracle < 0.03, "lhs {}", report.lhs);
    assert!((report.rhs - oracle).abs() / oracle < 0.03, "rhs {}", report.rhs);
    assert_eq!(report.verdict, Verdict::HoldsAtEquality);
    // Predicted and measured hyperbolic radii agree with r = 1.
    assert!((report.diagnostics.predicted_radius - 1.0).abs() < 0.03);
    assert!((report.diagnostics.measured_radius - 1.0).abs() < 0.01);
}

#[test]
fn disk_steklov_equalities() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 16 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 4).unwrap();

    let (linear, strict) = bound_steklov_genus(&mesh, &spec).unwrap();
    assert_eq!(linear.verdict, Verdict::HoldsAtEquality);
    assert!((linear.lhs - 2.0 * PI).abs() / (2.0 * PI) < 0.01);
    assert!((linear.rhs - 2.0 * PI).abs() < 1e-12);
    // The strict 8 pi bound holds with a wide margin.
    assert_eq!(strict.verdict, Verdict::Holds);
    assert!(strict.lhs < strict.rhs * (1.0 - strict.tolerance));

    let ext = bound_ext_steklov(&mesh, &spec).unwrap();
    assert!((ext.lhs - 1.0).abs() < 0.01, "lhs {}", ext.lhs);
    assert!((ext.rhs - 1.0).abs() < 0.01, "rhs {}", ext.rhs);
    assert_eq!(ext.verdict, Verdict::HoldsAtEquality);
    assert!(ext.diagnostics.boundary_sphericity.unwrap() < 0.01);
    assert!((ext.diagnostics.predicted_radius - 1.0).abs() < 0.01);
    assert!((ext.diagnostics.measured_radius - 1.0).abs() < 0.01);

    // Identity map realizes the relative conformal volume of the disk.
    let rel = bound_steklov_relconf(&mesh, &mesh.coords, 2, &spec).unwrap();
    assert_eq!(rel.verdict, Verdict::HoldsAtEquality);
    assert!((rel.lhs - 2.0 * PI).abs() / (2.0 * PI) < 0.01);
    assert!((rel.rhs - 2.0 * PI).abs() / (2.0 * PI) < 0.01);
    assert!(rel.advisory.is_some(), "map-specific rhs must be flagged");
}

#[test]
fn annulus_holds_with_gap() {
    let mesh = build_surface(&SurfaceSpec::Annulus { inner_radius: 0.5, rings: 12 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 4).unwrap();

    let (linear, strict) = bound_steklov_genus(&mesh, &spec).unwrap();
    assert_eq!(linear.verdict, Verdict::Holds);
    assert!((linear.rhs - 4.0 * PI).abs() < 1e-12);
    assert!(linear.relative_gap > 0.05);
    assert_eq!(strict.verdict, Verdict::Holds);

    let ext = bound_ext_steklov(&mesh, &spec).unwrap();
    assert_eq!(ext.verdict, Verdict::Holds);
    // Two concentric circles are far from one circle of radius 1/sigma_1.
    assert!(ext.diagnostics.boundary_sphericity.unwrap() > 0.1);
}

#[test]
fn ellipsoid_strictness() {
    let mesh = build_surface(&SurfaceSpec::Ellipsoid { a: 2.0, b: 1.0, c: 1.0, subdiv: 4 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 5).unwrap();

    let reilly = bound_reilly(&mesh, 0.0, &spec).unwrap();
    assert_eq!(reilly.verdict, Verdict::Holds);
    assert!(reilly.relative_gap > reilly.tolerance, "gap {}", reilly.relative_gap);
    assert!(reilly.diagnostics.eigenvalue_spread > 0.05);

    let genus = bound_genus_neumann(&mesh, &spec).unwrap();
    assert_eq!(genus.verdict, Verdict::Holds);
    assert!(genus.relative_gap > genus.tolerance);

    let curv = mean_curvature_field(&mesh).unwrap();
    let t0 = newton_tensor(&curv, 0).unwrap();
    let ext = bound_ext_closed(&mesh, &curv, &t0, ExtrinsicAmbient::Euclidean, &spec).unwrap();
    assert_eq!(ext.verdict, Verdict::Holds);
    assert!(ext.relative_gap > ext.tolerance);
}

#[test]
fn ellipse_extrinsic_steklov_strictness() {
    let mesh = build_surface(&SurfaceSpec::Ellipse { a: 2.0, b: 1.0, rings: 12 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 4).unwrap();
    let ext = bound_ext_steklov(&mesh, &spec).unwrap();
    assert_eq!(ext.verdict, Verdict::Holds);
    assert!(ext.relative_gap > ext.tolerance, "gap {}", ext.relative_gap);
}

#[test]
fn torus_genus_bound_uses_integer_part() {
    let mesh = build_surface(&SurfaceSpec::TorusRev { major: 2.0, minor: 1.0, nu: 32, nv: 16 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 4).unwrap();
    let report = bound_genus_neumann(&mesh, &spec).unwrap();
    let (volume, _, _) = mesh.measure();
    // floor((1 + 3) / 2) = 2.
    assert!((report.rhs - 8.0 * PI / volume * 2.0).abs() < 1e-12);
    assert_eq!(report.verdict, Verdict::Holds);
    assert!(report.relative_gap > 0.0);
}

#[test]
fn zero_tensor_is_rejected_as_degenerate() {
    let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 2 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 3).unwrap();
    let curv = mean_curvature_field(&mesh).unwrap();
    let tz = hmbounds_core::extrinsic::zero_tensor(&curv);
    let r = bound_ext_closed(&mesh, &curv, &tz, ExtrinsicAmbient::Euclidean, &spec);
    assert!(r.is_err());
}

#[test]
fn report_serializes_to_json_and_csv() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 8 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 3).unwrap();
    let (linear, _) = bound_steklov_genus(&mesh, &spec).unwrap();
    let json = linear.to_json().unwrap();
    assert!(json.contains("steklov-genus-linear"));
    let row = linear.csv_row();
    assert_eq!(row.split(',').count(), 7);
    assert!(row.starts_with("steklov-genus-linear,"));
}
