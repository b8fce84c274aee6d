//! Eigenvalue oracles: closed-form spectra of the model surfaces and the
//! variational side conditions of the discrete solvers.

use hmbounds_core::geom;
use hmbounds_core::mesh::{build_surface, SurfaceMesh, SurfaceSpec};
use hmbounds_core::spectral::{
    assemble_fem, build_dtn, neumann_spectrum, orthogonalize_against, steklov_spectrum, Mass,
};

/// Round-sphere Laplace spectrum: l(l+1)/R^2 with multiplicity 2l+1.
fn sphere_eigenvalues(radius: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = 0u32;
    while out.len() < count {
        for _ in 0..(2 * l + 1) {
            out.push((l * (l + 1)) as f64 / (radius * radius));
        }
        l += 1;
    }
    out.truncate(count);
    out
}

/// Flat-torus lattice spectrum for the square torus of side L: the values
/// (2 pi / L)^2 (j^2 + k^2), enumerated and sorted.
fn square_torus_eigenvalues(side: f64, count: usize) -> Vec<f64> {
    let base = (2.0 * std::f64::consts::PI / side).powi(2);
    let range = 8i64;
    let mut vals = Vec::new();
    for j in -range..=range {
        for k in -range..=range {
            vals.push(base * (j * j + k * k) as f64);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.truncate(count);
    vals
}

/// Annulus Steklov oracle by separation of variables: for each angular mode
/// k >= 1 the 2x2 generalized problem on (A r^k + B r^-k) yields a quadratic
/// in sigma; k = 0 contributes 0 and -(1 + 1/rho)/ln(rho).
fn annulus_steklov_eigenvalues(inner: f64, count: usize) -> Vec<f64> {
    let mut vals = vec![0.0];
    vals.push(-(1.0 + 1.0 / inner) / inner.ln());
    for k in 1..=(count as i32) {
        let kf = k as f64;
        let k11 = kf;
        let k12 = -kf;
        let k21 = -kf * inner.powi(k - 1);
        let k22 = kf * inner.powi(-k - 1);
        let m11 = 1.0;
        let m12 = 1.0;
        let m21 = inner.powi(k);
        let m22 = inner.powi(-k);
        // det(K - s M) = a s^2 + b s + c
        let a = m11 * m22 - m12 * m21;
        let b = -(k11 * m22 + k22 * m11 - k12 * m21 - k21 * m12);
        let c = k11 * k22 - k12 * k21;
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        for root in [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)] {
            if root > 1e-12 {
                // cos and sin branches
                vals.push(root);
                vals.push(root);
            }
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.truncate(count);
    vals
}

fn assert_spectrum_close(computed: &[f64], oracle: &[f64], rel: f64, label: &str) {
    for (i, (c, o)) in computed.iter().zip(oracle).enumerate() {
        if *o == 0.0 {
            assert!(c.abs() < 1e-7, "{label}: eigenvalue {i} = {c}, expected ~0");
        } else {
            assert!(
                (c - o).abs() / o < rel,
                "{label}: eigenvalue {i} = {c}, oracle {o}"
            );
        }
    }
}

#[test]
fn icosphere_neumann_spectrum_matches_sphere_oracle() {
    let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 4 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 8).unwrap();
    let oracle = sphere_eigenvalues(1.0, 9);
    assert_spectrum_close(&spec.eigenvalues, &oracle, 0.015, "icosphere");
    // Residual certificates hold.
    for (i, &r) in spec.residual_norms.iter().enumerate() {
        assert!(r < 1e-6, "pair {i} residual {r}");
    }
    // Mass-orthonormality.
    for i in 0..spec.eigenvectors.len() {
        for j in 0..=i {
            let g = fem
                .mass
                .quadratic_form(&spec.eigenvectors[i], &spec.eigenvectors[j]);
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((g - expect).abs() < 1e-8, "gram[{i},{j}] = {g}");
        }
    }
}

#[test]
fn clifford_torus_neumann_spectrum_matches_lattice_oracle() {
    let mesh = build_surface(&SurfaceSpec::CliffordTorus { n_grid: 40 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 8).unwrap();
    // Side sqrt(2) pi square torus: lambda = 2 (j^2 + k^2).
    let oracle = square_torus_eigenvalues(2f64.sqrt() * std::f64::consts::PI, 9);
    assert!((oracle[1] - 2.0).abs() < 1e-12 && (oracle[4] - 2.0).abs() < 1e-12);
    assert_spectrum_close(&spec.eigenvalues, &oracle, 0.02, "clifford");
}

#[test]
fn disk_steklov_spectrum_matches_disk_oracle() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 24 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 6).unwrap();
    // Unit disk: sigma = 0, 1, 1, 2, 2, 3, 3.
    let oracle = [0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
    assert_spectrum_close(&spec.eigenvalues, &oracle, 0.012, "disk");
    for (i, &r) in spec.residual_norms.iter().enumerate() {
        assert!(r < 1e-9, "pair {i} residual {r}");
    }
    // Interior rows of each eigenvector are discretely harmonic.
    for u in &spec.eigenvectors {
        let ku = fem.stiffness.apply(u);
        let worst = fem
            .interior
            .iter()
            .map(|&v| ku[v].abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "interior residual {worst}");
    }
}

#[test]
fn annulus_steklov_matches_radial_oracle() {
    let inner = 0.5;
    let mesh = build_surface(&SurfaceSpec::Annulus { inner_radius: inner, rings: 12 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 5).unwrap();
    let oracle = annulus_steklov_eigenvalues(inner, 6);
    // Frozen from the k = 1 quadratic: sigma_1 = (5 - sqrt(17)) / 2.
    let sigma1 = (5.0 - 17f64.sqrt()) / 2.0;
    assert!((oracle[1] - sigma1).abs() < 1e-12);
    assert_spectrum_close(&spec.eigenvalues, &oracle, 0.012, "annulus");
}

#[test]
fn poincare_sphere_neumann_matches_hyperbolic_oracle() {
    let mesh = build_surface(&SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 4 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 4).unwrap();
    // Geodesic sphere of radius r in H^3 is a round sphere of radius sinh r.
    let oracle = sphere_eigenvalues(1f64.sinh(), 5);
    assert_spectrum_close(&spec.eigenvalues, &oracle, 0.015, "poincare");
}

#[test]
fn metric_rescaling_divides_eigenvalues() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 8 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let base = neumann_spectrum(&fem, 4).unwrap();

    let t = 2.75;
    let mut scaled = mesh.clone();
    scaled.density = Some(vec![t; mesh.num_vertices()]);
    let fem_t = assemble_fem(&scaled).unwrap();
    let spec_t = neumann_spectrum(&fem_t, 4).unwrap();
    for i in 1..base.eigenvalues.len() {
        let expect = base.eigenvalues[i] / t;
        let got = spec_t.eigenvalues[i];
        assert!(
            (got - expect).abs() < 1e-8 * expect.max(1.0),
            "eigenvalue {i}: {got} vs {expect}"
        );
    }
}

#[test]
fn spectrum_invariant_under_vertex_relabeling() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 6 }).unwrap();
    let n = mesh.num_vertices();
    // Deterministic permutation: reverse.
    let perm: Vec<usize> = (0..n).rev().collect();
    let mut coords = vec![0.0; n * 2];
    for v in 0..n {
        coords[perm[v] * 2..perm[v] * 2 + 2].copy_from_slice(mesh.vertex(v));
    }
    let triangles = mesh
        .triangles
        .iter()
        .map(|&[a, b, c]| [perm[a], perm[b], perm[c]])
        .collect();
    let relabeled = SurfaceMesh::new(2, coords, triangles, None).unwrap();

    let s1 = neumann_spectrum(&assemble_fem(&mesh).unwrap(), 5).unwrap();
    let s2 = neumann_spectrum(&assemble_fem(&relabeled).unwrap(), 5).unwrap();
    for (a, b) in s1.eigenvalues.iter().zip(&s2.eigenvalues) {
        assert!((a - b).abs() < 1e-7 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn disk_inverse_trace_identity() {
    // sum_{i=1}^{2} 1/sigma_i >= (1/V) int_bnd |x|^2, via energy-orthonormal
    // harmonic extensions of the centered coordinates.
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 16 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = steklov_spectrum(&fem, 3).unwrap();
    let dtn = build_dtn(&fem).unwrap();

    let nb = dtn.boundary.len();
    let bm: Vec<f64> = dtn.bmass.clone();
    let btotal: f64 = bm.iter().sum();
    let mut w = nalgebra::DMatrix::zeros(nb, 2);
    for c in 0..2 {
        let mut col: Vec<f64> = dtn.boundary.iter().map(|&v| mesh.vertex(v)[c]).collect();
        let mean: f64 = col.iter().zip(&bm).map(|(x, m)| x * m).sum::<f64>() / btotal;
        for x in col.iter_mut() {
            *x -= mean;
        }
        for r in 0..nb {
            w[(r, c)] = col[r];
        }
    }
    let energy = w.transpose() * &dtn.matrix * &w;
    let chol = nalgebra::Cholesky::new(energy).unwrap();
    let li = chol.l().try_inverse().unwrap();
    let wbw = nalgebra::DMatrix::from_fn(2, 2, |i, j| {
        (0..nb).map(|r| bm[r] * w[(r, i)] * w[(r, j)]).sum::<f64>()
    });
    let traced = (&li * wbw * li.transpose()).trace();

    let inv_trace = 1.0 / spec.eigenvalues[1] + 1.0 / spec.eigenvalues[2];
    assert!(
        inv_trace >= traced - 1e-10,
        "inverse trace {inv_trace} < coordinate bound {traced}"
    );
    // On the disk the identity is near-sharp.
    assert!((inv_trace - traced).abs() < 0.02, "{inv_trace} vs {traced}");
}

#[test]
fn discrete_min_max_for_orthogonalized_trials() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 8 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 5).unwrap();
    let n = mesh.num_vertices();

    // A deterministic non-eigenvector trial, made mass-orthogonal to the
    // eigenvectors 0..=2 by explicit projection.
    let mut trial: Vec<f64> = (0..n)
        .map(|v| {
            let p = mesh.vertex(v);
            (3.1 * p[0] + 1.7 * p[1] * p[1] - 0.3).sin()
        })
        .collect();
    for u in spec.eigenvectors.iter().take(3) {
        let c = fem.mass.quadratic_form(&trial, u);
        for (t, uv) in trial.iter_mut().zip(u) {
            *t -= c * uv;
        }
    }
    let rayleigh = fem.stiffness.quadratic_form(&trial, &trial)
        / fem.mass.quadratic_form(&trial, &trial);
    let l3 = spec.eigenvalues[3];
    assert!(
        rayleigh >= l3 * (1.0 - 1e-9),
        "Rayleigh {rayleigh} undercuts lambda_3 {l3}"
    );
}

#[test]
fn orthogonalize_icosphere_coordinates() {
    let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 4).unwrap();
    let n = mesh.num_vertices();
    let trials: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..n).map(|v| mesh.vertex(v)[c]).collect())
        .collect();
    let out = orthogonalize_against(&trials, &spec, &fem).unwrap();

    let norm = |v: &[f64]| fem.mass.quadratic_form(v, v).sqrt();
    for (a, psi) in out.iter().enumerate() {
        for b in 1..=a {
            let ip = fem.mass.quadratic_form(psi, &spec.eigenvectors[b]);
            assert!(
                ip.abs() < 1e-10 * norm(psi),
                "<psi^{a}, u_{b}> = {ip}"
            );
        }
    }
    // Orthogonal mixing preserves the pointwise unit-norm identity.
    for v in 0..n {
        let s: f64 = out.iter().map(|psi| psi[v] * psi[v]).sum();
        assert!((s - 1.0).abs() < 1e-12, "sum of squares {s}");
    }
}

#[test]
fn orthogonalize_fixed_point_when_already_triangular() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 6 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let spec = neumann_spectrum(&fem, 4).unwrap();
    let trials: Vec<Vec<f64>> = spec.eigenvectors[1..4].to_vec();
    let out = orthogonalize_against(&trials, &spec, &fem).unwrap();
    for (t, o) in trials.iter().zip(&out) {
        let d: f64 = t.iter().zip(o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12, "trial changed by {d}");
    }
}

#[test]
fn consistent_mass_spectrum_agrees_with_lumped() {
    use hmbounds_core::spectral::{assemble_fem_with, FemConfig};
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 10 }).unwrap();
    let lumped = neumann_spectrum(&assemble_fem(&mesh).unwrap(), 3).unwrap();
    let consistent = neumann_spectrum(
        &assemble_fem_with(&mesh, FemConfig { consistent_mass: true }).unwrap(),
        3,
    )
    .unwrap();
    for i in 1..4 {
        let (a, b) = (lumped.eigenvalues[i], consistent.eigenvalues[i]);
        // Both first-order; they agree to O(h^2) on this smooth problem.
        assert!((a - b).abs() / b < 0.02, "lumped {a} vs consistent {b}");
    }
}

#[test]
fn boundary_mass_totals_boundary_length() {
    let mesh = build_surface(&SurfaceSpec::Disk { rings: 12 }).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let total: f64 = fem.boundary_mass.iter().sum();
    let (_, blen, _) = mesh.measure();
    assert!((total - blen).abs() < 1e-12 * blen);
    // Interior vertices carry none of it.
    for &v in &fem.interior {
        assert_eq!(fem.boundary_mass[v], 0.0);
    }
    let _ = geom::norm(&[0.0]); // keep geom linked for the helper import
    match fem.mass {
        Mass::Lumped(_) => {}
        _ => panic!("default mass must be lumped"),
    }
}
