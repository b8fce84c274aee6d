//! Property suites over the spec invariants.

use hmbounds_core::geom;
use hmbounds_core::mesh::{build_surface, SurfaceSpec};
use hmbounds_core::spectral::{assemble_fem, harmonic_mean};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Appending a value at least as large as the current harmonic mean
    /// never decreases it; prefix means are monotone for sorted input.
    #[test]
    fn harmonic_mean_monotone_under_append(mut vals in prop::collection::vec(0.1f64..50.0, 1..8)) {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = harmonic_mean(&vals[..1]).unwrap();
        for k in 2..=vals.len() {
            let h = harmonic_mean(&vals[..k]).unwrap();
            prop_assert!(h >= prev - 1e-12 * prev.abs());
            prev = h;
        }
    }

    /// gamma_a maps the sphere to the sphere and gamma_{-a} undoes it.
    #[test]
    fn mobius_sphere_preservation_and_inverse(
        ax in -0.9f64..0.9, ay in -0.6f64..0.6, az in -0.35f64..0.35,
        px in -1.0f64..1.0, py in -1.0f64..1.0, pz in -1.0f64..1.0,
    ) {
        let a = [ax * 0.7, ay * 0.7, az * 0.7];
        prop_assume!(geom::dot(&a, &a) < 0.9);
        prop_assume!(px * px + py * py + pz * pz > 1e-3);
        let p = hmbounds_core::conformal::MobiusParam::new(a.to_vec()).unwrap();
        let x = geom::normalize(&[px, py, pz]);
        let y = hmbounds_core::conformal::mobius_apply(&p, &x).unwrap();
        prop_assert!((geom::norm(&y) - 1.0).abs() < 1e-10);
        let back = hmbounds_core::conformal::mobius_apply(&p.inverse(), &y).unwrap();
        prop_assert!(geom::dist(&back, &x) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every builder produces a mesh satisfying the structural invariants,
    /// with the advertised topology.
    #[test]
    fn builders_satisfy_invariants(
        which in 0usize..6,
        radius in 0.5f64..3.0,
        subdiv in 1u32..3,
        rings in 2u32..7,
        inner in 0.15f64..0.85,
    ) {
        let (spec, chi, k) = match which {
            0 => (SurfaceSpec::Icosphere { radius, subdiv }, 2, 0),
            1 => (SurfaceSpec::Disk { rings }, 1, 1),
            2 => (SurfaceSpec::Annulus { inner_radius: inner, rings }, 0, 2),
            3 => (SurfaceSpec::TorusRev { major: radius + 1.5, minor: radius, nu: 12, nv: 8 }, 0, 0),
            4 => (SurfaceSpec::CliffordTorus { n_grid: 4 + rings }, 0, 0),
            5 => (SurfaceSpec::Ellipse { a: radius, b: 1.0, rings }, 1, 1),
            _ => unreachable!(),
        };
        let mesh = build_surface(&spec).unwrap();
        mesh.validate().unwrap();
        let topo = mesh.topology().unwrap();
        prop_assert_eq!(topo.euler_char, chi);
        prop_assert_eq!(topo.boundary_components, k);
        prop_assert_eq!(
            topo.euler_char,
            2 - 2 * topo.genus as i64 - topo.boundary_components as i64
        );

        // Refinement preserves the topology.
        let refined = mesh.refine();
        prop_assert_eq!(refined.topology().unwrap(), topo);
    }

    /// Scaling the immersion scales areas and lengths accordingly, and the
    /// stiffness matrix is density-independent.
    #[test]
    fn measure_scaling_and_conformal_invariance(t in 0.3f64..3.0, rings in 3u32..8) {
        let mesh = build_surface(&SurfaceSpec::Disk { rings }).unwrap();
        let (area, blen, _) = mesh.measure();

        let mut scaled = mesh.clone();
        scaled.provenance = None;
        for c in scaled.coords.iter_mut() {
            *c *= t;
        }
        let (sa, sb, _) = scaled.measure();
        prop_assert!((sa - t * t * area).abs() < 1e-10 * sa);
        prop_assert!((sb - t * blen).abs() < 1e-10 * sb);

        let mut dens = mesh.clone();
        dens.density = Some(vec![t; mesh.num_vertices()]);
        let fem_a = assemble_fem(&mesh).unwrap();
        let fem_b = assemble_fem(&dens).unwrap();
        prop_assert_eq!(&fem_a.stiffness.vals, &fem_b.stiffness.vals);
        // Density multiplies the metric area.
        let (da, _, _) = dens.measure();
        prop_assert!((da - t * area).abs() < 1e-10 * da);
    }
}
