//! Discrete verification of the variational test-function chain.
//!
//! Given a candidate conformal map to the sphere (or ball, for the Steklov
//! problem), the chain runs the orthogonalized coordinates through the
//! Rayleigh quotient, tail-grouping, interpolation, and Hoelder steps and
//! records the signed slack of every intermediate inequality. In the smooth
//! equality cases all slacks vanish; discretely they must stay above minus
//! the mesh tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::SurfaceMesh;

use super::{
    build_dtn, orthogonalize_against, spectrum_inner, FemMatrices, Spectrum, SpectrumKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    Neumann,
    Steklov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub mode: ChainMode,
    /// Per trial: (energy/lambda - mass norm^2) / V, the Rayleigh slack.
    pub rayleigh_slacks: Vec<f64>,
    /// Steklov only: energy drop from replacing the trial by its discrete
    /// harmonic extension, (E - E_harmonic) / (sigma V).
    pub extension_slacks: Option<Vec<f64>>,
    /// Tail grouping: sum over the tail of (1/l_m - 1/l_A) E_A / V.
    pub tail_slack: f64,
    /// Head interpolation: sum over the head of (1/l_A - 1/l_m)(F - E_A) / V.
    pub interp_slack: f64,
    /// Hoelder step; identically zero for m = 2, computed literally.
    pub holder_slack: f64,
    /// Final inequality slack, relative to the harmonic mean.
    pub final_slack: f64,
    pub hmean: f64,
    pub eigenvalues_used: Vec<f64>,
    /// Integral of the discrete conformal factor f = sum |grad Phi|^2 / m.
    pub integral_f: f64,
    /// Reference volume: V(M) for Neumann, V(boundary) for Steklov.
    pub volume: f64,
    /// Norm of the weighted mean of the map, over the balancing measure.
    pub balance_moment: f64,
    pub angle_distortion_mean: f64,
    pub angle_distortion_max: f64,
    pub min_slack: f64,
}

/// Evaluate the chain for `map` (flat per-vertex coordinates of stride
/// `map_dim`) against a spectrum computed on the same mesh.
pub fn variational_chain_report(
    mesh: &SurfaceMesh,
    fem: &FemMatrices,
    spectrum: &Spectrum,
    map: &[f64],
    map_dim: usize,
    mode: ChainMode,
) -> Result<ChainReport> {
    let n = mesh.num_vertices();
    if map.len() != n * map_dim {
        return Err(Error::Shape(format!(
            "map has {} values, expected {} x {}",
            map.len(),
            n,
            map_dim
        )));
    }
    let expected_kind = match mode {
        ChainMode::Neumann => SpectrumKind::Neumann,
        ChainMode::Steklov => SpectrumKind::Steklov,
    };
    if spectrum.kind != expected_kind {
        return Err(Error::Shape("spectrum kind does not match chain mode".into()));
    }
    let m = 2.0;
    let q = map_dim; // number of trial coordinates
    if spectrum.nonzero_count() < q {
        return Err(Error::Shape(format!(
            "chain needs {} nonzero eigenpairs, spectrum has {}",
            q,
            spectrum.nonzero_count()
        )));
    }

    // Vertexwise unit-norm check: on M for the sphere map, on the boundary
    // for the ball map.
    let check_unit = |v: usize| -> Result<()> {
        let p = &map[v * q..(v + 1) * q];
        let r = geom::norm(p);
        if (r - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "map vertex {v} has norm {r}, expected 1"
            )));
        }
        Ok(())
    };
    match mode {
        ChainMode::Neumann => {
            for v in 0..n {
                check_unit(v)?;
            }
        }
        ChainMode::Steklov => {
            for &v in &fem.boundary {
                check_unit(v)?;
            }
        }
    }

    let trials_raw: Vec<Vec<f64>> = (0..q)
        .map(|a| (0..n).map(|v| map[v * q + a]).collect())
        .collect();
    let trials = orthogonalize_against(&trials_raw, spectrum, fem)?;

    let volume = match mode {
        ChainMode::Neumann => fem.mass.total(),
        ChainMode::Steklov => fem.boundary.iter().map(|&v| fem.boundary_mass[v]).sum(),
    };

    // Balancing moment of the raw map over the relevant measure.
    let mut moment = vec![0.0; q];
    match mode {
        ChainMode::Neumann => {
            let ones = vec![1.0; n];
            for (a, t) in trials_raw.iter().enumerate() {
                moment[a] = fem.mass.quadratic_form(t, &ones);
            }
        }
        ChainMode::Steklov => {
            for (a, t) in trials_raw.iter().enumerate() {
                moment[a] = fem.boundary.iter().map(|&v| fem.boundary_mass[v] * t[v]).sum();
            }
        }
    }
    let balance_moment = geom::norm(&moment) / volume;

    let energies: Vec<f64> = trials
        .iter()
        .map(|t| fem.stiffness.quadratic_form(t, t))
        .collect();
    let masses: Vec<f64> = trials
        .iter()
        .map(|t| spectrum_inner(fem, spectrum.kind, t, t))
        .collect();
    let integral_f = energies.iter().sum::<f64>() / m;

    let eigenvalues_used: Vec<f64> = (1..=q).map(|i| spectrum.nonzero(i)).collect();
    let hmean = super::harmonic_mean(&eigenvalues_used[..2])?;

    // Steklov Rayleigh quotients use the harmonic-extension energy.
    let harmonic_energies: Option<Vec<f64>> = match mode {
        ChainMode::Neumann => None,
        ChainMode::Steklov => {
            let dtn = build_dtn(fem)?;
            Some(
                trials
                    .iter()
                    .map(|t| {
                        let ub = nalgebra::DVector::from_iterator(
                            dtn.boundary.len(),
                            dtn.boundary.iter().map(|&v| t[v]),
                        );
                        dtn.energy(&ub)
                    })
                    .collect(),
            )
        }
    };

    let rayleigh_energy = |a: usize| -> f64 {
        match &harmonic_energies {
            Some(he) => he[a],
            None => energies[a],
        }
    };

    let rayleigh_slacks: Vec<f64> = (0..q)
        .map(|a| (rayleigh_energy(a) / eigenvalues_used[a] - masses[a]) / volume)
        .collect();
    let extension_slacks = harmonic_energies.as_ref().map(|he| {
        (0..q)
            .map(|a| (energies[a] - he[a]) / (eigenvalues_used[a] * volume))
            .collect()
    });

    // Index m in the chain: the tail is grouped at lambda_m (Neumann sums the
    // tail from A = m+1, the Steklov chain from A = m).
    let m_idx = 1usize; // zero-based position of the m-th eigenvalue (m = 2)
    let tail_start = match mode {
        ChainMode::Neumann => m_idx + 1,
        ChainMode::Steklov => m_idx,
    };
    let inv_lm = 1.0 / eigenvalues_used[m_idx];
    let tail_slack: f64 = (tail_start..q)
        .map(|a| (inv_lm - 1.0 / eigenvalues_used[a]) * energies[a])
        .sum::<f64>()
        / volume;
    let interp_slack: f64 = (0..tail_start.min(m_idx + 1))
        .map(|a| (1.0 / eigenvalues_used[a] - inv_lm) * (integral_f - energies[a]))
        .sum::<f64>()
        / volume;

    // Hoelder: int f <= (int f^{m/2})^{2/m} V(M)^{(m-2)/m}; literal for m = 2.
    let holder_slack = (integral_f.powf(2.0 / m) * fem.mass.total().powf((m - 2.0) / m)
        - integral_f)
        / volume;

    let final_slack = match mode {
        ChainMode::Neumann => (m * integral_f / volume - hmean) / hmean,
        ChainMode::Steklov => (m * integral_f - hmean * volume) / (hmean * volume),
    };

    let (angle_distortion_mean, angle_distortion_max) = map_distortion(mesh, map, q);

    let min_slack = rayleigh_slacks
        .iter()
        .chain(extension_slacks.iter().flatten())
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(tail_slack)
        .min(interp_slack)
        .min(final_slack);

    Ok(ChainReport {
        mode,
        rayleigh_slacks,
        extension_slacks,
        tail_slack,
        interp_slack,
        holder_slack,
        final_slack,
        hmean,
        eigenvalues_used,
        integral_f,
        volume,
        balance_moment,
        angle_distortion_mean,
        angle_distortion_max,
        min_slack,
    })
}

/// Per-triangle conformal distortion of the map: ratio of singular values of
/// the affine map between source and image triangles, area-weighted mean and
/// maximum.
pub fn map_distortion(mesh: &SurfaceMesh, map: &[f64], q: usize) -> (f64, f64) {
    let mut total_area = 0.0;
    let mut acc = 0.0;
    let mut worst: f64 = 1.0;
    for tri in &mesh.triangles {
        let [a, b, c] = *tri;
        let u1 = geom::sub(mesh.vertex(b), mesh.vertex(a));
        let u2 = geom::sub(mesh.vertex(c), mesh.vertex(a));
        let w1 = geom::sub(&map[b * q..(b + 1) * q], &map[a * q..(a + 1) * q]);
        let w2 = geom::sub(&map[c * q..(c + 1) * q], &map[a * q..(a + 1) * q]);

        // Orthonormal coordinates in each triangle plane.
        let src = plane_coords(&u1, &u2);
        let dst = plane_coords(&w1, &w2);
        let (s1, s2) = match (src, dst) {
            (Some(s), Some(d)) => {
                // L maps s-columns to d-columns: L = D * S^{-1}.
                let det_s = s[0] * s[3] - s[1] * s[2];
                if det_s.abs() < 1e-300 {
                    (1.0, 0.0)
                } else {
                    let si = [s[3] / det_s, -s[1] / det_s, -s[2] / det_s, s[0] / det_s];
                    let l = [
                        d[0] * si[0] + d[1] * si[2],
                        d[0] * si[1] + d[1] * si[3],
                        d[2] * si[0] + d[3] * si[2],
                        d[2] * si[1] + d[3] * si[3],
                    ];
                    singular_values_2x2(&l)
                }
            }
            _ => (1.0, 0.0),
        };
        let dist = if s2 <= 1e-14 * s1.max(1e-300) {
            1e16
        } else {
            s1 / s2
        };
        let area = geom::triangle_area(mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
        total_area += area;
        acc += area * dist;
        worst = worst.max(dist);
    }
    (acc / total_area, worst)
}

/// Column coordinates [a11, a12, a21, a22] of (v1, v2) in an orthonormal
/// basis of their span; None when degenerate.
fn plane_coords(v1: &[f64], v2: &[f64]) -> Option<[f64; 4]> {
    let n1 = geom::norm(v1);
    if n1 < 1e-300 {
        return None;
    }
    let e1 = geom::scale(v1, 1.0 / n1);
    let p = geom::dot(v2, &e1);
    let mut r = v2.to_vec();
    geom::axpy(&mut r, -p, &e1);
    let n2 = geom::norm(&r);
    if n2 < 1e-300 {
        return None;
    }
    Some([n1, p, 0.0, n2])
}

fn singular_values_2x2(l: &[f64; 4]) -> (f64, f64) {
    let (a, b, c, d) = (l[0], l[1], l[2], l[3]);
    let e = (a + d) / 2.0;
    let f = (a - d) / 2.0;
    let g = (c + b) / 2.0;
    let h = (c - b) / 2.0;
    let q = (e * e + h * h).sqrt();
    let r = (f * f + g * g).sqrt();
    ((q + r).abs(), (q - r).abs())
}
