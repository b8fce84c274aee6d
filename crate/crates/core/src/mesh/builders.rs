//! Builders for the model surfaces.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom;

use super::{DensityModel, SurfaceMesh, SurfaceSpec};

/// Construct the surface described by `spec`. Vertices of analytic surfaces
/// lie exactly on the analytic locus; density decorations are attached where
/// the spec defines them.
pub fn build_surface(spec: &SurfaceSpec) -> Result<SurfaceMesh> {
    validate_spec(spec)?;
    let mut mesh = match spec {
        SurfaceSpec::Icosphere { radius, subdiv } => icosphere(*radius, *subdiv),
        SurfaceSpec::Ellipsoid { a, b, c, subdiv } => {
            let mut m = icosphere(1.0, *subdiv);
            let axes = [*a, *b, *c];
            for i in 0..m.num_vertices() {
                let v = m.vertex_mut(i);
                for k in 0..3 {
                    v[k] *= axes[k];
                }
            }
            m
        }
        SurfaceSpec::TorusRev { major, minor, nu, nv } => torus_rev(*major, *minor, *nu, *nv),
        SurfaceSpec::CliffordTorus { n_grid } => clifford_torus(*n_grid),
        SurfaceSpec::Disk { rings } => disk(*rings),
        SurfaceSpec::Ellipse { a, b, rings } => {
            let mut m = disk(*rings);
            for i in 0..m.num_vertices() {
                let v = m.vertex_mut(i);
                v[0] *= a;
                v[1] *= b;
            }
            m
        }
        SurfaceSpec::Annulus { inner_radius, rings } => annulus(*inner_radius, *rings),
        SurfaceSpec::PoincareSphere { hyp_radius, subdiv } => {
            let r0 = (hyp_radius / 2.0).tanh();
            let mut m = icosphere(r0, *subdiv);
            let model = DensityModel::PoincareBall;
            m.density = Some(
                (0..m.num_vertices())
                    .map(|i| model.evaluate(m.vertex(i)))
                    .collect(),
            );
            m.density_model = Some(model);
            m
        }
        SurfaceSpec::MobiusPullbackSphere { a_param, subdiv } => {
            let mut m = icosphere(1.0, *subdiv);
            let model = DensityModel::MobiusPullback {
                a: vec![*a_param, 0.0, 0.0],
            };
            m.density = Some(
                (0..m.num_vertices())
                    .map(|i| model.evaluate(m.vertex(i)))
                    .collect(),
            );
            m.density_model = Some(model);
            m
        }
    };
    mesh.provenance = Some(spec.clone());
    mesh.boundary_loops = Vec::new();
    mesh.boundary_loops = match mesh_rescan(&mesh) {
        Ok(loops) => loops,
        Err(e) => return Err(Error::Construction(format!("boundary scan failed: {e}"))),
    };
    mesh.validate()
        .map_err(|e| Error::Construction(format!("built mesh fails invariants: {e}")))?;
    Ok(mesh)
}

fn mesh_rescan(mesh: &SurfaceMesh) -> Result<Vec<Vec<usize>>> {
    // Rebuild through the public constructor path to reuse the loop scan.
    let m = SurfaceMesh::new(
        mesh.ambient_dim,
        mesh.coords.clone(),
        mesh.triangles.clone(),
        mesh.density.clone(),
    )?;
    Ok(m.boundary_loops)
}

fn validate_spec(spec: &SurfaceSpec) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidParameter(msg));
    match *spec {
        SurfaceSpec::Icosphere { radius, subdiv } => {
            if !(radius > 0.0) || subdiv < 1 {
                return fail(format!("icosphere(radius={radius}, subdiv={subdiv})"));
            }
        }
        SurfaceSpec::Ellipsoid { a, b, c, subdiv } => {
            if !(a > 0.0 && b > 0.0 && c > 0.0) || subdiv < 1 {
                return fail(format!("ellipsoid({a}, {b}, {c}, subdiv={subdiv})"));
            }
        }
        SurfaceSpec::TorusRev { major, minor, nu, nv } => {
            if !(major > minor && minor > 0.0) || nu < 3 || nv < 3 {
                return fail(format!("torus_rev({major}, {minor}, {nu}, {nv})"));
            }
        }
        SurfaceSpec::CliffordTorus { n_grid } => {
            if n_grid < 3 {
                return fail(format!("clifford_torus({n_grid})"));
            }
        }
        SurfaceSpec::Disk { rings } => {
            if rings < 1 {
                return fail(format!("disk({rings})"));
            }
        }
        SurfaceSpec::Ellipse { a, b, rings } => {
            if !(a > 0.0 && b > 0.0) || rings < 1 {
                return fail(format!("ellipse({a}, {b}, {rings})"));
            }
        }
        SurfaceSpec::Annulus { inner_radius, rings } => {
            if !(inner_radius > 0.0 && inner_radius < 1.0) || rings < 1 {
                return fail(format!("annulus({inner_radius}, {rings})"));
            }
        }
        SurfaceSpec::PoincareSphere { hyp_radius, subdiv } => {
            if !(hyp_radius > 0.0) || subdiv < 1 {
                return fail(format!("poincare_sphere({hyp_radius}, {subdiv})"));
            }
        }
        SurfaceSpec::MobiusPullbackSphere { a_param, subdiv } => {
            if !(a_param.abs() > 0.0 && a_param.abs() < 1.0) || subdiv < 1 {
                return fail(format!("mobius_pullback_sphere({a_param}, {subdiv})"));
            }
        }
    }
    Ok(())
}

/// Project a refined midpoint back onto the analytic locus of `spec`.
/// `on_boundary` marks midpoints of boundary edges (flat domains reproject
/// only those).
pub(super) fn reproject(spec: &SurfaceSpec, p: &[f64], on_boundary: bool) -> Vec<f64> {
    match *spec {
        SurfaceSpec::Icosphere { radius, .. } => geom::scale(&geom::normalize(p), radius),
        SurfaceSpec::MobiusPullbackSphere { .. } => geom::normalize(p),
        SurfaceSpec::PoincareSphere { hyp_radius, .. } => {
            geom::scale(&geom::normalize(p), (hyp_radius / 2.0).tanh())
        }
        SurfaceSpec::Ellipsoid { a, b, c, .. } => {
            let axes = [a, b, c];
            let u: Vec<f64> = p.iter().zip(axes).map(|(x, s)| x / s).collect();
            let u = geom::normalize(&u);
            u.iter().zip(axes).map(|(x, s)| x * s).collect()
        }
        SurfaceSpec::TorusRev { major, minor, .. } => {
            let rxy = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let cx = major * p[0] / rxy;
            let cy = major * p[1] / rxy;
            let d = [p[0] - cx, p[1] - cy, p[2]];
            let dn = geom::norm(&d);
            vec![
                cx + minor * d[0] / dn,
                cy + minor * d[1] / dn,
                minor * d[2] / dn,
            ]
        }
        SurfaceSpec::CliffordTorus { .. } => {
            let r = 1.0 / 2f64.sqrt();
            let n1 = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let n2 = (p[2] * p[2] + p[3] * p[3]).sqrt();
            vec![r * p[0] / n1, r * p[1] / n1, r * p[2] / n2, r * p[3] / n2]
        }
        SurfaceSpec::Disk { .. } => {
            if on_boundary {
                geom::normalize(p)
            } else {
                p.to_vec()
            }
        }
        SurfaceSpec::Ellipse { a, b, .. } => {
            if on_boundary {
                let s = ((p[0] / a).powi(2) + (p[1] / b).powi(2)).sqrt();
                vec![p[0] / s, p[1] / s]
            } else {
                p.to_vec()
            }
        }
        SurfaceSpec::Annulus { inner_radius, .. } => {
            if on_boundary {
                let r = geom::norm(p);
                let target = if (r - inner_radius).abs() < (r - 1.0).abs() {
                    inner_radius
                } else {
                    1.0
                };
                geom::scale(p, target / r)
            } else {
                p.to_vec()
            }
        }
    }
}

/// Icosahedron subdivided `subdiv` times, vertices projected to `radius`.
fn icosphere(radius: f64, subdiv: u32) -> SurfaceMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    #[rustfmt::skip]
    let base: [[f64; 3]; 12] = [
        [-1.0,  phi,  0.0], [ 1.0,  phi,  0.0], [-1.0, -phi,  0.0], [ 1.0, -phi,  0.0],
        [ 0.0, -1.0,  phi], [ 0.0,  1.0,  phi], [ 0.0, -1.0, -phi], [ 0.0,  1.0, -phi],
        [ phi,  0.0, -1.0], [ phi,  0.0,  1.0], [-phi,  0.0, -1.0], [-phi,  0.0,  1.0],
    ];
    #[rustfmt::skip]
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];

    let mut coords: Vec<f64> = Vec::new();
    for v in base {
        let u = geom::scale(&geom::normalize(&v), radius);
        coords.extend_from_slice(&u);
    }
    let mut triangles: Vec<[usize; 3]> = faces.to_vec();

    for _ in 0..subdiv {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let [a, b, c] = *tri;
            let mut mid = |u: usize, v: usize, coords: &mut Vec<f64>| -> usize {
                let key = (u.min(v), u.max(v));
                *midpoint.entry(key).or_insert_with(|| {
                    let p: Vec<f64> = (0..3)
                        .map(|k| 0.5 * (coords[u * 3 + k] + coords[v * 3 + k]))
                        .collect();
                    let q = geom::scale(&geom::normalize(&p), radius);
                    coords.extend_from_slice(&q);
                    coords.len() / 3 - 1
                })
            };
            let mab = mid(a, b, &mut coords);
            let mbc = mid(b, c, &mut coords);
            let mca = mid(c, a, &mut coords);
            next.push([a, mab, mca]);
            next.push([b, mbc, mab]);
            next.push([c, mca, mbc]);
            next.push([mab, mbc, mca]);
        }
        triangles = next;
    }

    SurfaceMesh {
        ambient_dim: 3,
        coords,
        triangles,
        boundary_loops: Vec::new(),
        density: None,
        provenance: None,
        density_model: None,
    }
}

fn torus_rev(major: f64, minor: f64, nu: u32, nv: u32) -> SurfaceMesh {
    let (nu, nv) = (nu as usize, nv as usize);
    let mut coords = Vec::with_capacity(nu * nv * 3);
    for i in 0..nu {
        let u = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let w = major + minor * v.cos();
            coords.extend_from_slice(&[w * u.cos(), w * u.sin(), minor * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let p00 = idx(i, j);
            let p10 = idx(i + 1, j);
            let p11 = idx(i + 1, j + 1);
            let p01 = idx(i, j + 1);
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
    }
    SurfaceMesh {
        ambient_dim: 3,
        coords,
        triangles,
        boundary_loops: Vec::new(),
        density: None,
        provenance: None,
        density_model: None,
    }
}

/// Regular grid on S^1(1/sqrt 2) x S^1(1/sqrt 2) in R^4; the induced metric
/// is exactly flat, so discretization error is purely spectral.
fn clifford_torus(n_grid: u32) -> SurfaceMesh {
    let n = n_grid as usize;
    let r = 1.0 / 2f64.sqrt();
    let mut coords = Vec::with_capacity(n * n * 4);
    for i in 0..n {
        let u = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        for j in 0..n {
            let v = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            coords.extend_from_slice(&[r * u.cos(), r * u.sin(), r * v.cos(), r * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut triangles = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    SurfaceMesh {
        ambient_dim: 4,
        coords,
        triangles,
        boundary_loops: Vec::new(),
        density: None,
        provenance: None,
        density_model: None,
    }
}

/// Unit disk from concentric hexagonal rings: ring i carries 6i vertices at
/// radius i/rings, giving near-equilateral triangles everywhere.
fn disk(rings: u32) -> SurfaceMesh {
    let r = rings as usize;
    let ring_start = |i: usize| if i == 0 { 0 } else { 1 + 3 * i * (i - 1) };
    let ring_vertex = |i: usize, k: usize| {
        if i == 0 {
            0
        } else {
            ring_start(i) + k % (6 * i)
        }
    };

    let mut coords = vec![0.0, 0.0];
    for i in 1..=r {
        let rad = i as f64 / r as f64;
        for k in 0..6 * i {
            let t = 2.0 * std::f64::consts::PI * k as f64 / (6 * i) as f64;
            coords.extend_from_slice(&[rad * t.cos(), rad * t.sin()]);
        }
    }

    let mut triangles = Vec::with_capacity(6 * r * r);
    for i in 1..=r {
        for s in 0..6usize {
            for j in 0..i {
                let o0 = ring_vertex(i, s * i + j);
                let o1 = ring_vertex(i, s * i + j + 1);
                let inner = ring_vertex(i - 1, s * (i - 1) + j);
                triangles.push([o0, o1, inner]);
                if j + 1 < i {
                    let inner_next = ring_vertex(i - 1, s * (i - 1) + j + 1);
                    triangles.push([inner, o1, inner_next]);
                }
            }
        }
    }

    SurfaceMesh {
        ambient_dim: 2,
        coords,
        triangles,
        boundary_loops: Vec::new(),
        density: None,
        provenance: None,
        density_model: None,
    }
}

/// Annulus between radii `inner` and 1, structured polar grid with the
/// angular count chosen for near-isotropic cells.
fn annulus(inner: f64, rings: u32) -> SurfaceMesh {
    let nr = rings as usize;
    let dr = (1.0 - inner) / nr as f64;
    let r_mean = 0.5 * (1.0 + inner);
    let ntheta = (((2.0 * std::f64::consts::PI * r_mean / dr).round() as usize).max(16) + 1) & !1;

    let mut coords = Vec::with_capacity((nr + 1) * ntheta * 2);
    for i in 0..=nr {
        let rad = inner + dr * i as f64;
        for j in 0..ntheta {
            let t = 2.0 * std::f64::consts::PI * j as f64 / ntheta as f64;
            coords.extend_from_slice(&[rad * t.cos(), rad * t.sin()]);
        }
    }
    let idx = |i: usize, j: usize| i * ntheta + j % ntheta;
    let mut triangles = Vec::with_capacity(2 * nr * ntheta);
    for i in 0..nr {
        for j in 0..ntheta {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    SurfaceMesh {
        ambient_dim: 2,
        coords,
        triangles,
        boundary_loops: Vec::new(),
        density: None,
        provenance: None,
        density_model: None,
    }
}
