//! Discrete extrinsic geometry: mean-curvature vectors, shape operators,
//! Newton transformations, generalized mean curvature, Hsiung-Minkowski
//! residuals, space-form Reilly integrands, and the hyperbolic conversion of
//! the second fundamental form.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::{DensityModel, SurfaceMesh};
use crate::spectral::{assemble_fem, Mass};

/// Per-vertex extrinsic data. The mean-curvature vector satisfies the
/// discrete analogue of Laplace(x) = m H on closed meshes. Hypersurface
/// fields (frames, shape operator, scalars) are present for closed surfaces
/// in R^3 only; the shape operator is stated in the per-vertex orthonormal
/// tangent frame with the normal chosen so the unit sphere gives S = I.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub ambient_dim: usize,
    /// Stride `ambient_dim`.
    pub mean_curvature: Vec<f64>,
    /// Orthonormal tangent frame per vertex: e1 then e2, stride 6.
    pub frames: Option<Vec<f64>>,
    /// Symmetric shape operator [s11, s12, s22] in the vertex frame.
    pub shape_operator: Option<Vec<[f64; 3]>>,
    /// Unit normal (stride 3), oriented opposite the outward face normals.
    pub unit_normal: Option<Vec<f64>>,
    /// [H_0, H_1, H_2] per vertex: 1, mean curvature, Gauss curvature.
    pub h_scalars: Option<Vec<[f64; 3]>>,
    /// Euclidean lumped vertex masses (density ignored).
    pub vertex_mass: Vec<f64>,
    positions: Vec<f64>,
    two_rings: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Identity,
    Newton1,
    Zero,
    Custom,
}

/// Symmetric tangent 2-tensor per vertex, in the same frames as the
/// curvature field it was built from.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub kind: TensorKind,
    /// [t11, t12, t22] per vertex.
    pub components: Vec<[f64; 3]>,
    /// Magnitude of the discrete tangential divergence per vertex.
    pub divergence_residual: Vec<f64>,
}

impl SymTensorField {
    pub fn trace(&self, v: usize) -> f64 {
        let t = self.components[v];
        t[0] + t[2]
    }
}

fn euclidean_fem(mesh: &SurfaceMesh) -> Result<(crate::sparse::CsrMatrix, Vec<f64>)> {
    let mut flat = mesh.clone();
    flat.density = None;
    flat.density_model = None;
    let fem = assemble_fem(&flat)?;
    let mass = match fem.mass {
        Mass::Lumped(d) => d,
        Mass::Consistent(_) => unreachable!("default assembly is lumped"),
    };
    Ok((fem.stiffness, mass))
}

/// Mean-curvature vector of a closed immersed mesh, with hypersurface
/// decorations (normal, frame, shape operator, H_r) in R^3.
pub fn mean_curvature_field(mesh: &SurfaceMesh) -> Result<CurvatureField> {
    if !mesh.is_closed() {
        return Err(Error::Domain(
            "mean_curvature_field expects a closed mesh; use h_boundary for boundary curves".into(),
        ));
    }
    let d = mesh.ambient_dim;
    let n = mesh.num_vertices();
    let (stiffness, mass) = euclidean_fem(mesh)?;

    // H = -(1/m) M^{-1} K x, coordinatewise; m = 2.
    let mut mean_curvature = vec![0.0; n * d];
    for c in 0..d {
        let xc: Vec<f64> = (0..n).map(|v| mesh.vertex(v)[c]).collect();
        let kx = stiffness.apply(&xc);
        for v in 0..n {
            mean_curvature[v * d + c] = -0.5 * kx[v] / mass[v];
        }
    }

    let mut field = CurvatureField {
        ambient_dim: d,
        mean_curvature,
        frames: None,
        shape_operator: None,
        unit_normal: None,
        h_scalars: None,
        vertex_mass: mass,
        positions: mesh.coords.clone(),
        two_rings: None,
    };

    if d == 3 {
        fit_hypersurface_data(mesh, &mut field)?;
    }
    Ok(field)
}

fn vertex_adjacency(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let n = mesh.num_vertices();
    let mut adj = vec![Vec::new(); n];
    for tri in &mesh.triangles {
        for e in 0..3 {
            let (u, v) = (tri[e], tri[(e + 1) % 3]);
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

fn two_rings(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    adj.iter()
        .enumerate()
        .map(|(v, ring1)| {
            let mut r: Vec<usize> = ring1.clone();
            for &w in ring1 {
                r.extend_from_slice(&adj[w]);
            }
            r.sort_unstable();
            r.dedup();
            r.retain(|&u| u != v);
            r
        })
        .collect()
}

/// Local quadric fit over the 2-ring: normals, frames, and shape operators.
fn fit_hypersurface_data(mesh: &SurfaceMesh, field: &mut CurvatureField) -> Result<()> {
    let n = mesh.num_vertices();
    let adj = vertex_adjacency(mesh);
    let rings = two_rings(&adj);

    // Area-weighted outward vertex normals from the CCW faces.
    let mut outward = vec![0.0; n * 3];
    for tri in &mesh.triangles {
        let [a, b, c] = *tri;
        let u = geom::sub(mesh.vertex(b), mesh.vertex(a));
        let v = geom::sub(mesh.vertex(c), mesh.vertex(a));
        let fnorm = geom::cross3(&u, &v); // length = 2 area
        for &w in tri {
            geom::axpy(&mut outward[w * 3..w * 3 + 3], 1.0, &fnorm);
        }
    }

    let mut frames = vec![0.0; n * 6];
    let mut shape = vec![[0.0; 3]; n];
    let mut normals = vec![0.0; n * 3];
    let mut scalars = vec![[1.0, 0.0, 0.0]; n];

    for v in 0..n {
        let nv = geom::normalize(&outward[v * 3..v * 3 + 3]);
        // Normal used by the shape operator: inward, so spheres give S = +I.
        let nu = geom::scale(&nv, -1.0);
        let e1 = {
            let trial = if nu[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let p = geom::dot(&trial, &nu);
            let mut t = trial.to_vec();
            geom::axpy(&mut t, -p, &nu);
            geom::normalize(&t)
        };
        let e2v = geom::cross3(&nu, &e1);
        let e2 = e2v.to_vec();

        let p0 = mesh.vertex(v);
        let ring = &rings[v];
        let rows = ring.len();
        if rows < 5 {
            return Err(Error::Domain(format!(
                "vertex {v} has only {rows} second-ring neighbors; quadric fit needs 5"
            )));
        }
        let mut a = DMatrix::zeros(rows, 5);
        let mut rhs = DVector::zeros(rows);
        for (r, &w) in ring.iter().enumerate() {
            let delta = geom::sub(mesh.vertex(w), p0);
            let u = geom::dot(&delta, &e1);
            let t = geom::dot(&delta, &e2);
            let h = geom::dot(&delta, &nu);
            a[(r, 0)] = 0.5 * u * u;
            a[(r, 1)] = u * t;
            a[(r, 2)] = 0.5 * t * t;
            a[(r, 3)] = u;
            a[(r, 4)] = t;
            rhs[r] = h;
        }
        let ata = a.transpose() * &a;
        let atb = a.transpose() * rhs;
        let sol = ata
            .lu()
            .solve(&atb)
            .ok_or_else(|| Error::Domain(format!("quadric fit singular at vertex {v}")))?;
        let (qa, qb, qc, gd, ge) = (sol[0], sol[1], sol[2], sol[3], sol[4]);

        // Shape operator of the graph at the origin, expressed in an
        // orthonormal tangent basis: S = L^{-1} II L^{-T} with I_f = L L^T.
        let w = 1.0 / (1.0 + gd * gd + ge * ge).sqrt();
        let ii = Matrix2::new(qa, qb, qb, qc) * w;
        let i_f = Matrix2::new(1.0 + gd * gd, gd * ge, gd * ge, 1.0 + ge * ge);
        let chol = nalgebra::Cholesky::new(i_f).expect("first fundamental form is SPD");
        let l_inv = chol.l().try_inverse().expect("triangular inverse");
        let s = l_inv * ii * l_inv.transpose();
        let (s11, s12, s22) = (s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);

        frames[v * 6..v * 6 + 3].copy_from_slice(&e1);
        frames[v * 6 + 3..v * 6 + 6].copy_from_slice(&e2);
        normals[v * 3..v * 3 + 3].copy_from_slice(&nu);
        shape[v] = [s11, s12, s22];
        scalars[v] = [1.0, 0.5 * (s11 + s22), s11 * s22 - s12 * s12];
    }

    field.frames = Some(frames);
    field.shape_operator = Some(shape);
    field.unit_normal = Some(normals);
    field.h_scalars = Some(scalars);
    field.two_rings = Some(rings);
    Ok(())
}

/// Newton transformation of the shape operator: T_0 = I, T_1 = (tr S) I - S.
pub fn newton_tensor(curv: &CurvatureField, r: u32) -> Result<SymTensorField> {
    let n = curv.vertex_mass.len();
    match r {
        0 => Ok(SymTensorField {
            kind: TensorKind::Identity,
            components: vec![[1.0, 0.0, 1.0]; n],
            divergence_residual: vec![0.0; n],
        }),
        1 => {
            let shape = curv.shape_operator.as_ref().ok_or_else(|| {
                Error::Domain("Newton transformation T_1 needs a hypersurface shape operator".into())
            })?;
            let components: Vec<[f64; 3]> = shape
                .iter()
                .map(|&[s11, s12, s22]| [s22, -s12, s11])
                .collect();
            let divergence_residual = tensor_divergence(curv, &components)?;
            Ok(SymTensorField {
                kind: TensorKind::Newton1,
                components,
                divergence_residual,
            })
        }
        _ => Err(Error::Domain(format!(
            "Newton transformation order {r} out of range (surfaces support r in 0..=1)"
        ))),
    }
}

pub fn zero_tensor(curv: &CurvatureField) -> SymTensorField {
    let n = curv.vertex_mass.len();
    SymTensorField {
        kind: TensorKind::Zero,
        components: vec![[0.0; 3]; n],
        divergence_residual: vec![0.0; n],
    }
}

/// Discrete tangential divergence magnitude of a frame tensor field, via
/// least-squares derivatives of the ambient representation over the 2-ring.
fn tensor_divergence(curv: &CurvatureField, components: &[[f64; 3]]) -> Result<Vec<f64>> {
    let frames = curv
        .frames
        .as_ref()
        .ok_or_else(|| Error::Domain("tensor divergence needs tangent frames".into()))?;
    let rings = curv
        .two_rings
        .as_ref()
        .ok_or_else(|| Error::Domain("tensor divergence needs neighborhoods".into()))?;
    let n = components.len();

    // Ambient 3x3 representation P T P^T per vertex (frame-gauge invariant).
    let ambient: Vec<[f64; 9]> = (0..n)
        .map(|v| {
            let e1 = &frames[v * 6..v * 6 + 3];
            let e2 = &frames[v * 6 + 3..v * 6 + 6];
            let [t11, t12, t22] = components[v];
            let mut m = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    m[i * 3 + j] = t11 * e1[i] * e1[j]
                        + t12 * (e1[i] * e2[j] + e2[i] * e1[j])
                        + t22 * e2[i] * e2[j];
                }
            }
            m
        })
        .collect();

    let mut out = vec![0.0; n];
    for v in 0..n {
        let e1 = &frames[v * 6..v * 6 + 3];
        let e2 = &frames[v * 6 + 3..v * 6 + 6];
        let p0 = &curv.positions[v * 3..v * 3 + 3];
        let ring = &rings[v];
        let rows = ring.len();
        // Linear fit G_k = d(ambient T)/d u_k over tangent coordinates.
        let mut a = DMatrix::zeros(rows, 2);
        for (r, &w) in ring.iter().enumerate() {
            let delta = geom::sub(&curv.positions[w * 3..w * 3 + 3], p0);
            a[(r, 0)] = geom::dot(&delta, e1);
            a[(r, 1)] = geom::dot(&delta, e2);
        }
        let ata = (a.transpose() * &a)
            .try_inverse()
            .ok_or_else(|| Error::Domain(format!("degenerate tangent fit at vertex {v}")))?;
        let mut g = [[0.0; 9]; 2];
        for comp in 0..9 {
            let rhs =
                DVector::from_iterator(rows, ring.iter().map(|&w| ambient[w][comp] - ambient[v][comp]));
            let sol = &ata * (a.transpose() * rhs);
            g[0][comp] = sol[0];
            g[1][comp] = sol[1];
        }
        // (div T)_j = sum_i e_j . (G_i e_i), projected on the tangent plane.
        let frame = [e1, e2];
        let mut dv = [0.0; 2];
        for (j, ej) in frame.iter().enumerate() {
            let mut acc = 0.0;
            for (i, ei) in frame.iter().enumerate() {
                for r in 0..3 {
                    for c in 0..3 {
                        acc += ej[r] * g[i][r * 3 + c] * ei[c];
                    }
                }
            }
            dv[j] = acc;
        }
        out[v] = (dv[0] * dv[0] + dv[1] * dv[1]).sqrt();
    }
    Ok(out)
}

/// Generalized mean-curvature vector H_T = sum A(T e_i, e_i) per vertex
/// (stride = ambient dimension). The identity tensor routes through the
/// cotangent mean curvature so H_T = m H holds exactly.
pub fn h_t_vector(curv: &CurvatureField, tensor: &SymTensorField) -> Result<Vec<f64>> {
    let d = curv.ambient_dim;
    let n = curv.vertex_mass.len();
    if tensor.components.len() != n {
        return Err(Error::Shape("tensor/curvature vertex count mismatch".into()));
    }
    match tensor.kind {
        TensorKind::Identity => Ok(curv.mean_curvature.iter().map(|&h| 2.0 * h).collect()),
        TensorKind::Zero => Ok(vec![0.0; n * d]),
        TensorKind::Newton1 | TensorKind::Custom => {
            let shape = curv.shape_operator.as_ref().ok_or_else(|| {
                Error::Domain("H_T for a general tensor needs the hypersurface shape operator".into())
            })?;
            let normals = curv.unit_normal.as_ref().unwrap();
            let mut out = vec![0.0; n * d];
            for v in 0..n {
                let [s11, s12, s22] = shape[v];
                let [t11, t12, t22] = tensor.components[v];
                let tr_st = s11 * t11 + 2.0 * s12 * t12 + s22 * t22;
                for c in 0..3 {
                    out[v * d + c] = tr_st * normals[v * 3 + c];
                }
            }
            Ok(out)
        }
    }
}

/// Integral defect of the generalized Hsiung-Minkowski identity
/// 0 = int <x, H_T> + int tr T on a closed mesh.
pub fn hsiung_minkowski_residual(
    mesh: &SurfaceMesh,
    curv: &CurvatureField,
    tensor: &SymTensorField,
) -> Result<f64> {
    if !mesh.is_closed() {
        return Err(Error::Domain("Hsiung-Minkowski requires a closed mesh".into()));
    }
    let d = mesh.ambient_dim;
    let ht = h_t_vector(curv, tensor)?;
    let mut acc = 0.0;
    for v in 0..mesh.num_vertices() {
        let x = mesh.vertex(v);
        let h = &ht[v * d..(v + 1) * d];
        acc += curv.vertex_mass[v] * (geom::dot(x, h) + tensor.trace(v));
    }
    Ok(acc)
}

/// (m / V) int (c + |H|^2) with the curvature taken in the space form of
/// curvature `c`: Euclidean mean curvature for c = 0, the sphere-ambient
/// decomposition for c = 1, and the Poincare-ball conversion for c = -1.
pub fn reilly_rhs(mesh: &SurfaceMesh, c: f64) -> Result<f64> {
    if !mesh.is_closed() {
        return Err(Error::Domain("Reilly integrand requires a closed mesh".into()));
    }
    let d = mesh.ambient_dim;
    let n = mesh.num_vertices();
    if c == 0.0 {
        let curv = mean_curvature_field(mesh)?;
        let mut num = 0.0;
        let mut vol = 0.0;
        for v in 0..n {
            let h = &curv.mean_curvature[v * d..(v + 1) * d];
            num += curv.vertex_mass[v] * geom::dot(h, h);
            vol += curv.vertex_mass[v];
        }
        Ok(2.0 * num / vol)
    } else if c == 1.0 {
        for v in 0..n {
            let r = geom::norm(mesh.vertex(v));
            if (r - 1.0).abs() > 1e-8 {
                return Err(Error::Geometry(format!(
                    "vertex {v} at radius {r} is off the unit sphere required for c = 1"
                )));
            }
        }
        let curv = mean_curvature_field(mesh)?;
        let mut num = 0.0;
        let mut vol = 0.0;
        for v in 0..n {
            let x = mesh.vertex(v);
            let h = &curv.mean_curvature[v * d..(v + 1) * d];
            let hs: Vec<f64> = h.iter().zip(x).map(|(hc, xc)| hc + xc).collect();
            num += curv.vertex_mass[v] * (1.0 + geom::dot(&hs, &hs));
            vol += curv.vertex_mass[v];
        }
        Ok(2.0 * num / vol)
    } else if c == -1.0 {
        let hyp = hyperbolic_convert(mesh)?;
        let scalars = hyp.h_scalars.as_ref().unwrap();
        // Hyperbolic volume element: the density-weighted mass.
        let fem = assemble_fem(mesh)?;
        let hyp_mass = match fem.mass {
            Mass::Lumped(m) => m,
            Mass::Consistent(_) => unreachable!(),
        };
        let mut num = 0.0;
        let mut vol = 0.0;
        for v in 0..n {
            let h1 = scalars[v][1];
            num += hyp_mass[v] * (-1.0 + h1 * h1);
            vol += hyp_mass[v];
        }
        Ok(2.0 * num / vol)
    } else {
        Err(Error::InvalidParameter(format!(
            "space-form curvature must be 0, 1, or -1, got {c}"
        )))
    }
}

/// Second fundamental form and mean curvature of a ball-model mesh with
/// respect to the hyperbolic metric, via the conformal conversion
/// h~ = e^{-rho}(h - rho_nu I) with rho_nu the normal derivative of rho.
///
/// The mean-curvature vector is stored in ball coordinates; its hyperbolic
/// norm equals the H_1 scalar.
pub fn hyperbolic_convert(mesh: &SurfaceMesh) -> Result<CurvatureField> {
    let density = mesh.density.as_ref().ok_or(Error::MissingDensity)?;
    if mesh.ambient_dim != 3 {
        return Err(Error::Domain("hyperbolic conversion expects a mesh in the 3-ball".into()));
    }
    let n = mesh.num_vertices();

    // The Poincare-ball factor (possibly constant, for spheres centered at
    // the origin) or a constant conformal factor. The Poincare reading wins
    // when both match: the ambient rho still varies off the surface.
    let constant = density.iter().all(|&d| (d - density[0]).abs() <= 1e-12 * density[0]);
    let mut poincare = true;
    for v in 0..n {
        let r2 = geom::dot(mesh.vertex(v), mesh.vertex(v));
        if r2 >= 1.0 {
            return Err(Error::Domain(format!(
                "vertex {v} lies outside the open unit ball"
            )));
        }
        let expected = DensityModel::PoincareBall.evaluate(mesh.vertex(v));
        if (density[v] - expected).abs() > 1e-8 * expected {
            poincare = false;
        }
    }
    if !constant && !poincare {
        return Err(Error::Domain(
            "hyperbolic conversion supports the Poincare factor or a constant density".into(),
        ));
    }

    let mut field = mean_curvature_field(mesh)?;
    let shape = field
        .shape_operator
        .as_mut()
        .ok_or_else(|| Error::Domain("hyperbolic conversion needs the shape operator".into()))?;
    let normals = field.unit_normal.as_ref().unwrap().clone();

    let mut scalars = vec![[1.0, 0.0, 0.0]; n];
    let mut mean = vec![0.0; n * 3];
    for v in 0..n {
        let x = mesh.vertex(v);
        let nu = &normals[v * 3..v * 3 + 3];
        let (exp_rho, grad_rho): (f64, Vec<f64>) = if poincare {
            let r2 = geom::dot(x, x);
            (2.0 / (1.0 - r2), geom::scale(x, 2.0 / (1.0 - r2)))
        } else {
            (density[v].sqrt(), vec![0.0; 3])
        };
        let rho_nu = geom::dot(&grad_rho, nu);
        let [s11, s12, s22] = shape[v];
        let conv = |s: f64, diag: bool| (s - if diag { rho_nu } else { 0.0 }) / exp_rho;
        let h11 = conv(s11, true);
        let h12 = conv(s12, false);
        let h22 = conv(s22, true);
        shape[v] = [h11, h12, h22];
        let h1 = 0.5 * (h11 + h22);
        scalars[v] = [1.0, h1, h11 * h22 - h12 * h12];
        // Hyperbolic unit normal in ball coordinates is nu / exp_rho.
        for c in 0..3 {
            mean[v * 3 + c] = h1 * nu[c] / exp_rho;
        }
    }
    field.h_scalars = Some(scalars);
    field.mean_curvature = mean;
    Ok(field)
}

/// Curvature vector of each boundary loop as a curve in the ambient space,
/// via the circumscribed circle through consecutive vertex triples. Returns
/// a full-length buffer (stride = ambient dimension), zero off the boundary.
pub fn h_boundary(mesh: &SurfaceMesh) -> Result<Vec<f64>> {
    if mesh.is_closed() {
        return Err(Error::EmptyBoundary);
    }
    let d = mesh.ambient_dim;
    if d > 3 {
        return Err(Error::Domain("boundary curvature expects ambient R^2 or R^3".into()));
    }
    let mut out = vec![0.0; mesh.num_vertices() * d];
    for (li, lp) in mesh.boundary_loops.iter().enumerate() {
        if lp.len() < 3 {
            return Err(Error::DegenerateLoop {
                index: li,
                vertices: lp.len(),
            });
        }
        let k = lp.len();
        for i in 0..k {
            let prev = mesh.vertex(lp[(i + k - 1) % k]);
            let here = mesh.vertex(lp[i]);
            let next = mesh.vertex(lp[(i + 1) % k]);
            if let Some(center) = geom::circumcenter(prev, here, next) {
                let r = geom::sub(&center, here);
                let rr = geom::dot(&r, &r);
                if rr > 1e-300 {
                    let v = lp[i];
                    for c in 0..d {
                        out[v * d + c] = r[c] / rr;
                    }
                }
            }
            // Collinear triple: zero curvature.
        }
    }
    Ok(out)
}

/// CSV export of a curvature field: vertex id, H components, H_1, H_2.
pub fn curvature_to_csv(mesh: &SurfaceMesh, curv: &CurvatureField) -> String {
    let d = mesh.ambient_dim;
    let mut s = String::from("vertex,h_0,h_1,h_2,h_3,H1,H2\n");
    for v in 0..mesh.num_vertices() {
        let h = &curv.mean_curvature[v * d..(v + 1) * d];
        let mut comps = [0.0; 4];
        comps[..d].copy_from_slice(h);
        let (h1, h2) = curv
            .h_scalars
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |s| (s[v][1], s[v][2]));
        s.push_str(&format!(
            "{v},{},{},{},{},{h1},{h2}\n",
            comps[0], comps[1], comps[2], comps[3]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_surface, SurfaceSpec};

    #[test]
    fn unit_sphere_mean_curvature_is_inward_position() {
        let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 }).unwrap();
        let curv = mean_curvature_field(&mesh).unwrap();
        // The cotangent estimator is sharp away from the 12 valence-5 seed
        // vertices, where it carries an O(1) pointwise bias of ~14%.
        let mut errs: Vec<f64> = (0..mesh.num_vertices())
            .map(|v| {
                let h = &curv.mean_curvature[v * 3..v * 3 + 3];
                geom::dist(h, &geom::scale(mesh.vertex(v), -1.0))
            })
            .collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = errs.len();
        assert!(errs[n / 2] < 0.01, "median |H + x| = {}", errs[n / 2]);
        assert!(errs[n - 1] < 0.2, "max |H + x| = {}", errs[n - 1]);
        let outliers = errs.iter().filter(|&&e| e > 0.05).count();
        assert!(outliers <= 12, "{outliers} vertices over 5%");
        // Mass-weighted mean magnitude is first-order accurate.
        let total: f64 = curv.vertex_mass.iter().sum();
        let mean_mag: f64 = (0..n)
            .map(|v| curv.vertex_mass[v] * geom::norm(&curv.mean_curvature[v * 3..v * 3 + 3]))
            .sum::<f64>()
            / total;
        assert!((mean_mag - 1.0).abs() < 0.01, "mean |H| = {mean_mag}");
    }

    #[test]
    fn unit_sphere_shape_operator_is_identity() {
        let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 }).unwrap();
        let curv = mean_curvature_field(&mesh).unwrap();
        let shape = curv.shape_operator.as_ref().unwrap();
        for &[s11, s12, s22] in shape {
            assert!((s11 - 1.0).abs() < 0.04, "s11 {s11}");
            assert!((s22 - 1.0).abs() < 0.04, "s22 {s22}");
            assert!(s12.abs() < 0.04, "s12 {s12}");
        }
        let t1 = newton_tensor(&curv, 1).unwrap();
        for v in 0..mesh.num_vertices() {
            assert!((t1.trace(v) - 2.0).abs() < 0.08);
        }
    }

    #[test]
    fn identity_tensor_ht_is_twice_mean_curvature_exactly() {
        let mesh = build_surface(&SurfaceSpec::TorusRev { major: 2.0, minor: 1.0, nu: 24, nv: 12 }).unwrap();
        let curv = mean_curvature_field(&mesh).unwrap();
        let t0 = newton_tensor(&curv, 0).unwrap();
        assert_eq!(t0.kind, TensorKind::Identity);
        assert!(t0.divergence_residual.iter().all(|&r| r == 0.0));
        let ht = h_t_vector(&curv, &t0).unwrap();
        for (a, b) in ht.iter().zip(&curv.mean_curvature) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn hsiung_minkowski_identity_and_zero_tensor() {
        let mesh = build_surface(&SurfaceSpec::Ellipsoid { a: 2.0, b: 1.0, c: 1.0, subdiv: 3 }).unwrap();
        let curv = mean_curvature_field(&mesh).unwrap();
        let t0 = newton_tensor(&curv, 0).unwrap();
        // The identity-tensor residual is a discrete integration-by-parts
        // identity, exact up to roundoff.
        let r = hsiung_minkowski_residual(&mesh, &curv, &t0).unwrap();
        let scale: f64 = 2.0 * curv.vertex_mass.iter().sum::<f64>();
        assert!(r.abs() < 1e-10 * scale, "identity residual {r}");

        let tz = zero_tensor(&curv);
        let rz = hsiung_minkowski_residual(&mesh, &curv, &tz).unwrap();
        assert_eq!(rz, 0.0);
    }

    #[test]
    fn reilly_rhs_unit_sphere_flat_ambient() {
        let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 }).unwrap();
        let rhs = reilly_rhs(&mesh, 0.0).unwrap();
        assert!((rhs - 2.0).abs() < 0.02, "rhs {rhs}");
    }

    #[test]
    fn reilly_rhs_clifford_torus_in_sphere() {
        let mesh = build_surface(&SurfaceSpec::CliffordTorus { n_grid: 24 }).unwrap();
        let rhs = reilly_rhs(&mesh, 1.0).unwrap();
        assert!((rhs - 2.0).abs() < 0.02, "rhs {rhs}");
    }

    #[test]
    fn hyperbolic_geodesic_sphere_curvature_is_coth() {
        let mesh = build_surface(&SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 3 }).unwrap();
        let hyp = hyperbolic_convert(&mesh).unwrap();
        let coth1 = 1.0 / 1f64.tanh();
        for s in hyp.h_scalars.as_ref().unwrap() {
            assert!((s[1] - coth1).abs() < 0.03, "H1 {} vs {coth1}", s[1]);
        }
    }

    #[test]
    fn constant_density_one_is_euclidean_exactly() {
        let mut mesh = build_surface(&SurfaceSpec::Icosphere { radius: 0.4, subdiv: 2 }).unwrap();
        mesh.density = Some(vec![1.0; mesh.num_vertices()]);
        let hyp = hyperbolic_convert(&mesh).unwrap();
        let euc = mean_curvature_field(&mesh).unwrap();
        let hs = hyp.shape_operator.as_ref().unwrap();
        let es = euc.shape_operator.as_ref().unwrap();
        for (a, b) in hs.iter().zip(es) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn disk_boundary_curvature_is_unit() {
        let mesh = build_surface(&SurfaceSpec::Disk { rings: 8 }).unwrap();
        let hb = h_boundary(&mesh).unwrap();
        for &v in &mesh.boundary_vertices() {
            let k = &hb[v * 2..v * 2 + 2];
            let mag = geom::norm(k);
            assert!((mag - 1.0).abs() < 1e-9, "curvature {mag}");
            // Points toward the center.
            let x = mesh.vertex(v);
            assert!(geom::dot(k, x) < 0.0);
        }
    }

    #[test]
    fn annulus_inner_loop_curvature_is_two() {
        let mesh = build_surface(&SurfaceSpec::Annulus { inner_radius: 0.5, rings: 8 }).unwrap();
        let hb = h_boundary(&mesh).unwrap();
        for &v in &mesh.boundary_vertices() {
            let r = geom::norm(mesh.vertex(v));
            let mag = geom::norm(&hb[v * 2..v * 2 + 2]);
            let expect = 1.0 / r;
            assert!((mag - expect).abs() < 1e-9 * expect.max(1.0), "{mag} vs {expect}");
        }
    }
}
