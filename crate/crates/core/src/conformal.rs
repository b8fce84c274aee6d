//! The Mobius family on S^n, stereographic projection, center-of-mass
//! balancing, conformal-volume maximization, and the conformal-factor
//! identity residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrinsic;
use crate::geom;
use crate::mesh::SurfaceMesh;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spectral::{assemble_fem, Mass};

/// Parameter of the conformal diffeomorphism gamma_a of S^n:
/// gamma_a(x) = (x + (mu f + lambda) a) / (lambda (1 + f)), f = <x, a>.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobiusParam {
    pub a: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl MobiusParam {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        let norm2 = geom::dot(&a, &a);
        if norm2 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "Mobius parameter must lie in the open unit ball, |a| = {}",
                norm2.sqrt()
            )));
        }
        if norm2 == 0.0 {
            return Ok(Self { a, lambda: 1.0, mu: 0.0 });
        }
        let lambda = (1.0 - norm2).powf(-0.5);
        let mu = (lambda - 1.0) / norm2;
        Ok(Self { a, lambda, mu })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            a: vec![0.0; dim],
            lambda: 1.0,
            mu: 0.0,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: geom::scale(&self.a, -1.0),
            lambda: self.lambda,
            mu: self.mu,
        }
    }

    /// Pullback area factor of gamma_a at x: (1 - |a|^2) / (1 + <x,a>)^2.
    pub fn density_factor(&self, x: &[f64]) -> f64 {
        let f = geom::dot(x, &self.a);
        (1.0 - geom::dot(&self.a, &self.a)) / ((1.0 + f) * (1.0 + f))
    }
}

/// Apply gamma_a to a point of S^n.
pub fn mobius_apply(p: &MobiusParam, x: &[f64]) -> Result<Vec<f64>> {
    let r = geom::norm(x);
    if (r - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "mobius_apply input has |x| = {r}, off the sphere beyond 1e-12"
        )));
    }
    Ok(mobius_apply_unchecked(p, x))
}

fn mobius_apply_unchecked(p: &MobiusParam, x: &[f64]) -> Vec<f64> {
    if p.lambda == 1.0 && p.mu == 0.0 {
        return x.to_vec();
    }
    let f = geom::dot(x, &p.a);
    let coef = p.mu * f + p.lambda;
    let denom = p.lambda * (1.0 + f);
    x.iter()
        .zip(&p.a)
        .map(|(xc, ac)| (xc + coef * ac) / denom)
        .collect()
}

/// Apply gamma_a to a flat cloud of points on S^n (stride `dim`).
pub fn mobius_apply_cloud(p: &MobiusParam, coords: &[f64], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(coords.len());
    for chunk in coords.chunks(dim) {
        out.extend_from_slice(&mobius_apply_unchecked(p, chunk));
    }
    out
}

/// Inverse stereographic projection R^n -> S^n: the origin maps to the south
/// pole and infinity to the north pole; the unit sphere of R^n maps to the
/// equator.
pub fn stereographic_to_sphere(x: &[f64]) -> Vec<f64> {
    let r2 = geom::dot(x, x);
    let s = 1.0 / (1.0 + r2);
    let mut out: Vec<f64> = x.iter().map(|&c| 2.0 * c * s).collect();
    out.push((r2 - 1.0) * s);
    out
}

/// Stereographic projection S^n -> R^n from the north pole.
pub fn stereographic_from_sphere(y: &[f64]) -> Result<Vec<f64>> {
    let last = y[y.len() - 1];
    if last >= 1.0 - 1e-12 {
        return Err(Error::Pole);
    }
    let s = 1.0 / (1.0 - last);
    Ok(y[..y.len() - 1].iter().map(|&c| c * s).collect())
}

fn weighted_moment(p: &MobiusParam, points: &[f64], dim: usize, weights: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    let mut wsum = 0.0;
    for (i, chunk) in points.chunks(dim).enumerate() {
        let y = mobius_apply_unchecked(p, chunk);
        geom::axpy(&mut m, weights[i], &y);
        wsum += weights[i];
    }
    geom::scale(&m, 1.0 / wsum)
}

const BALANCE_TOL: f64 = 1e-8;
const BALANCE_MAX_ITER: usize = 500;

/// Find a in B^{n+1} with gamma_a-pushed weighted barycenter below 1e-8,
/// by damped fixed-point iteration on the barycenter with a derivative-free
/// fallback.
pub fn balance_center_of_mass(points: &[f64], dim: usize, weights: &[f64]) -> Result<MobiusParam> {
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Domain("balance weights must be positive".into()));
    }
    if points.len() != weights.len() * dim {
        return Err(Error::Shape("points/weights length mismatch".into()));
    }

    let clamp_ball = |a: Vec<f64>| -> Vec<f64> {
        let n = geom::norm(&a);
        if n >= 0.999 {
            geom::scale(&a, 0.999 / n)
        } else {
            a
        }
    };

    let mut a = vec![0.0; dim];
    let mut step = 0.5;
    let mut moment = weighted_moment(&MobiusParam::new(a.clone())?, points, dim, weights);
    let mut mnorm = geom::norm(&moment);
    let mut iterations = 0usize;
    while mnorm >= BALANCE_TOL && iterations < BALANCE_MAX_ITER {
        iterations += 1;
        // The map pushes mass toward a/|a|, so move against the moment.
        let mut trial = a.clone();
        geom::axpy(&mut trial, -step, &moment);
        let trial = clamp_ball(trial);
        let p = MobiusParam::new(trial.clone())?;
        let tm = weighted_moment(&p, points, dim, weights);
        let tn = geom::norm(&tm);
        if tn < mnorm {
            a = trial;
            moment = tm;
            mnorm = tn;
            step = (step * 1.3).min(1.5);
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }

    if mnorm < BALANCE_TOL {
        return MobiusParam::new(a);
    }

    // Derivative-free fallback on the squared moment norm.
    let mut best = (a.clone(), mnorm);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut starts = vec![a.clone(), vec![0.0; dim]];
    for _ in 0..6 {
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = geom::norm(&dir).max(1e-12);
        starts.push(geom::scale(&dir, 0.4 / n));
    }
    for start in starts {
        let r = nelder_mead(
            |x| {
                let c = clamp_ball(x.to_vec());
                let penalty = 1e3 * geom::dist(x, &c).powi(2);
                let p = MobiusParam::new(c).expect("clamped inside ball");
                let m = weighted_moment(&p, points, dim, weights);
                geom::dot(&m, &m) + penalty
            },
            &start,
            &NelderMeadOptions {
                max_evals: 800,
                xtol: 1e-10,
                ftol: 1e-22,
                initial_step: 0.05,
            },
        );
        let c = clamp_ball(r.x);
        let p = MobiusParam::new(c.clone())?;
        let m = geom::norm(&weighted_moment(&p, points, dim, weights));
        if m < best.1 {
            best = (c, m);
        }
    }

    if best.1 < BALANCE_TOL {
        MobiusParam::new(best.0)
    } else {
        Err(Error::NonBalanceable {
            moment: best.1,
            iterations: BALANCE_MAX_ITER,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_evals_per_start: usize,
    pub seed: u64,
    /// |a| is capped at 1 - edge_margin to keep the quadrature meaningful.
    pub edge_margin: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evals_per_start: 600,
            seed: 0xC0FFEE,
            edge_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub start: usize,
    pub iteration: usize,
    pub a_norm: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalVolumeEstimate {
    pub value: f64,
    pub argmax: MobiusParam,
    pub optimizer_trace: Vec<TracePoint>,
    /// Image area at a = 0.
    pub base_area: f64,
    /// False when the budget ran out or the optimum pressed the cap.
    pub certified: bool,
    pub mesh_vertices: usize,
}

impl ConformalVolumeEstimate {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("start,iteration,a_norm,area\n");
        for t in &self.optimizer_trace {
            s.push_str(&format!("{},{},{},{}\n", t.start, t.iteration, t.a_norm, t.area));
        }
        s
    }
}

/// Area of the image mesh under gamma_a for a vertexwise map to S^n.
pub fn pushed_area(mesh: &SurfaceMesh, map: &[f64], dim: usize, p: &MobiusParam) -> f64 {
    let image = mobius_apply_cloud(p, map, dim);
    mesh.triangles
        .iter()
        .map(|&[a, b, c]| {
            geom::triangle_area(
                &image[a * dim..(a + 1) * dim],
                &image[b * dim..(b + 1) * dim],
                &image[c * dim..(c + 1) * dim],
            )
        })
        .sum()
}

/// Multi-start derivative-free maximization of the pushed-forward image area
/// over the Mobius family; the supremum restricted to gamma_a is the
/// conformal volume of the map up to volume-preserving rotations.
pub fn conformal_volume_sup(
    mesh: &SurfaceMesh,
    map: &[f64],
    dim: usize,
    opts: &OptimizerConfig,
) -> Result<ConformalVolumeEstimate> {
    if !mesh.is_closed() {
        return Err(Error::Domain("conformal volume expects a closed mesh".into()));
    }
    if map.len() != mesh.num_vertices() * dim {
        return Err(Error::Shape("map length mismatch".into()));
    }
    for chunk in map.chunks(dim) {
        let r = geom::norm(chunk);
        if (r - 1.0).abs() > 1e-8 {
            return Err(Error::Geometry(format!(
                "map vertex off the sphere by {:.3e}",
                (r - 1.0).abs()
            )));
        }
    }
    let cap = 1.0 - opts.edge_margin;
    let clamp_ball = |a: &[f64]| -> Vec<f64> {
        let n = geom::norm(a);
        if n > cap {
            geom::scale(a, cap / n)
        } else {
            a.to_vec()
        }
    };

    let base_area = pushed_area(mesh, map, dim, &MobiusParam::origin(dim));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; dim]];
    while starts.len() < opts.starts.max(8) {
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = geom::norm(&dir).max(1e-12);
        starts.push(geom::scale(&dir, 0.5 / n));
    }

    let mut best_a = vec![0.0; dim];
    let mut best_area = base_area;
    let mut trace = Vec::new();
    let mut all_converged = true;
    for (si, start) in starts.iter().enumerate() {
        let r = nelder_mead(
            |x| {
                let c = clamp_ball(x);
                let penalty = 1e3 * geom::dist(x, &c).powi(2);
                let p = MobiusParam::new(c).expect("clamped inside ball");
                -(pushed_area(mesh, map, dim, &p)) + penalty
            },
            start,
            &NelderMeadOptions {
                max_evals: opts.max_evals_per_start,
                xtol: 1e-7,
                ftol: 1e-12,
                initial_step: 0.08,
            },
        );
        all_converged &= r.converged;
        for (it, fx) in r.history.iter().enumerate() {
            trace.push(TracePoint {
                start: si,
                iteration: it,
                a_norm: f64::NAN,
                area: -fx,
            });
        }
        let a = clamp_ball(&r.x);
        let p = MobiusParam::new(a.clone())?;
        let area = pushed_area(mesh, map, dim, &p);
        if let Some(last) = trace.last_mut() {
            last.a_norm = geom::norm(&a);
            last.area = area;
        }
        if area > best_area {
            best_area = area;
            best_a = a;
        }
    }

    let interior = geom::norm(&best_a) < cap - 1e-3;
    Ok(ConformalVolumeEstimate {
        value: best_area,
        argmax: MobiusParam::new(best_a)?,
        optimizer_trace: trace,
        base_area,
        certified: all_converged && interior,
        mesh_vertices: mesh.num_vertices(),
    })
}

/// Ambient model for the conformal-factor identity: fixes the space-form
/// curvature and the closed form of the ambient gradient of rho.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalAmbient {
    /// Flat ambient, rho extended with zero normal derivative (c = 0).
    FlatTangential,
    /// Flat ambient with rho = ln(2 / (1 + |x|^2)), the inverse-stereographic
    /// factor (c = 0).
    FlatStereographic,
    /// Unit-sphere ambient (c = 1); supported for constant rho.
    UnitSphere,
    /// Poincare ball (c = -1) with rho = ln((1 - |x|^2) / (1 + |x|^2)).
    PoincareBall,
}

impl ConformalAmbient {
    pub fn curvature(&self) -> f64 {
        match self {
            ConformalAmbient::FlatTangential | ConformalAmbient::FlatStereographic => 0.0,
            ConformalAmbient::UnitSphere => 1.0,
            ConformalAmbient::PoincareBall => -1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalFactorResidual {
    pub per_vertex: Vec<f64>,
    /// Mass-weighted root-mean-square of the residual.
    pub l2_norm: f64,
    /// Mass-weighted mean of e^{2 rho}, for normalization.
    pub mean_density: f64,
}

/// Pointwise defect of the conformal-factor identity
/// e^{2 rho} = (|H|^2 + c) - (2/m) Lap rho - |(grad_bar rho)^perp - H|^2
/// (the (m-2)/m gradient term vanishes for surfaces). All geometric
/// quantities are taken in the ambient named by `ambient`.
pub fn conformal_factor_residual(
    mesh: &SurfaceMesh,
    rho: &[f64],
    ambient: ConformalAmbient,
) -> Result<ConformalFactorResidual> {
    let n = mesh.num_vertices();
    if rho.len() != n {
        return Err(Error::Shape("rho length mismatch".into()));
    }
    let d = mesh.ambient_dim;

    match ambient {
        ConformalAmbient::FlatTangential | ConformalAmbient::FlatStereographic => {
            let curv = extrinsic::mean_curvature_field(mesh)?;
            let (k, mass) = {
                let mut flat = mesh.clone();
                flat.density = None;
                flat.density_model = None;
                let fem = assemble_fem(&flat)?;
                let m = match fem.mass {
                    Mass::Lumped(m) => m,
                    _ => unreachable!(),
                };
                (fem.stiffness, m)
            };
            let krho = k.apply(rho);
            let normals = curv.unit_normal.clone();
            let mut per_vertex = vec![0.0; n];
            for v in 0..n {
                let h = &curv.mean_curvature[v * d..(v + 1) * d];
                let lap = -krho[v] / mass[v];
                let grad_perp: Vec<f64> = match ambient {
                    ConformalAmbient::FlatStereographic => {
                        let x = mesh.vertex(v);
                        let g = geom::scale(x, -2.0 / (1.0 + geom::dot(x, x)));
                        match &normals {
                            Some(nu) => {
                                let nv = &nu[v * 3..v * 3 + 3];
                                geom::scale(nv, geom::dot(&g, nv))
                            }
                            None => g,
                        }
                    }
                    _ => vec![0.0; d],
                };
                let diff = geom::sub(&grad_perp, h);
                per_vertex[v] = (2.0 * rho[v]).exp()
                    - (geom::dot(h, h) - lap - geom::dot(&diff, &diff));
            }
            Ok(summarize_residual(per_vertex, &mass, rho))
        }
        ConformalAmbient::UnitSphere => {
            let c0 = rho[0];
            if rho.iter().any(|&r| (r - c0).abs() > 1e-12) {
                return Err(Error::Domain(
                    "sphere-ambient residual supports constant rho only".into(),
                ));
            }
            for v in 0..n {
                let r = geom::norm(mesh.vertex(v));
                if (r - 1.0).abs() > 1e-8 {
                    return Err(Error::Geometry(format!(
                        "vertex {v} off the unit sphere for the c = 1 ambient"
                    )));
                }
            }
            let curv = extrinsic::mean_curvature_field(mesh)?;
            let mass = curv.vertex_mass.clone();
            let mut per_vertex = vec![0.0; n];
            for v in 0..n {
                let x = mesh.vertex(v);
                let h_euc = &curv.mean_curvature[v * d..(v + 1) * d];
                let h_sph: Vec<f64> = h_euc.iter().zip(x).map(|(h, xc)| h + xc).collect();
                let hh = geom::dot(&h_sph, &h_sph);
                // Constant rho: Lap rho = 0 and (grad rho)^perp = 0, so
                // |H|^2 - |(grad rho)^perp - H|^2 cancels term by term.
                per_vertex[v] = (2.0 * rho[v]).exp() - 1.0 - (hh - hh);
            }
            Ok(summarize_residual(per_vertex, &mass, rho))
        }
        ConformalAmbient::PoincareBall => {
            if mesh.density.is_none() {
                return Err(Error::MissingDensity);
            }
            let hyp = extrinsic::hyperbolic_convert(mesh)?;
            let scalars = hyp.h_scalars.as_ref().unwrap();
            let normals = hyp.unit_normal.as_ref().unwrap();
            let fem = assemble_fem(mesh)?;
            let hyp_mass = match fem.mass {
                Mass::Lumped(m) => m,
                _ => unreachable!(),
            };
            let krho = fem.stiffness.apply(rho);
            let mut per_vertex = vec![0.0; n];
            for v in 0..n {
                let x = mesh.vertex(v);
                let r2 = geom::dot(x, x);
                let w = 2.0 / (1.0 - r2); // e^{metric factor}
                let lap_hyp = -krho[v] / hyp_mass[v];
                // Hyperbolic ambient gradient of rho, in ball coordinates.
                let grad_euc = geom::scale(x, -4.0 / (1.0 - r2 * r2));
                let grad_hyp = geom::scale(&grad_euc, 1.0 / (w * w));
                let nv = &normals[v * 3..v * 3 + 3];
                let grad_perp = geom::scale(nv, geom::dot(&grad_hyp, nv));
                // Hyperbolic mean-curvature vector in ball coordinates.
                let h = &hyp.mean_curvature[v * 3..v * 3 + 3];
                let diff = geom::sub(&grad_perp, h);
                let diff_hyp2 = w * w * geom::dot(&diff, &diff);
                let h1 = scalars[v][1];
                per_vertex[v] = (2.0 * rho[v]).exp() - ((h1 * h1 - 1.0) - lap_hyp - diff_hyp2);
            }
            Ok(summarize_residual(per_vertex, &hyp_mass, rho))
        }
    }
}

fn summarize_residual(per_vertex: Vec<f64>, mass: &[f64], rho: &[f64]) -> ConformalFactorResidual {
    let total: f64 = mass.iter().sum();
    let l2 = (per_vertex
        .iter()
        .zip(mass)
        .map(|(r, m)| m * r * r)
        .sum::<f64>()
        / total)
        .sqrt();
    let mean_density = rho
        .iter()
        .zip(mass)
        .map(|(r, m)| m * (2.0 * r).exp())
        .sum::<f64>()
        / total;
    ConformalFactorResidual {
        per_vertex,
        l2_norm: l2,
        mean_density,
    }
}
