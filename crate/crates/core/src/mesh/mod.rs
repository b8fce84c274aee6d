//! Triangulated model surfaces immersed in R^2..R^4, with optional conformal
//! density decorations.

mod builders;

pub use builders::build_surface;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;

/// Construction recipe for a model surface. Lengths are unitless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    Icosphere { radius: f64, subdiv: u32 },
    Ellipsoid { a: f64, b: f64, c: f64, subdiv: u32 },
    TorusRev { major: f64, minor: f64, nu: u32, nv: u32 },
    CliffordTorus { n_grid: u32 },
    Disk { rings: u32 },
    Ellipse { a: f64, b: f64, rings: u32 },
    Annulus { inner_radius: f64, rings: u32 },
    PoincareSphere { hyp_radius: f64, subdiv: u32 },
    MobiusPullbackSphere { a_param: f64, subdiv: u32 },
}

/// Closed-form per-vertex density e^{2 rho}, re-evaluable after refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DensityModel {
    /// Poincare ball factor (2 / (1 - |x|^2))^2.
    PoincareBall,
    /// Pullback factor of the sphere Mobius map centered at `a`:
    /// (1 - |a|^2) / (1 + <x, a>)^2.
    MobiusPullback { a: Vec<f64> },
    /// rho = amplitude * z on the unit sphere.
    CosPolar { amplitude: f64 },
    /// rho = amplitude * combination of low-order harmonics, seeded.
    RandomHarmonics { seed: u64, amplitude: f64 },
}

impl DensityModel {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            DensityModel::PoincareBall => {
                let r2 = geom::dot(x, x);
                let f = 2.0 / (1.0 - r2);
                f * f
            }
            DensityModel::MobiusPullback { a } => {
                let aa = geom::dot(a, a);
                let f = geom::dot(x, a);
                (1.0 - aa) / ((1.0 + f) * (1.0 + f))
            }
            DensityModel::CosPolar { amplitude } => (2.0 * amplitude * x[2]).exp(),
            DensityModel::RandomHarmonics { seed, amplitude } => {
                let c = harmonic_coefficients(*seed);
                let (x0, x1, x2) = (x[0], x[1], x[2]);
                let basis = [
                    x0,
                    x1,
                    x2,
                    x0 * x1,
                    x1 * x2,
                    x2 * x0,
                    x0 * x0 - x1 * x1,
                    3.0 * x2 * x2 - 1.0,
                ];
                let rho: f64 =
                    amplitude * c.iter().zip(basis).map(|(ci, bi)| ci * bi).sum::<f64>() / 3.0;
                (2.0 * rho).exp()
            }
        }
    }
}

fn harmonic_coefficients(seed: u64) -> [f64; 8] {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c = [0.0; 8];
    for ci in c.iter_mut() {
        *ci = rng.gen_range(-1.0..1.0);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyInfo {
    pub euler_char: i64,
    pub genus: u32,
    pub boundary_components: u32,
}

/// Indexed triangle mesh immersed in R^n, n in {2, 3, 4}.
///
/// Triangles are counterclockwise with respect to the outward orientation.
/// `density`, when present, stores the conformal factor e^{2 rho} of the
/// carried metric relative to the induced flat metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub ambient_dim: usize,
    /// Flat coordinate buffer, stride = ambient_dim.
    pub coords: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
    /// Ordered vertex cycles following the induced boundary orientation.
    pub boundary_loops: Vec<Vec<usize>>,
    pub density: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<SurfaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_model: Option<DensityModel>,
}

const MESH_FORMAT: &str = "hmbounds-mesh";
const MESH_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MeshDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    mesh: SurfaceMesh,
}

impl SurfaceMesh {
    pub fn new(
        ambient_dim: usize,
        coords: Vec<f64>,
        triangles: Vec<[usize; 3]>,
        density: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut mesh = SurfaceMesh {
            ambient_dim,
            coords,
            triangles,
            boundary_loops: Vec::new(),
            density,
            provenance: None,
            density_model: None,
        };
        mesh.boundary_loops = mesh.scan_boundary_loops()?;
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn vertex_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.ambient_dim;
        &mut self.coords[i * d..(i + 1) * d]
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }

    pub fn density_at(&self, i: usize) -> f64 {
        self.density.as_ref().map_or(1.0, |d| d[i])
    }

    /// Sorted indices of vertices on any boundary loop.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_loops.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        geom::triangle_area(self.vertex(i), self.vertex(j), self.vertex(k))
    }

    /// Undirected edge list with incidence counts.
    fn edge_census(&self) -> HashMap<(usize, usize), u32> {
        let mut edges = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                let key = (u.min(v), u.max(v));
                *edges.entry(key).or_insert(0u32) += 1;
            }
        }
        edges
    }

    pub fn num_edges(&self) -> usize {
        self.edge_census().len()
    }

    /// Maximum Euclidean edge length.
    pub fn max_edge_len(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                h = h.max(geom::dist(self.vertex(u), self.vertex(v)));
            }
        }
        h
    }

    /// Maximum metric edge length (Euclidean length scaled by the density).
    pub fn metric_max_edge_len(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                let w = 0.5 * (self.density_at(u).sqrt() + self.density_at(v).sqrt());
                h = h.max(w * geom::dist(self.vertex(u), self.vertex(v)));
            }
        }
        h
    }

    /// Directed boundary edges chained into cycles following the orientation
    /// induced by the triangles.
    fn scan_boundary_loops(&self) -> Result<Vec<Vec<usize>>> {
        let census = self.edge_census();
        let mut next: HashMap<usize, usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                let key = (u.min(v), u.max(v));
                if census[&key] == 1 {
                    if next.insert(u, v).is_some() {
                        return Err(Error::NonManifold(format!(
                            "vertex {u} has multiple outgoing boundary edges"
                        )));
                    }
                }
            }
        }
        let mut loops = Vec::new();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited = std::collections::HashSet::new();
        for start in starts {
            if visited.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            visited.insert(start);
            let mut cur = next[&start];
            while cur != start {
                if visited.contains(&cur) {
                    return Err(Error::NonManifold(
                        "boundary edges do not close into disjoint cycles".into(),
                    ));
                }
                visited.insert(cur);
                cycle.push(cur);
                cur = *next
                    .get(&cur)
                    .ok_or_else(|| Error::NonManifold("open boundary chain".into()))?;
            }
            loops.push(cycle);
        }
        Ok(loops)
    }

    /// Check every structural invariant. Errors are fatal for downstream use.
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.ambient_dim) {
            return Err(Error::InvalidParameter(format!(
                "ambient dimension {} not in 2..=4",
                self.ambient_dim
            )));
        }
        if self.coords.len() % self.ambient_dim != 0 {
            return Err(Error::Construction("coordinate buffer stride mismatch".into()));
        }
        let nv = self.num_vertices();
        let mut referenced = vec![false; nv];
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Construction(format!("triangle {t} repeats a vertex")));
            }
            for &v in tri {
                if v >= nv {
                    return Err(Error::Construction(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
                referenced[v] = true;
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }
        if let Some(i) = referenced.iter().position(|&r| !r) {
            return Err(Error::NonManifold(format!("vertex {i} is isolated")));
        }

        // Orientation consistency: every directed edge at most once, every
        // undirected edge shared by one or two triangles.
        let mut directed = std::collections::HashSet::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                if !directed.insert((u, v)) {
                    return Err(Error::NonManifold(format!(
                        "directed edge ({u},{v}) appears twice; orientation is inconsistent"
                    )));
                }
            }
        }
        for (&(u, v), &count) in &self.edge_census() {
            if count > 2 {
                return Err(Error::NonManifold(format!(
                    "edge ({u},{v}) shared by {count} triangles"
                )));
            }
        }

        let loops = self.scan_boundary_loops()?;
        if canonical_loops(&loops) != canonical_loops(&self.boundary_loops) {
            return Err(Error::Construction(
                "stored boundary loops disagree with the edge scan".into(),
            ));
        }

        if let Some(d) = &self.density {
            if d.len() != nv {
                return Err(Error::Construction("density length mismatch".into()));
            }
            if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Construction(format!(
                    "density at vertex {i} is not strictly positive"
                )));
            }
        }
        Ok(())
    }

    /// Euler characteristic, genus, and boundary component count.
    pub fn topology(&self) -> Result<TopologyInfo> {
        self.validate()?;
        let v = self.num_vertices() as i64;
        let e = self.num_edges() as i64;
        let f = self.num_triangles() as i64;
        let chi = v - e + f;
        let k = self.boundary_loops.len() as i64;
        let two_genus = 2 - chi - k;
        if two_genus < 0 || two_genus % 2 != 0 {
            return Err(Error::NonManifold(format!(
                "Euler characteristic {chi} with {k} boundary loops is not an orientable surface"
            )));
        }
        Ok(TopologyInfo {
            euler_char: chi,
            genus: (two_genus / 2) as u32,
            boundary_components: k as u32,
        })
    }

    /// Metric area, metric boundary length, and density-area-weighted centroid.
    pub fn measure(&self) -> (f64, f64, Vec<f64>) {
        let d = self.ambient_dim;
        let mut area = 0.0;
        let mut centroid = vec![0.0; d];
        for tri in &self.triangles {
            let [i, j, k] = *tri;
            let a = geom::triangle_area(self.vertex(i), self.vertex(j), self.vertex(k));
            let w = (self.density_at(i) + self.density_at(j) + self.density_at(k)) / 3.0;
            area += a * w;
            // Lumped: a third of the metric triangle area per corner.
            for &v in tri {
                let mv = a * (2.0 * self.density_at(v)
                    + self.density_at(tri[0]) + self.density_at(tri[1]) + self.density_at(tri[2])
                    - self.density_at(v))
                    / 12.0;
                geom::axpy(&mut centroid, mv, self.vertex(v));
            }
        }
        let mut blen = 0.0;
        for lp in &self.boundary_loops {
            for w in 0..lp.len() {
                let (u, v) = (lp[w], lp[(w + 1) % lp.len()]);
                let l = geom::dist(self.vertex(u), self.vertex(v));
                blen += l * 0.5 * (self.density_at(u).sqrt() + self.density_at(v).sqrt());
            }
        }
        for c in centroid.iter_mut() {
            *c /= area;
        }
        (area, blen, centroid)
    }

    /// Split every triangle 4-to-1 at edge midpoints, reprojecting new
    /// vertices onto the analytic locus when the provenance spec is retained
    /// and re-evaluating closed-form densities.
    pub fn refine(&self) -> SurfaceMesh {
        let d = self.ambient_dim;
        let mut coords = self.coords.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);

        let boundary_edges: std::collections::HashSet<(usize, usize)> = self
            .boundary_loops
            .iter()
            .flat_map(|lp| {
                (0..lp.len()).map(move |i| {
                    let (u, v) = (lp[i], lp[(i + 1) % lp.len()]);
                    (u.min(v), u.max(v))
                })
            })
            .collect();

        let mut new_vertex_is_boundary = Vec::new();
        {
            let mut mid = |u: usize, v: usize, coords: &mut Vec<f64>| -> usize {
                let key = (u.min(v), u.max(v));
                if let Some(&m) = midpoint.get(&key) {
                    return m;
                }
                let p: Vec<f64> = (0..d)
                    .map(|c| 0.5 * (coords[u * d + c] + coords[v * d + c]))
                    .collect();
                let idx = coords.len() / d;
                coords.extend_from_slice(&p);
                midpoint.insert(key, idx);
                new_vertex_is_boundary.push(boundary_edges.contains(&key));
                idx
            };
            for tri in &self.triangles {
                let [a, b, c] = *tri;
                let mab = mid(a, b, &mut coords);
                let mbc = mid(b, c, &mut coords);
                let mca = mid(c, a, &mut coords);
                triangles.push([a, mab, mca]);
                triangles.push([b, mbc, mab]);
                triangles.push([c, mca, mbc]);
                triangles.push([mab, mbc, mca]);
            }
        }

        if let Some(spec) = &self.provenance {
            let n_old = self.num_vertices();
            for i in n_old..coords.len() / d {
                let on_boundary = new_vertex_is_boundary[i - n_old];
                let p = coords[i * d..(i + 1) * d].to_vec();
                let q = builders::reproject(spec, &p, on_boundary);
                coords[i * d..(i + 1) * d].copy_from_slice(&q);
            }
        }

        let density = match (&self.density_model, &self.density) {
            (Some(model), _) => Some(
                (0..coords.len() / d)
                    .map(|i| model.evaluate(&coords[i * d..(i + 1) * d]))
                    .collect(),
            ),
            (None, Some(dv)) => {
                let mut nd = dv.clone();
                nd.resize(coords.len() / d, 0.0);
                for ((u, v), &m) in &midpoint {
                    nd[m] = 0.5 * (dv[*u] + dv[*v]);
                }
                Some(nd)
            }
            (None, None) => None,
        };

        let mut mesh = SurfaceMesh {
            ambient_dim: d,
            coords,
            triangles,
            boundary_loops: Vec::new(),
            density,
            provenance: self.provenance.clone(),
            density_model: self.density_model.clone(),
        };
        mesh.boundary_loops = mesh.scan_boundary_loops().expect("refinement preserves manifoldness");
        mesh
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = MeshDocument {
            format: MESH_FORMAT.to_string(),
            version: MESH_VERSION,
            mesh: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<SurfaceMesh> {
        let doc: MeshDocument = serde_json::from_str(text)?;
        if doc.format != MESH_FORMAT {
            return Err(Error::InvalidParameter(format!(
                "unexpected document format {:?}",
                doc.format
            )));
        }
        if doc.version != MESH_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported mesh document version {}",
                doc.version
            )));
        }
        doc.mesh.validate()?;
        Ok(doc.mesh)
    }
}

fn canonical_loops(loops: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = loops
        .iter()
        .map(|lp| {
            let k = lp
                .iter()
                .enumerate()
                .min_by_key(|&(_, v)| v)
                .map(|(i, _)| i)
                .unwrap_or(0);
            let mut rotated = lp[k..].to_vec();
            rotated.extend_from_slice(&lp[..k]);
            rotated
        })
        .collect();
    out.sort();
    out
}
