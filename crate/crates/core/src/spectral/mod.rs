//! First-order FEM assembly and generalized eigensolves for the Neumann and
//! Steklov problems.

mod chain;

pub use chain::{map_distortion as map_distortion_stats, variational_chain_report, ChainMode, ChainReport};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::SurfaceMesh;
use crate::sparse::{CsrMatrix, EnvelopeCholesky, TripletBuilder};

/// Mass matrix, lumped (diagonal) by default or consistent per config.
#[derive(Debug, Clone)]
pub enum Mass {
    Lumped(Vec<f64>),
    Consistent(CsrMatrix),
}

impl Mass {
    pub fn n(&self) -> usize {
        match self {
            Mass::Lumped(d) => d.len(),
            Mass::Consistent(m) => m.n,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Mass::Lumped(d) => d.iter().zip(x).map(|(m, v)| m * v).collect(),
            Mass::Consistent(m) => m.apply(x),
        }
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Mass::Lumped(d) => d.iter().zip(x).zip(y).map(|((m, a), b)| m * a * b).sum(),
            Mass::Consistent(m) => m.quadratic_form(x, y),
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Mass::Lumped(d) => d.iter().sum(),
            Mass::Consistent(m) => m.vals.iter().sum(),
        }
    }

    pub fn max_diag(&self) -> f64 {
        match self {
            Mass::Lumped(d) => d.iter().cloned().fold(0.0, f64::max),
            Mass::Consistent(m) => m.diag().iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            Mass::Lumped(d) => {
                let mut b = TripletBuilder::new(d.len());
                for (i, &v) in d.iter().enumerate() {
                    b.add(i, i, v);
                }
                b.build()
            }
            Mass::Consistent(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FemConfig {
    pub consistent_mass: bool,
}

/// Galerkin matrices of a surface mesh.
///
/// The stiffness matrix uses cotangent weights and, in two dimensions, is
/// independent of the density (conformal invariance of the Dirichlet
/// energy); the density enters the mass matrices only.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub stiffness: CsrMatrix,
    pub mass: Mass,
    /// Lumped boundary mass; zero away from the boundary.
    pub boundary_mass: Vec<f64>,
    /// Sorted boundary vertex indices.
    pub boundary: Vec<usize>,
    /// Sorted interior vertex indices.
    pub interior: Vec<usize>,
}

pub fn assemble_fem(mesh: &SurfaceMesh) -> Result<FemMatrices> {
    assemble_fem_with(mesh, FemConfig::default())
}

pub fn assemble_fem_with(mesh: &SurfaceMesh, config: FemConfig) -> Result<FemMatrices> {
    let n = mesh.num_vertices();
    let mut k = TripletBuilder::new(n);
    let mut lumped = vec![0.0; n];
    let mut consistent = if config.consistent_mass {
        Some(TripletBuilder::new(n))
    } else {
        None
    };

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
        let area = geom::triangle_area(pa, pb, pc);
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::Assembly(format!(
                "triangle {t} has degenerate area {area:.3e}"
            )));
        }
        // Cotangent weights: w_ij = cot(angle opposite edge ij) / 2.
        let cot_a = geom::cotangent(pa, pb, pc);
        let cot_b = geom::cotangent(pb, pc, pa);
        let cot_c = geom::cotangent(pc, pa, pb);
        for &(i, j, w) in &[(b, c, cot_a), (c, a, cot_b), (a, b, cot_c)] {
            let w = 0.5 * w;
            k.add(i, j, -w);
            k.add(j, i, -w);
            k.add(i, i, w);
            k.add(j, j, w);
        }

        let d = [mesh.density_at(a), mesh.density_at(b), mesh.density_at(c)];
        let dsum = d[0] + d[1] + d[2];
        for (slot, &v) in tri.iter().enumerate() {
            lumped[v] += area * (d[slot] + dsum) / 12.0;
        }
        if let Some(cb) = consistent.as_mut() {
            for (si, &vi) in tri.iter().enumerate() {
                for (sj, &vj) in tri.iter().enumerate() {
                    // integral of phi_i phi_j times linear density
                    let mut val = 0.0;
                    for (sm, dm) in d.iter().enumerate() {
                        let coef = if si == sj && sj == sm {
                            1.0 / 10.0
                        } else if si == sj || si == sm || sj == sm {
                            1.0 / 30.0
                        } else {
                            1.0 / 60.0
                        };
                        val += dm * coef;
                    }
                    cb.add(vi, vj, area * val);
                }
            }
        }
    }

    let mut boundary_mass = vec![0.0; n];
    for lp in &mesh.boundary_loops {
        for i in 0..lp.len() {
            let (u, v) = (lp[i], lp[(i + 1) % lp.len()]);
            let len = geom::dist(mesh.vertex(u), mesh.vertex(v));
            let (su, sv) = (mesh.density_at(u).sqrt(), mesh.density_at(v).sqrt());
            boundary_mass[u] += len * (2.0 * su + sv) / 6.0;
            boundary_mass[v] += len * (su + 2.0 * sv) / 6.0;
        }
    }

    let boundary = mesh.boundary_vertices();
    let mut is_boundary = vec![false; n];
    for &v in &boundary {
        is_boundary[v] = true;
    }
    let interior = (0..n).filter(|&v| !is_boundary[v]).collect();

    Ok(FemMatrices {
        stiffness: k.build(),
        mass: match consistent {
            Some(cb) => Mass::Consistent(cb.build()),
            None => Mass::Lumped(lumped),
        },
        boundary_mass,
        boundary,
        interior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Neumann,
    Steklov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverMeta {
    pub kind: SpectrumKind,
    pub iterations: usize,
    pub shift: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub dimension: usize,
}

/// Ascending eigenvalues with orthonormal eigenvectors and residual
/// certificates. Eigenvectors are full-length; Steklov vectors carry their
/// discrete harmonic extension on interior vertices.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub meta: SolverMeta,
}

impl Spectrum {
    /// i-th nonzero eigenvalue, 1-based (skips the ~0 leading eigenvalue).
    pub fn nonzero(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn nonzero_count(&self) -> usize {
        self.eigenvalues.len().saturating_sub(1)
    }

    /// Harmonic mean of the first `j` nonzero eigenvalues.
    pub fn harmonic_mean_first(&self, j: usize) -> Result<f64> {
        harmonic_mean(&self.eigenvalues[1..=j.min(self.nonzero_count())])
    }

    /// Eigenvalues within `rel` relative distance are one cluster.
    pub fn clusters(&self, rel: f64) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &ev) in self.eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some(cluster) => {
                    let head = self.eigenvalues[cluster[0]];
                    let scale = head.abs().max(ev.abs()).max(1e-300);
                    if (ev - head).abs() / scale <= rel {
                        cluster.push(i);
                    } else {
                        out.push(vec![i]);
                    }
                }
                None => out.push(vec![i]),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format: &'static str,
            version: u32,
            eigenvalues: &'a [f64],
            residual_norms: &'a [f64],
            meta: &'a SolverMeta,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            format: "hmbounds-spectrum",
            version: 1,
            eigenvalues: &self.eigenvalues,
            residual_norms: &self.residual_norms,
            meta: &self.meta,
        })?)
    }

    /// Dense eigenvector dump: magic bytes, little-endian u64 pair count and
    /// vector length, then row-major little-endian f64 vectors.
    pub fn write_vectors_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"HMBVEC01")?;
        w.write_all(&(self.eigenvectors.len() as u64).to_le_bytes())?;
        let len = self.eigenvectors.first().map_or(0, |v| v.len()) as u64;
        w.write_all(&len.to_le_bytes())?;
        for v in &self.eigenvectors {
            for &x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Harmonic mean of positive numbers: k / sum(1/a_i).
pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("harmonic mean of an empty list".into()));
    }
    if let Some(&bad) = values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "harmonic mean requires positive entries, got {bad}"
        )));
    }
    let inv_sum: f64 = values.iter().map(|v| 1.0 / v).sum();
    Ok(values.len() as f64 / inv_sum)
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 400,
            seed: 0x5eed,
        }
    }
}

/// First `count`+1 eigenpairs of the pencil (stiffness, mass); the Neumann
/// condition is natural, so no rows are eliminated.
pub fn neumann_spectrum(fem: &FemMatrices, count: usize) -> Result<Spectrum> {
    neumann_spectrum_with(fem, count, EigenOptions::default())
}

pub fn neumann_spectrum_with(
    fem: &FemMatrices,
    count: usize,
    opts: EigenOptions,
) -> Result<Spectrum> {
    if count < 1 {
        return Err(Error::InvalidParameter("eigenpair count must be >= 1".into()));
    }
    let k = &fem.stiffness;
    let n = k.n;
    let pairs = count + 1;
    if pairs + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "requested {pairs} pairs from a mesh with {n} vertices"
        )));
    }
    let p = (pairs + (pairs / 2).max(4)).min(n);

    let kdiag_sum: f64 = k.diag().iter().sum();
    let mass_total = fem.mass.total();
    let scale = kdiag_sum / mass_total;
    let shift = 1e-3 * scale;

    let shifted = k.add_scaled(&fem.mass.to_csr(), shift);
    let factor = EnvelopeCholesky::factor(&shifted)
        .map_err(|e| Error::Assembly(format!("shifted stiffness factorization failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(p);
    x.push(vec![1.0; n]);
    for _ in 1..p {
        x.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }

    let kmax = k.diag().iter().cloned().fold(0.0, f64::max);
    let mmax = fem.mass.max_diag();

    let mut best_residuals = vec![f64::INFINITY; pairs];
    let mut theta = vec![0.0; p];
    for iter in 1..=opts.max_iterations {
        // Y = (K + shift M)^{-1} M X
        let y: Vec<Vec<f64>> = x.iter().map(|xi| factor.solve(&fem.mass.apply(xi))).collect();

        // Rayleigh-Ritz on span(Y).
        let gk = DMatrix::from_fn(p, p, |i, j| k.quadratic_form(&y[i], &y[j]));
        let gm = DMatrix::from_fn(p, p, |i, j| fem.mass.quadratic_form(&y[i], &y[j]));
        let chol = nalgebra::Cholesky::new(gm.clone()).ok_or_else(|| Error::IterationLimit {
            iterations: iter,
            worst_residual: f64::INFINITY,
            best_residuals: best_residuals.clone(),
        })?;
        let l_inv = chol.l().try_inverse().expect("triangular inverse");
        let reduced = &l_inv * &gk * l_inv.transpose();
        let sym = (&reduced + reduced.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        let mut new_x: Vec<Vec<f64>> = Vec::with_capacity(p);
        for (slot, &col) in order.iter().enumerate() {
            theta[slot] = eig.eigenvalues[col];
            let w = l_inv.transpose() * eig.eigenvectors.column(col);
            let mut xi = vec![0.0; n];
            for (c, wc) in w.iter().enumerate() {
                geom::axpy(&mut xi, *wc, &y[c]);
            }
            new_x.push(xi);
        }
        x = new_x;

        let mut all_ok = true;
        for j in 0..pairs {
            let r = pair_residual(k, &fem.mass, &x[j], theta[j]);
            best_residuals[j] = best_residuals[j].min(r);
            if r > opts.tolerance * (kmax + theta[j].abs() * mmax) {
                all_ok = false;
            }
        }
        if all_ok {
            let mut eigenvalues = Vec::with_capacity(pairs);
            let mut eigenvectors = Vec::with_capacity(pairs);
            let mut residual_norms = Vec::with_capacity(pairs);
            for j in 0..pairs {
                let norm_m = fem.mass.quadratic_form(&x[j], &x[j]).sqrt();
                let v: Vec<f64> = x[j].iter().map(|a| a / norm_m).collect();
                residual_norms.push(pair_residual(k, &fem.mass, &v, theta[j]));
                eigenvalues.push(theta[j]);
                eigenvectors.push(v);
            }
            return Ok(Spectrum {
                kind: SpectrumKind::Neumann,
                eigenvalues,
                eigenvectors,
                residual_norms,
                meta: SolverMeta {
                    kind: SpectrumKind::Neumann,
                    iterations: iter,
                    shift,
                    seed: opts.seed,
                    tolerance: opts.tolerance,
                    dimension: n,
                },
            });
        }
    }

    Err(Error::IterationLimit {
        iterations: opts.max_iterations,
        worst_residual: best_residuals.iter().cloned().fold(0.0, f64::max),
        best_residuals,
    })
}

fn pair_residual(k: &CsrMatrix, mass: &Mass, v: &[f64], lambda: f64) -> f64 {
    let kv = k.apply(v);
    let mv = mass.apply(v);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..v.len() {
        let r = kv[i] - lambda * mv[i];
        num += r * r;
        den += v[i] * v[i];
    }
    (num / den).sqrt()
}

/// Dirichlet-to-Neumann system: the Schur complement on the boundary paired
/// with the lumped boundary mass.
pub struct DtnSystem {
    /// Dense symmetric Schur complement K_bb - K_bi K_ii^{-1} K_ib.
    pub matrix: DMatrix<f64>,
    /// Boundary vertex ids in matrix order.
    pub boundary: Vec<usize>,
    /// Boundary mass diagonal in matrix order.
    pub bmass: Vec<f64>,
    interior_factor: EnvelopeCholesky,
    interior: Vec<usize>,
}

impl DtnSystem {
    /// Discrete harmonic extension of boundary data to the full mesh.
    pub fn harmonic_extension(&self, k: &CsrMatrix, ub: &[f64]) -> Vec<f64> {
        let n = k.n;
        let mut pos = vec![usize::MAX; n];
        for (p, &v) in self.interior.iter().enumerate() {
            pos[v] = p;
        }
        let mut bpos = vec![usize::MAX; n];
        for (p, &v) in self.boundary.iter().enumerate() {
            bpos[v] = p;
        }
        let mut rhs = vec![0.0; self.interior.len()];
        for (p, &v) in self.interior.iter().enumerate() {
            let (cols, vals) = k.row(v);
            let mut acc = 0.0;
            for (&j, &kv) in cols.iter().zip(vals) {
                if bpos[j] != usize::MAX {
                    acc += kv * ub[bpos[j]];
                }
            }
            rhs[p] = -acc;
        }
        let xi = self.interior_factor.solve(&rhs);
        let mut full = vec![0.0; n];
        for (p, &v) in self.interior.iter().enumerate() {
            full[v] = xi[p];
        }
        for (p, &v) in self.boundary.iter().enumerate() {
            full[v] = ub[p];
        }
        full
    }

    /// Energy of the discrete harmonic extension of `ub`.
    pub fn energy(&self, ub: &DVector<f64>) -> f64 {
        (ub.transpose() * &self.matrix * ub)[(0, 0)]
    }
}

pub fn build_dtn(fem: &FemMatrices) -> Result<DtnSystem> {
    if fem.boundary.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let k = &fem.stiffness;
    let n = k.n;
    let nb = fem.boundary.len();

    let kii = k.submatrix(&fem.interior);
    let interior_factor = EnvelopeCholesky::factor(&kii)
        .map_err(|e| Error::Assembly(format!("singular interior block: {e}")))?;

    let mut ipos = vec![usize::MAX; n];
    for (p, &v) in fem.interior.iter().enumerate() {
        ipos[v] = p;
    }
    let mut bpos = vec![usize::MAX; n];
    for (p, &v) in fem.boundary.iter().enumerate() {
        bpos[v] = p;
    }

    let mut s = DMatrix::zeros(nb, nb);
    for (j, &bj) in fem.boundary.iter().enumerate() {
        // Column j of K_ib equals row j of K_bi by symmetry.
        let mut rhs = vec![0.0; fem.interior.len()];
        let (cols, vals) = k.row(bj);
        for (&c, &v) in cols.iter().zip(vals) {
            if ipos[c] != usize::MAX {
                rhs[ipos[c]] = v;
            }
        }
        let x = interior_factor.solve(&rhs);
        for (r, &br) in fem.boundary.iter().enumerate() {
            let (cols, vals) = k.row(br);
            let mut acc = 0.0;
            let mut kbb = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if ipos[c] != usize::MAX {
                    acc += v * x[ipos[c]];
                } else if c == bj {
                    kbb = v;
                }
            }
            s[(r, j)] = kbb - acc;
        }
    }
    // Enforce exact symmetry lost to roundoff.
    for r in 0..nb {
        for c in 0..r {
            let avg = 0.5 * (s[(r, c)] + s[(c, r)]);
            s[(r, c)] = avg;
            s[(c, r)] = avg;
        }
    }

    let bmass: Vec<f64> = fem.boundary.iter().map(|&v| fem.boundary_mass[v]).collect();
    Ok(DtnSystem {
        matrix: s,
        boundary: fem.boundary.clone(),
        bmass,
        interior_factor,
        interior: fem.interior.clone(),
    })
}

/// First `count`+1 Steklov eigenpairs via a dense eigensolve of the
/// Dirichlet-to-Neumann operator.
pub fn steklov_spectrum(fem: &FemMatrices, count: usize) -> Result<Spectrum> {
    if count < 1 {
        return Err(Error::InvalidParameter("eigenpair count must be >= 1".into()));
    }
    let dtn = build_dtn(fem)?;
    let nb = dtn.boundary.len();
    let pairs = count + 1;
    if pairs > nb {
        return Err(Error::InvalidParameter(format!(
            "requested {pairs} pairs from a boundary with {nb} vertices"
        )));
    }

    let dhalf_inv: Vec<f64> = dtn.bmass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let sym = DMatrix::from_fn(nb, nb, |i, j| dtn.matrix[(i, j)] * dhalf_inv[i] * dhalf_inv[j]);
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut eigenvalues = Vec::with_capacity(pairs);
    let mut eigenvectors = Vec::with_capacity(pairs);
    let mut residual_norms = Vec::with_capacity(pairs);
    for &col in order.iter().take(pairs) {
        let sigma = eig.eigenvalues[col];
        let w = eig.eigenvectors.column(col);
        // Back-substitute the diagonal congruence; result is B-orthonormal.
        let ub: Vec<f64> = (0..nb).map(|i| w[i] * dhalf_inv[i]).collect();
        let ubv = DVector::from_column_slice(&ub);
        let res = (&dtn.matrix * &ubv
            - DVector::from_iterator(nb, ub.iter().zip(&dtn.bmass).map(|(u, m)| sigma * m * u)))
        .norm()
            / ubv.norm();
        eigenvalues.push(sigma);
        residual_norms.push(res);
        eigenvectors.push(dtn.harmonic_extension(&fem.stiffness, &ub));
    }

    Ok(Spectrum {
        kind: SpectrumKind::Steklov,
        eigenvalues,
        eigenvectors,
        residual_norms,
        meta: SolverMeta {
            kind: SpectrumKind::Steklov,
            iterations: 1,
            shift: 0.0,
            seed: 0,
            tolerance: 0.0,
            dimension: nb,
        },
    })
}

/// Inner product carried by a spectrum: full mass for Neumann, boundary mass
/// for Steklov.
pub fn spectrum_inner(fem: &FemMatrices, kind: SpectrumKind, x: &[f64], y: &[f64]) -> f64 {
    match kind {
        SpectrumKind::Neumann => fem.mass.quadratic_form(x, y),
        SpectrumKind::Steklov => fem
            .boundary
            .iter()
            .map(|&v| fem.boundary_mass[v] * x[v] * y[v])
            .sum(),
    }
}

/// Mix `trials` by an orthogonal matrix so that member A is orthogonal to
/// eigenvectors u_B for all B < A, leaving the span (and any pointwise
/// quadratic identity among the trials) unchanged.
pub fn orthogonalize_against(
    trials: &[Vec<f64>],
    spectrum: &Spectrum,
    fem: &FemMatrices,
) -> Result<Vec<Vec<f64>>> {
    let nt = trials.len();
    if nt == 0 {
        return Ok(Vec::new());
    }
    let n = trials[0].len();
    if trials.iter().any(|t| t.len() != n) || spectrum.eigenvectors.iter().any(|u| u.len() != n) {
        return Err(Error::Shape("trial/eigenvector length mismatch".into()));
    }

    // Linear independence in the carried inner product.
    let gram = DMatrix::from_fn(nt, nt, |i, j| {
        spectrum_inner(fem, spectrum.kind, &trials[i], &trials[j])
    });
    let max_diag = (0..nt).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if let Err(index) = pivoted_rank_check(&gram, 1e-12 * max_diag) {
        return Err(Error::RankDeficient {
            index,
            detail: "trial family is linearly dependent in the mass inner product".into(),
        });
    }

    let avail = spectrum.nonzero_count().min(nt.saturating_sub(1));
    let mut d = DMatrix::zeros(nt, nt);
    for a in 0..nt {
        for b in 0..avail {
            d[(a, b)] = spectrum_inner(fem, spectrum.kind, &trials[a], &spectrum.eigenvectors[b + 1]);
        }
    }
    let qr = d.qr();
    let mut q = qr.q();
    let r = qr.r();
    for i in 0..nt {
        // Deterministic signs: positive R diagonal; null columns oriented by
        // their dominant entry, so already-triangular input passes through.
        let flip = if r[(i, i)] < 0.0 {
            true
        } else if r[(i, i)] == 0.0 {
            let lead = (0..nt).max_by(|&a, &b| {
                q[(a, i)].abs().partial_cmp(&q[(b, i)].abs()).unwrap()
            });
            lead.map(|row| q[(row, i)] < 0.0).unwrap_or(false)
        } else {
            false
        };
        if flip {
            for row in 0..nt {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }

    // New trial A = sum_B Q[B, A] * trial B  (rows mixed by Q^T).
    let mut out = Vec::with_capacity(nt);
    for a in 0..nt {
        let mut v = vec![0.0; n];
        for b in 0..nt {
            geom::axpy(&mut v, q[(b, a)], &trials[b]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Cholesky with pivot monitoring; returns the first failing pivot index.
fn pivoted_rank_check(gram: &DMatrix<f64>, tol: f64) -> std::result::Result<(), usize> {
    let n = gram.nrows();
    let mut a = gram.clone();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if d <= tol {
            return Err(j);
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_surface, SurfaceSpec};

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 2 }).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let worst = fem
            .stiffness
            .row_sums()
            .iter()
            .cloned()
            .fold(0.0f64, |m, s| m.max(s.abs()));
        assert!(worst < 1e-12, "row sum {worst}");
    }

    #[test]
    fn mass_totals_match_measure() {
        let mesh = build_surface(&SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 3 }).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let (area, _, _) = mesh.measure();
        assert!((fem.mass.total() - area).abs() < 1e-10 * area);

        let femc = assemble_fem_with(&mesh, FemConfig { consistent_mass: true }).unwrap();
        assert!((femc.mass.total() - area).abs() < 1e-10 * area);
    }

    #[test]
    fn density_only_scales_mass() {
        let mesh = build_surface(&SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 2 }).unwrap();
        let mut undensified = mesh.clone();
        undensified.density = None;
        undensified.density_model = None;
        let fem_a = assemble_fem(&mesh).unwrap();
        let fem_b = assemble_fem(&undensified).unwrap();
        assert_eq!(fem_a.stiffness.vals, fem_b.stiffness.vals);
    }

    #[test]
    fn harmonic_mean_basics() {
        assert_eq!(harmonic_mean(&[2.0, 2.0]).unwrap(), 2.0);
        assert!((harmonic_mean(&[1.0, 3.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(harmonic_mean(&[]).is_err());
        assert!(harmonic_mean(&[1.0, -2.0]).is_err());
        // Appending a larger value cannot decrease the harmonic mean.
        let h1 = harmonic_mean(&[1.0]).unwrap();
        let h2 = harmonic_mean(&[1.0, 3.0]).unwrap();
        assert!(h1 <= h2);
    }

    #[test]
    fn constant_is_the_leading_neumann_mode() {
        let mesh = build_surface(&SurfaceSpec::Disk { rings: 6 }).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let spec = neumann_spectrum(&fem, 3).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-8, "lambda0 {}", spec.eigenvalues[0]);
        let v0 = &spec.eigenvectors[0];
        let mean = v0.iter().sum::<f64>() / v0.len() as f64;
        let dev = v0.iter().map(|x| (x - mean).abs()).fold(0.0f64, f64::max);
        assert!(dev < 1e-6 * mean.abs().max(1e-30), "nonconstant ground mode");
    }

    #[test]
    fn steklov_needs_a_boundary() {
        let mesh = build_surface(&SurfaceSpec::Icosphere { radius: 1.0, subdiv: 2 }).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        assert!(matches!(steklov_spectrum(&fem, 2), Err(Error::EmptyBoundary)));
    }

    #[test]
    fn duplicate_trial_is_rank_deficient() {
        let mesh = build_surface(&SurfaceSpec::Disk { rings: 4 }).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let spec = neumann_spectrum(&fem, 3).unwrap();
        let n = mesh.num_vertices();
        let t0: Vec<f64> = (0..n).map(|i| mesh.vertex(i)[0]).collect();
        let trials = vec![t0.clone(), t0];
        match orthogonalize_against(&trials, &spec, &fem) {
            Err(Error::RankDeficient { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected rank error, got {other:?}"),
        }
    }
}
