//! Scenario definitions, the builtin registry, and the per-scenario runner.

use serde::{Deserialize, Serialize};

use hmbounds_core::bounds::{
    bound_ext_closed, bound_ext_steklov, bound_genus_neumann, bound_neumann_conformal,
    bound_reilly, bound_steklov_genus, bound_steklov_relconf, BoundReport, ExtrinsicAmbient,
};
use hmbounds_core::conformal::{
    balance_center_of_mass, conformal_volume_sup, mobius_apply_cloud, OptimizerConfig,
};
use hmbounds_core::error::{Error, Result};
use hmbounds_core::extrinsic::{mean_curvature_field, newton_tensor};
use hmbounds_core::geom;
use hmbounds_core::mesh::{build_surface, DensityModel, SurfaceMesh, SurfaceSpec};
use hmbounds_core::spectral::{
    assemble_fem, neumann_spectrum_with, steklov_spectrum, variational_chain_report, ChainMode,
    ChainReport, EigenOptions, FemMatrices, Spectrum,
};

pub const MAX_REFINEMENT_LEVELS: u32 = 6;

/// Vertexwise candidate map of a closed surface to the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMapKind {
    /// Vertices already lie on the sphere.
    Identity,
    /// Radial projection onto the unit sphere.
    RadialNormalize,
}

/// Vertexwise candidate map of a boundary surface to the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallMapKind {
    /// The mesh itself sits in the closed unit ball with its boundary on the
    /// unit circle.
    Identity,
    /// Radial fold of an annulus onto the disk: both boundary loops land on
    /// the unit circle; heavily non-conformal by construction.
    AnnulusRadialFold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorChoice {
    Identity,
    Newton1,
}

/// One inequality instance to evaluate per refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum BoundCase {
    GenusNeumann,
    ConformalNeumann { map: SphereMapKind },
    Reilly { curvature: f64 },
    ExtrinsicClosed { tensor: TensorChoice, ambient: ExtrinsicAmbient },
    SteklovGenus,
    SteklovRelConformal { map: BallMapKind },
    ExtrinsicSteklov,
}

impl BoundCase {
    pub fn label(&self) -> String {
        match self {
            BoundCase::GenusNeumann => "genus-neumann".into(),
            BoundCase::ConformalNeumann { .. } => "conformal-neumann".into(),
            BoundCase::Reilly { curvature } => format!("reilly(c={curvature})"),
            BoundCase::ExtrinsicClosed { tensor, ambient } => format!(
                "extrinsic-closed({},{})",
                match tensor {
                    TensorChoice::Identity => "I",
                    TensorChoice::Newton1 => "T1",
                },
                match ambient {
                    ExtrinsicAmbient::Euclidean => "flat",
                    ExtrinsicAmbient::Sphere => "sphere",
                }
            ),
            BoundCase::SteklovGenus => "steklov-genus".into(),
            BoundCase::SteklovRelConformal { .. } => "steklov-rel-conformal".into(),
            BoundCase::ExtrinsicSteklov => "extrinsic-steklov".into(),
        }
    }

    fn needs_neumann(&self) -> bool {
        matches!(
            self,
            BoundCase::GenusNeumann
                | BoundCase::ConformalNeumann { .. }
                | BoundCase::Reilly { .. }
                | BoundCase::ExtrinsicClosed { .. }
        )
    }

    fn needs_steklov(&self) -> bool {
        matches!(
            self,
            BoundCase::SteklovGenus
                | BoundCase::SteklovRelConformal { .. }
                | BoundCase::ExtrinsicSteklov
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMapSpec {
    /// Balanced sphere map from the vertex positions.
    SphereIdentity,
    /// Balanced sphere map from radially normalized positions.
    SphereRadial,
    /// Identity ball map for the Steklov chain.
    BallIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub surface: SurfaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityModel>,
    pub cases: Vec<BoundCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainMapSpec>,
    pub refinement_levels: u32,
    pub eigen_count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.eigen_count < 3 {
            return Err(Error::InvalidParameter(format!(
                "scenario {:?}: eigen_count must be at least m + 1 = 3",
                self.name
            )));
        }
        if self.refinement_levels < 1 || self.refinement_levels > MAX_REFINEMENT_LEVELS {
            return Err(Error::InvalidParameter(format!(
                "scenario {:?}: refinement_levels must lie in 1..={MAX_REFINEMENT_LEVELS}",
                self.name
            )));
        }
        if self.cases.is_empty() && self.chain.is_none() {
            return Err(Error::InvalidParameter(format!(
                "scenario {:?} requests nothing",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub case: String,
    pub level: u32,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainCell {
    pub level: u32,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ChainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTimings {
    pub build_ms: u64,
    pub spectra_ms: u64,
    pub bounds_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub cells: Vec<CellResult>,
    pub chain_cells: Vec<ChainCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl ScenarioResult {
    pub fn any_violation_or_failure(&self) -> bool {
        self.cells.iter().any(|c| {
            c.status == CellStatus::Failed
                || c.report.as_ref().map_or(false, |r| {
                    r.verdict == hmbounds_core::bounds::Verdict::ViolatedBeyondTolerance
                })
        }) || self.chain_cells.iter().any(|c| c.status == CellStatus::Failed)
    }
}

fn decorate_density(mesh: &mut SurfaceMesh, model: &DensityModel) -> Result<()> {
    if mesh.density.is_some() {
        return Err(Error::InvalidParameter(
            "surface already carries a builder density; refusing to overwrite".into(),
        ));
    }
    mesh.density = Some(
        (0..mesh.num_vertices())
            .map(|v| model.evaluate(mesh.vertex(v)))
            .collect(),
    );
    mesh.density_model = Some(model.clone());
    Ok(())
}

fn sphere_map(mesh: &SurfaceMesh, kind: SphereMapKind) -> Result<Vec<f64>> {
    let d = mesh.ambient_dim;
    match kind {
        SphereMapKind::Identity => {
            for v in 0..mesh.num_vertices() {
                let r = geom::norm(mesh.vertex(v));
                if (r - 1.0).abs() > 1e-8 {
                    return Err(Error::Geometry(format!(
                        "identity sphere map needs unit vertices; vertex {v} at radius {r}"
                    )));
                }
            }
            Ok(mesh.coords.clone())
        }
        SphereMapKind::RadialNormalize => Ok(mesh
            .coords
            .chunks(d)
            .flat_map(|p| geom::normalize(p))
            .collect()),
    }
}

fn ball_map(mesh: &SurfaceMesh, kind: BallMapKind) -> Result<Vec<f64>> {
    match kind {
        BallMapKind::Identity => Ok(mesh.coords.clone()),
        BallMapKind::AnnulusRadialFold => {
            let inner = match mesh.provenance {
                Some(SurfaceSpec::Annulus { inner_radius, .. }) => inner_radius,
                _ => {
                    return Err(Error::Domain(
                        "the radial fold map is defined for annulus meshes".into(),
                    ))
                }
            };
            // psi maps [inner, 1] linearly onto [-1, 1]; both loops land on
            // the unit circle and the middle circle collapses to the origin.
            Ok(mesh
                .coords
                .chunks(2)
                .flat_map(|p| {
                    let r = geom::norm(p);
                    let psi = (2.0 * r - (1.0 + inner)) / (1.0 - inner);
                    [psi * p[0] / r, psi * p[1] / r]
                })
                .collect())
        }
    }
}

struct LevelData {
    mesh: SurfaceMesh,
    fem: FemMatrices,
    neumann: Option<Result<Spectrum>>,
    steklov: Option<Result<Spectrum>>,
}

fn chain_cell(scenario: &Scenario, data: &LevelData, level: u32) -> ChainCell {
    let run = || -> Result<ChainReport> {
        let spec = scenario.chain.unwrap();
        match spec {
            ChainMapSpec::SphereIdentity | ChainMapSpec::SphereRadial => {
                let kind = if spec == ChainMapSpec::SphereIdentity {
                    SphereMapKind::Identity
                } else {
                    SphereMapKind::RadialNormalize
                };
                let base = sphere_map(&data.mesh, kind)?;
                let d = data.mesh.ambient_dim;
                let weights = match &data.fem.mass {
                    hmbounds_core::spectral::Mass::Lumped(m) => m.clone(),
                    hmbounds_core::spectral::Mass::Consistent(_) => unreachable!(),
                };
                let gamma = balance_center_of_mass(&base, d, &weights)?;
                let map = mobius_apply_cloud(&gamma, &base, d);
                let spectrum = spectrum_ref(&data.neumann)?;
                variational_chain_report(
                    &data.mesh,
                    &data.fem,
                    spectrum,
                    &map,
                    d,
                    ChainMode::Neumann,
                )
            }
            ChainMapSpec::BallIdentity => {
                let map = ball_map(&data.mesh, BallMapKind::Identity)?;
                let spectrum = spectrum_ref(&data.steklov)?;
                variational_chain_report(
                    &data.mesh,
                    &data.fem,
                    spectrum,
                    &map,
                    data.mesh.ambient_dim,
                    ChainMode::Steklov,
                )
            }
        }
    };
    match run() {
        Ok(report) => ChainCell {
            level,
            status: CellStatus::Ok,
            report: Some(report),
            error: None,
        },
        Err(e) => ChainCell {
            level,
            status: CellStatus::Failed,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

fn spectrum_ref<'a>(slot: &'a Option<Result<Spectrum>>) -> Result<&'a Spectrum> {
    match slot {
        Some(Ok(s)) => Ok(s),
        Some(Err(e)) => Err(Error::Domain(format!("spectrum unavailable: {e}"))),
        None => Err(Error::Domain("spectrum was not requested".into())),
    }
}

fn evaluate_case(
    scenario: &Scenario,
    case: &BoundCase,
    data: &LevelData,
    level: u32,
) -> Vec<(String, Result<BoundReport>)> {
    let label = case.label();
    match case {
        BoundCase::GenusNeumann => {
            let r = spectrum_ref(&data.neumann)
                .and_then(|s| bound_genus_neumann(&data.mesh, s));
            vec![(label, r)]
        }
        BoundCase::ConformalNeumann { map } => {
            let r = (|| {
                let spectrum = spectrum_ref(&data.neumann)?;
                let map = sphere_map(&data.mesh, *map)?;
                let mut opts = scenario.optimizer.clone().unwrap_or_default();
                opts.seed = opts.seed.wrapping_add(scenario.seed).wrapping_add(level as u64);
                let vc =
                    conformal_volume_sup(&data.mesh, &map, data.mesh.ambient_dim, &opts)?;
                bound_neumann_conformal(&data.mesh, &vc, spectrum)
            })();
            vec![(label, r)]
        }
        BoundCase::Reilly { curvature } => {
            let r = spectrum_ref(&data.neumann)
                .and_then(|s| bound_reilly(&data.mesh, *curvature, s));
            vec![(label, r)]
        }
        BoundCase::ExtrinsicClosed { tensor, ambient } => {
            let r = (|| {
                let spectrum = spectrum_ref(&data.neumann)?;
                let curv = mean_curvature_field(&data.mesh)?;
                let t = match tensor {
                    TensorChoice::Identity => newton_tensor(&curv, 0)?,
                    TensorChoice::Newton1 => newton_tensor(&curv, 1)?,
                };
                bound_ext_closed(&data.mesh, &curv, &t, *ambient, spectrum)
            })();
            vec![(label, r)]
        }
        BoundCase::SteklovGenus => match spectrum_ref(&data.steklov)
            .and_then(|s| bound_steklov_genus(&data.mesh, s))
        {
            Ok((linear, strict)) => vec![
                ("steklov-genus-linear".into(), Ok(linear)),
                ("steklov-genus-strict".into(), Ok(strict)),
            ],
            Err(e) => vec![
                ("steklov-genus-linear".into(), Err(e)),
                (
                    "steklov-genus-strict".into(),
                    Err(Error::Domain("see steklov-genus-linear".into())),
                ),
            ],
        },
        BoundCase::SteklovRelConformal { map } => {
            let r = (|| {
                let spectrum = spectrum_ref(&data.steklov)?;
                let map = ball_map(&data.mesh, *map)?;
                bound_steklov_relconf(&data.mesh, &map, data.mesh.ambient_dim, spectrum)
            })();
            vec![(label, r)]
        }
        BoundCase::ExtrinsicSteklov => {
            let r = spectrum_ref(&data.steklov)
                .and_then(|s| bound_ext_steklov(&data.mesh, s));
            vec![(label, r)]
        }
    }
}

/// Build, refine, and evaluate one scenario across its levels. Failures are
/// isolated per cell; the run continues with the remaining cells.
pub fn run_scenario(scenario: &Scenario, with_timings: bool) -> Result<ScenarioResult> {
    scenario.validate()?;
    let t0 = std::time::Instant::now();

    let mut base = build_surface(&scenario.surface)?;
    if let Some(model) = &scenario.density {
        decorate_density(&mut base, model)?;
    }
    let mut meshes = vec![base];
    for _ in 1..scenario.refinement_levels {
        let next = meshes.last().unwrap().refine();
        meshes.push(next);
    }
    let build_ms = t0.elapsed().as_millis() as u64;

    let needs_neumann =
        scenario.cases.iter().any(|c| c.needs_neumann())
            || matches!(
                scenario.chain,
                Some(ChainMapSpec::SphereIdentity) | Some(ChainMapSpec::SphereRadial)
            );
    let needs_steklov = scenario.cases.iter().any(|c| c.needs_steklov())
        || matches!(scenario.chain, Some(ChainMapSpec::BallIdentity));

    let t1 = std::time::Instant::now();
    let levels: Vec<LevelData> = meshes
        .into_iter()
        .map(|mesh| {
            let fem = assemble_fem(&mesh).expect("validated mesh assembles");
            let neumann = needs_neumann.then(|| {
                neumann_spectrum_with(
                    &fem,
                    scenario.eigen_count,
                    EigenOptions {
                        seed: scenario.seed,
                        ..EigenOptions::default()
                    },
                )
            });
            let steklov = needs_steklov.then(|| steklov_spectrum(&fem, scenario.eigen_count));
            LevelData {
                mesh,
                fem,
                neumann,
                steklov,
            }
        })
        .collect();
    let spectra_ms = t1.elapsed().as_millis() as u64;

    let t2 = std::time::Instant::now();
    let mut cells = Vec::new();
    let mut chain_cells = Vec::new();
    for (level, data) in levels.iter().enumerate() {
        let level = level as u32;
        for case in &scenario.cases {
            for (label, outcome) in evaluate_case(scenario, case, data, level) {
                match outcome {
                    Ok(report) => cells.push(CellResult {
                        case: label,
                        level,
                        status: CellStatus::Ok,
                        report: Some(report),
                        error: None,
                    }),
                    Err(e) => cells.push(CellResult {
                        case: label,
                        level,
                        status: CellStatus::Failed,
                        report: None,
                        error: Some(e.to_string()),
                    }),
                }
            }
        }
        if scenario.chain.is_some() {
            chain_cells.push(chain_cell(scenario, data, level));
        }
    }
    let bounds_ms = t2.elapsed().as_millis() as u64;

    Ok(ScenarioResult {
        name: scenario.name.clone(),
        cells,
        chain_cells,
        timings: with_timings.then_some(StageTimings {
            build_ms,
            spectra_ms,
            bounds_ms,
        }),
    })
}

/// The builtin verification registry: every theorem family over the model
/// zoo, equality cases and strict cases both represented.
pub fn builtin_registry() -> Vec<Scenario> {
    let mut out = Vec::new();
    let base = |name: &str, surface: SurfaceSpec, cases: Vec<BoundCase>| Scenario {
        name: name.into(),
        surface,
        density: None,
        cases,
        chain: None,
        refinement_levels: 3,
        eigen_count: 6,
        seed: 0x5eed,
        optimizer: None,
    };

    let mut sphere = base(
        "sphere-equalities",
        SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 },
        vec![
            BoundCase::GenusNeumann,
            BoundCase::Reilly { curvature: 0.0 },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Identity,
                ambient: ExtrinsicAmbient::Euclidean,
            },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Newton1,
                ambient: ExtrinsicAmbient::Euclidean,
            },
            BoundCase::ConformalNeumann { map: SphereMapKind::Identity },
        ],
    );
    sphere.chain = Some(ChainMapSpec::SphereIdentity);
    out.push(sphere);

    let mut ellipsoid = base(
        "ellipsoid-strict",
        SurfaceSpec::Ellipsoid { a: 2.0, b: 1.0, c: 1.0, subdiv: 3 },
        vec![
            BoundCase::GenusNeumann,
            BoundCase::Reilly { curvature: 0.0 },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Identity,
                ambient: ExtrinsicAmbient::Euclidean,
            },
            BoundCase::ConformalNeumann { map: SphereMapKind::RadialNormalize },
        ],
    );
    ellipsoid.chain = Some(ChainMapSpec::SphereRadial);
    out.push(ellipsoid);

    out.push(base(
        "torus-rev",
        SurfaceSpec::TorusRev { major: 2.0, minor: 1.0, nu: 24, nv: 12 },
        vec![
            BoundCase::GenusNeumann,
            BoundCase::Reilly { curvature: 0.0 },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Identity,
                ambient: ExtrinsicAmbient::Euclidean,
            },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Newton1,
                ambient: ExtrinsicAmbient::Euclidean,
            },
        ],
    ));

    out.push(base(
        "clifford-torus",
        SurfaceSpec::CliffordTorus { n_grid: 24 },
        vec![
            BoundCase::Reilly { curvature: 1.0 },
            BoundCase::ExtrinsicClosed {
                tensor: TensorChoice::Identity,
                ambient: ExtrinsicAmbient::Sphere,
            },
            BoundCase::ConformalNeumann { map: SphereMapKind::Identity },
        ],
    ));

    out.push(base(
        "poincare-sphere",
        SurfaceSpec::PoincareSphere { hyp_radius: 1.0, subdiv: 3 },
        vec![BoundCase::Reilly { curvature: -1.0 }],
    ));

    let mut mobius = base(
        "mobius-pullback",
        SurfaceSpec::MobiusPullbackSphere { a_param: 0.4, subdiv: 3 },
        vec![
            BoundCase::GenusNeumann,
            BoundCase::ConformalNeumann { map: SphereMapKind::Identity },
        ],
    );
    mobius.chain = Some(ChainMapSpec::SphereIdentity);
    out.push(mobius);

    let mut cospolar = base(
        "conformal-cos-polar",
        SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 },
        vec![
            BoundCase::GenusNeumann,
            BoundCase::ConformalNeumann { map: SphereMapKind::Identity },
        ],
    );
    cospolar.density = Some(DensityModel::CosPolar { amplitude: 0.3 });
    cospolar.chain = Some(ChainMapSpec::SphereIdentity);
    out.push(cospolar);

    for (tag, seed) in [("a", 11u64), ("b", 12u64)] {
        let mut random = base(
            &format!("conformal-random-{tag}"),
            SurfaceSpec::Icosphere { radius: 1.0, subdiv: 3 },
            vec![BoundCase::GenusNeumann],
        );
        random.density = Some(DensityModel::RandomHarmonics { seed, amplitude: 0.4 });
        random.chain = Some(ChainMapSpec::SphereIdentity);
        random.seed = seed;
        out.push(random);
    }

    let mut disk = base(
        "disk-steklov",
        SurfaceSpec::Disk { rings: 12 },
        vec![
            BoundCase::SteklovGenus,
            BoundCase::ExtrinsicSteklov,
            BoundCase::SteklovRelConformal { map: BallMapKind::Identity },
        ],
    );
    disk.chain = Some(ChainMapSpec::BallIdentity);
    out.push(disk);

    out.push(base(
        "annulus-steklov",
        SurfaceSpec::Annulus { inner_radius: 0.5, rings: 8 },
        vec![
            BoundCase::SteklovGenus,
            BoundCase::ExtrinsicSteklov,
            BoundCase::SteklovRelConformal { map: BallMapKind::AnnulusRadialFold },
        ],
    ));

    out.push(base(
        "ellipse-steklov",
        SurfaceSpec::Ellipse { a: 2.0, b: 1.0, rings: 12 },
        vec![BoundCase::SteklovGenus, BoundCase::ExtrinsicSteklov],
    ));

    out
}
