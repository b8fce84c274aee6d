//! Run manifests and report emission.

use serde::{Deserialize, Serialize};

use hmbounds_core::bounds::{verdict_str, Verdict};
use hmbounds_core::error::{Error, Result};

use crate::scenario::{run_scenario, CellStatus, Scenario, ScenarioResult};

pub const CSV_HEADER: &str =
    "scenario,case,theorem,level,h,lhs,rhs,relative_gap,tolerance,verdict,status";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentFingerprint {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub environment: EnvironmentFingerprint,
    pub scenarios: Vec<ScenarioResult>,
}

impl RunManifest {
    pub fn exit_ok(&self) -> bool {
        !self.scenarios.iter().any(|s| s.any_violation_or_failure())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.scenarios {
            for c in &s.cells {
                match (&c.report, &c.error) {
                    (Some(r), _) => out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},ok\n",
                        s.name,
                        c.case,
                        r.theorem.as_str(),
                        c.level,
                        r.mesh_meta.metric_max_edge,
                        r.lhs,
                        r.rhs,
                        r.relative_gap,
                        r.tolerance,
                        verdict_str(r.verdict),
                    )),
                    (None, err) => out.push_str(&format!(
                        "{},{},,{},,,,,,\"{}\",failed\n",
                        s.name,
                        c.case,
                        c.level,
                        err.clone().unwrap_or_default().replace('"', "'"),
                    )),
                }
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Bound verification run\n\n");

        // Verdict matrix at the finest level.
        let mut cases: Vec<String> = Vec::new();
        for s in &self.scenarios {
            for c in &s.cells {
                if !cases.contains(&c.case) {
                    cases.push(c.case.clone());
                }
            }
        }
        out.push_str("## Verdicts (finest level)\n\n| scenario |");
        for c in &cases {
            out.push_str(&format!(" {c} |"));
        }
        out.push_str("\n|---|");
        for _ in &cases {
            out.push_str("---|");
        }
        out.push('\n');
        for s in &self.scenarios {
            let finest = s.cells.iter().map(|c| c.level).max().unwrap_or(0);
            out.push_str(&format!("| {} |", s.name));
            for case in &cases {
                let cell = s
                    .cells
                    .iter()
                    .find(|c| &c.case == case && c.level == finest);
                let text = match cell {
                    Some(c) if c.status == CellStatus::Failed => "failed".to_string(),
                    Some(c) => c
                        .report
                        .as_ref()
                        .map(|r| verdict_str(r.verdict).to_string())
                        .unwrap_or_default(),
                    None => String::new(),
                };
                out.push_str(&format!(" {text} |"));
            }
            out.push('\n');
        }

        // Per-scenario tables.
        for s in &self.scenarios {
            out.push_str(&format!("\n## {}\n\n", s.name));
            out.push_str("| case | level | h | lhs | rhs | gap | tolerance | verdict |\n");
            out.push_str("|---|---|---|---|---|---|---|---|\n");
            for c in &s.cells {
                match &c.report {
                    Some(r) => out.push_str(&format!(
                        "| {} | {} | {:.4} | {:.6} | {:.6} | {:+.4e} | {:.3e} | {} |\n",
                        c.case,
                        c.level,
                        r.mesh_meta.metric_max_edge,
                        r.lhs,
                        r.rhs,
                        r.relative_gap,
                        r.tolerance,
                        verdict_str(r.verdict)
                    )),
                    None => out.push_str(&format!(
                        "| {} | {} | | | | | | failed: {} |\n",
                        c.case,
                        c.level,
                        c.error.clone().unwrap_or_default()
                    )),
                }
            }
            if !s.chain_cells.is_empty() {
                out.push_str("\nChain slacks (min / final):\n\n");
                for cc in &s.chain_cells {
                    match &cc.report {
                        Some(r) => out.push_str(&format!(
                            "- level {}: min {:+.3e}, final {:+.3e}, distortion mean {:.3}\n",
                            cc.level, r.min_slack, r.final_slack, r.angle_distortion_mean
                        )),
                        None => out.push_str(&format!(
                            "- level {}: failed: {}\n",
                            cc.level,
                            cc.error.clone().unwrap_or_default()
                        )),
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

pub fn emit_report(manifest: &RunManifest, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => manifest.to_json()?,
        ReportFormat::Csv => manifest.to_csv(),
        ReportFormat::Markdown => manifest.to_markdown(),
    })
}

fn environment(threads: usize) -> EnvironmentFingerprint {
    EnvironmentFingerprint {
        os: std::env::consts::OS.to_string(),
        arch: std::env::consts::ARCH.to_string(),
        threads,
    }
}

/// Run every scenario, in parallel across scenarios with a deterministic
/// reduction order. The manifest is identical for any thread count.
pub fn run_all(scenarios: &[Scenario], threads: usize, with_timings: bool) -> Result<RunManifest> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<ScenarioResult>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| run_scenario(s, with_timings))
            .collect()
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        environment: environment(threads),
        scenarios: out,
    })
}

/// Per-level convergence table with a first-order Richardson extrapolation
/// of the relative gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub scenario: String,
    pub case: String,
    pub rows: Vec<ConvergenceRow>,
    /// gap extrapolated to h = 0 assuming first-order convergence.
    pub extrapolated_gap: f64,
    /// Observed order of |gap - gap_inf| against h, from the last levels.
    pub observed_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,lhs,rhs,relative_gap\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.level, r.h, r.lhs, r.rhs, r.relative_gap
            ));
        }
        s.push_str(&format!("# extrapolated_gap,{}\n", self.extrapolated_gap));
        if let Some(p) = self.observed_order {
            s.push_str(&format!("# observed_order,{p}\n"));
        }
        s
    }
}

pub fn convergence_study(scenario: &Scenario) -> Result<Vec<ConvergenceTable>> {
    if scenario.refinement_levels < 3 {
        return Err(Error::InvalidParameter(
            "a convergence study needs at least 3 refinement levels".into(),
        ));
    }
    let result = run_scenario(scenario, false)?;
    let mut cases: Vec<String> = Vec::new();
    for c in &result.cells {
        if !cases.contains(&c.case) {
            cases.push(c.case.clone());
        }
    }
    let mut tables = Vec::new();
    for case in cases {
        let mut rows: Vec<ConvergenceRow> = result
            .cells
            .iter()
            .filter(|c| c.case == case && c.status == CellStatus::Ok)
            .filter_map(|c| {
                c.report.as_ref().map(|r| ConvergenceRow {
                    level: c.level,
                    h: r.mesh_meta.metric_max_edge,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    relative_gap: r.relative_gap,
                })
            })
            .collect();
        rows.sort_by_key(|r| r.level);
        if rows.len() < 3 {
            continue;
        }
        let n = rows.len();
        let (g1, g2, g3) = (
            rows[n - 3].relative_gap,
            rows[n - 2].relative_gap,
            rows[n - 1].relative_gap,
        );
        // First-order Richardson with mesh ratio 2: g_inf = 2 g_L - g_{L-1}.
        let g_inf = 2.0 * g3 - g2;
        let (e1, e2) = ((g1 - g_inf).abs(), (g2 - g_inf).abs());
        let observed_order = if e2 > 1e-14 && e1 > 1e-14 {
            Some((e1 / e2).log2())
        } else {
            None
        };
        tables.push(ConvergenceTable {
            scenario: scenario.name.clone(),
            case,
            rows,
            extrapolated_gap: g_inf,
            observed_order,
        });
    }
    Ok(tables)
}

/// A verdict summary line for the terminal.
pub fn summarize(manifest: &RunManifest) -> String {
    let mut ok = 0usize;
    let mut eq = 0usize;
    let mut violated = 0usize;
    let mut failed = 0usize;
    for s in &manifest.scenarios {
        for c in &s.cells {
            match (&c.report, c.status) {
                (_, CellStatus::Failed) => failed += 1,
                (Some(r), _) => match r.verdict {
                    Verdict::Holds => ok += 1,
                    Verdict::HoldsAtEquality => eq += 1,
                    Verdict::ViolatedBeyondTolerance => violated += 1,
                },
                _ => {}
            }
        }
    }
    format!(
        "{} cells: {} holds, {} holds-at-equality, {} violated, {} failed",
        ok + eq + violated + failed,
        ok,
        eq,
        violated,
        failed
    )
}
