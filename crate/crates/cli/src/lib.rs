//! Run orchestration for the `skyharvest` binary: manifests, sweeps, CSV/JSON
//! artifacts and the constraint audit of a finished run directory.
//!
//! Artifacts of one run directory:
//!
//! | file           | contents                                                    |
//! |----------------|-------------------------------------------------------------|
//! | `manifest.json`| the run manifest plus the resolved budget and fleet size     |
//! | `summary.json` | total reward, per-UAV average power, served count, mode, seed |
//! | `results.csv`  | one row per GN, header [`RESULTS_HEADER`]                    |
//! | `fleet.csv`    | one row per UAV, header [`FLEET_HEADER`]                     |
//! | `mission.csv`  | one row per flown leg, header [`MISSION_HEADER`]             |
//! | `plan.json`    | site, graph, mission parameters and plan, for `verify`       |
//!
//! A sweep writes one such directory per point (`pavg-<W>` or `uavs-<U>`)
//! plus `sweep.csv` with header [`SWEEP_HEADER`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skyharvest::baselines::{run_baseline, Scheme};
use skyharvest::pipeline::run_pipeline;
use skyharvest::scenario::{CostMode, LatencyMode, SiteConfig};
use skyharvest::scheduler::{simulate_mission, ConstraintStatus, FleetGraph, FleetPlan, MissionParams, MissionReport};
use skyharvest::trajectory_opt::EdgeCache;
use skyharvest::{load_scenario_file, ScenarioSpec};

pub const RESULTS_HEADER: [&str; 9] =
    ["gn_id", "class", "priority", "max_latency_s", "uav", "cluster", "completion_s", "latency_s", "reward"];
pub const FLEET_HEADER: [&str; 5] = ["uav", "home_depot", "avg_power_w", "return_time_s", "tour"];
pub const MISSION_HEADER: [&str; 8] =
    ["uav", "leg", "from_vertex", "to_vertex", "duration_s", "length_m", "avg_power_w", "max_speed_mps"];
pub const SWEEP_HEADER: [&str; 7] =
    ["axis", "value", "total_reward", "served_count", "mean_avg_power_w", "max_avg_power_w", "constraints_pass"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] skyharvest::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pipeline,
    Static,
    VoronoiDist,
    VoronoiRx,
    Igd,
    Ibf,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self.scheme() {
            None => "pipeline",
            Some(s) => s.label(),
        }
    }

    fn scheme(self) -> Option<Scheme> {
        match self {
            Mode::Pipeline => None,
            Mode::Static => Some(Scheme::Static),
            Mode::VoronoiDist => Some(Scheme::VoronoiDist),
            Mode::VoronoiRx => Some(Scheme::VoronoiRx),
            Mode::Igd => Some(Scheme::Igd),
            Mode::Ibf => Some(Scheme::Ibf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "axis", content = "values")]
pub enum Sweep {
    #[default]
    None,
    PAvg(Vec<f64>),
    Uavs(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: PathBuf,
    /// Replaces the scenario's seed when set.
    pub seed: Option<u64>,
    pub mode: Mode,
    pub sweep: Sweep,
    pub out: PathBuf,
    #[serde(default)]
    pub literal_delta: bool,
    #[serde(default)]
    pub cost: Option<CostMode>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
}

impl RunManifest {
    pub fn new(scenario: impl Into<PathBuf>, mode: Mode, out: impl Into<PathBuf>) -> Self {
        RunManifest {
            scenario: scenario.into(),
            seed: None,
            mode,
            sweep: Sweep::None,
            out: out.into(),
            literal_delta: false,
            cost: None,
            mc_samples: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.sweep {
            Sweep::None => {}
            Sweep::PAvg(v) if v.is_empty() => return Err(CliError::Manifest("empty P_avg sweep".into())),
            Sweep::Uavs(v) if v.is_empty() => return Err(CliError::Manifest("empty UAV-count sweep".into())),
            Sweep::PAvg(v) => {
                if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(CliError::Manifest(format!("P_avg sweep value {x} is not positive")));
                }
            }
            Sweep::Uavs(v) => {
                if v.contains(&0) {
                    return Err(CliError::Manifest("UAV-count sweep value 0 is not positive".into()));
                }
            }
        }
        if self.mc_samples == Some(0) {
            return Err(CliError::Manifest("mc_samples must be positive".into()));
        }
        Ok(())
    }

    /// The scenario with every manifest override applied.
    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let base = load_scenario_file(&self.scenario)?;
        Ok(base.modified(|c| {
            if let Some(s) = self.seed {
                c.seed = s;
            }
            if self.literal_delta {
                c.solver.latency = LatencyMode::Literal;
            }
            if let Some(cost) = self.cost {
                c.solver.cost = cost;
            }
            if let Some(n) = self.mc_samples {
                c.solver.mc_samples = n;
            }
        })?)
    }
}

/// Contents of `manifest.json` in a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub seed: u64,
    pub uav_count: usize,
    /// Budget the run was planned under; `verify` audits against this value.
    pub p_avg: f64,
    pub mission_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_reward: f64,
    pub per_uav_avg_power: Vec<f64>,
    pub served_count: usize,
    pub mode: Mode,
    pub seed: u64,
}

/// Contents of `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanArtifact {
    pub site: SiteConfig,
    pub graph: FleetGraph,
    pub params: MissionParams,
    pub plan: FleetPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spec_seed: u64,
    pub artifact: PlanArtifact,
    pub report: MissionReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    gn_id: usize,
    class: String,
    priority: f64,
    max_latency_s: f64,
    uav: Option<usize>,
    cluster: Option<usize>,
    completion_s: Option<f64>,
    latency_s: Option<f64>,
    reward: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FleetRow {
    uav: usize,
    home_depot: usize,
    avg_power_w: f64,
    return_time_s: f64,
    /// Cluster indices in visiting order, `-` separated.
    tour: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct MissionRow {
    uav: usize,
    leg: usize,
    from_vertex: usize,
    to_vertex: usize,
    duration_s: f64,
    length_m: f64,
    avg_power_w: f64,
    max_speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub total_reward: f64,
    pub served_count: usize,
    pub mean_avg_power_w: f64,
    pub max_avg_power_w: f64,
    pub constraints_pass: bool,
}

/// Plans one scenario with the chosen mode and replays the plan.
pub fn solve(spec: &ScenarioSpec, mode: Mode) -> Result<RunOutcome> {
    let mut cache = EdgeCache::new();
    let (graph, params, plan, report) = match mode.scheme() {
        None => {
            let out = run_pipeline(spec, &mut cache)?;
            (out.graph, out.params, out.plan, out.report)
        }
        Some(s) => {
            let b = run_baseline(spec, s, &mut cache)?;
            (b.graph, b.params, b.plan, b.report)
        }
    };
    Ok(RunOutcome {
        spec_seed: spec.seed,
        artifact: PlanArtifact { site: spec.site.clone(), graph, params, plan },
        report,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let err = |source| CliError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    if rows.is_empty() {
        w.write_record(header).map_err(err)?;
    }
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(io_err(path))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Writes the artifacts of a single planned run into `dir`.
pub fn write_run(dir: &Path, record: &RunRecord, outcome: &RunOutcome) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let PlanArtifact { graph, plan, .. } = &outcome.artifact;
    let report = &outcome.report;
    let depots = graph.depot_count;

    write_json(&dir.join("manifest.json"), record)?;
    write_json(&dir.join("plan.json"), &outcome.artifact)?;

    let results: Vec<ResultRow> = report
        .outcomes
        .iter()
        .map(|o| {
            let class = graph
                .vertices
                .iter()
                .flat_map(|v| &v.items)
                .find(|it| it.gn_id == o.gn_id)
                .map(|it| it.class.clone());
            ResultRow {
                gn_id: o.gn_id,
                class: class.as_ref().map_or_else(String::new, |c| c.name.clone()),
                priority: class.as_ref().map_or(0.0, |c| c.priority),
                max_latency_s: class.as_ref().map_or(0.0, |c| c.max_latency_s),
                uav: o.uav,
                cluster: o.cluster,
                completion_s: o.completion_time,
                latency_s: o.latency,
                reward: o.reward,
            }
        })
        .collect();
    write_csv(&dir.join("results.csv"), &results, &RESULTS_HEADER)?;

    let fleet: Vec<FleetRow> = plan
        .tours
        .iter()
        .map(|t| FleetRow {
            uav: t.uav,
            home_depot: t.home,
            avg_power_w: report.per_uav_avg_power.get(t.uav).copied().unwrap_or(0.0),
            return_time_s: report.per_uav_return_time.get(t.uav).copied().unwrap_or(0.0),
            tour: t.stops.iter().map(|s| (s - depots).to_string()).collect::<Vec<_>>().join("-"),
        })
        .collect();
    write_csv(&dir.join("fleet.csv"), &fleet, &FLEET_HEADER)?;

    let mut legs = Vec::new();
    for t in &plan.tours {
        let path: Vec<usize> = if t.stops.is_empty() {
            Vec::new()
        } else {
            std::iter::once(t.home).chain(t.stops.iter().copied()).chain(std::iter::once(t.home)).collect()
        };
        for (k, (leg, w)) in t.legs.iter().zip(path.windows(2)).enumerate() {
            legs.push(MissionRow {
                uav: t.uav,
                leg: k,
                from_vertex: w[0],
                to_vertex: w[1],
                duration_s: leg.duration,
                length_m: leg.path_length(),
                avg_power_w: leg.average_power(),
                max_speed_mps: leg.max_speed(),
            });
        }
    }
    write_csv(&dir.join("mission.csv"), &legs, &MISSION_HEADER)?;

    let summary = Summary {
        total_reward: report.total_reward,
        per_uav_avg_power: report.per_uav_avg_power.clone(),
        served_count: report.served_count,
        mode: record.manifest.mode,
        seed: record.seed,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn record_for(manifest: &RunManifest, spec: &ScenarioSpec) -> RunRecord {
    RunRecord {
        manifest: manifest.clone(),
        seed: spec.seed,
        uav_count: spec.uav_count(),
        p_avg: spec.p_avg(),
        mission_duration: spec.mission_duration,
    }
}

/// What a run produced: one summary for a single run, one per point for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Single(Summary),
    Sweep(Vec<SweepRow>),
}

pub fn run(manifest: &RunManifest) -> Result<RunResult> {
    manifest.validate()?;
    let spec = manifest.scenario_spec()?;
    let points: Vec<(String, ScenarioSpec)> = match &manifest.sweep {
        Sweep::None => {
            let outcome = solve(&spec, manifest.mode)?;
            let summary = write_run(&manifest.out, &record_for(manifest, &spec), &outcome)?;
            return Ok(RunResult::Single(summary));
        }
        Sweep::PAvg(values) => values
            .iter()
            .map(|&p| Ok((format!("pavg-{p}"), spec.modified(|c| c.fleet.p_avg = p)?)))
            .collect::<Result<_>>()?,
        Sweep::Uavs(values) => values
            .iter()
            .map(|&u| Ok((format!("uavs-{u}"), spec.modified(|c| c.fleet.count = u)?)))
            .collect::<Result<_>>()?,
    };
    fs::create_dir_all(&manifest.out).map_err(io_err(&manifest.out))?;
    write_json(&manifest.out.join("manifest.json"), manifest)?;

    // Points are independent; each worker owns its edge cache.
    let outcomes: Vec<Result<RunOutcome>> = std::thread::scope(|s| {
        let jobs: Vec<_> = points.iter().map(|(_, p)| s.spawn(|| solve(p, manifest.mode))).collect();
        jobs.into_iter().map(|j| j.join().expect("sweep worker panicked")).collect()
    });

    let axis = match manifest.sweep {
        Sweep::PAvg(_) => "p_avg",
        _ => "uavs",
    };
    let mut rows = Vec::with_capacity(points.len());
    for ((name, point), outcome) in points.iter().zip(outcomes) {
        let outcome = outcome?;
        let summary = write_run(&manifest.out.join(name), &record_for(manifest, point), &outcome)?;
        let value = match manifest.sweep {
            Sweep::PAvg(_) => point.p_avg(),
            _ => point.uav_count() as f64,
        };
        rows.push(SweepRow {
            axis: axis.into(),
            value,
            total_reward: summary.total_reward,
            served_count: summary.served_count,
            mean_avg_power_w: mean(&summary.per_uav_avg_power),
            max_avg_power_w: summary.per_uav_avg_power.iter().copied().fold(0.0, f64::max),
            constraints_pass: outcome.report.status.all(),
        });
    }
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    write_csv(&manifest.out.join("sweep.csv"), &rows, &SWEEP_HEADER)?;
    Ok(RunResult::Sweep(rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub status: ConstraintStatus,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.status.all()
    }

    /// One pass/fail line per constraint.
    pub fn lines(&self) -> Vec<String> {
        let s = &self.status;
        [
            ("C.1 continuity and deadline", s.continuity),
            ("C.2 voxel separation", s.collision_free),
            ("C.3 single service", s.single_service),
            ("C.4 kinematics and power", s.kinematics_and_power),
        ]
        .iter()
        .map(|(name, ok)| format!("{} {name}", if *ok { "PASS" } else { "FAIL" }))
        .collect()
    }
}

/// Replays `plan.json` of a run directory against the budget in its `manifest.json`.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let record: RunRecord = read_json(&dir.join("manifest.json"))?;
    let artifact: PlanArtifact = read_json(&dir.join("plan.json"))?;
    let mut params = artifact.params.clone();
    params.p_avg = record.p_avg;
    params.mission_duration = record.mission_duration;
    let report = simulate_mission(&artifact.plan, &artifact.graph, &params, Some(&artifact.site));
    Ok(VerifyReport { status: report.status, violations: report.violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(sweep: Sweep) -> RunManifest {
        RunManifest { sweep, ..RunManifest::new("x.toml", Mode::Pipeline, "out") }
    }

    #[test]
    fn sweep_values_must_be_positive() {
        assert!(manifest(Sweep::None).validate().is_ok());
        assert!(manifest(Sweep::PAvg(vec![4500.0, 5000.0])).validate().is_ok());
        assert!(manifest(Sweep::PAvg(vec![4500.0, -1.0])).validate().is_err());
        assert!(manifest(Sweep::PAvg(vec![f64::NAN])).validate().is_err());
        assert!(manifest(Sweep::Uavs(vec![2, 0])).validate().is_err());
        assert!(manifest(Sweep::Uavs(vec![])).validate().is_err());
        let zero_mc = RunManifest { mc_samples: Some(0), ..manifest(Sweep::None) };
        assert!(zero_mc.validate().is_err());
    }

    #[test]
    fn mode_labels_are_kebab_case() {
        let labels: Vec<&str> =
            [Mode::Pipeline, Mode::Static, Mode::VoronoiDist, Mode::VoronoiRx, Mode::Igd, Mode::Ibf].map(Mode::label).to_vec();
        assert_eq!(labels, ["pipeline", "static", "voronoi-dist", "voronoi-rx", "igd", "ibf"]);
        for m in [Mode::VoronoiDist, Mode::Ibf] {
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.label()));
        }
    }

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest { seed: Some(7), cost: Some(CostMode::Power), ..manifest(Sweep::Uavs(vec![2, 3])) };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }

    #[test]
    fn verify_reports_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(verify(dir.path()), Err(CliError::MissingArtifact(_))));
    }
}
