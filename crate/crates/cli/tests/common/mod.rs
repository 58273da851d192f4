//! Helpers shared by the CLI integration targets: scenario fixtures and
//! hand-corruption of run directories.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use skyharvest::scheduler::FleetPlan;
use skyharvest_cli::{PlanArtifact, RunRecord};

/// Five GNs, two UAVs, a coarse grid and a small swarm: plans in about a second.
pub const SMALL: &str = r#"
seed = 4
mission_duration = 400.0
[site]
x_max = 400.0
y_max = 400.0
z_max = 100.0
dx = 50.0
dy = 50.0
dz = 25.0
[ground_nodes]
count = 5
[fleet]
count = 2
[solver]
mc_samples = 4
clusters = 3
[swarm]
swarm_size = 18
subswarm_size = 6
segments = 16
max_evaluations = 120
max_outer = 6
"#;

pub fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn desk_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/desk.toml")
}

pub fn read_plan(dir: &Path) -> PlanArtifact {
    serde_json::from_str(&fs::read_to_string(dir.join("plan.json")).unwrap()).unwrap()
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Copies a run directory's manifest and plan into `to`.
pub fn copy_run(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for f in ["manifest.json", "plan.json"] {
        fs::copy(from.join(f), to.join(f)).unwrap();
    }
}

/// Sends a second UAV (or the same one, if it flies alone) back to an
/// already-served cluster. Returns false when the plan serves nothing.
pub fn inject_duplicate(dir: &Path) -> bool {
    let mut art = read_plan(dir);
    let mut stops: Vec<Vec<usize>> = art.plan.tours.iter().map(|t| t.stops.clone()).collect();
    let Some(owner) = stops.iter().position(|s| !s.is_empty()) else {
        return false;
    };
    let dup = stops[owner][0];
    let target = (0..stops.len()).find(|&u| u != owner).unwrap_or(owner);
    stops[target].push(dup);
    let mut plan = FleetPlan::from_stops(&art.graph, &art.params, &stops);
    plan.total_reward = art.plan.total_reward;
    art.plan = plan;
    write_json(&dir.join("plan.json"), &art);
    true
}

/// Lowers the audited power budget in `manifest.json` by `factor`.
pub fn cut_budget(dir: &Path, factor: f64) {
    let path = dir.join("manifest.json");
    let mut rec: RunRecord = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    rec.p_avg *= factor;
    write_json(&path, &rec);
}
