//! Plan exports and knowledge-graph queries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::coordinator::{TeamMetrics, TeamPlan};
use crate::facts::schema::{term, vocab};
use crate::facts::{EntityId, FactError, WorldSnapshot};
use crate::grid::{grd1, pgm};
use crate::facts::write_fact_file;
use crate::pipeline::{Artifacts, Counters, Mpc};
use crate::scenario::write_atomic;
use crate::Error;

/// One `LineString` per agent, ordered by agent id.
///
/// A single-node path repeats its point so the geometry stays a valid
/// two-position line.
pub fn plan_geojson(plan: &TeamPlan) -> Json {
    let features: Vec<Json> = plan
        .paths
        .iter()
        .map(|(agent, path)| {
            let mut coords: Vec<[f64; 2]> = path.nodes.iter().map(|w| [w.lonlat.0, w.lonlat.1]).collect();
            if coords.len() == 1 {
                coords.push(coords[0]);
            }
            let waypoints: Vec<Json> = path
                .nodes
                .iter()
                .zip(&path.seam_costs)
                .map(|(w, cost)| {
                    json!({
                        "window": w.window,
                        "waypoint": w.id,
                        "row": w.cell.0,
                        "col": w.cell.1,
                        "score": w.score,
                        "seam_cost": cost,
                    })
                })
                .collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "agent": agent,
                    "objective": path.objective,
                    "restitched": plan.restitched.contains(agent),
                    "waypoints": waypoints,
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsDoc {
    pub mission_reward: f64,
    pub unique_coverage: usize,
    pub hard_violations: usize,
    pub total_objective: f64,
    pub objectives: BTreeMap<EntityId, f64>,
    pub order: Vec<EntityId>,
}

impl MetricsDoc {
    pub fn new(plan: &TeamPlan) -> MetricsDoc {
        let TeamMetrics {
            mission_reward,
            unique_coverage,
            hard_violations,
        } = plan.metrics;
        MetricsDoc {
            mission_reward,
            unique_coverage,
            hard_violations,
            total_objective: plan.total_objective(),
            objectives: plan.paths.iter().map(|(a, p)| (a.clone(), p.objective)).collect(),
            order: plan.order.clone(),
        }
    }
}

/// Reproducible record of a run. Wall-clock figures live elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub preset: Option<String>,
    pub world_version: u64,
    pub counters: Counters,
    pub tensors: usize,
    pub navgraphs: usize,
    pub tensor_hashes: BTreeMap<String, String>,
    pub metrics: Option<TeamMetrics>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(scenario: &str, preset: Option<String>, art: &Artifacts, counters: Counters) -> RunManifest {
        RunManifest {
            scenario: scenario.to_string(),
            preset,
            world_version: art.world.version,
            counters,
            tensors: art.tensors.len(),
            navgraphs: art.graphs.len(),
            tensor_hashes: art.tensor_hashes(),
            metrics: None,
            files: Vec::new(),
        }
    }
}

/// Writes every artifact of a planned run under `out`, `manifest.json` last.
pub fn write_plan_run(
    out: &Path,
    scenario: &str,
    preset: Option<String>,
    mpc: &Mpc,
    counters: Counters,
) -> Result<RunManifest, Error> {
    let art = mpc.artifacts();
    let plan = mpc.plan();
    let mut m = RunManifest::new(scenario, preset, art, counters);
    m.metrics = Some(plan.metrics);
    let mut files = write_compiled(out, art)?;
    files.extend(write_heatmaps(out, art)?);
    write_json(out, "plan.geojson", &plan_geojson(plan))?;
    write_json(out, "metrics.json", &MetricsDoc::new(plan))?;
    write_atomic(&out.join("world.facts"), write_fact_file(&mpc.store.snapshot()).as_bytes())?;
    files.extend(["plan.geojson", "metrics.json", "world.facts"].map(String::from));
    m.files = files;
    write_json(out, "manifest.json", &m)?;
    Ok(m)
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn leaf_file(agent: &EntityId, t: u32, ext: &str) -> String {
    format!("{}_{t}.{ext}", agent.leaf())
}

/// Writes every tensor as GRD1 and every navgraph as JSON; returns the
/// written paths relative to `out`.
pub fn write_compiled(out: &Path, art: &Artifacts) -> Result<Vec<String>, Error> {
    let mut files = Vec::new();
    for ((agent, t), tensor) in &art.tensors {
        let rel = format!("tensors/{}", leaf_file(agent, *t, "grd"));
        write_atomic(&out.join(&rel), &grd1::field_bytes(&tensor.field))?;
        files.push(rel);
    }
    for ((agent, t), graph) in &art.graphs {
        let rel = format!("navgraphs/{}", leaf_file(agent, *t, "json"));
        write_atomic(&out.join(&rel), &to_json_bytes(graph.as_ref()))?;
        files.push(rel);
    }
    Ok(files)
}

/// Per-(agent, window) tensor heatmaps plus one per evaluation window.
pub fn write_heatmaps(out: &Path, art: &Artifacts) -> Result<Vec<String>, Error> {
    let mut files = Vec::new();
    for ((agent, t), tensor) in &art.tensors {
        let rel = format!("heatmaps/{}", leaf_file(agent, *t, "pgm"));
        write_atomic(&out.join(&rel), &pgm::encode(&tensor.field))?;
        files.push(rel);
    }
    for tensor in &art.evaluation {
        let rel = format!("heatmaps/evaluation_{}.pgm", tensor.window);
        write_atomic(&out.join(&rel), &pgm::encode_stretched(&tensor.field))?;
        files.push(rel);
    }
    Ok(files)
}

pub fn write_json<T: Serialize>(out: &Path, rel: &str, value: &T) -> Result<PathBuf, Error> {
    let path = out.join(rel);
    write_atomic(&path, &to_json_bytes(value))?;
    Ok(path)
}

// ---- queries ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyHit {
    pub cost: EntityId,
    pub edge: EntityId,
    pub agent: EntityId,
    pub energy: f64,
    pub budget: f64,
}

fn agent_budget(s: &WorldSnapshot, agent: &EntityId) -> Option<f64> {
    let caps = s.one(agent, vocab::HAS_CAPABILITIES)?.as_entity()?.clone();
    s.one(&caps, vocab::ENERGY_BUDGET)?.as_real()
}

/// Edge costs whose energy exceeds `fraction` of the agent's energy budget,
/// i.e. edges that would turn infeasible if the budget shrank to `fraction`.
pub fn energy_what_if(s: &WorldSnapshot, fraction: f64) -> Vec<EnergyHit> {
    let pred = term(vocab::COST_ENERGY);
    let mut out: Vec<EnergyHit> = s
        .query(None, Some(&pred), None)
        .into_iter()
        .filter_map(|f| {
            let energy = f.object.as_real()?;
            let agent = s.one(&f.subject, vocab::FOR_AGENT)?.as_entity()?.clone();
            let edge = s.one(&f.subject, vocab::FOR_EDGE)?.as_entity()?.clone();
            let budget = agent_budget(s, &agent)?;
            (energy > fraction * budget).then(|| EnergyHit {
                cost: f.subject.clone(),
                edge,
                agent,
                energy,
                budget,
            })
        })
        .collect();
    out.sort_by(|a, b| a.cost.cmp(&b.cost));
    out
}

/// Provenance closure of `artifact`, excluding itself.
pub fn provenance(s: &WorldSnapshot, artifact: &EntityId) -> Result<Vec<EntityId>, FactError> {
    let mut trace = s.provenance_trace(artifact)?;
    trace.remove(artifact);
    Ok(trace.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub assignment: EntityId,
    pub agent: EntityId,
    pub window: u32,
    pub row: i64,
    pub col: i64,
    pub waypoint: Option<EntityId>,
}

/// The latest plan-run with status `ok`.
pub fn latest_run(s: &WorldSnapshot) -> Option<EntityId> {
    s.instances(vocab::PLAN_RUN)
        .into_iter()
        .filter(|r| s.one(r, vocab::STATUS).and_then(|v| v.as_text()) == Some("ok"))
        .max_by_key(|r| r.leaf().parse::<u64>().unwrap_or(0))
}

/// Assignments generated by `run`, ordered by agent then window.
pub fn audit(s: &WorldSnapshot, run: &EntityId) -> Result<Vec<AuditRow>, FactError> {
    if !s.has_type(run, vocab::PLAN_RUN) {
        return Err(FactError::UnknownEntity(run.clone()));
    }
    let by = term(vocab::WAS_GENERATED_BY);
    let mut out: Vec<AuditRow> = s
        .query(None, Some(&by), Some(&crate::facts::Value::Entity(run.clone())))
        .into_iter()
        .filter(|f| s.has_type(&f.subject, vocab::ASSIGNMENT))
        .filter_map(|f| {
            let a = &f.subject;
            let agent = s.one(a, vocab::FOR_AGENT)?.as_entity()?.clone();
            let window = s.window_index(s.one(a, vocab::FOR_WINDOW)?.as_entity()?)?;
            Some(AuditRow {
                assignment: a.clone(),
                agent,
                window,
                row: s.one(a, vocab::ROW)?.as_int()?,
                col: s.one(a, vocab::COL)?.as_int()?,
                waypoint: s.one(a, vocab::WAS_DERIVED_FROM).and_then(|v| v.as_entity()).cloned(),
            })
        })
        .collect();
    out.sort_by(|x, y| (&x.agent, x.window).cmp(&(&y.agent, y.window)));
    Ok(out)
}
