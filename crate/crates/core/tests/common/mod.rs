#![allow(dead_code)]

use std::collections::BTreeMap;

use mission_compiler::control_plane::AgentCapabilities;
use mission_compiler::data_plane::{ConstraintKind, Constraint};
use mission_compiler::facts::schema::{term, vocab};
use mission_compiler::facts::{ChangeSet, EntityId, Fact, Value};
use mission_compiler::grid::{BBox, Cell, GridSpec, Mask, ScalarField, VectorField};
use mission_compiler::planner::{Start, Transition, Trellis};
use mission_compiler::scenario::{
    reference_scenario, AgentDoc, GridBundle, PolicyDoc, Scenario, ScenarioDoc, WindowDoc,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const REFERENCE_SEED: u64 = 7;

pub fn reference() -> Scenario {
    let (doc, bundle) = reference_scenario(REFERENCE_SEED).unwrap();
    Scenario::from_bundle(doc, &bundle).unwrap()
}

pub fn agent_doc(id: &str, policy: &str) -> AgentDoc {
    AgentDoc {
        id: id.into(),
        policy: policy.into(),
        cruise_speed_kts: 2.0,
        max_speed_kts: 3.0,
        energy_per_km: 1.0,
        boost_gain: 1.0,
        energy_budget: 500.0,
        travel_budget_hours: 24.0,
    }
}

pub fn base_policy(name: &str) -> PolicyDoc {
    PolicyDoc {
        name: name.into(),
        alpha_base: 1.0,
        betas: BTreeMap::new(),
        gamma_front: 0.0,
        lambda_time: 0.01,
        lambda_energy: 0.001,
        lambda_hazard: 0.1,
        lambda_uncertainty: 0.1,
        soft_overrides: BTreeMap::new(),
    }
}

/// Windows over a `rows × cols` grid whose base layers are the given fields.
pub fn small_scenario(bases: Vec<ScalarField>, agents: &[&str]) -> (ScenarioDoc, GridBundle) {
    let spec = *bases[0].spec();
    let mut bundle = GridBundle::default();
    let windows = bases
        .into_iter()
        .enumerate()
        .map(|(t, f)| {
            let key = format!("base_{t}.grd");
            bundle.fields.insert(key.clone(), f);
            WindowDoc {
                start: format!("2024-01-{:02}T00:00:00Z", t + 1),
                duration_hours: 24.0,
                confidence: None,
                base: key,
                currents: None,
            }
        })
        .collect();
    let doc = ScenarioDoc {
        name: "small".into(),
        seed: 0,
        grid: spec,
        windows,
        priors: BTreeMap::new(),
        agents: agents.iter().map(|a| agent_doc(a, "P")).collect(),
        policies: vec![base_policy("P")],
        evaluation_policy: None,
        constraints: vec![],
        events: vec![],
        planner: Default::default(),
        facts: vec![],
    };
    (doc, bundle)
}

pub fn unit_spec(rows: usize, cols: usize) -> GridSpec {
    GridSpec::new(rows, cols, BBox::new(0.0, 0.0, cols as f64 * 0.1, rows as f64 * 0.1), 5.0).unwrap()
}

pub fn random_field(spec: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(spec, |_| rng.gen_range(0.0..1.0)).unwrap()
}

// ---- trellis oracle ----

pub fn random_trellis(rng: &mut ChaCha8Rng) -> (Trellis, Start) {
    let layers: usize = rng.gen_range(1..=5);
    let sizes: Vec<usize> = (0..layers).map(|_| rng.gen_range(1..=5)).collect();
    // small integers on half the instances so ties are common
    let integral = rng.gen_bool(0.5);
    let value = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let x = rng.gen_range(lo..hi);
        if integral {
            x.round()
        } else {
            x
        }
    };
    let rewards: Vec<Vec<f64>> = sizes.iter().map(|&n| (0..n).map(|_| value(rng, 0.0, 5.0)).collect()).collect();
    let mut transitions = Vec::new();
    for t in 0..layers.saturating_sub(1) {
        let mut edges = Vec::new();
        for i in 0..sizes[t] {
            for j in 0..sizes[t + 1] {
                if rng.gen_bool(0.7) {
                    edges.push(Transition {
                        from: i,
                        to: j,
                        cost: value(rng, 0.0, 3.0),
                    });
                }
            }
        }
        transitions.push(edges);
    }
    let start = match rng.gen_range(0..3) {
        0 => Start::Free,
        1 => Start::forced(sizes[0], rng.gen_range(0..sizes[0])),
        _ => Start::Entry(
            (0..sizes[0])
                .map(|_| if rng.gen_bool(0.8) { Some(value(rng, 0.0, 2.0)) } else { None })
                .collect(),
        ),
    };
    (Trellis { rewards, transitions }, start)
}

/// Every complete chain with its objective, best first.
pub fn brute_force(trellis: &Trellis, start: &Start) -> Vec<(Vec<usize>, f64)> {
    fn extend(tr: &Trellis, prefix: &mut Vec<usize>, value: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let t = prefix.len();
        if t == tr.rewards.len() {
            out.push((prefix.clone(), value));
            return;
        }
        let last = *prefix.last().unwrap();
        for e in tr.transitions[t - 1].iter().filter(|e| e.from == last) {
            prefix.push(e.to);
            extend(tr, prefix, value - e.cost + tr.rewards[t][e.to], out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for i in 0..trellis.rewards[0].len() {
        let entry = match start {
            Start::Free => Some(0.0),
            Start::Entry(c) => c[i],
        };
        if let Some(entry) = entry {
            extend(trellis, &mut vec![i], trellis.rewards[0][i] - entry, &mut out);
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

// ---- perturbations ----

#[derive(Debug, Clone)]
pub enum Perturbation {
    AddNoGo { windows: Vec<u32>, lon: f64, lat: f64, half: f64 },
    RemoveSanctuary,
    Confidence { window: u32, value: f64 },
    PolicyWeight { policy: String, gamma: f64 },
}

pub fn random_perturbation(rng: &mut ChaCha8Rng, horizon: u32, bbox: BBox) -> Perturbation {
    match rng.gen_range(0..4) {
        0 => {
            let first = rng.gen_range(0..horizon);
            let last = rng.gen_range(first..horizon);
            Perturbation::AddNoGo {
                windows: (first..=last).collect(),
                lon: rng.gen_range(bbox.lon_min + 0.3..bbox.lon_max - 0.3),
                lat: rng.gen_range(bbox.lat_min + 0.3..bbox.lat_max - 0.3),
                half: rng.gen_range(0.05..0.3),
            }
        }
        1 => Perturbation::RemoveSanctuary,
        2 => Perturbation::Confidence {
            window: rng.gen_range(0..horizon),
            value: rng.gen_range(0.05..1.0),
        },
        _ => Perturbation::PolicyWeight {
            policy: if rng.gen_bool(0.5) { "FAST" } else { "SAFE" }.into(),
            gamma: rng.gen_range(0.0..3.0),
        },
    }
}

pub fn perturbation_changes(p: &Perturbation, snap: &mission_compiler::facts::WorldSnapshot, n: usize) -> ChangeSet {
    let mut cs = ChangeSet::new();
    match p {
        Perturbation::AddNoGo { windows, lon, lat, half } => {
            let wkt = format!(
                "POLYGON(({0} {1},{2} {1},{2} {3},{0} {3},{0} {1}))",
                lon - half,
                lat - half,
                lon + half,
                lat + half
            );
            let c = Constraint {
                id: EntityId::ex(format!("constraint/perturb{n}")),
                kind: ConstraintKind::NoGo,
                geometry: mission_compiler::grid::wkt_parse(&wkt).unwrap(),
                attenuation: 0.0,
                applies_in: windows.iter().copied().collect(),
                buffer_cells: 0,
            };
            for f in c.to_facts() {
                cs.assert(f);
            }
        }
        Perturbation::RemoveSanctuary => {
            cs.retract_subject(snap, &EntityId::ex("constraint/sanctuary"));
        }
        Perturbation::Confidence { window, value } => {
            cs.replace(snap, EntityId::ex(format!("window/{window}")), term(vocab::CONFIDENCE), *value);
        }
        Perturbation::PolicyWeight { policy, gamma } => {
            cs.replace(snap, EntityId::ex(format!("policy/{policy}")), term(vocab::GAMMA_FRONT), *gamma);
        }
    }
    cs
}

pub fn fact(s: &str, p: &str, o: impl Into<Value>) -> Fact {
    Fact::new(EntityId::parse(s).unwrap(), term(p), o)
}

// ---- travel-time oracle ----

/// Exact minimum travel time by repeated relaxation over every cell pair,
/// with its own copy of the speed model.
pub fn relaxation_oracle(
    spec: &GridSpec,
    cur: &VectorField,
    hard: &Mask,
    caps: &AgentCapabilities,
    start: Cell,
    goal: Cell,
) -> Option<f64> {
    let n = spec.len();
    let mut best = vec![f64::INFINITY; n];
    best[spec.index(start)] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            if !best[i].is_finite() {
                continue;
            }
            let (r, c) = spec.cell(i);
            for j in 0..n {
                let (r2, c2) = spec.cell(j);
                let (dr, dc) = (r2 as f64 - r as f64, c2 as f64 - c as f64);
                if i == j || dr.abs() > 1.0 || dc.abs() > 1.0 || hard.get((r2, c2)) == 0.0 {
                    continue;
                }
                let norm = (dr * dr + dc * dc).sqrt();
                let (u, v) = (cur.u.get((r, c)), cur.v.get((r, c)));
                let speed = caps.cruise_speed_kmh + caps.boost_gain * (u * dc - v * dr) / norm;
                if speed <= 0.05 {
                    continue;
                }
                let t = best[i] + norm * spec.pixel_size_km / speed;
                if t < best[j] {
                    best[j] = t;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let t = best[spec.index(goal)];
    t.is_finite().then_some(t)
}
