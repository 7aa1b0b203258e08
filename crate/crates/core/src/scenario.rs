//! Synthetic worlds and the JSON scenario format.
//!
//! A scenario document has the sections `grid`, `windows`, `priors`,
//! `agents`, `policies`, `constraints`, `events`, `planner` and `facts`.
//! Raster paths are relative to the document. The `facts` section holds
//! fact-file lines applied after the structured sections, so it can add or
//! override anything the sections declare.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_plane::{confidence_decay, window_id, ConstraintKind, Policy};
use crate::facts::schema::{check_literal, term, vocab, Violation};
use crate::facts::{parse_fact_file, standard_shapes, ChangeSet, EntityId, Fact, FactError, FactStore, Value};
use crate::grid::grd1::{load_field, save_field};
use crate::grid::{abs_diff, wkt_parse, BBox, GridSpec, ScalarField, VectorField};
use crate::pipeline::{PipelineConfig, PlannerParams};
use crate::world::Registry;
use crate::Error;

// ---- synthetic fields ----

/// Double-gyre velocity at non-dimensional `(x, y) ∈ [0,2]×[0,1]`.
pub fn double_gyre_velocity(x: f64, y: f64, t: f64, amplitude: f64, period: f64) -> (f64, f64) {
    const EPS: f64 = 0.25;
    let s = EPS * (2.0 * PI * t / period).sin();
    let f = s * x * x + (1.0 - 2.0 * s) * x;
    let df = 2.0 * s * x + 1.0 - 2.0 * s;
    let u = -PI * amplitude * (PI * f).sin() * (PI * y).cos();
    let v = PI * amplitude * (PI * f).cos() * (PI * y).sin() * df;
    (u, v)
}

/// Double-gyre currents over the grid's bounding box (eastward `u`,
/// northward `v`), sampled at cell centres.
pub fn gen_double_gyre(spec: &GridSpec, t: f64, amplitude: f64, period: f64) -> VectorField {
    let b = spec.bbox;
    let xy = |cell| {
        let (lon, lat) = spec.cell_center(cell);
        (
            2.0 * (lon - b.lon_min) / (b.lon_max - b.lon_min),
            (lat - b.lat_min) / (b.lat_max - b.lat_min),
        )
    };
    let sample = |pick: fn((f64, f64)) -> f64| {
        ScalarField::from_fn(*spec, |c| {
            let (x, y) = xy(c);
            pick(double_gyre_velocity(x, y, t, amplitude, period))
        })
        .expect("double gyre is finite")
    };
    VectorField::new(sample(|p| p.0), sample(|p| p.1)).expect("same spec")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub row: f64,
    pub col: f64,
    pub amplitude: f64,
    pub sigma: f64,
    pub drift: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SstSeries {
    pub fields: Vec<ScalarField>,
    pub bumps: Vec<Bump>,
    /// Upper bound on `|cell − mean of its 4 neighbours|` over interior cells.
    pub smoothness_bound: f64,
}

pub const SST_BUMPS: usize = 12;
const SST_SIGMA: (f64, f64) = (4.0, 10.0);
const SST_AMPLITUDE: (f64, f64) = (0.5, 2.0);

/// Drifting Gaussian bumps over a meridional gradient, one field per window.
///
/// The gradient is linear, so it adds nothing to the 4-neighbour deviation.
/// For one bump the second difference along an axis is bounded by `A/σ²`,
/// giving a deviation of at most `A/(2σ²)`; summing over bumps yields
/// `N·A_max/(2σ_min²)`.
pub fn gen_sst_series(spec: &GridSpec, windows: usize, seed: u64) -> SstSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<Bump> = (0..SST_BUMPS)
        .map(|_| Bump {
            row: rng.gen_range(0.0..spec.rows as f64),
            col: rng.gen_range(0.0..spec.cols as f64),
            amplitude: rng.gen_range(SST_AMPLITUDE.0..SST_AMPLITUDE.1),
            sigma: rng.gen_range(SST_SIGMA.0..SST_SIGMA.1),
            drift: (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        })
        .collect();
    let fields = (0..windows)
        .map(|t| {
            ScalarField::from_fn(*spec, |(r, c)| {
                let mut x = 28.0 - 3.0 * r as f64 / spec.rows as f64;
                for b in &bumps {
                    let dr = r as f64 - (b.row + b.drift.0 * t as f64);
                    let dc = c as f64 - (b.col + b.drift.1 * t as f64);
                    x += b.amplitude * (-(dr * dr + dc * dc) / (2.0 * b.sigma * b.sigma)).exp();
                }
                x
            })
            .expect("finite")
        })
        .collect();
    SstSeries {
        fields,
        bumps,
        smoothness_bound: SST_BUMPS as f64 * SST_AMPLITUDE.1 / (2.0 * SST_SIGMA.0 * SST_SIGMA.0),
    }
}

/// `|sst[t+1] − sst[t]|`, with the last difference repeated for the final window.
pub fn derive_frontness(sst: &[ScalarField]) -> Result<Vec<ScalarField>, Error> {
    if sst.len() < 2 {
        return Err(Error::Scenario(format!("frontness needs at least 2 fields, got {}", sst.len())));
    }
    let mut out = sst
        .windows(2)
        .map(|w| abs_diff(&w[1], &w[0]))
        .collect::<Result<Vec<_>, _>>()?;
    out.push(out.last().expect("non-empty").clone());
    Ok(out)
}

// ---- document ----

fn default_duration() -> f64 {
    24.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDoc {
    pub start: String,
    #[serde(default = "default_duration")]
    pub duration_hours: f64,
    /// Defaults to `e^{-decay_rate·t}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub base: String,
    /// Path stem of the current field; `<stem>.u.grd` and `<stem>.v.grd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDoc {
    pub id: String,
    pub policy: String,
    pub cruise_speed_kts: f64,
    pub max_speed_kts: f64,
    pub energy_per_km: f64,
    pub boost_gain: f64,
    pub energy_budget: f64,
    pub travel_budget_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDoc {
    pub name: String,
    #[serde(default)]
    pub alpha_base: f64,
    #[serde(default)]
    pub betas: BTreeMap<String, f64>,
    #[serde(default)]
    pub gamma_front: f64,
    #[serde(default)]
    pub lambda_time: f64,
    #[serde(default)]
    pub lambda_energy: f64,
    #[serde(default)]
    pub lambda_hazard: f64,
    #[serde(default)]
    pub lambda_uncertainty: f64,
    #[serde(default)]
    pub soft_overrides: BTreeMap<String, f64>,
}

impl PolicyDoc {
    pub fn to_policy(&self) -> Policy {
        Policy {
            id: policy_id(&self.name),
            name: self.name.clone(),
            alpha_base: self.alpha_base,
            betas: self.betas.clone(),
            gamma_front: self.gamma_front,
            lambda_time: self.lambda_time,
            lambda_energy: self.lambda_energy,
            lambda_hazard: self.lambda_hazard,
            lambda_uncertainty: self.lambda_uncertainty,
            soft_overrides: self.soft_overrides.clone(),
        }
    }
}

pub fn policy_id(name: &str) -> EntityId {
    EntityId::ex(format!("policy/{name}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDoc {
    pub id: String,
    pub kind: ConstraintKind,
    pub wkt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation: Option<f64>,
    #[serde(default)]
    pub applies_in: Vec<u32>,
    #[serde(default)]
    pub buffer_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDoc {
    pub id: String,
    pub window: u32,
    pub lon: f64,
    pub lat: f64,
    pub value: f64,
    pub capacity: usize,
    pub expires_after: u32,
}

fn default_evaluation() -> Option<String> {
    Some("full_kg".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub windows: Vec<WindowDoc>,
    #[serde(default)]
    pub priors: BTreeMap<String, String>,
    pub agents: Vec<AgentDoc>,
    pub policies: Vec<PolicyDoc>,
    #[serde(default = "default_evaluation")]
    pub evaluation_policy: Option<String>,
    #[serde(default)]
    pub constraints: Vec<ConstraintDoc>,
    #[serde(default)]
    pub events: Vec<EventDoc>,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub facts: Vec<String>,
}

pub fn current_paths(stem: &str) -> (String, String) {
    (format!("{stem}.u.grd"), format!("{stem}.v.grd"))
}

fn bbox_wkt(b: &BBox) -> String {
    format!(
        "POLYGON(({0} {1},{2} {1},{2} {3},{0} {3},{0} {1}))",
        b.lon_min, b.lat_min, b.lon_max, b.lat_max
    )
}

impl ScenarioDoc {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            params: self.planner,
            evaluation_policy: self.evaluation_policy.clone(),
        }
    }

    /// Every raster path the document references.
    pub fn grid_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for w in &self.windows {
            out.insert(w.base.clone());
            if let Some(stem) = &w.currents {
                let (u, v) = current_paths(stem);
                out.insert(u);
                out.insert(v);
            }
        }
        out.extend(self.priors.values().cloned());
        out
    }

    /// Facts for the structured sections (the `facts` section excluded).
    pub fn structured_facts(&self) -> Result<Vec<Fact>, Error> {
        let ty = |e: &EntityId, class: &str| Fact::new(e.clone(), term(vocab::TYPE), term(class));
        let mut out = Vec::new();
        let g = EntityId::ex("grid/main");
        out.extend([
            ty(&g, vocab::GRID_SPEC),
            Fact::new(g.clone(), term(vocab::ROWS), self.grid.rows as i64),
            Fact::new(g.clone(), term(vocab::COLS), self.grid.cols as i64),
            Fact::new(g.clone(), term(vocab::PIXEL_SIZE_KM), self.grid.pixel_size_km),
            Fact::new(g.clone(), term(vocab::AS_WKT), Value::Wkt(bbox_wkt(&self.grid.bbox))),
        ]);
        for (t, w) in self.windows.iter().enumerate() {
            let id = window_id(t as u32);
            let conf = w
                .confidence
                .unwrap_or_else(|| confidence_decay(t as u32, self.planner.decay_rate));
            out.extend([
                ty(&id, vocab::TIME_WINDOW),
                Fact::new(id.clone(), term(vocab::INDEX), t as i64),
                Fact::new(id.clone(), term(vocab::HAS_BEGINNING), Value::DateTime(w.start.clone())),
                Fact::new(id.clone(), term(vocab::DURATION_HOURS), w.duration_hours),
                Fact::new(id.clone(), term(vocab::CONFIDENCE), conf),
            ]);
            let base = EntityId::ex(format!("layer/base/{t}"));
            out.extend([
                ty(&base, vocab::BASE_LAYER),
                Fact::new(base.clone(), term(vocab::FOR_WINDOW), id.clone()),
                Fact::new(base.clone(), term(vocab::GRID_REF), Value::Str(w.base.clone())),
            ]);
            if let Some(stem) = &w.currents {
                let cur = EntityId::ex(format!("layer/currents/{t}"));
                let (u, v) = current_paths(stem);
                out.extend([
                    ty(&cur, vocab::CURRENT_FIELD),
                    Fact::new(cur.clone(), term(vocab::FOR_WINDOW), id.clone()),
                    Fact::new(cur.clone(), term(vocab::GRID_REF_U), Value::Str(u)),
                    Fact::new(cur.clone(), term(vocab::GRID_REF_V), Value::Str(v)),
                ]);
            }
        }
        for (name, path) in &self.priors {
            let id = EntityId::ex(format!("layer/prior/{name}"));
            out.extend([
                ty(&id, vocab::PRIOR_LAYER),
                Fact::new(id.clone(), term(vocab::NAME), Value::Str(name.clone())),
                Fact::new(id.clone(), term(vocab::GRID_REF), Value::Str(path.clone())),
            ]);
        }
        for p in &self.policies {
            out.extend(p.to_policy().to_facts());
        }
        for a in &self.agents {
            let id = EntityId::new(crate::facts::Namespace::Ex, format!("agent/{}", a.id))?;
            let caps = EntityId::ex(format!("caps/{}", a.id));
            out.extend([
                ty(&id, vocab::AGENT),
                Fact::new(id.clone(), term(vocab::USES_POLICY), policy_id(&a.policy)),
                Fact::new(id.clone(), term(vocab::HAS_CAPABILITIES), caps.clone()),
                ty(&caps, vocab::AGENT_CAPABILITIES),
                Fact::new(caps.clone(), term(vocab::CRUISE_SPEED_KTS), a.cruise_speed_kts),
                Fact::new(caps.clone(), term(vocab::MAX_SPEED_KTS), a.max_speed_kts),
                Fact::new(caps.clone(), term(vocab::ENERGY_PER_KM), a.energy_per_km),
                Fact::new(caps.clone(), term(vocab::BOOST_GAIN), a.boost_gain),
                Fact::new(caps.clone(), term(vocab::ENERGY_BUDGET), a.energy_budget),
                Fact::new(caps.clone(), term(vocab::TRAVEL_BUDGET_HOURS), a.travel_budget_hours),
            ]);
        }
        for c in &self.constraints {
            let constraint = crate::data_plane::Constraint {
                id: EntityId::new(crate::facts::Namespace::Ex, format!("constraint/{}", c.id))?,
                kind: c.kind,
                geometry: wkt_parse(&c.wkt)?,
                attenuation: c.attenuation.unwrap_or(0.0),
                applies_in: c.applies_in.iter().copied().collect(),
                buffer_cells: c.buffer_cells,
            };
            out.extend(constraint.to_facts());
        }
        for e in &self.events {
            let id = EntityId::new(crate::facts::Namespace::Ex, format!("event/{}", e.id))?;
            out.extend([
                ty(&id, vocab::EVENT),
                Fact::new(id.clone(), term(vocab::FOR_WINDOW), window_id(e.window)),
                Fact::new(id.clone(), term(vocab::AS_WKT), Value::Wkt(format!("POINT({} {})", e.lon, e.lat))),
                Fact::new(id.clone(), term(vocab::VALUE), e.value),
                Fact::new(id.clone(), term(vocab::CAPACITY), e.capacity as i64),
                Fact::new(id.clone(), term(vocab::EXPIRES_AFTER), e.expires_after as i64),
            ]);
        }
        Ok(out)
    }
}

// ---- loaded scenarios ----

/// A document with its rasters loaded and its facts committed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub dir: PathBuf,
    pub registry: Arc<Registry>,
    pub store: FactStore,
}

/// Rasters generated in memory, keyed by their document paths.
#[derive(Debug, Clone, Default)]
pub struct GridBundle {
    pub fields: BTreeMap<String, ScalarField>,
}

/// Commits `cs`; literal type and range failures come back as violations
/// naming the offending subject.
fn commit_reporting(store: &mut FactStore, cs: ChangeSet) -> Result<(), Error> {
    let bad: Vec<Violation> = cs
        .asserts
        .iter()
        .filter_map(|f| {
            check_literal(&f.predicate, &f.object).err().map(|e| Violation {
                entity: f.subject.clone(),
                rule: "literal".into(),
                reason: e.to_string(),
            })
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    store.commit(cs)?;
    Ok(())
}

impl Scenario {
    /// Builds the fact store from `doc`. Shape violations are errors.
    pub fn assemble(doc: ScenarioDoc, dir: PathBuf, registry: Registry) -> Result<Scenario, Error> {
        for (key, f) in &registry {
            doc.grid.ensure_same(f.spec()).map_err(|e| Error::Scenario(format!("{key}: {e}")))?;
        }
        let mut store = FactStore::new();
        commit_reporting(&mut store, ChangeSet::asserting(doc.structured_facts()?))?;
        if !doc.facts.is_empty() {
            let text = doc.facts.join("\n");
            let lines = parse_fact_file(&text).map_err(|e| match e {
                FactError::Parse { line, reason } => {
                    Error::Scenario(format!("facts section line {line}: {reason}"))
                }
                other => other.into(),
            })?;
            let snap = store.snapshot();
            commit_reporting(&mut store, ChangeSet::from_lines(&snap, lines))?;
        }
        let violations = crate::facts::schema::validate(&store.snapshot(), &standard_shapes());
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(Scenario {
            doc,
            dir,
            registry: Arc::new(registry),
            store,
        })
    }

    /// Same as writing the bundle and loading it back: values are rounded
    /// to the `f32` storage precision.
    pub fn from_bundle(doc: ScenarioDoc, bundle: &GridBundle) -> Result<Scenario, Error> {
        let registry = bundle
            .fields
            .iter()
            .map(|(k, f)| (k.clone(), Arc::new(f.map(|x| x as f32 as f64))))
            .collect();
        Scenario::assemble(doc, PathBuf::from("."), registry)
    }

    pub fn config(&self) -> PipelineConfig {
        self.doc.config()
    }

    /// Switches every agent to the named preset policy, declaring it if needed.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), Error> {
        let preset = preset(name).ok_or_else(|| Error::Scenario(format!("unknown preset `{name}`")))?;
        let snap = self.store.snapshot();
        let mut cs = ChangeSet::new();
        let pol = preset.to_policy();
        if !snap.has_subject(&pol.id) {
            for f in pol.to_facts() {
                cs.assert(f);
            }
        }
        for agent in snap.instances(vocab::AGENT) {
            cs.replace(&snap, agent, term(vocab::USES_POLICY), Value::Entity(pol.id.clone()));
        }
        self.store.commit(cs)?;
        Ok(())
    }
}

fn read_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Loads a scenario document and every raster it references.
pub fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = fs::read_to_string(path).map_err(|e| read_error(path, e))?;
    let doc: ScenarioDoc = serde_json::from_str(&text).map_err(|e| {
        Error::Scenario(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    doc.grid.check()?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut registry = Registry::new();
    for key in doc.grid_refs() {
        let field = load_field(&dir.join(&key), &doc.grid)?;
        registry.insert(key, Arc::new(field));
    }
    Scenario::assemble(doc, dir, registry)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| read_error(parent, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes).map_err(|e| read_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| read_error(path, e))
}

/// Writes the document as `scenario.json` plus its rasters under `dir`.
pub fn write_scenario(dir: &Path, doc: &ScenarioDoc, bundle: &GridBundle) -> Result<PathBuf, Error> {
    for (key, f) in &bundle.fields {
        let path = dir.join(key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| read_error(parent, e))?;
        }
        save_field(&path, f)?;
    }
    let path = dir.join("scenario.json");
    let json = serde_json::to_string_pretty(doc).expect("document serializes");
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

// ---- presets and the reference world ----

pub const PRESETS: [&str; 5] = ["naive", "front+", "poi_focus", "sanct_soft", "front+poi"];

fn lambdas(mut p: PolicyDoc) -> PolicyDoc {
    p.lambda_time = 0.01;
    p.lambda_energy = 0.001;
    p.lambda_hazard = 0.1;
    p.lambda_uncertainty = 0.1;
    p
}

fn weights(name: &str, alpha: f64, gamma: f64, betas: &[(&str, f64)], overrides: &[(&str, f64)]) -> PolicyDoc {
    PolicyDoc {
        name: name.to_string(),
        alpha_base: alpha,
        betas: betas.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        gamma_front: gamma,
        lambda_time: 0.0,
        lambda_energy: 0.0,
        lambda_hazard: 0.0,
        lambda_uncertainty: 0.0,
        soft_overrides: overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// The five ablation presets; each switches on the knob its name names.
pub fn preset(name: &str) -> Option<PolicyDoc> {
    let p = match name {
        "naive" => weights("naive", 1.0, 0.0, &[], &[]),
        "front+" => weights("front+", 1.0, 2.0, &[], &[]),
        "poi_focus" => weights("poi_focus", 1.0, 0.0, &[("poi", 1.5)], &[]),
        "sanct_soft" => weights("sanct_soft", 1.0, 0.0, &[], &[("ex:constraint/sanctuary", 0.1)]),
        "front+poi" => weights("front+poi", 1.0, 2.0, &[("poi", 1.5)], &[]),
        _ => return None,
    };
    Some(lambdas(p))
}

pub const REFERENCE_BBOX: BBox = BBox {
    lon_min: -90.0,
    lat_min: 26.0,
    lon_max: -86.0,
    lat_max: 29.0,
};

fn gaussian_field(spec: &GridSpec, centres: &[(f64, f64, f64)], sigma_deg: f64) -> ScalarField {
    ScalarField::from_fn(*spec, |cell| {
        let (lon, lat) = spec.cell_center(cell);
        centres
            .iter()
            .map(|&(x, y, a)| {
                let d2 = (lon - x).powi(2) + (lat - y).powi(2);
                a * (-d2 / (2.0 * sigma_deg * sigma_deg)).exp()
            })
            .sum()
    })
    .expect("finite")
}

/// The bundled seven-window, three-agent world.
pub fn reference_scenario(seed: u64) -> Result<(ScenarioDoc, GridBundle), Error> {
    let spec = GridSpec::new(64, 81, REFERENCE_BBOX, 5.0)?;
    let windows = 7;
    let sst = gen_sst_series(&spec, windows, seed);
    let front = derive_frontness(&sst.fields)?;
    // the sanctuary sits on the strongest persistent front so attenuating it matters
    let peak = spec
        .cells()
        .max_by(|&a, &b| {
            let sa: f64 = front.iter().map(|f| f.get(a)).sum();
            let sb: f64 = front.iter().map(|f| f.get(b)).sum();
            sa.total_cmp(&sb).then(spec.index(b).cmp(&spec.index(a)))
        })
        .expect("non-empty grid");
    let (plon, plat) = spec.cell_center(peak);
    let (slon, slat) = (
        plon.clamp(REFERENCE_BBOX.lon_min + 0.4, REFERENCE_BBOX.lon_max - 0.4),
        plat.clamp(REFERENCE_BBOX.lat_min + 0.4, REFERENCE_BBOX.lat_max - 0.4),
    );
    let sanctuary = format!(
        "POLYGON(({0} {1},{2} {1},{2} {3},{0} {3},{0} {1}))",
        slon - 0.4,
        slat - 0.4,
        slon + 0.4,
        slat + 0.4
    );
    let mut bundle = GridBundle::default();
    let mut wdocs = Vec::new();
    for (t, f) in front.into_iter().enumerate() {
        let base = format!("grids/base_{t}.grd");
        let stem = format!("grids/currents_{t}");
        let cur = gen_double_gyre(&spec, t as f64, 0.6, 10.0);
        let (u, v) = current_paths(&stem);
        bundle.fields.insert(base.clone(), f);
        bundle.fields.insert(u, cur.u);
        bundle.fields.insert(v, cur.v);
        wdocs.push(WindowDoc {
            start: format!("2024-06-{:02}T00:00:00Z", t + 1),
            duration_hours: 24.0,
            confidence: None,
            base,
            currents: Some(stem),
        });
    }
    // vertical science corridor around -88.0
    let corridor = ScalarField::from_fn(spec, |cell| {
        let (lon, _) = spec.cell_center(cell);
        (-(lon + 88.0).powi(2) / (2.0 * 0.12f64.powi(2))).exp()
    })?;
    let poi = gaussian_field(
        &spec,
        &[(-87.0, 27.0, 1.0), (-89.2, 26.6, 0.8), (-86.6, 28.2, 0.9), (-88.6, 27.6, 0.7)],
        0.15,
    );
    bundle.fields.insert("grids/corridor.grd".into(), corridor);
    bundle.fields.insert("grids/poi.grd".into(), poi);

    let fast = PolicyDoc {
        name: "FAST".into(),
        alpha_base: 1.5,
        betas: BTreeMap::from([("corridor".into(), 0.3), ("poi".into(), 0.3)]),
        gamma_front: 1.0,
        lambda_time: 0.005,
        lambda_energy: 0.0005,
        lambda_hazard: 0.05,
        lambda_uncertainty: 0.1,
        soft_overrides: BTreeMap::new(),
    };
    let safe = PolicyDoc {
        name: "SAFE".into(),
        alpha_base: 1.0,
        betas: BTreeMap::from([("corridor".into(), 0.3), ("poi".into(), 0.3)]),
        gamma_front: 0.2,
        lambda_time: 0.01,
        lambda_energy: 0.001,
        lambda_hazard: 0.5,
        lambda_uncertainty: 0.1,
        soft_overrides: BTreeMap::from([("ex:constraint/sanctuary".into(), 0.1)]),
    };
    let full_kg = PolicyDoc {
        name: "full_kg".into(),
        alpha_base: 1.0,
        betas: BTreeMap::from([("corridor".into(), 0.5), ("poi".into(), 1.0)]),
        gamma_front: 1.0,
        lambda_time: 0.0,
        lambda_energy: 0.0,
        lambda_hazard: 0.0,
        lambda_uncertainty: 0.0,
        soft_overrides: BTreeMap::new(),
    };
    let agent = |id: &str, policy: &str, cruise: f64, boost: f64, energy: f64| AgentDoc {
        id: id.into(),
        policy: policy.into(),
        cruise_speed_kts: cruise,
        max_speed_kts: cruise * 1.5,
        energy_per_km: energy,
        boost_gain: boost,
        energy_budget: 400.0,
        travel_budget_hours: 24.0,
    };
    let doc = ScenarioDoc {
        name: "reference".into(),
        seed,
        grid: spec,
        windows: wdocs,
        priors: BTreeMap::from([
            ("corridor".into(), "grids/corridor.grd".into()),
            ("poi".into(), "grids/poi.grd".into()),
        ]),
        agents: vec![
            agent("alpha", "FAST", 2.5, 1.0, 1.2),
            agent("bravo", "SAFE", 1.8, 0.8, 0.8),
            agent("charlie", "FAST", 2.2, 1.0, 1.0),
        ],
        policies: vec![fast, safe, full_kg],
        evaluation_policy: Some("full_kg".into()),
        constraints: vec![
            ConstraintDoc {
                id: "land".into(),
                kind: ConstraintKind::NoGo,
                wkt: "POLYGON((-90 28.3,-89.2 28.45,-88.6 28.7,-88.3 29,-90 29,-90 28.3))".into(),
                attenuation: None,
                applies_in: vec![],
                buffer_cells: 5,
            },
            ConstraintDoc {
                id: "sanctuary".into(),
                kind: ConstraintKind::Soft,
                wkt: sanctuary,
                attenuation: Some(0.4),
                applies_in: vec![],
                buffer_cells: 0,
            },
        ],
        events: vec![EventDoc {
            id: "bloom".into(),
            window: 2,
            lon: -88.9,
            lat: 27.1,
            value: 0.5,
            capacity: 1,
            expires_after: 4,
        }],
        planner: PlannerParams::default(),
        facts: vec![],
    };
    Ok((doc, bundle))
}
