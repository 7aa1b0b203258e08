//! Typed view of a fact snapshot plus the rasters its layers reference.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::control_plane::AgentCapabilities;
use crate::coordinator::Event;
use crate::data_plane::{Constraint, ConstraintKind, Layer, Policy, TimeWindow};
use crate::facts::schema::{term, vocab};
use crate::facts::{EntityId, Value, WorldSnapshot};
use crate::grid::{parse_point, wkt_parse, BBox, GridSpec, ScalarField, VectorField};
use crate::Error;

/// Rasters keyed by the `ex:gridRef*` strings that name them.
pub type Registry = BTreeMap<String, Arc<ScalarField>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub id: EntityId,
    pub policy: Policy,
    pub caps: AgentCapabilities,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub version: u64,
    pub spec: GridSpec,
    pub windows: Vec<TimeWindow>,
    pub agents: Vec<AgentSpec>,
    pub policies: BTreeMap<String, Policy>,
    pub base: Vec<Layer>,
    pub currents: Vec<Arc<VectorField>>,
    pub current_ids: Vec<Option<EntityId>>,
    pub priors: BTreeMap<String, Layer>,
    pub constraints: Vec<Constraint>,
    pub events: Vec<Event>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn real(s: &WorldSnapshot, e: &EntityId, p: &str) -> Option<f64> {
    s.one(e, p).and_then(Value::as_real)
}

fn text<'a>(s: &'a WorldSnapshot, e: &EntityId, p: &str) -> Option<&'a str> {
    s.one(e, p).and_then(Value::as_text)
}

fn raster(registry: &Registry, key: &str, owner: &EntityId) -> Result<Arc<ScalarField>, Error> {
    registry
        .get(key)
        .cloned()
        .ok_or_else(|| bad(format!("{owner} references unregistered grid `{key}`")))
}

/// Window index linked through `ex:forWindow`.
fn for_window(s: &WorldSnapshot, e: &EntityId) -> Option<u32> {
    s.one(e, vocab::FOR_WINDOW)
        .and_then(Value::as_entity)
        .and_then(|w| s.window_index(w))
}

pub fn grid_spec(s: &WorldSnapshot) -> Result<GridSpec, Error> {
    let specs = s.instances(vocab::GRID_SPEC);
    let [g] = specs.as_slice() else {
        return Err(bad(format!("expected exactly one ex:GridSpec, found {}", specs.len())));
    };
    let int = |p: &str| {
        s.one(g, p)
            .and_then(Value::as_int)
            .and_then(|i| usize::try_from(i).ok())
            .ok_or_else(|| bad(format!("{g} lacks {p}")))
    };
    let wkt = text(s, g, vocab::AS_WKT).ok_or_else(|| bad(format!("{g} lacks geo:asWKT")))?;
    let ring = wkt_parse(wkt)?;
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y) in ring.ring() {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let pixel = real(s, g, vocab::PIXEL_SIZE_KM).ok_or_else(|| bad(format!("{g} lacks ex:pixelSizeKm")))?;
    Ok(GridSpec::new(
        int(vocab::ROWS)?,
        int(vocab::COLS)?,
        BBox::new(lo.0, lo.1, hi.0, hi.1),
        pixel,
    )?)
}

pub fn policy(s: &WorldSnapshot, id: &EntityId) -> Result<Policy, Error> {
    if !s.has_type(id, vocab::POLICY) {
        return Err(bad(format!("{id} is not an ex:Policy")));
    }
    let json = |p: &str| -> Result<BTreeMap<String, f64>, Error> {
        match text(s, id, p) {
            None => Ok(BTreeMap::new()),
            Some(t) => serde_json::from_str(t).map_err(|e| bad(format!("{id} {p}: {e}"))),
        }
    };
    let w = |p: &str| real(s, id, p).unwrap_or(0.0);
    let p = Policy {
        id: id.clone(),
        name: text(s, id, vocab::NAME).unwrap_or(id.leaf()).to_string(),
        alpha_base: w(vocab::ALPHA_BASE),
        betas: json(vocab::PRIORS)?,
        gamma_front: w(vocab::GAMMA_FRONT),
        lambda_time: w(vocab::LAMBDA_TIME),
        lambda_energy: w(vocab::LAMBDA_ENERGY),
        lambda_hazard: w(vocab::LAMBDA_HAZARD),
        lambda_uncertainty: w(vocab::LAMBDA_UNCERTAINTY),
        soft_overrides: json(vocab::SOFT_OVERRIDES)?,
    };
    p.validate()?;
    Ok(p)
}

fn capabilities(s: &WorldSnapshot, id: &EntityId) -> Result<AgentCapabilities, Error> {
    let cruise = real(s, id, vocab::CRUISE_SPEED_KTS).ok_or_else(|| bad(format!("{id} lacks cruise speed")))?;
    let caps = AgentCapabilities::from_knots(
        cruise,
        real(s, id, vocab::MAX_SPEED_KTS).unwrap_or(cruise),
        real(s, id, vocab::ENERGY_PER_KM).unwrap_or(0.0),
        real(s, id, vocab::BOOST_GAIN).unwrap_or(1.0),
        real(s, id, vocab::ENERGY_BUDGET).unwrap_or(f64::MAX),
        real(s, id, vocab::TRAVEL_BUDGET_HOURS).unwrap_or(f64::MAX),
    )?;
    Ok(caps)
}

pub fn constraint(s: &WorldSnapshot, id: &EntityId) -> Result<Constraint, Error> {
    let kind = text(s, id, vocab::KIND)
        .and_then(ConstraintKind::parse)
        .ok_or_else(|| bad(format!("{id} needs ex:kind \"no_go\" or \"soft\"")))?;
    let wkt = text(s, id, vocab::AS_WKT).ok_or_else(|| bad(format!("{id} lacks geo:asWKT")))?;
    let applies_in = s
        .objects(id, &term(vocab::APPLIES_IN))
        .filter_map(Value::as_entity)
        .map(|w| s.window_index(w).ok_or_else(|| bad(format!("{id} applies in unknown window {w}"))))
        .collect::<Result<BTreeSet<u32>, Error>>()?;
    let c = Constraint {
        id: id.clone(),
        kind,
        geometry: wkt_parse(wkt)?,
        attenuation: real(s, id, vocab::ATTENUATION).unwrap_or(if kind == ConstraintKind::Soft { 0.5 } else { 0.0 }),
        applies_in,
        buffer_cells: s
            .one(id, vocab::BUFFER_CELLS)
            .and_then(Value::as_int)
            .unwrap_or(0) as usize,
    };
    c.validate()?;
    Ok(c)
}

fn event(s: &WorldSnapshot, id: &EntityId, spec: &GridSpec) -> Result<Event, Error> {
    let window = for_window(s, id).ok_or_else(|| bad(format!("{id} lacks a window")))?;
    let at = text(s, id, vocab::AS_WKT).ok_or_else(|| bad(format!("{id} lacks geo:asWKT")))?;
    let (lon, lat) = parse_point(at)?;
    let cell = spec
        .cell_of(lon, lat)
        .ok_or_else(|| bad(format!("{id} lies outside the grid")))?;
    let expires_after = s
        .one(id, vocab::EXPIRES_AFTER)
        .and_then(Value::as_int)
        .map_or(window, |i| i as u32);
    if expires_after < window {
        return Err(bad(format!("{id} expires before it starts")));
    }
    Ok(Event {
        id: id.clone(),
        window,
        cell,
        value: real(s, id, vocab::VALUE).unwrap_or(0.0),
        capacity: s
            .one(id, vocab::CAPACITY)
            .and_then(Value::as_int)
            .unwrap_or(1) as usize,
        expires_after,
    })
}

impl World {
    pub fn horizon(&self) -> usize {
        self.windows.len()
    }

    pub fn agent(&self, id: &EntityId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.id == id)
    }

    /// Resolves every mission entity in `s`, loading rasters from `registry`.
    pub fn resolve(s: &WorldSnapshot, registry: &Registry) -> Result<World, Error> {
        let spec = grid_spec(s)?;
        let mut windows: Vec<TimeWindow> = s
            .instances(vocab::TIME_WINDOW)
            .into_iter()
            .map(|id| {
                let index = s.window_index(&id).ok_or_else(|| bad(format!("{id} lacks ex:index")))?;
                Ok(TimeWindow {
                    index,
                    start: s
                        .one(&id, vocab::HAS_BEGINNING)
                        .and_then(Value::as_text)
                        .unwrap_or("")
                        .to_string(),
                    duration_hours: real(s, &id, vocab::DURATION_HOURS).unwrap_or(24.0),
                    confidence: real(s, &id, vocab::CONFIDENCE).unwrap_or(1.0),
                    id,
                })
            })
            .collect::<Result<_, Error>>()?;
        windows.sort_by_key(|w| w.index);
        if windows.is_empty() {
            return Err(bad("scenario declares no time windows"));
        }
        for (i, w) in windows.iter().enumerate() {
            if w.index as usize != i {
                return Err(bad(format!("window indexes must be contiguous from 0; found {}", w.index)));
            }
        }
        let n = windows.len();

        let mut base: Vec<Option<Layer>> = vec![None; n];
        for id in s.instances(vocab::BASE_LAYER) {
            let t = for_window(s, &id).ok_or_else(|| bad(format!("{id} lacks a window")))? as usize;
            let key = text(s, &id, vocab::GRID_REF).ok_or_else(|| bad(format!("{id} lacks ex:gridRef")))?;
            let field = raster(registry, key, &id)?;
            spec.ensure_same(field.spec())?;
            if t >= n || base[t].is_some() {
                return Err(bad(format!("{id}: window {t} needs exactly one base layer")));
            }
            base[t] = Some(Layer { id, field });
        }
        let base = base
            .into_iter()
            .enumerate()
            .map(|(t, l)| l.ok_or_else(|| bad(format!("window {t} has no base layer"))))
            .collect::<Result<Vec<_>, Error>>()?;

        let zero = Arc::new(VectorField::zeros(spec));
        let mut currents = vec![zero; n];
        let mut current_ids = vec![None; n];
        for id in s.instances(vocab::CURRENT_FIELD) {
            let t = for_window(s, &id).ok_or_else(|| bad(format!("{id} lacks a window")))? as usize;
            if t >= n {
                return Err(bad(format!("{id} refers to window {t} beyond the horizon")));
            }
            let key = |p: &str| text(s, &id, p).ok_or_else(|| bad(format!("{id} lacks {p}")));
            let u = raster(registry, key(vocab::GRID_REF_U)?, &id)?;
            let v = raster(registry, key(vocab::GRID_REF_V)?, &id)?;
            spec.ensure_same(u.spec())?;
            currents[t] = Arc::new(VectorField::new((*u).clone(), (*v).clone())?);
            current_ids[t] = Some(id);
        }

        let mut priors = BTreeMap::new();
        for id in s.instances(vocab::PRIOR_LAYER) {
            let name = text(s, &id, vocab::NAME).ok_or_else(|| bad(format!("{id} lacks ex:name")))?;
            let key = text(s, &id, vocab::GRID_REF).ok_or_else(|| bad(format!("{id} lacks ex:gridRef")))?;
            let field = raster(registry, key, &id)?;
            spec.ensure_same(field.spec())?;
            priors.insert(name.to_string(), Layer { id, field });
        }

        let mut policies = BTreeMap::new();
        for id in s.instances(vocab::POLICY) {
            let p = policy(s, &id)?;
            policies.insert(p.name.clone(), p);
        }

        let mut agents = Vec::new();
        for id in s.instances(vocab::AGENT) {
            let uses_policy = term(vocab::USES_POLICY);
            let uses: Vec<&EntityId> = s
                .objects(&id, &uses_policy)
                .filter_map(Value::as_entity)
                .collect();
            let [pid] = uses.as_slice() else {
                return Err(crate::data_plane::DataPlaneError::MissingPolicy(id.clone()).into());
            };
            let caps_id = s
                .one(&id, vocab::HAS_CAPABILITIES)
                .and_then(Value::as_entity)
                .ok_or_else(|| bad(format!("{id} lacks ex:hasCapabilities")))?;
            agents.push(AgentSpec {
                policy: policy(s, pid)?,
                caps: capabilities(s, caps_id)?,
                id,
            });
        }
        if agents.is_empty() {
            return Err(bad("scenario declares no agents"));
        }

        let constraints = s
            .instances(vocab::CONSTRAINT)
            .iter()
            .map(|id| constraint(s, id))
            .collect::<Result<Vec<_>, Error>>()?;
        let events = s
            .instances(vocab::EVENT)
            .iter()
            .map(|id| event(s, id, &spec))
            .collect::<Result<Vec<_>, Error>>()?;

        Ok(World {
            version: s.version(),
            spec,
            windows,
            agents,
            policies,
            base,
            currents,
            current_ids,
            priors,
            constraints,
            events,
        })
    }
}
