//! Mission-tensor compilation.
//!
//! For agent `a` and window `t` the compiled utility raster is
//!
//! ```text
//! U = w_t * normalize01((alpha*B + sum_k beta_k*P_k + gamma*grad|B| + events) * M_soft) * M_hard
//! ```
//!
//! Normalization is applied to the soft-masked blend, then the result is
//! scaled by the window confidence and hard-masked, so every tensor lies in
//! `[0, w_t]` and no-go cells are exactly zero.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coordinator::Event;
use crate::facts::schema::{term, vocab};
use crate::facts::{EntityId, Fact, Value};
use crate::grid::{
    buffer_mask, gradient_magnitude, normalize01, rasterize_polygon, GridError, GridSpec, Mask,
    Polygon, ScalarField,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DataPlaneError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("agent {0} has no policy")]
    MissingPolicy(EntityId),
    #[error("policy {policy} weights prior `{prior}` which is not registered")]
    MissingPrior { policy: String, prior: String },
    #[error("invalid policy {0}: {1}")]
    InvalidPolicy(String, String),
    #[error("invalid constraint {0}: {1}")]
    InvalidConstraint(EntityId, String),
}

/// Declarative weights for one agent behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub id: EntityId,
    pub name: String,
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
    /// Constraint id (as written, e.g. `ex:constraint/sanctuary`) to attenuation.
    #[serde(default)]
    pub soft_overrides: BTreeMap<String, f64>,
}

impl Policy {
    /// A policy weighting only the base layer.
    pub fn base_only(name: &str) -> Self {
        Policy {
            id: EntityId::ex(format!("policy/{name}")),
            name: name.to_string(),
            alpha_base: 1.0,
            betas: BTreeMap::new(),
            gamma_front: 0.0,
            lambda_time: 0.0,
            lambda_energy: 0.0,
            lambda_hazard: 0.0,
            lambda_uncertainty: 0.0,
            soft_overrides: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DataPlaneError> {
        let bad = |msg: String| Err(DataPlaneError::InvalidPolicy(self.name.clone(), msg));
        let weights = [
            ("alpha_base", self.alpha_base),
            ("gamma_front", self.gamma_front),
            ("lambda_time", self.lambda_time),
            ("lambda_energy", self.lambda_energy),
            ("lambda_hazard", self.lambda_hazard),
            ("lambda_uncertainty", self.lambda_uncertainty),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be a finite value >= 0, got {w}"));
            }
        }
        for (k, b) in &self.betas {
            if !(*b >= 0.0 && b.is_finite()) {
                return bad(format!("beta `{k}` must be >= 0, got {b}"));
            }
        }
        for (k, a) in &self.soft_overrides {
            if !(0.0..=1.0).contains(a) {
                return bad(format!("soft override `{k}` must lie in [0,1], got {a}"));
            }
        }
        let total = self.alpha_base + self.gamma_front + self.betas.values().sum::<f64>();
        if !(total > 0.0) {
            return bad("alpha + sum(beta) + gamma must be > 0".into());
        }
        Ok(())
    }

    pub fn to_facts(&self) -> Vec<Fact> {
        let id = &self.id;
        let real = |p: &str, x: f64| Fact::new(id.clone(), term(p), x);
        vec![
            Fact::new(id.clone(), term(vocab::TYPE), term(vocab::POLICY)),
            Fact::new(id.clone(), term(vocab::NAME), Value::Str(self.name.clone())),
            real(vocab::ALPHA_BASE, self.alpha_base),
            real(vocab::GAMMA_FRONT, self.gamma_front),
            real(vocab::LAMBDA_TIME, self.lambda_time),
            real(vocab::LAMBDA_ENERGY, self.lambda_energy),
            real(vocab::LAMBDA_HAZARD, self.lambda_hazard),
            real(vocab::LAMBDA_UNCERTAINTY, self.lambda_uncertainty),
            Fact::new(
                id.clone(),
                term(vocab::PRIORS),
                Value::Json(serde_json::to_string(&self.betas).expect("map serializes")),
            ),
            Fact::new(
                id.clone(),
                term(vocab::SOFT_OVERRIDES),
                Value::Json(serde_json::to_string(&self.soft_overrides).expect("map serializes")),
            ),
        ]
    }
}

/// `e^{-rate * t}`.
pub fn confidence_decay(t: u32, rate: f64) -> f64 {
    (-rate * t as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeWindow {
    pub id: EntityId,
    pub index: u32,
    pub start: String,
    pub duration_hours: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    NoGo,
    Soft,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::NoGo => "no_go",
            ConstraintKind::Soft => "soft",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "no_go" => Some(ConstraintKind::NoGo),
            "soft" => Some(ConstraintKind::Soft),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub id: EntityId,
    pub kind: ConstraintKind,
    pub geometry: Polygon,
    /// Multiplier inside the region for soft constraints; ignored for no-go.
    pub attenuation: f64,
    /// Windows the constraint applies in; empty means every window.
    pub applies_in: BTreeSet<u32>,
    pub buffer_cells: usize,
}

impl Constraint {
    pub fn validate(&self) -> Result<(), DataPlaneError> {
        if self.kind == ConstraintKind::Soft && !(0.0..1.0).contains(&self.attenuation) {
            return Err(DataPlaneError::InvalidConstraint(
                self.id.clone(),
                format!("soft attenuation must lie in [0,1), got {}", self.attenuation),
            ));
        }
        Ok(())
    }

    pub fn applies(&self, t: u32) -> bool {
        self.applies_in.is_empty() || self.applies_in.contains(&t)
    }

    /// `{0,1}` indicator of the (buffered) region.
    pub fn region(&self, spec: &GridSpec) -> Mask {
        buffer_mask(&rasterize_polygon(&self.geometry, spec), self.buffer_cells)
    }

    /// Facts describing the constraint; window links use `ex:window/<t>`.
    pub fn to_facts(&self) -> Vec<Fact> {
        let id = &self.id;
        let mut out = vec![
            Fact::new(id.clone(), term(vocab::TYPE), term(vocab::CONSTRAINT)),
            Fact::new(id.clone(), term(vocab::KIND), Value::Str(self.kind.as_str().into())),
            Fact::new(id.clone(), term(vocab::AS_WKT), Value::Wkt(self.geometry.to_wkt())),
            Fact::new(id.clone(), term(vocab::BUFFER_CELLS), self.buffer_cells as i64),
        ];
        if self.kind == ConstraintKind::Soft {
            out.push(Fact::new(id.clone(), term(vocab::ATTENUATION), self.attenuation));
        }
        for t in &self.applies_in {
            out.push(Fact::new(id.clone(), term(vocab::APPLIES_IN), window_id(*t)));
        }
        out
    }
}

pub fn window_id(t: u32) -> EntityId {
    EntityId::ex(format!("window/{t}"))
}

/// A registered raster with the entity that describes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub id: EntityId,
    pub field: Arc<ScalarField>,
}

/// Masks derived from the constraints active in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMasks {
    /// 0 inside buffered no-go regions, 1 elsewhere.
    pub hard: Mask,
    /// Product of soft attenuations, 1 outside every soft region.
    pub soft: Mask,
    /// `{0,1}` union of soft regions, independent of attenuation values.
    pub soft_region: Mask,
}

impl ConstraintMasks {
    pub fn open(spec: GridSpec) -> Self {
        ConstraintMasks {
            hard: Mask::ones(spec),
            soft: Mask::ones(spec),
            soft_region: Mask::zeros(spec),
        }
    }

    pub fn is_blocked(&self, cell: crate::grid::Cell) -> bool {
        self.hard.get(cell) == 0.0
    }
}

/// Builds the hard and soft masks for window `t`; policy soft overrides
/// replace a constraint's attenuation when present.
pub fn build_masks(
    constraints: &[Constraint],
    t: u32,
    spec: &GridSpec,
    policy: &Policy,
) -> ConstraintMasks {
    let mut masks = ConstraintMasks::open(*spec);
    for c in constraints.iter().filter(|c| c.applies(t)) {
        let region = c.region(spec);
        match c.kind {
            ConstraintKind::NoGo => {
                for (i, &inside) in region.data().iter().enumerate() {
                    if inside > 0.0 {
                        masks.hard.set(spec.cell(i), 0.0);
                    }
                }
            }
            ConstraintKind::Soft => {
                let att = policy
                    .soft_overrides
                    .get(&c.id.to_string())
                    .copied()
                    .unwrap_or(c.attenuation);
                for (i, &inside) in region.data().iter().enumerate() {
                    if inside > 0.0 {
                        let cell = spec.cell(i);
                        masks.soft.set(cell, masks.soft.get(cell) * att);
                        masks.soft_region.set(cell, 1.0);
                    }
                }
            }
        }
    }
    masks
}

/// Everything one (agent, window) compilation reads.
#[derive(Debug, Clone, Copy)]
pub struct TensorInputs<'a> {
    pub agent: &'a EntityId,
    pub window: &'a TimeWindow,
    pub policy: &'a Policy,
    pub base: &'a Layer,
    pub priors: &'a BTreeMap<String, Layer>,
    pub constraints: &'a [Constraint],
    pub events: &'a [Event],
}

impl TensorInputs<'_> {
    fn spec(&self) -> &GridSpec {
        self.base.field.spec()
    }

    fn weighted_priors(&self) -> Result<Vec<(f64, &Layer)>, DataPlaneError> {
        let mut out = Vec::new();
        for (name, &beta) in &self.policy.betas {
            if beta == 0.0 {
                continue;
            }
            let layer = self.priors.get(name).ok_or_else(|| DataPlaneError::MissingPrior {
                policy: self.policy.name.clone(),
                prior: name.clone(),
            })?;
            out.push((beta, layer));
        }
        Ok(out)
    }
}

/// The blend before normalization, already multiplied by the soft mask.
pub fn soft_masked_blend(
    inputs: &TensorInputs,
) -> Result<(ScalarField, ConstraintMasks), DataPlaneError> {
    inputs.policy.validate()?;
    let spec = *inputs.spec();
    let base = &inputs.base.field;
    let priors = inputs.weighted_priors()?;
    for (_, layer) in &priors {
        spec.ensure_same(layer.field.spec())?;
    }
    for c in inputs.constraints {
        c.validate()?;
    }
    let t = inputs.window.index;
    let masks = build_masks(inputs.constraints, t, &spec, inputs.policy);
    let p = inputs.policy;
    let front = if p.gamma_front != 0.0 {
        Some(gradient_magnitude(base))
    } else {
        None
    };
    let mut blend = Vec::with_capacity(spec.len());
    for i in 0..spec.len() {
        let mut x = p.alpha_base * base.data()[i];
        for (beta, layer) in &priors {
            x += beta * layer.field.data()[i];
        }
        if let Some(f) = &front {
            x += p.gamma_front * f.data()[i];
        }
        blend.push(x);
    }
    for ev in inputs.events.iter().filter(|e| e.is_active(t)) {
        if spec.contains(ev.cell) {
            blend[spec.index(ev.cell)] += ev.value;
        }
    }
    for (x, m) in blend.iter_mut().zip(masks.soft.data()) {
        *x *= m;
    }
    Ok((ScalarField::new(spec, blend)?, masks))
}

/// A compiled per-(agent, window) utility raster.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionTensor {
    pub agent: EntityId,
    pub window: u32,
    pub confidence: f64,
    pub field: ScalarField,
    pub masks: ConstraintMasks,
    pub hash: u64,
    pub provenance: BTreeSet<EntityId>,
}

impl MissionTensor {
    pub fn id(&self) -> EntityId {
        tensor_id(&self.agent, self.window)
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash)
    }

    /// `TensorArtifact` facts linking the tensor to its inputs.
    pub fn to_facts(&self) -> Vec<Fact> {
        let id = self.id();
        let mut out = vec![
            Fact::new(id.clone(), term(vocab::TYPE), term(vocab::TENSOR_ARTIFACT)),
            Fact::new(id.clone(), term(vocab::FOR_AGENT), self.agent.clone()),
            Fact::new(id.clone(), term(vocab::FOR_WINDOW), window_id(self.window)),
            Fact::new(id.clone(), term(vocab::HASH), Value::Str(self.hash_hex())),
        ];
        for src in &self.provenance {
            out.push(Fact::new(id.clone(), term(vocab::WAS_DERIVED_FROM), src.clone()));
        }
        out
    }
}

pub fn tensor_id(agent: &EntityId, window: u32) -> EntityId {
    EntityId::ex(format!("tensor/{}/{window}", agent.leaf()))
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// FNV-1a over the little-endian `f32` bytes of a field.
pub fn field_hash(field: &ScalarField) -> u64 {
    let bytes: Vec<u8> = field.to_f32().iter().flat_map(|x| x.to_le_bytes()).collect();
    fnv1a64(&bytes)
}

/// Compiles one mission tensor.
pub fn compile_mission_tensor(inputs: &TensorInputs) -> Result<MissionTensor, DataPlaneError> {
    let (blend, masks) = soft_masked_blend(inputs)?;
    let w = inputs.window.confidence;
    let normalized = normalize01(&blend);
    let data: Vec<f64> = normalized
        .data()
        .iter()
        .zip(masks.hard.data())
        .map(|(&x, &h)| w * x * h)
        .collect();
    let field = ScalarField::new(*blend.spec(), data)?;
    let t = inputs.window.index;
    let mut provenance = BTreeSet::from([
        inputs.base.id.clone(),
        inputs.policy.id.clone(),
        inputs.window.id.clone(),
    ]);
    for (_, layer) in inputs.weighted_priors()? {
        provenance.insert(layer.id.clone());
    }
    provenance.extend(
        inputs
            .constraints
            .iter()
            .filter(|c| c.applies(t))
            .map(|c| c.id.clone()),
    );
    provenance.extend(
        inputs
            .events
            .iter()
            .filter(|e| e.is_active(t))
            .map(|e| e.id.clone()),
    );
    Ok(MissionTensor {
        agent: inputs.agent.clone(),
        window: t,
        confidence: w,
        hash: field_hash(&field),
        field,
        masks,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{wkt_parse, BBox};

    fn spec(rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(rows, cols, BBox::new(0.0, 0.0, cols as f64, rows as f64), 1.0).unwrap()
    }

    fn window(t: u32, w: f64) -> TimeWindow {
        TimeWindow {
            id: window_id(t),
            index: t,
            start: "2024-06-01T00:00:00Z".into(),
            duration_hours: 24.0,
            confidence: w,
        }
    }

    fn layer(name: &str, f: ScalarField) -> Layer {
        Layer {
            id: EntityId::ex(format!("layer/{name}")),
            field: Arc::new(f),
        }
    }

    fn soft(id: &str, wkt: &str, att: f64) -> Constraint {
        Constraint {
            id: EntityId::ex(format!("constraint/{id}")),
            kind: ConstraintKind::Soft,
            geometry: wkt_parse(wkt).unwrap(),
            attenuation: att,
            applies_in: BTreeSet::new(),
            buffer_cells: 0,
        }
    }

    #[test]
    fn decay_values() {
        assert_eq!(confidence_decay(0, 0.12), 1.0);
        assert!((confidence_decay(1, 0.12) - 0.886_920_436_717).abs() < 1e-9);
        assert!((confidence_decay(6, 0.12) - 0.486_752_255_959).abs() < 1e-9);
    }

    #[test]
    fn masks_identity_single_and_overlap() {
        let s = spec(4, 4);
        let p = Policy::base_only("p");
        let m = build_masks(&[], 0, &s, &p);
        assert!(m.hard.data().iter().all(|&x| x == 1.0));
        assert!(m.soft.data().iter().all(|&x| x == 1.0));

        let sanctuary = soft("sanctuary", "POLYGON((0 0,2 0,2 4,0 4))", 0.4);
        let m = build_masks(std::slice::from_ref(&sanctuary), 0, &s, &p);
        for (r, c) in s.cells() {
            assert_eq!(m.soft.get((r, c)), if c < 2 { 0.4 } else { 1.0 });
        }

        let a = soft("a", "POLYGON((0 0,3 0,3 4,0 4))", 0.5);
        let b = soft("b", "POLYGON((1 0,4 0,4 4,1 4))", 0.4);
        let m = build_masks(&[a, b], 0, &s, &p);
        assert!((m.soft.get((0, 1)) - 0.2).abs() < 1e-15);
        assert_eq!(m.soft.get((0, 0)), 0.5);
        assert_eq!(m.soft.get((0, 3)), 0.4);

        let mut over = p.clone();
        over.soft_overrides.insert("ex:constraint/sanctuary".into(), 0.1);
        let m = build_masks(&[sanctuary], 0, &s, &over);
        assert_eq!(m.soft.get((0, 0)), 0.1);
    }

    #[test]
    fn windows_scope_constraints() {
        let s = spec(4, 4);
        let mut c = soft("late", "POLYGON((0 0,4 0,4 4,0 4))", 0.5);
        c.applies_in = BTreeSet::from([4, 5]);
        let p = Policy::base_only("p");
        assert_eq!(build_masks(std::slice::from_ref(&c), 3, &s, &p).soft.get((0, 0)), 1.0);
        assert_eq!(build_masks(&[c], 4, &s, &p).soft.get((0, 0)), 0.5);
    }

    #[test]
    fn base_only_is_normalized_base() {
        let s = spec(5, 6);
        let base = layer("b", ScalarField::from_fn(s, |(r, c)| (r * 7 + c * 3) as f64 % 5.0).unwrap());
        let agent = EntityId::ex("agent/a");
        let w = window(0, 1.0);
        let p = Policy::base_only("naive");
        let priors = BTreeMap::new();
        let t = compile_mission_tensor(&TensorInputs {
            agent: &agent,
            window: &w,
            policy: &p,
            base: &base,
            priors: &priors,
            constraints: &[],
            events: &[],
        })
        .unwrap();
        assert_eq!(t.field, normalize01(&base.field));
        assert_eq!(t.provenance.len(), 3);
    }

    #[test]
    fn hard_mask_zeroes_left_half() {
        let s = spec(4, 4);
        let base = layer("b", ScalarField::from_fn(s, |(r, c)| 1.0 + r as f64 + c as f64).unwrap());
        let land = Constraint {
            id: EntityId::ex("constraint/land"),
            kind: ConstraintKind::NoGo,
            geometry: wkt_parse("POLYGON((0 0,2 0,2 4,0 4))").unwrap(),
            attenuation: 1.0,
            applies_in: BTreeSet::new(),
            buffer_cells: 0,
        };
        let agent = EntityId::ex("agent/a");
        let w = window(2, confidence_decay(2, 0.12));
        let p = Policy::base_only("naive");
        let priors = BTreeMap::new();
        let constraints = [land];
        let inputs = TensorInputs {
            agent: &agent,
            window: &w,
            policy: &p,
            base: &base,
            priors: &priors,
            constraints: &constraints,
            events: &[],
        };
        let t = compile_mission_tensor(&inputs).unwrap();
        for (r, c) in s.cells() {
            if c < 2 {
                assert_eq!(t.field.get((r, c)), 0.0);
            }
        }
        // argmax (3,3) survives the hard mask, so the max is exactly w_t
        assert!((t.field.max() - w.confidence).abs() < 1e-12);
        assert!(t.provenance.contains(&EntityId::ex("constraint/land")));
        let facts = t.to_facts();
        assert!(facts.iter().any(|f| f.predicate == term(vocab::HASH)));
    }

    #[test]
    fn ramp_plus_gradient_matches_straight_line_formula() {
        let s = spec(5, 7);
        let ramp = ScalarField::from_fn(s, |(_, c)| c as f64).unwrap();
        let base = layer("ramp", ramp.clone());
        let agent = EntityId::ex("agent/a");
        let w = window(3, 0.5);
        let mut p = Policy::base_only("fg");
        p.gamma_front = 1.0;
        let priors = BTreeMap::new();
        let t = compile_mission_tensor(&TensorInputs {
            agent: &agent,
            window: &w,
            policy: &p,
            base: &base,
            priors: &priors,
            constraints: &[],
            events: &[],
        })
        .unwrap();
        // gradient of a unit ramp is 1 everywhere, so the blend is c + 1 and
        // normalizes to c / 6
        for (r, c) in s.cells() {
            let want = 0.5 * (c as f64 / 6.0);
            assert!((t.field.get((r, c)) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_prior_and_bad_policy_fail_fast() {
        let s = spec(3, 3);
        let base = layer("b", ScalarField::zeros(s));
        let agent = EntityId::ex("agent/a");
        let w = window(0, 1.0);
        let mut p = Policy::base_only("p");
        p.betas.insert("corridor".into(), 0.5);
        let priors = BTreeMap::new();
        let inputs = TensorInputs {
            agent: &agent,
            window: &w,
            policy: &p,
            base: &base,
            priors: &priors,
            constraints: &[],
            events: &[],
        };
        assert!(matches!(
            compile_mission_tensor(&inputs),
            Err(DataPlaneError::MissingPrior { .. })
        ));
        let mut q = p.clone();
        q.betas.insert("corridor".into(), 0.0);
        q.alpha_base = 0.0;
        let inputs = TensorInputs { policy: &q, ..inputs };
        assert!(matches!(
            compile_mission_tensor(&inputs),
            Err(DataPlaneError::InvalidPolicy(..))
        ));
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
