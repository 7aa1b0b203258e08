//! Static vocabulary, predicate ranges and shape rules.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{EntityId, FactError, Value, WorldSnapshot};

/// Vocabulary terms as `prefix:local` strings.
pub mod vocab {
    // classes
    pub const TIME_WINDOW: &str = "ex:TimeWindow";
    pub const GRID_SPEC: &str = "ex:GridSpec";
    pub const BASE_LAYER: &str = "ex:BaseLayer";
    pub const PRIOR_LAYER: &str = "ex:PriorLayer";
    pub const CURRENT_FIELD: &str = "ex:CurrentField";
    pub const CONSTRAINT: &str = "ex:Constraint";
    pub const POLICY: &str = "ex:Policy";
    pub const AGENT: &str = "ex:Agent";
    pub const AGENT_CAPABILITIES: &str = "ex:AgentCapabilities";
    pub const AGENT_STATE: &str = "ex:AgentState";
    pub const EVENT: &str = "ex:Event";
    pub const TENSOR_ARTIFACT: &str = "ex:TensorArtifact";
    pub const NAV_GRAPH: &str = "ex:NavGraph";
    pub const WAYPOINT: &str = "ex:Waypoint";
    pub const TRAVERSE_EDGE: &str = "ex:TraverseEdge";
    pub const EDGE_COST: &str = "ex:EdgeCost";
    pub const PLAN_RUN: &str = "ex:PlanRun";
    pub const ASSIGNMENT: &str = "ex:Assignment";
    pub const COMPILE_PHI2: &str = "ex:CompilePhi2";

    // properties
    pub const TYPE: &str = "ex:type";
    pub const INDEX: &str = "ex:index";
    pub const HAS_BEGINNING: &str = "time:hasBeginning";
    pub const DURATION_HOURS: &str = "ex:durationHours";
    pub const CONFIDENCE: &str = "ex:confidence";
    pub const FOR_WINDOW: &str = "ex:forWindow";
    pub const APPLIES_IN: &str = "ex:appliesIn";
    pub const KIND: &str = "ex:kind";
    pub const AS_WKT: &str = "geo:asWKT";
    pub const ATTENUATION: &str = "ex:attenuation";
    pub const BUFFER_CELLS: &str = "ex:bufferCells";
    pub const USES_POLICY: &str = "ex:usesPolicy";
    pub const HAS_CAPABILITIES: &str = "ex:hasCapabilities";
    pub const CRUISE_SPEED_KTS: &str = "ex:cruiseSpeedKts";
    pub const MAX_SPEED_KTS: &str = "ex:maxSpeedKts";
    pub const ENERGY_PER_KM: &str = "ex:energyPerKm";
    pub const BOOST_GAIN: &str = "ex:boostGain";
    pub const ENERGY_BUDGET: &str = "ex:energyBudget";
    pub const TRAVEL_BUDGET_HOURS: &str = "ex:travelBudgetHours";
    pub const ALPHA_BASE: &str = "ex:alpha_base";
    pub const GAMMA_FRONT: &str = "ex:gamma_front";
    pub const LAMBDA_TIME: &str = "ex:lambda_time";
    pub const LAMBDA_ENERGY: &str = "ex:lambda_energy";
    pub const LAMBDA_HAZARD: &str = "ex:lambda_hazard";
    pub const LAMBDA_UNCERTAINTY: &str = "ex:lambda_uncertainty";
    pub const PRIORS: &str = "ex:priors";
    pub const SOFT_OVERRIDES: &str = "ex:softOverrides";
    pub const NAME: &str = "ex:name";
    pub const GRID_REF: &str = "ex:gridRef";
    pub const GRID_REF_U: &str = "ex:gridRefU";
    pub const GRID_REF_V: &str = "ex:gridRefV";
    pub const ROWS: &str = "ex:rows";
    pub const COLS: &str = "ex:cols";
    pub const PIXEL_SIZE_KM: &str = "ex:pixelSizeKm";
    pub const VALUE: &str = "ex:value";
    pub const CAPACITY: &str = "ex:capacity";
    pub const EXPIRES_AFTER: &str = "ex:expiresAfter";
    pub const FOR_AGENT: &str = "ex:forAgent";
    pub const HASH: &str = "ex:hash";
    pub const WAS_DERIVED_FROM: &str = "prov:wasDerivedFrom";
    pub const WAS_GENERATED_BY: &str = "prov:wasGeneratedBy";
    pub const USED: &str = "prov:used";
    pub const IN_GRAPH: &str = "ex:inGraph";
    pub const SCORE: &str = "ex:score";
    pub const ROW: &str = "ex:row";
    pub const COL: &str = "ex:col";
    pub const FROM: &str = "ex:from";
    pub const TO: &str = "ex:to";
    pub const MOVEMENT_MODE: &str = "ex:movementMode";
    pub const FOR_EDGE: &str = "ex:forEdge";
    pub const COST_HOURS: &str = "ex:costHours";
    pub const COST_ENERGY: &str = "ex:costEnergy";
    pub const COST_RISK: &str = "ex:costRisk";
    pub const FEASIBLE: &str = "ex:feasible";
    pub const WORLD_VERSION: &str = "ex:worldVersion";
    pub const STATUS: &str = "ex:status";
    pub const WAYPOINT_WKT: &str = "ex:waypointWKT";

    /// Classes whose instances are compiled outputs or planning activities.
    pub const DERIVED_CLASSES: &[&str] = &[
        TENSOR_ARTIFACT,
        NAV_GRAPH,
        WAYPOINT,
        TRAVERSE_EDGE,
        EDGE_COST,
        PLAN_RUN,
        ASSIGNMENT,
        COMPILE_PHI2,
    ];

    /// Predicates followed by provenance traces.
    pub const PROVENANCE: &[&str] = &[WAS_DERIVED_FROM, WAS_GENERATED_BY, USED];
}

/// Parses a vocabulary term. Panics on malformed constants.
pub fn term(name: &str) -> EntityId {
    EntityId::parse(name).unwrap_or_else(|e| panic!("bad vocabulary term {name}: {e}"))
}

/// Declared range of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range {
    Entity,
    Str,
    Int,
    Real,
    DateTime,
    Wkt,
    Json,
}

#[derive(Debug, Clone, Copy)]
pub struct PredicateDecl {
    pub range: Range,
    pub single_valued: bool,
    /// Closed numeric bounds enforced on literals at assert time.
    pub bounds: Option<(f64, f64)>,
}

const fn decl(range: Range, single_valued: bool) -> PredicateDecl {
    PredicateDecl {
        range,
        single_valued,
        bounds: None,
    }
}

const fn bounded(range: Range, lo: f64, hi: f64) -> PredicateDecl {
    PredicateDecl {
        range,
        single_valued: true,
        bounds: Some((lo, hi)),
    }
}

const UNBOUNDED: f64 = f64::INFINITY;

fn declarations() -> &'static [(&'static str, PredicateDecl)] {
    use vocab::*;
    use Range::*;
    const DECLS: &[(&str, PredicateDecl)] = &[
        (TYPE, decl(Entity, false)),
        (INDEX, bounded(Int, 0.0, UNBOUNDED)),
        (HAS_BEGINNING, decl(DateTime, true)),
        (DURATION_HOURS, bounded(Real, 0.0, UNBOUNDED)),
        (CONFIDENCE, bounded(Real, 0.0, 1.0)),
        (FOR_WINDOW, decl(Entity, true)),
        (APPLIES_IN, decl(Entity, false)),
        (KIND, decl(Str, true)),
        (AS_WKT, decl(Wkt, true)),
        (ATTENUATION, bounded(Real, 0.0, 1.0)),
        (BUFFER_CELLS, bounded(Int, 0.0, UNBOUNDED)),
        (USES_POLICY, decl(Entity, true)),
        (HAS_CAPABILITIES, decl(Entity, true)),
        (CRUISE_SPEED_KTS, bounded(Real, 0.0, UNBOUNDED)),
        (MAX_SPEED_KTS, bounded(Real, 0.0, UNBOUNDED)),
        (ENERGY_PER_KM, bounded(Real, 0.0, UNBOUNDED)),
        (BOOST_GAIN, bounded(Real, 0.0, UNBOUNDED)),
        (ENERGY_BUDGET, bounded(Real, 0.0, UNBOUNDED)),
        (TRAVEL_BUDGET_HOURS, bounded(Real, 0.0, UNBOUNDED)),
        (ALPHA_BASE, bounded(Real, 0.0, UNBOUNDED)),
        (GAMMA_FRONT, bounded(Real, 0.0, UNBOUNDED)),
        (LAMBDA_TIME, bounded(Real, 0.0, UNBOUNDED)),
        (LAMBDA_ENERGY, bounded(Real, 0.0, UNBOUNDED)),
        (LAMBDA_HAZARD, bounded(Real, 0.0, UNBOUNDED)),
        (LAMBDA_UNCERTAINTY, bounded(Real, 0.0, UNBOUNDED)),
        (PRIORS, decl(Json, true)),
        (SOFT_OVERRIDES, decl(Json, true)),
        (NAME, decl(Str, true)),
        (GRID_REF, decl(Str, true)),
        (GRID_REF_U, decl(Str, true)),
        (GRID_REF_V, decl(Str, true)),
        (ROWS, bounded(Int, 2.0, UNBOUNDED)),
        (COLS, bounded(Int, 2.0, UNBOUNDED)),
        (PIXEL_SIZE_KM, bounded(Real, 0.0, UNBOUNDED)),
        (VALUE, bounded(Real, 0.0, UNBOUNDED)),
        (CAPACITY, bounded(Int, 1.0, UNBOUNDED)),
        (EXPIRES_AFTER, bounded(Int, 0.0, UNBOUNDED)),
        (FOR_AGENT, decl(Entity, true)),
        (HASH, decl(Str, true)),
        (WAS_DERIVED_FROM, decl(Entity, false)),
        (WAS_GENERATED_BY, decl(Entity, false)),
        (USED, decl(Entity, false)),
        (IN_GRAPH, decl(Entity, true)),
        (SCORE, bounded(Real, 0.0, UNBOUNDED)),
        (ROW, bounded(Int, 0.0, UNBOUNDED)),
        (COL, bounded(Int, 0.0, UNBOUNDED)),
        (FROM, decl(Entity, true)),
        (TO, decl(Entity, true)),
        (MOVEMENT_MODE, decl(Str, true)),
        (FOR_EDGE, decl(Entity, true)),
        (COST_HOURS, bounded(Real, 0.0, UNBOUNDED)),
        (COST_ENERGY, bounded(Real, 0.0, UNBOUNDED)),
        (COST_RISK, bounded(Real, 0.0, 1.0)),
        (FEASIBLE, bounded(Int, 0.0, 1.0)),
        (WORLD_VERSION, bounded(Int, 0.0, UNBOUNDED)),
        (STATUS, decl(Str, true)),
        (WAYPOINT_WKT, decl(Wkt, true)),
    ];
    DECLS
}

/// Looks up the declaration for a predicate.
pub fn predicate(p: &EntityId) -> Option<PredicateDecl> {
    let name = p.to_string();
    declarations()
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| *d)
}

/// Checks that `object` fits the declared range of `p`.
pub fn check_literal(p: &EntityId, object: &Value) -> Result<(), FactError> {
    let decl = predicate(p).ok_or_else(|| FactError::UnknownPredicate(p.clone()))?;
    let mismatch = |reason: String| FactError::TypeMismatch {
        predicate: p.clone(),
        reason,
    };
    let ok = matches!(
        (decl.range, object),
        (Range::Entity, Value::Entity(_))
            | (Range::Str, Value::Str(_))
            | (Range::Int, Value::Int(_))
            | (Range::Real, Value::Real(_) | Value::Int(_))
            | (Range::DateTime, Value::DateTime(_))
            | (Range::Wkt, Value::Wkt(_))
            | (Range::Json, Value::Json(_))
    );
    if !ok {
        return Err(mismatch(format!(
            "expected {:?}, got {}",
            decl.range,
            object.kind()
        )));
    }
    match object {
        Value::DateTime(s) => {
            chrono::DateTime::parse_from_rfc3339(s)
                .map_err(|e| mismatch(format!("bad datetime `{s}`: {e}")))?;
        }
        Value::Json(s) => {
            serde_json::from_str::<serde_json::Value>(s)
                .map_err(|e| mismatch(format!("bad json: {e}")))?;
        }
        Value::Real(x) if x.is_nan() => return Err(mismatch("NaN".into())),
        _ => {}
    }
    if let (Some((lo, hi)), Some(x)) = (decl.bounds, object.as_real()) {
        if x < lo || x > hi {
            return Err(mismatch(format!("{x} outside range [{lo},{hi}]")));
        }
    }
    Ok(())
}

/// One property constraint inside a [`ShapeRule`].
#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub predicate: EntityId,
    pub min_count: usize,
    pub max_count: Option<usize>,
    pub value_range: Option<(f64, f64)>,
}

impl PropertyCheck {
    pub fn new(predicate: &str) -> Self {
        PropertyCheck {
            predicate: term(predicate),
            min_count: 0,
            max_count: None,
            value_range: None,
        }
    }

    pub fn exactly(mut self, n: usize) -> Self {
        self.min_count = n;
        self.max_count = Some(n);
        self
    }

    pub fn at_most(mut self, n: usize) -> Self {
        self.max_count = Some(n);
        self
    }

    pub fn in_range(mut self, lo: f64, hi: f64) -> Self {
        self.value_range = Some((lo, hi));
        self
    }
}

/// Cardinality and value-range checks applied to every instance of a class.
#[derive(Debug, Clone)]
pub struct ShapeRule {
    pub target_class: EntityId,
    pub checks: Vec<PropertyCheck>,
}

impl ShapeRule {
    pub fn new(target_class: &str, checks: Vec<PropertyCheck>) -> Self {
        for c in &checks {
            if let Some(max) = c.max_count {
                assert!(c.min_count <= max, "cardinality bounds must satisfy min <= max");
            }
        }
        ShapeRule {
            target_class: term(target_class),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub entity: EntityId,
    pub rule: String,
    pub reason: String,
}

/// The shape profile applied to mission scenarios.
pub fn standard_shapes() -> Vec<ShapeRule> {
    use vocab::*;
    vec![
        ShapeRule::new(
            TIME_WINDOW,
            vec![
                PropertyCheck::new(INDEX).exactly(1),
                PropertyCheck::new(CONFIDENCE).at_most(1).in_range(0.0, 1.0),
                PropertyCheck::new(DURATION_HOURS).at_most(1),
            ],
        ),
        ShapeRule::new(
            AGENT,
            vec![
                PropertyCheck::new(USES_POLICY).exactly(1),
                PropertyCheck::new(HAS_CAPABILITIES).exactly(1),
            ],
        ),
        ShapeRule::new(
            AGENT_CAPABILITIES,
            vec![
                PropertyCheck::new(CRUISE_SPEED_KTS).exactly(1),
                PropertyCheck::new(MAX_SPEED_KTS).at_most(1),
                PropertyCheck::new(ENERGY_PER_KM).at_most(1),
                PropertyCheck::new(BOOST_GAIN).at_most(1),
                PropertyCheck::new(ENERGY_BUDGET).at_most(1),
                PropertyCheck::new(TRAVEL_BUDGET_HOURS).at_most(1),
            ],
        ),
        ShapeRule::new(
            CONSTRAINT,
            vec![
                PropertyCheck::new(KIND).exactly(1),
                PropertyCheck::new(AS_WKT).exactly(1),
                PropertyCheck::new(ATTENUATION).at_most(1).in_range(0.0, 1.0),
                PropertyCheck::new(BUFFER_CELLS).at_most(1),
            ],
        ),
        ShapeRule::new(
            POLICY,
            vec![
                PropertyCheck::new(ALPHA_BASE).at_most(1),
                PropertyCheck::new(GAMMA_FRONT).at_most(1),
                PropertyCheck::new(PRIORS).at_most(1),
                PropertyCheck::new(SOFT_OVERRIDES).at_most(1),
            ],
        ),
        ShapeRule::new(
            EVENT,
            vec![
                PropertyCheck::new(FOR_WINDOW).exactly(1),
                PropertyCheck::new(AS_WKT).exactly(1),
                PropertyCheck::new(CAPACITY).at_most(1).in_range(1.0, f64::INFINITY),
            ],
        ),
        ShapeRule::new(
            BASE_LAYER,
            vec![
                PropertyCheck::new(FOR_WINDOW).exactly(1),
                PropertyCheck::new(GRID_REF).exactly(1),
            ],
        ),
        ShapeRule::new(
            CURRENT_FIELD,
            vec![
                PropertyCheck::new(FOR_WINDOW).exactly(1),
                PropertyCheck::new(GRID_REF_U).exactly(1),
                PropertyCheck::new(GRID_REF_V).exactly(1),
            ],
        ),
        ShapeRule::new(
            PRIOR_LAYER,
            vec![
                PropertyCheck::new(NAME).exactly(1),
                PropertyCheck::new(GRID_REF).exactly(1),
            ],
        ),
        ShapeRule::new(
            ASSIGNMENT,
            vec![
                PropertyCheck::new(FOR_AGENT).exactly(1),
                PropertyCheck::new(FOR_WINDOW).exactly(1),
                PropertyCheck::new(WAS_GENERATED_BY).exactly(1),
            ],
        ),
    ]
}

/// Runs every rule against `snapshot`; the result is sorted.
pub fn validate(snapshot: &WorldSnapshot, rules: &[ShapeRule]) -> Vec<Violation> {
    let type_p = term(vocab::TYPE);
    let mut out = Vec::new();
    for rule in rules {
        let rule_name = rule.target_class.to_string();
        for typed in snapshot.query(
            None,
            Some(&type_p),
            Some(&Value::Entity(rule.target_class.clone())),
        ) {
            let entity = &typed.subject;
            for check in &rule.checks {
                let values: Vec<&Value> = snapshot
                    .objects(entity, &check.predicate)
                    .collect();
                let n = values.len();
                let too_few = n < check.min_count;
                let too_many = check.max_count.is_some_and(|m| n > m);
                if too_few || too_many {
                    let bound = match check.max_count {
                        Some(m) if m == check.min_count => format!("exactly {m}"),
                        Some(m) => format!("between {} and {m}", check.min_count),
                        None => format!("at least {}", check.min_count),
                    };
                    out.push(Violation {
                        entity: entity.clone(),
                        rule: rule_name.clone(),
                        reason: format!("{}: found {n}, expected {bound}", check.predicate),
                    });
                }
                if let Some((lo, hi)) = check.value_range {
                    for v in values {
                        match v.as_real() {
                            Some(x) if (lo..=hi).contains(&x) => {}
                            Some(x) => out.push(Violation {
                                entity: entity.clone(),
                                rule: rule_name.clone(),
                                reason: format!("{}: {x} outside range [{lo},{hi}]", check.predicate),
                            }),
                            None => out.push(Violation {
                                entity: entity.clone(),
                                rule: rule_name.clone(),
                                reason: format!("{}: non-numeric {}", check.predicate, v.kind()),
                            }),
                        }
                    }
                }
            }
        }
    }
    for cycle_node in provenance_cycles(snapshot) {
        out.push(Violation {
            entity: cycle_node,
            rule: "provenance".into(),
            reason: "provenance cycle".into(),
        });
    }
    out.sort();
    out.dedup();
    out
}

/// Entities that sit on a provenance cycle (iterative three-colour DFS).
fn provenance_cycles(snapshot: &WorldSnapshot) -> Vec<EntityId> {
    let preds: Vec<EntityId> = vocab::PROVENANCE.iter().map(|p| term(p)).collect();
    let mut graph: BTreeMap<&EntityId, Vec<&EntityId>> = BTreeMap::new();
    for p in &preds {
        for f in snapshot.query(None, Some(p), None) {
            if let Value::Entity(o) = &f.object {
                graph.entry(&f.subject).or_default().push(o);
            }
        }
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        Grey,
        Black,
    }
    let mut colour: BTreeMap<&EntityId, Colour> = BTreeMap::new();
    let mut on_cycle = Vec::new();
    for &root in graph.keys() {
        if colour.contains_key(root) {
            continue;
        }
        let mut stack: Vec<(&EntityId, usize)> = vec![(root, 0)];
        colour.insert(root, Colour::Grey);
        while let Some((node, next)) = stack.pop() {
            let children = graph.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if next < children.len() {
                stack.push((node, next + 1));
                let child = children[next];
                match colour.get(child) {
                    None => {
                        colour.insert(child, Colour::Grey);
                        stack.push((child, 0));
                    }
                    Some(Colour::Grey) => on_cycle.push(child.clone()),
                    Some(Colour::Black) => {}
                }
            } else {
                colour.insert(node, Colour::Black);
            }
        }
    }
    on_cycle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_checks() {
        let conf = term(vocab::CONFIDENCE);
        assert!(check_literal(&conf, &Value::Real(0.5)).is_ok());
        assert!(matches!(
            check_literal(&conf, &Value::Real(1.7)),
            Err(FactError::TypeMismatch { .. })
        ));
        assert!(check_literal(&conf, &Value::Str("high".into())).is_err());
        assert!(check_literal(&term(vocab::INDEX), &Value::Real(1.0)).is_err());
        assert!(check_literal(&term(vocab::PRIORS), &Value::Json("{\"a\":1}".into())).is_ok());
        assert!(check_literal(&term(vocab::PRIORS), &Value::Json("{a:".into())).is_err());
        assert!(check_literal(
            &term(vocab::HAS_BEGINNING),
            &Value::DateTime("2024-06-01T00:00:00Z".into())
        )
        .is_ok());
        assert!(matches!(
            check_literal(&EntityId::ex("madeUp"), &Value::Int(1)),
            Err(FactError::UnknownPredicate(_))
        ));
    }

    #[test]
    fn every_declared_term_parses() {
        for (name, _) in declarations() {
            term(name);
        }
        for c in vocab::DERIVED_CLASSES {
            term(c);
        }
    }

    #[test]
    #[should_panic]
    fn shape_rule_rejects_inverted_cardinality() {
        let mut check = PropertyCheck::new(vocab::INDEX);
        check.min_count = 3;
        check.max_count = Some(1);
        ShapeRule::new(vocab::TIME_WINDOW, vec![check]);
    }
}
