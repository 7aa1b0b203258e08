//! Greedy multi-agent plan selection and team metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::control_plane::CellPath;
use crate::data_plane::{window_id, Constraint, ConstraintKind};
use crate::facts::schema::{term, vocab};
use crate::facts::{EntityId, Fact, Value};
use crate::grid::{chebyshev, Cell, GridSpec, Mask, ScalarField};
use crate::planner::{CandidateSet, HorizonPath};

/// A time-limited opportunity adding `value` at `cell` while active.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub id: EntityId,
    pub window: u32,
    pub cell: Cell,
    pub value: f64,
    pub capacity: usize,
    pub expires_after: u32,
}

impl Event {
    pub fn is_active(&self, t: u32) -> bool {
        self.window <= t && t <= self.expires_after
    }

    fn serviced_by(&self, path: &HorizonPath) -> bool {
        path.nodes
            .iter()
            .any(|w| w.cell == self.cell && self.is_active(w.window))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CoordinatorError {
    #[error("agent {0} has no candidates")]
    NoCandidates(EntityId),
    #[error("agent {0} conflicts with every candidate, including after re-stitching")]
    Deadlock(EntityId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionParams {
    pub min_sep_cells: usize,
    pub cooling_radius: usize,
    /// Relative band below an agent's best objective counted as near-best.
    pub scarcity_band: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            min_sep_cells: 3,
            cooling_radius: 1,
            scarcity_band: 0.01,
        }
    }
}

/// Cells claimed so far, per window, and the agents servicing each event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Claims {
    pub cells: BTreeMap<u32, Vec<Cell>>,
    pub event_use: BTreeMap<EntityId, usize>,
}

impl Claims {
    /// Whether `(t, cell)` is too close to a claimed cell.
    pub fn blocks(&self, t: u32, cell: Cell, params: &SelectionParams) -> bool {
        let reach = params.min_sep_cells.max(params.cooling_radius + 1);
        self.cells
            .get(&t)
            .is_some_and(|cs| cs.iter().any(|&c| chebyshev(c, cell) < reach))
    }

    /// Whether an event active at `(t, cell)` has no capacity left.
    pub fn event_full(&self, t: u32, cell: Cell, events: &[Event]) -> bool {
        events.iter().any(|e| {
            e.cell == cell
                && e.is_active(t)
                && self.event_use.get(&e.id).copied().unwrap_or(0) >= e.capacity
        })
    }

    pub fn admits(&self, path: &HorizonPath, events: &[Event], params: &SelectionParams) -> bool {
        path.nodes
            .iter()
            .all(|w| !self.blocks(w.window, w.cell, params) && !self.event_full(w.window, w.cell, events))
    }

    fn claim(&mut self, path: &HorizonPath, events: &[Event]) {
        for w in &path.nodes {
            self.cells.entry(w.window).or_default().push(w.cell);
        }
        for e in events.iter().filter(|e| e.serviced_by(path)) {
            *self.event_use.entry(e.id.clone()).or_default() += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TeamMetrics {
    pub mission_reward: f64,
    pub unique_coverage: usize,
    pub hard_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamPlan {
    pub paths: BTreeMap<EntityId, HorizonPath>,
    pub order: Vec<EntityId>,
    /// Agents whose path came from the deadlock re-stitch.
    pub restitched: Vec<EntityId>,
    pub metrics: TeamMetrics,
}

impl TeamPlan {
    pub fn total_objective(&self) -> f64 {
        self.paths.values().map(|p| p.objective).sum()
    }

    /// `(agent, window, cell)` for every node of every path.
    pub fn assignments(&self) -> Vec<(EntityId, u32, Cell)> {
        self.paths
            .iter()
            .flat_map(|(a, p)| p.nodes.iter().map(move |w| (a.clone(), w.window, w.cell)))
            .collect()
    }
}

struct Proposal<'a> {
    path: &'a HorizonPath,
    scarcity: usize,
}

/// Greedy selection: each round every unassigned agent proposes its best
/// admissible candidate and the highest objective wins; equal objectives go
/// to the agent with fewer near-best alternatives, then to the smaller id.
/// An agent with no admissible candidate gets one call to `restitch`, which
/// may return a path planned around the current claims.
pub fn select_team_plan(
    candidates: &BTreeMap<EntityId, CandidateSet>,
    events: &[Event],
    params: &SelectionParams,
    mut restitch: impl FnMut(&EntityId, &Claims) -> Option<HorizonPath>,
) -> Result<TeamPlan, CoordinatorError> {
    for (agent, set) in candidates {
        if set.paths.is_empty() {
            return Err(CoordinatorError::NoCandidates(agent.clone()));
        }
    }
    let mut claims = Claims::default();
    let mut plan = TeamPlan {
        paths: BTreeMap::new(),
        order: Vec::new(),
        restitched: Vec::new(),
        metrics: TeamMetrics::default(),
    };
    let mut rescued: BTreeMap<EntityId, HorizonPath> = BTreeMap::new();
    while plan.paths.len() < candidates.len() {
        for (agent, set) in candidates.iter().filter(|(a, _)| !plan.paths.contains_key(*a)) {
            let fresh = rescued.get(agent).is_some_and(|p| claims.admits(p, events, params));
            if fresh || set.paths.iter().any(|p| claims.admits(p, events, params)) {
                continue;
            }
            match restitch(agent, &claims) {
                Some(p) if claims.admits(&p, events, params) => {
                    rescued.insert(agent.clone(), p);
                }
                _ => return Err(CoordinatorError::Deadlock(agent.clone())),
            }
        }
        let mut best: Option<(&EntityId, Proposal)> = None;
        for (agent, set) in candidates.iter().filter(|(a, _)| !plan.paths.contains_key(*a)) {
            let admissible: Vec<&HorizonPath> = set
                .paths
                .iter()
                .filter(|p| claims.admits(p, events, params))
                .collect();
            let option = match admissible.first() {
                Some(top) => {
                    let floor = top.objective - params.scarcity_band * top.objective.abs();
                    Proposal {
                        path: top,
                        scarcity: admissible.iter().filter(|p| p.objective >= floor).count(),
                    }
                }
                None => Proposal {
                    path: &rescued[agent],
                    scarcity: 1,
                },
            };
            let wins = match &best {
                None => true,
                Some((_, b)) => {
                    option.path.objective > b.path.objective
                        || (option.path.objective == b.path.objective && option.scarcity < b.scarcity)
                }
            };
            if wins {
                best = Some((agent, option));
            }
        }
        let (agent, option) = best.expect("an unassigned agent remains");
        let path = option.path.clone();
        claims.claim(&path, events);
        if rescued.contains_key(agent) && !candidates[agent].paths.contains(&path) {
            plan.restitched.push(agent.clone());
        }
        plan.order.push(agent.clone());
        plan.paths.insert(agent.clone(), path);
    }
    Ok(plan)
}

pub fn cooling_id(agent: &EntityId, window: u32) -> EntityId {
    EntityId::ex(format!("constraint/cooling/{}/{window}", agent.leaf()))
}

/// Soft squares of half-width `radius` around every claimed cell, each
/// scoped to its own window.
pub fn cooling_overrides(plan: &TeamPlan, spec: &GridSpec, radius: usize, attenuation: f64) -> Vec<Constraint> {
    let mut out = Vec::new();
    for (agent, path) in &plan.paths {
        for w in &path.nodes {
            out.push(Constraint {
                id: cooling_id(agent, w.window),
                kind: ConstraintKind::Soft,
                geometry: spec.cell_box(w.cell, radius),
                attenuation,
                applies_in: BTreeSet::from([w.window]),
                buffer_cells: 0,
            });
        }
    }
    out
}

/// Cells within Chebyshev `radius` of any given cell.
pub fn footprint(spec: &GridSpec, cells: impl IntoIterator<Item = Cell>, radius: usize) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for (r, c) in cells {
        for rr in r.saturating_sub(radius)..=(r + radius).min(spec.rows - 1) {
            for cc in c.saturating_sub(radius)..=(c + radius).min(spec.cols - 1) {
                out.insert((rr, cc));
            }
        }
    }
    out
}

/// Mission reward from the evaluation tensors, footprint coverage and
/// hard-mask entries. `legs[agent][i]` is the micro-path from node `i` to
/// node `i+1` (`None` when no path exists); it is checked against the
/// arrival window's mask.
pub fn team_metrics(
    plan: &TeamPlan,
    evaluation: &[ScalarField],
    hard: &[Mask],
    footprint_radius: usize,
    legs: &BTreeMap<EntityId, Vec<Option<CellPath>>>,
) -> TeamMetrics {
    let mut m = TeamMetrics::default();
    let mut path_cells = Vec::new();
    for (agent, path) in &plan.paths {
        for w in &path.nodes {
            let t = w.window as usize;
            m.mission_reward += evaluation.get(t).map_or(0.0, |f| f.get(w.cell));
            if hard.get(t).is_some_and(|h| h.get(w.cell) == 0.0) {
                m.hard_violations += 1;
            }
            path_cells.push(w.cell);
        }
        for (i, leg) in legs.get(agent).into_iter().flatten().enumerate() {
            let Some(leg) = leg else { continue };
            let t = path.nodes.get(i + 1).map_or(0, |w| w.window as usize);
            // the endpoints are nodes and already counted
            let inner = leg.cells.len().saturating_sub(1);
            for &c in leg.cells.iter().take(inner).skip(1) {
                if hard.get(t).is_some_and(|h| h.get(c) == 0.0) {
                    m.hard_violations += 1;
                }
            }
            path_cells.extend(leg.cells.iter().copied());
        }
    }
    if let Some(spec) = evaluation.first().map(|f| *f.spec()).or_else(|| hard.first().map(|h| *h.spec())) {
        m.unique_coverage = footprint(&spec, path_cells, footprint_radius).len();
    }
    m
}

pub fn plan_run_id(run: u64) -> EntityId {
    EntityId::ex(format!("planrun/{run}"))
}

pub fn assignment_id(run: u64, agent: &EntityId, window: u32) -> EntityId {
    EntityId::ex(format!("assignment/{run}/{}/{window}", agent.leaf()))
}

/// `PlanRun` and `Assignment` facts; every assignment is generated by the run.
pub fn plan_facts(plan: &TeamPlan, spec: &GridSpec, run: u64, world_version: u64, inputs: &[EntityId]) -> Vec<Fact> {
    let run_id = plan_run_id(run);
    let mut out = vec![
        Fact::new(run_id.clone(), term(vocab::TYPE), term(vocab::PLAN_RUN)),
        Fact::new(run_id.clone(), term(vocab::STATUS), Value::Str("ok".into())),
        Fact::new(run_id.clone(), term(vocab::WORLD_VERSION), world_version as i64),
    ];
    for i in inputs {
        out.push(Fact::new(run_id.clone(), term(vocab::USED), i.clone()));
    }
    for (agent, path) in &plan.paths {
        for w in &path.nodes {
            let id = assignment_id(run, agent, w.window);
            let (lon, lat) = spec.cell_center(w.cell);
            out.extend([
                Fact::new(id.clone(), term(vocab::TYPE), term(vocab::ASSIGNMENT)),
                Fact::new(id.clone(), term(vocab::FOR_AGENT), agent.clone()),
                Fact::new(id.clone(), term(vocab::FOR_WINDOW), window_id(w.window)),
                Fact::new(id.clone(), term(vocab::ROW), w.cell.0 as i64),
                Fact::new(id.clone(), term(vocab::COL), w.cell.1 as i64),
                Fact::new(id.clone(), term(vocab::WAYPOINT_WKT), Value::Wkt(format!("POINT({lon} {lat})"))),
                Fact::new(id.clone(), term(vocab::WAS_GENERATED_BY), run_id.clone()),
                Fact::new(id.clone(), term(vocab::WAS_DERIVED_FROM), w.id.clone()),
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_plane::{waypoint_id, Waypoint};
    use crate::grid::BBox;

    fn path(agent: &str, cells: &[Cell], objective: f64) -> HorizonPath {
        let a = EntityId::ex(format!("agent/{agent}"));
        HorizonPath {
            nodes: cells
                .iter()
                .enumerate()
                .map(|(t, &c)| Waypoint {
                    id: waypoint_id(&a, t as u32, c),
                    window: t as u32,
                    cell: c,
                    lonlat: (0.0, 0.0),
                    score: 0.0,
                })
                .collect(),
            seam_costs: vec![0.0; cells.len()],
            total_value: objective,
            total_seam_cost: 0.0,
            objective,
            agent: a,
        }
    }

    fn set(paths: Vec<HorizonPath>) -> (EntityId, CandidateSet) {
        let agent = paths[0].agent.clone();
        (agent.clone(), CandidateSet { agent, paths })
    }

    fn no_restitch(_: &EntityId, _: &Claims) -> Option<HorizonPath> {
        None
    }

    #[test]
    fn single_agent_takes_best() {
        let cands = BTreeMap::from([set(vec![path("a", &[(0, 0), (1, 1)], 3.0), path("a", &[(5, 5), (1, 1)], 2.0)])]);
        let plan = select_team_plan(&cands, &[], &SelectionParams::default(), no_restitch).unwrap();
        assert_eq!(plan.paths.values().next().unwrap().objective, 3.0);
    }

    #[test]
    fn disjoint_agents_ordered_by_objective() {
        let cands = BTreeMap::from([
            set(vec![path("a", &[(0, 0)], 1.0)]),
            set(vec![path("b", &[(9, 9)], 2.0)]),
        ]);
        let plan = select_team_plan(&cands, &[], &SelectionParams::default(), no_restitch).unwrap();
        assert_eq!(plan.order, vec![EntityId::ex("agent/b"), EntityId::ex("agent/a")]);
    }

    #[test]
    fn scarcity_breaks_ties() {
        // equal best objectives; b has no near-best alternative
        let cands = BTreeMap::from([
            set(vec![path("a", &[(0, 0)], 5.0), path("a", &[(4, 4)], 4.99)]),
            set(vec![path("b", &[(9, 9)], 5.0), path("b", &[(8, 0)], 1.0)]),
        ]);
        let plan = select_team_plan(&cands, &[], &SelectionParams::default(), no_restitch).unwrap();
        assert_eq!(plan.order[0], EntityId::ex("agent/b"));
    }

    #[test]
    fn event_capacity_limits_visitors() {
        let ev = Event {
            id: EntityId::ex("event/bloom"),
            window: 0,
            cell: (0, 0),
            value: 1.0,
            capacity: 1,
            expires_after: 2,
        };
        let cands = BTreeMap::from([
            set(vec![path("a", &[(5, 5), (0, 0)], 9.0)]),
            set(vec![path("b", &[(0, 0), (9, 9)], 8.0), path("b", &[(9, 0), (9, 9)], 1.0)]),
        ]);
        let plan = select_team_plan(&cands, &[ev], &SelectionParams::default(), no_restitch).unwrap();
        assert_eq!(plan.paths[&EntityId::ex("agent/b")].objective, 1.0);
    }

    #[test]
    fn deadlock_restitch_or_fail() {
        let cands = BTreeMap::from([
            set(vec![path("a", &[(0, 0)], 9.0)]),
            set(vec![path("b", &[(0, 1)], 8.0)]),
        ]);
        let params = SelectionParams::default();
        assert_eq!(
            select_team_plan(&cands, &[], &params, no_restitch),
            Err(CoordinatorError::Deadlock(EntityId::ex("agent/b")))
        );
        let plan = select_team_plan(&cands, &[], &params, |_, _| Some(path("b", &[(7, 7)], 2.0))).unwrap();
        assert_eq!(plan.restitched, vec![EntityId::ex("agent/b")]);
        assert_eq!(plan.paths[&EntityId::ex("agent/b")].nodes[0].cell, (7, 7));
    }

    #[test]
    fn cooling_square_is_three_by_three() {
        let spec = GridSpec::new(6, 6, BBox::new(0.0, 0.0, 6.0, 6.0), 1.0).unwrap();
        let empty = TeamPlan {
            paths: BTreeMap::new(),
            order: vec![],
            restitched: vec![],
            metrics: TeamMetrics::default(),
        };
        assert!(cooling_overrides(&empty, &spec, 1, 0.5).is_empty());
        let mut plan = empty.clone();
        let p = path("a", &[(2, 3)], 1.0);
        plan.paths.insert(p.agent.clone(), p);
        let cs = cooling_overrides(&plan, &spec, 1, 0.5);
        assert_eq!(cs.len(), 1);
        let region = cs[0].region(&spec);
        assert_eq!(region.count_nonzero(), 9);
        assert_eq!(region.get((1, 2)), 1.0);
        assert_eq!(region.get((3, 4)), 1.0);
        assert_eq!(cs[0].applies_in, BTreeSet::from([0]));
    }

    #[test]
    fn metrics_coverage_union() {
        let spec = GridSpec::new(20, 20, BBox::new(0.0, 0.0, 20.0, 20.0), 1.0).unwrap();
        let eval = vec![ScalarField::filled(spec, 0.5); 2];
        let hard = vec![Mask::ones(spec); 2];
        let mk = |paths: Vec<HorizonPath>| TeamPlan {
            paths: paths.into_iter().map(|p| (p.agent.clone(), p)).collect(),
            order: vec![],
            restitched: vec![],
            metrics: TeamMetrics::default(),
        };
        let none = BTreeMap::new();
        assert_eq!(team_metrics(&mk(vec![]), &eval, &hard, 2, &none), TeamMetrics::default());
        let solo = team_metrics(&mk(vec![path("a", &[(2, 2), (2, 3)], 0.0)]), &eval, &hard, 2, &none);
        assert_eq!(solo.unique_coverage, 5 * 6);
        let twin = team_metrics(
            &mk(vec![path("a", &[(2, 2), (2, 3)], 0.0), path("b", &[(2, 2), (2, 3)], 0.0)]),
            &eval,
            &hard,
            2,
            &none,
        );
        assert_eq!(twin.unique_coverage, solo.unique_coverage);
        assert_eq!(twin.mission_reward, 2.0);
        let far = team_metrics(
            &mk(vec![path("a", &[(2, 2), (2, 3)], 0.0), path("b", &[(15, 15), (15, 16)], 0.0)]),
            &eval,
            &hard,
            2,
            &none,
        );
        assert_eq!(far.unique_coverage, 2 * solo.unique_coverage);
        let mut blocked = hard.clone();
        blocked[1].set((2, 3), 0.0);
        let v = team_metrics(&mk(vec![path("a", &[(2, 2), (2, 3)], 0.0)]), &eval, &blocked, 2, &none);
        assert_eq!(v.hard_violations, 1);
    }
}
