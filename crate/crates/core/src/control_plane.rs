//! Waypoints, seam edges and physics-aware traversal costs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::data_plane::{window_id, ConstraintMasks, MissionTensor, Policy};
use crate::facts::schema::{term, vocab};
use crate::facts::{EntityId, Fact, Value};
use crate::grid::{box_convolve, cell_distance, chebyshev, Cell, GridSpec, Mask, VectorField};

/// Kilometres per nautical mile.
pub const KNOT_KMH: f64 = 1.852;

/// Effective speeds at or below this (km/h) make a move infeasible.
pub const SPEED_FLOOR_KMH: f64 = 0.05;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ControlPlaneError {
    #[error("edge {0} is infeasible")]
    InfeasibleEdge(EntityId),
    #[error("cell {0:?} is inside a no-go region")]
    Blocked(Cell),
    #[error("no path from {from:?} to {to:?}")]
    Unreachable { from: Cell, to: Cell },
    #[error("invalid capabilities: {0}")]
    InvalidCapabilities(String),
}

/// Propulsion and budget limits, stored in metric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentCapabilities {
    pub cruise_speed_kmh: f64,
    pub max_speed_kmh: f64,
    pub energy_per_km: f64,
    pub boost_gain: f64,
    pub energy_budget: f64,
    pub travel_budget_hours: f64,
}

impl AgentCapabilities {
    pub fn from_knots(
        cruise_kts: f64,
        max_kts: f64,
        energy_per_km: f64,
        boost_gain: f64,
        energy_budget: f64,
        travel_budget_hours: f64,
    ) -> Result<Self, ControlPlaneError> {
        let caps = AgentCapabilities {
            cruise_speed_kmh: cruise_kts * KNOT_KMH,
            max_speed_kmh: max_kts * KNOT_KMH,
            energy_per_km,
            boost_gain,
            energy_budget,
            travel_budget_hours,
        };
        caps.validate()?;
        Ok(caps)
    }

    pub fn validate(&self) -> Result<(), ControlPlaneError> {
        let bad = |m: &str| Err(ControlPlaneError::InvalidCapabilities(m.into()));
        if !(self.cruise_speed_kmh > 0.0) {
            return bad("cruise speed must be > 0");
        }
        if !(self.max_speed_kmh >= self.cruise_speed_kmh) {
            return bad("max speed must be >= cruise speed");
        }
        if !(self.energy_per_km >= 0.0 && self.boost_gain >= 0.0) {
            return bad("energy per km and boost gain must be >= 0");
        }
        if !(self.energy_budget > 0.0 && self.travel_budget_hours > 0.0) {
            return bad("budgets must be > 0");
        }
        Ok(())
    }

    /// Speed over ground given the current component `along` the heading.
    pub fn effective_speed(&self, along: f64) -> f64 {
        self.cruise_speed_kmh + self.boost_gain * along
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waypoint {
    pub id: EntityId,
    pub window: u32,
    pub cell: Cell,
    pub lonlat: (f64, f64),
    pub score: f64,
}

pub fn navgraph_id(agent: &EntityId, window: u32) -> EntityId {
    EntityId::ex(format!("navgraph/{}/{window}", agent.leaf()))
}

pub fn waypoint_id(agent: &EntityId, window: u32, (r, c): Cell) -> EntityId {
    EntityId::ex(format!("waypoint/{}/{window}/{r}-{c}", agent.leaf()))
}

/// Greedy peak extraction on the box-smoothed tensor.
///
/// Cells are ranked by the smoothed value `S`, ties by `(row, col)`. A cell is
/// taken unless it lies within `min_sep_cells` (Chebyshev, strictly closer) of
/// a cell already taken. Only cells with a positive tensor value qualify, so
/// hard-masked cells never become waypoints. The result is sorted by cell.
pub fn sample_waypoints(
    tensor: &MissionTensor,
    k_max: usize,
    pr_radius: usize,
    min_sep_cells: usize,
) -> Vec<Waypoint> {
    let field = &tensor.field;
    let spec = *field.spec();
    let smooth = box_convolve(field, pr_radius);
    let mut ranked: Vec<usize> = (0..spec.len())
        .filter(|&i| field.data()[i] > 0.0 && smooth.data()[i] > 0.0)
        .collect();
    ranked.sort_by(|&a, &b| smooth.data()[b].total_cmp(&smooth.data()[a]).then(a.cmp(&b)));
    let mut picked: Vec<Cell> = Vec::new();
    for i in ranked {
        if picked.len() >= k_max {
            break;
        }
        let cell = spec.cell(i);
        if picked.iter().all(|&p| chebyshev(p, cell) >= min_sep_cells) {
            picked.push(cell);
        }
    }
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|cell| Waypoint {
            id: waypoint_id(&tensor.agent, tensor.window, cell),
            window: tensor.window,
            cell,
            lonlat: spec.cell_center(cell),
            score: field.get(cell),
        })
        .collect()
}

/// The waypoints of one (agent, window).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavGraph {
    pub id: EntityId,
    pub agent: EntityId,
    pub window: u32,
    pub waypoints: Vec<Waypoint>,
}

impl NavGraph {
    pub fn new(tensor: &MissionTensor, waypoints: Vec<Waypoint>) -> Self {
        NavGraph {
            id: navgraph_id(&tensor.agent, tensor.window),
            agent: tensor.agent.clone(),
            window: tensor.window,
            waypoints,
        }
    }

    pub fn to_facts(&self, tensor_id: &EntityId) -> Vec<Fact> {
        let g = &self.id;
        let mut out = vec![
            Fact::new(g.clone(), term(vocab::TYPE), term(vocab::NAV_GRAPH)),
            Fact::new(g.clone(), term(vocab::FOR_AGENT), self.agent.clone()),
            Fact::new(g.clone(), term(vocab::FOR_WINDOW), window_id(self.window)),
            Fact::new(g.clone(), term(vocab::WAS_DERIVED_FROM), tensor_id.clone()),
        ];
        for w in &self.waypoints {
            let id = &w.id;
            out.extend([
                Fact::new(id.clone(), term(vocab::TYPE), term(vocab::WAYPOINT)),
                Fact::new(id.clone(), term(vocab::IN_GRAPH), g.clone()),
                Fact::new(id.clone(), term(vocab::WAS_DERIVED_FROM), g.clone()),
                Fact::new(id.clone(), term(vocab::ROW), w.cell.0 as i64),
                Fact::new(id.clone(), term(vocab::COL), w.cell.1 as i64),
                Fact::new(id.clone(), term(vocab::SCORE), w.score),
                Fact::new(
                    id.clone(),
                    term(vocab::AS_WKT),
                    Value::Wkt(format!("POINT({} {})", w.lonlat.0, w.lonlat.1)),
                ),
            ]);
        }
        out
    }
}

/// A directed transition between waypoints of consecutive windows, given by
/// positions in the two waypoint lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeamEdge {
    pub id: EntityId,
    pub window: u32,
    pub from: usize,
    pub to: usize,
}

pub fn edge_id(agent: &EntityId, window: u32, from: usize, to: usize) -> EntityId {
    EntityId::ex(format!("edge/{}/{window}/{from}-{to}", agent.leaf()))
}

/// Connects each waypoint of window `t` to its `fanout` nearest waypoints in
/// window `t+1`; equal distances keep list order. Edges come out sorted by
/// `(from, to)`.
pub fn build_seams(agent: &EntityId, wps_t: &[Waypoint], wps_t1: &[Waypoint], fanout: usize) -> Vec<SeamEdge> {
    let mut out = Vec::new();
    for (i, a) in wps_t.iter().enumerate() {
        let mut near: Vec<(f64, usize)> = wps_t1
            .iter()
            .enumerate()
            .map(|(j, b)| (cell_distance(a.cell, b.cell), j))
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut chosen: Vec<usize> = near.into_iter().take(fanout).map(|(_, j)| j).collect();
        chosen.sort_unstable();
        for j in chosen {
            out.push(SeamEdge {
                id: edge_id(agent, a.window, i, j),
                window: a.window,
                from: i,
                to: j,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCost {
    pub edge: EntityId,
    pub agent: EntityId,
    pub distance_km: f64,
    pub hours: f64,
    pub energy: f64,
    pub risk: f64,
    pub feasible: bool,
}

impl EdgeCost {
    pub fn id(&self) -> EntityId {
        EntityId::ex(format!("cost/{}", self.edge.local.trim_start_matches("edge/")))
    }

    pub fn to_facts(&self, edge: &SeamEdge, from: &Waypoint, to: &Waypoint, graph: &EntityId) -> Vec<Fact> {
        let e = &edge.id;
        let c = self.id();
        let mut out = vec![
            Fact::new(e.clone(), term(vocab::TYPE), term(vocab::TRAVERSE_EDGE)),
            Fact::new(e.clone(), term(vocab::IN_GRAPH), graph.clone()),
            Fact::new(e.clone(), term(vocab::FROM), from.id.clone()),
            Fact::new(e.clone(), term(vocab::TO), to.id.clone()),
            Fact::new(e.clone(), term(vocab::MOVEMENT_MODE), Value::Str("transit".into())),
            Fact::new(c.clone(), term(vocab::TYPE), term(vocab::EDGE_COST)),
            Fact::new(c.clone(), term(vocab::FOR_EDGE), e.clone()),
            Fact::new(c.clone(), term(vocab::FOR_AGENT), self.agent.clone()),
            Fact::new(c.clone(), term(vocab::COST_RISK), self.risk),
            Fact::new(c.clone(), term(vocab::FEASIBLE), self.feasible as i64),
        ];
        if self.hours.is_finite() {
            out.push(Fact::new(c.clone(), term(vocab::COST_HOURS), self.hours));
            out.push(Fact::new(c.clone(), term(vocab::COST_ENERGY), self.energy));
        }
        out
    }
}

/// Per-window inputs to seam costing. Currents are those of the departure
/// window; masks are those of the arrival window.
#[derive(Debug, Clone, Copy)]
pub struct SeamContext<'a> {
    pub spec: &'a GridSpec,
    pub currents: &'a VectorField,
    pub arrival: &'a ConstraintMasks,
    pub window_hours: f64,
}

/// Current component along the heading from `a` to `b`. Rows grow
/// southward, so north is `-row`.
fn along_track(currents: &VectorField, cell: Cell, a: Cell, b: Cell) -> f64 {
    let de = b.1 as f64 - a.1 as f64;
    let dn = a.0 as f64 - b.0 as f64;
    let norm = de.hypot(dn);
    if norm == 0.0 {
        return 0.0;
    }
    let (u, v) = currents.at(cell);
    (u * de + v * dn) / norm
}

fn midpoint(a: Cell, b: Cell) -> Cell {
    let mid = |x: usize, y: usize| ((x + y) as f64 / 2.0).round() as usize;
    (mid(a.0, b.0), mid(a.1, b.1))
}

pub fn edge_cost(
    agent: &EntityId,
    edge: &SeamEdge,
    from: &Waypoint,
    to: &Waypoint,
    caps: &AgentCapabilities,
    ctx: &SeamContext,
) -> EdgeCost {
    let (a, b) = (from.cell, to.cell);
    let samples = [a, midpoint(a, b), b];
    let d = cell_distance(a, b) * ctx.spec.pixel_size_km;
    let along = samples
        .iter()
        .map(|&s| along_track(ctx.currents, s, a, b))
        .sum::<f64>()
        / samples.len() as f64;
    let v_eff = caps.effective_speed(along);
    let risk = samples
        .iter()
        .filter(|&&s| ctx.arrival.soft_region.get(s) > 0.0)
        .count() as f64
        / samples.len() as f64;
    let blocked = samples.iter().any(|&s| ctx.arrival.is_blocked(s));
    let budget = ctx.window_hours.min(caps.travel_budget_hours);
    let (hours, energy, moving) = if d == 0.0 {
        (0.0, 0.0, true)
    } else if v_eff > SPEED_FLOOR_KMH {
        let hours = d / v_eff;
        (hours, caps.energy_per_km * d * caps.cruise_speed_kmh / v_eff, true)
    } else {
        (f64::INFINITY, f64::INFINITY, false)
    };
    EdgeCost {
        edge: edge.id.clone(),
        agent: agent.clone(),
        distance_km: d,
        hours,
        energy,
        risk,
        feasible: moving && !blocked && hours <= budget,
    }
}

/// `λ_time·h + λ_energy·e + λ_hazard·risk + λ_uncertainty·(1 − w_next)`.
pub fn seam_score(cost: &EdgeCost, policy: &Policy, w_next: f64) -> Result<f64, ControlPlaneError> {
    if !cost.feasible {
        return Err(ControlPlaneError::InfeasibleEdge(cost.edge.clone()));
    }
    Ok(policy.lambda_time * cost.hours
        + policy.lambda_energy * cost.energy
        + policy.lambda_hazard * cost.risk
        + policy.lambda_uncertainty * (1.0 - w_next))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellPath {
    pub cells: Vec<Cell>,
    pub hours: f64,
    pub energy: f64,
}

#[derive(PartialEq)]
struct Entry {
    time: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOVES: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Time and energy of one 8-connected move, using the current at the source.
pub fn step_cost(
    spec: &GridSpec,
    currents: &VectorField,
    caps: &AgentCapabilities,
    from: Cell,
    to: Cell,
) -> Option<(f64, f64)> {
    let km = cell_distance(from, to) * spec.pixel_size_km;
    let v = caps.effective_speed(along_track(currents, from, from, to));
    (v > SPEED_FLOOR_KMH).then(|| (km / v, caps.energy_per_km * km * caps.cruise_speed_kmh / v))
}

/// Minimum-time 8-connected path avoiding hard-masked cells.
pub fn micro_path(
    spec: &GridSpec,
    currents: &VectorField,
    hard: &Mask,
    caps: &AgentCapabilities,
    start: Cell,
    goal: Cell,
) -> Result<CellPath, ControlPlaneError> {
    for c in [start, goal] {
        if hard.get(c) == 0.0 {
            return Err(ControlPlaneError::Blocked(c));
        }
    }
    let n = spec.len();
    let mut best = vec![f64::INFINITY; n];
    let mut energy = vec![0.0; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let (s, g) = (spec.index(start), spec.index(goal));
    best[s] = 0.0;
    let mut heap = BinaryHeap::from([Entry { time: 0.0, index: s }]);
    while let Some(Entry { time, index }) = heap.pop() {
        if done[index] {
            continue;
        }
        done[index] = true;
        if index == g {
            break;
        }
        let here = spec.cell(index);
        for (dr, dc) in MOVES {
            let (r, c) = (here.0 as isize + dr, here.1 as isize + dc);
            if r < 0 || c < 0 || r as usize >= spec.rows || c as usize >= spec.cols {
                continue;
            }
            let next = (r as usize, c as usize);
            let j = spec.index(next);
            if done[j] || hard.get(next) == 0.0 {
                continue;
            }
            let Some((dt, de)) = step_cost(spec, currents, caps, here, next) else {
                continue;
            };
            if time + dt < best[j] {
                best[j] = time + dt;
                energy[j] = energy[index] + de;
                prev[j] = index;
                heap.push(Entry { time: best[j], index: j });
            }
        }
    }
    if !best[g].is_finite() {
        return Err(ControlPlaneError::Unreachable { from: start, to: goal });
    }
    let mut cells = vec![goal];
    let mut at = g;
    while at != s {
        at = prev[at];
        cells.push(spec.cell(at));
    }
    cells.reverse();
    Ok(CellPath {
        cells,
        hours: best[g],
        energy: energy[g],
    })
}
