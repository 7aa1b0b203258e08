//! Viterbi stitching over a layered graph.
//!
//! The trellis is domain-agnostic: layer `t` holds node rewards, transitions
//! join layer `t` to `t+1` with a cost, and a chain's objective is the sum of
//! its rewards minus the sum of its transition costs. Ties between equal
//! objectives go to the lexicographically smaller node sequence.

use std::cmp::Ordering;

use serde::Serialize;

use crate::control_plane::Waypoint;
use crate::facts::EntityId;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("layer {0} has no nodes")]
    EmptyLayer(usize),
    #[error("no feasible chain reaches layer {0}")]
    NoFeasibleChain(usize),
    #[error("trellis shape is inconsistent: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trellis {
    /// `rewards[t][i]`: reward of node `i` in layer `t`.
    pub rewards: Vec<Vec<f64>>,
    /// `transitions[t]`: feasible moves from layer `t` to layer `t+1`.
    pub transitions: Vec<Vec<Transition>>,
}

/// How the first layer is entered.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Start {
    #[default]
    Free,
    /// Per-node entry cost into layer 0; `None` marks a node as unreachable.
    Entry(Vec<Option<f64>>),
}

impl Start {
    /// Only `node` may open the chain, at no cost.
    pub fn forced(layer0: usize, node: usize) -> Start {
        Start::Entry((0..layer0).map(|i| (i == node).then_some(0.0)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub nodes: Vec<usize>,
    pub reward: f64,
    pub cost: f64,
    pub objective: f64,
}

impl Trellis {
    pub fn layers(&self) -> usize {
        self.rewards.len()
    }

    fn check(&self, start: &Start) -> Result<(), PlannerError> {
        if self.rewards.is_empty() {
            return Err(PlannerError::Shape("no layers".into()));
        }
        if self.transitions.len() + 1 != self.rewards.len() {
            return Err(PlannerError::Shape(format!(
                "{} layers need {} transition sets, got {}",
                self.rewards.len(),
                self.rewards.len() - 1,
                self.transitions.len()
            )));
        }
        if let Some(t) = self.rewards.iter().position(|r| r.is_empty()) {
            return Err(PlannerError::EmptyLayer(t));
        }
        for (t, edges) in self.transitions.iter().enumerate() {
            for e in edges {
                if e.from >= self.rewards[t].len() || e.to >= self.rewards[t + 1].len() {
                    return Err(PlannerError::Shape(format!("transition {e:?} out of range in layer {t}")));
                }
            }
        }
        if let Start::Entry(costs) = start {
            if costs.len() != self.rewards[0].len() {
                return Err(PlannerError::Shape("entry costs must cover layer 0".into()));
            }
        }
        Ok(())
    }

    /// Objective of an explicit chain, accumulated in chain order.
    pub fn evaluate(&self, nodes: &[usize], start: &Start) -> Option<Chain> {
        if nodes.len() != self.layers() {
            return None;
        }
        let entry = match start {
            Start::Free => 0.0,
            Start::Entry(c) => (*c.get(nodes[0])?)?,
        };
        let mut objective = self.rewards[0][nodes[0]] - entry;
        let mut reward = self.rewards[0][nodes[0]];
        let mut cost = entry;
        for t in 1..nodes.len() {
            let tr = self.transitions[t - 1]
                .iter()
                .find(|e| e.from == nodes[t - 1] && e.to == nodes[t])?;
            let r = self.rewards[t][nodes[t]];
            objective = objective - tr.cost + r;
            reward += r;
            cost += tr.cost;
        }
        Some(Chain {
            nodes: nodes.to_vec(),
            reward,
            cost,
            objective,
        })
    }
}

/// Best-first order: higher objective, then smaller node sequence.
pub fn chain_order(a: &Chain, b: &Chain) -> Ordering {
    b.objective
        .total_cmp(&a.objective)
        .then_with(|| a.nodes.cmp(&b.nodes))
}

#[derive(Clone)]
struct Partial {
    value: f64,
    reward: f64,
    cost: f64,
    nodes: Vec<usize>,
}

fn partial_order(a: &Partial, b: &Partial) -> Ordering {
    b.value.total_cmp(&a.value).then_with(|| a.nodes.cmp(&b.nodes))
}

/// List-Viterbi keeping the `m` best partial chains per node.
pub fn top_m_chains(trellis: &Trellis, start: &Start, m: usize) -> Result<Vec<Chain>, PlannerError> {
    trellis.check(start)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut layer: Vec<Vec<Partial>> = trellis.rewards[0]
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let entry = match start {
                Start::Free => Some(0.0),
                Start::Entry(c) => c[i],
            };
            entry
                .map(|e| Partial {
                    value: r - e,
                    reward: r,
                    cost: e,
                    nodes: vec![i],
                })
                .into_iter()
                .collect()
        })
        .collect();
    if layer.iter().all(Vec::is_empty) {
        return Err(PlannerError::NoFeasibleChain(0));
    }
    for t in 1..trellis.layers() {
        let mut next: Vec<Vec<Partial>> = vec![Vec::new(); trellis.rewards[t].len()];
        for e in &trellis.transitions[t - 1] {
            let r = trellis.rewards[t][e.to];
            for p in &layer[e.from] {
                let mut nodes = p.nodes.clone();
                nodes.push(e.to);
                next[e.to].push(Partial {
                    value: p.value - e.cost + r,
                    reward: p.reward + r,
                    cost: p.cost + e.cost,
                    nodes,
                });
            }
        }
        for list in &mut next {
            list.sort_by(partial_order);
            list.truncate(m);
        }
        if next.iter().all(Vec::is_empty) {
            return Err(PlannerError::NoFeasibleChain(t));
        }
        layer = next;
    }
    let mut all: Vec<Partial> = layer.into_iter().flatten().collect();
    all.sort_by(partial_order);
    all.truncate(m);
    Ok(all
        .into_iter()
        .map(|p| Chain {
            nodes: p.nodes,
            reward: p.reward,
            cost: p.cost,
            objective: p.value,
        })
        .collect())
}

/// The single best chain.
pub fn stitch_viterbi(trellis: &Trellis, start: &Start) -> Result<Chain, PlannerError> {
    trellis.check(start)?;
    let n0 = trellis.rewards[0].len();
    // value and back-pointer per node; prefixes kept for exact tie-breaking
    let mut best: Vec<Option<Partial>> = (0..n0)
        .map(|i| {
            let entry = match start {
                Start::Free => Some(0.0),
                Start::Entry(c) => c[i],
            };
            entry.map(|e| Partial {
                value: trellis.rewards[0][i] - e,
                reward: trellis.rewards[0][i],
                cost: e,
                nodes: vec![i],
            })
        })
        .collect();
    if best.iter().all(Option::is_none) {
        return Err(PlannerError::NoFeasibleChain(0));
    }
    for t in 1..trellis.layers() {
        let mut next: Vec<Option<Partial>> = vec![None; trellis.rewards[t].len()];
        for e in &trellis.transitions[t - 1] {
            let Some(p) = &best[e.from] else { continue };
            let value = p.value - e.cost + trellis.rewards[t][e.to];
            let better = match &next[e.to] {
                None => true,
                Some(q) => match value.total_cmp(&q.value) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => p.nodes[..] < q.nodes[..q.nodes.len() - 1],
                },
            };
            if better {
                let mut nodes = p.nodes.clone();
                nodes.push(e.to);
                next[e.to] = Some(Partial {
                    value,
                    reward: p.reward + trellis.rewards[t][e.to],
                    cost: p.cost + e.cost,
                    nodes,
                });
            }
        }
        if next.iter().all(Option::is_none) {
            return Err(PlannerError::NoFeasibleChain(t));
        }
        best = next;
    }
    let p = best
        .into_iter()
        .flatten()
        .min_by(partial_order)
        .expect("last layer has a chain");
    Ok(Chain {
        nodes: p.nodes,
        reward: p.reward,
        cost: p.cost,
        objective: p.value,
    })
}

/// An end-to-end waypoint chain for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonPath {
    pub agent: EntityId,
    pub nodes: Vec<Waypoint>,
    /// Seam score paid to reach each node; the first entry is the entry cost.
    pub seam_costs: Vec<f64>,
    pub total_value: f64,
    pub total_seam_cost: f64,
    pub objective: f64,
}

impl HorizonPath {
    pub fn cells(&self) -> Vec<(u32, (usize, usize))> {
        self.nodes.iter().map(|w| (w.window, w.cell)).collect()
    }

    pub fn recomputed_objective(&self) -> f64 {
        self.nodes.iter().map(|w| w.score).sum::<f64>() - self.seam_costs.iter().sum::<f64>()
    }
}

/// Best-first candidate chains for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub agent: EntityId,
    pub paths: Vec<HorizonPath>,
}
