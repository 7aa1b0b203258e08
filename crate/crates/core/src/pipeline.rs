//! End-to-end compilation and planning, with window-level artifact reuse.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control_plane::{
    build_seams, edge_cost, micro_path, sample_waypoints, seam_score, CellPath, EdgeCost, NavGraph,
    SeamContext, SeamEdge, Waypoint,
};
use crate::coordinator::{
    cooling_overrides, plan_facts, plan_run_id, select_team_plan, team_metrics, Claims, SelectionParams,
    TeamMetrics, TeamPlan,
};
use crate::data_plane::{compile_mission_tensor, MissionTensor, Policy, TensorInputs};
use crate::facts::schema::{term, vocab};
use crate::facts::{standard_shapes, ChangeSet, EntityId, Fact, FactStore, Value};
use crate::planner::{top_m_chains, stitch_viterbi, CandidateSet, Chain, HorizonPath, PlannerError, Start, Transition, Trellis};
use crate::world::{AgentSpec, Registry, World};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub k_max: usize,
    pub fanout: usize,
    pub pr_radius: usize,
    pub min_sep_cells: usize,
    pub cooling_radius: usize,
    pub cooling_attenuation: f64,
    /// Candidate chains kept per agent.
    pub candidates: usize,
    pub footprint_radius: usize,
    pub scarcity_band: f64,
    pub decay_rate: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            k_max: 20,
            fanout: 4,
            pr_radius: 2,
            min_sep_cells: 3,
            cooling_radius: 1,
            cooling_attenuation: 0.5,
            candidates: 8,
            footprint_radius: 2,
            scarcity_band: 0.01,
            decay_rate: 0.12,
        }
    }
}

impl PlannerParams {
    pub fn selection(&self) -> SelectionParams {
        SelectionParams {
            min_sep_cells: self.min_sep_cells,
            cooling_radius: self.cooling_radius,
            scarcity_band: self.scarcity_band,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub params: PlannerParams,
    /// Policy whose tensors score mission reward; `None` falls back to the base layer alone.
    pub evaluation_policy: Option<String>,
}

/// Agent id under which evaluation tensors are compiled.
pub fn evaluation_agent() -> EntityId {
    EntityId::ex("agent/evaluation")
}

/// Seams leaving window `window` for one agent, with their costs and the
/// λ-weighted score of each feasible edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeamTable {
    pub window: u32,
    pub edges: Vec<SeamEdge>,
    pub costs: Vec<EdgeCost>,
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub tensors_compiled: usize,
    pub tensors_reused: usize,
    pub evaluation_compiled: usize,
    pub edges_costed: usize,
    pub edges_reused: usize,
    pub chains_kept: usize,
}

impl std::ops::AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        self.tensors_compiled += o.tensors_compiled;
        self.tensors_reused += o.tensors_reused;
        self.evaluation_compiled += o.evaluation_compiled;
        self.edges_costed += o.edges_costed;
        self.edges_reused += o.edges_reused;
        self.chains_kept += o.chains_kept;
    }
}

type Key = (EntityId, u32);

/// Every compiled artifact for one world version.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub world: World,
    pub tensors: BTreeMap<Key, Arc<MissionTensor>>,
    pub evaluation: Vec<Arc<MissionTensor>>,
    pub graphs: BTreeMap<Key, Arc<NavGraph>>,
    pub seams: BTreeMap<Key, Arc<SeamTable>>,
}

fn evaluation_policy(world: &World, config: &PipelineConfig) -> Result<Policy, Error> {
    match &config.evaluation_policy {
        None => Ok(Policy::base_only("evaluation")),
        Some(name) => world
            .policies
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Scenario(format!("evaluation policy `{name}` is not declared"))),
    }
}

fn compile_one(world: &World, agent: &EntityId, policy: &Policy, t: u32) -> Result<MissionTensor, Error> {
    let ti = t as usize;
    Ok(compile_mission_tensor(&TensorInputs {
        agent,
        window: &world.windows[ti],
        policy,
        base: &world.base[ti],
        priors: &world.priors,
        constraints: &world.constraints,
        events: &world.events,
    })?)
}

fn seam_table(world: &World, agent: &AgentSpec, from: &NavGraph, to: &NavGraph, arrival: &MissionTensor, fanout: usize) -> SeamTable {
    let t = from.window as usize;
    let ctx = SeamContext {
        spec: &world.spec,
        currents: &world.currents[t],
        arrival: &arrival.masks,
        window_hours: world.windows[t].duration_hours,
    };
    let w_next = world.windows[t + 1].confidence;
    let edges = build_seams(&agent.id, &from.waypoints, &to.waypoints, fanout);
    let costs: Vec<EdgeCost> = edges
        .iter()
        .map(|e| edge_cost(&agent.id, e, &from.waypoints[e.from], &to.waypoints[e.to], &agent.caps, &ctx))
        .collect();
    let scores = costs
        .iter()
        .map(|c| seam_score(c, &agent.policy, w_next).ok())
        .collect();
    SeamTable {
        window: from.window,
        edges,
        costs,
        scores,
    }
}

impl Artifacts {
    /// Compiles `world`, reusing artifacts of `prev` outside `dirty`.
    pub fn build(
        world: World,
        config: &PipelineConfig,
        prev: Option<(&Artifacts, &BTreeSet<u32>)>,
        counters: &mut Counters,
    ) -> Result<Artifacts, Error> {
        let p = &config.params;
        let n = world.horizon() as u32;
        let fresh = |t: u32| prev.is_none_or(|(_, d)| d.contains(&t));

        let mut jobs: Vec<(usize, u32)> = Vec::new();
        let mut tensors = BTreeMap::new();
        for (ai, agent) in world.agents.iter().enumerate() {
            for t in 0..n {
                let key = (agent.id.clone(), t);
                match prev.and_then(|(a, _)| a.tensors.get(&key)).filter(|_| !fresh(t)) {
                    Some(old) => {
                        tensors.insert(key, old.clone());
                        counters.tensors_reused += 1;
                    }
                    None => jobs.push((ai, t)),
                }
            }
        }
        let compiled: Vec<(Key, MissionTensor)> = jobs
            .par_iter()
            .map(|&(ai, t)| {
                let a = &world.agents[ai];
                compile_one(&world, &a.id, &a.policy, t).map(|m| ((a.id.clone(), t), m))
            })
            .collect::<Result<_, Error>>()?;
        counters.tensors_compiled += compiled.len();
        tensors.extend(compiled.into_iter().map(|(k, m)| (k, Arc::new(m))));

        let eval_policy = evaluation_policy(&world, config)?;
        let eval_agent = evaluation_agent();
        let evaluation: Vec<Arc<MissionTensor>> = (0..n)
            .into_par_iter()
            .map(|t| match prev.filter(|_| !fresh(t)) {
                Some((a, _)) if (t as usize) < a.evaluation.len() => Ok((a.evaluation[t as usize].clone(), false)),
                _ => compile_one(&world, &eval_agent, &eval_policy, t).map(|m| (Arc::new(m), true)),
            })
            .collect::<Result<Vec<_>, Error>>()?
            .into_iter()
            .map(|(m, new)| {
                counters.evaluation_compiled += new as usize;
                m
            })
            .collect();

        let graphs: BTreeMap<Key, Arc<NavGraph>> = tensors
            .par_iter()
            .map(|(k, m)| {
                let reused = prev
                    .filter(|_| !fresh(k.1))
                    .and_then(|(a, _)| a.graphs.get(k).cloned());
                let g = reused.unwrap_or_else(|| {
                    Arc::new(NavGraph::new(m, sample_waypoints(m, p.k_max, p.pr_radius, p.min_sep_cells)))
                });
                (k.clone(), g)
            })
            .collect();

        let seam_keys: Vec<(usize, u32)> = (0..world.agents.len())
            .flat_map(|ai| (0..n.saturating_sub(1)).map(move |t| (ai, t)))
            .collect();
        let seam_list: Vec<(Key, Arc<SeamTable>, bool)> = seam_keys
            .par_iter()
            .map(|&(ai, t)| {
                let a = &world.agents[ai];
                let key = (a.id.clone(), t);
                if let Some(old) = prev
                    .filter(|_| !fresh(t) && !fresh(t + 1))
                    .and_then(|(pa, _)| pa.seams.get(&key))
                {
                    return (key, old.clone(), false);
                }
                let from = &graphs[&(a.id.clone(), t)];
                let to = &graphs[&(a.id.clone(), t + 1)];
                let arrival = &tensors[&(a.id.clone(), t + 1)];
                (key, Arc::new(seam_table(&world, a, from, to, arrival, p.fanout)), true)
            })
            .collect();
        let mut seams = BTreeMap::new();
        for (k, s, new) in seam_list {
            if new {
                counters.edges_costed += s.edges.len();
            } else {
                counters.edges_reused += s.edges.len();
            }
            seams.insert(k, s);
        }

        Ok(Artifacts {
            world,
            tensors,
            evaluation,
            graphs,
            seams,
        })
    }

    pub fn graph(&self, agent: &EntityId, t: u32) -> &NavGraph {
        &self.graphs[&(agent.clone(), t)]
    }

    /// Trellis over windows `from..T` for one agent.
    pub fn trellis(&self, agent: &EntityId, from: u32) -> Trellis {
        let n = self.world.horizon() as u32;
        Trellis {
            rewards: (from..n)
                .map(|t| self.graph(agent, t).waypoints.iter().map(|w| w.score).collect())
                .collect(),
            transitions: (from..n.saturating_sub(1))
                .map(|t| {
                    let s = &self.seams[&(agent.clone(), t)];
                    s.edges
                        .iter()
                        .zip(&s.scores)
                        .filter_map(|(e, sc)| {
                            sc.map(|cost| Transition {
                                from: e.from,
                                to: e.to,
                                cost,
                            })
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Hash of every agent tensor, keyed by tensor id.
    pub fn tensor_hashes(&self) -> BTreeMap<String, String> {
        self.tensors
            .values()
            .map(|m| (m.id().to_string(), m.hash_hex()))
            .collect()
    }

    /// Artifact facts: tensors, nav graphs, waypoints, edges and costs.
    pub fn facts(&self) -> Vec<Fact> {
        let mut out = Vec::new();
        for m in self.tensors.values() {
            out.extend(m.to_facts());
        }
        for ((agent, t), g) in &self.graphs {
            out.extend(g.to_facts(&self.tensors[&(agent.clone(), *t)].id()));
        }
        for ((agent, t), s) in &self.seams {
            let from = self.graph(agent, *t);
            let to = self.graph(agent, t + 1);
            for (e, c) in s.edges.iter().zip(&s.costs) {
                out.extend(c.to_facts(e, &from.waypoints[e.from], &to.waypoints[e.to], &from.id));
            }
        }
        out
    }
}

/// Windows `0..=through` of `plan` are held fixed.
#[derive(Debug, Clone, Copy)]
pub struct Commitment<'a> {
    pub through: u32,
    pub plan: &'a TeamPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutcome {
    pub plan: TeamPlan,
    pub candidates: BTreeMap<EntityId, CandidateSet>,
    /// Micro-paths between consecutive nodes, per agent.
    pub legs: BTreeMap<EntityId, Vec<Option<CellPath>>>,
}

struct AgentProblem {
    agent: EntityId,
    first: u32,
    trellis: Trellis,
    start: Start,
    prefix: Vec<Waypoint>,
    prefix_costs: Vec<f64>,
}

impl AgentProblem {
    fn path(&self, art: &Artifacts, chain: &Chain) -> HorizonPath {
        let mut nodes = self.prefix.clone();
        let mut seam_costs = self.prefix_costs.clone();
        for (k, &i) in chain.nodes.iter().enumerate() {
            let t = self.first + k as u32;
            nodes.push(art.graph(&self.agent, t).waypoints[i].clone());
            if k == 0 {
                if self.prefix.is_empty() {
                    seam_costs.push(0.0);
                }
            } else {
                let prev = chain.nodes[k - 1];
                let cost = self.trellis.transitions[k - 1]
                    .iter()
                    .find(|e| e.from == prev && e.to == i)
                    .map_or(0.0, |e| e.cost);
                seam_costs.push(cost);
            }
        }
        let total_value: f64 = nodes.iter().map(|w| w.score).sum();
        let total_seam_cost: f64 = seam_costs.iter().sum();
        HorizonPath {
            agent: self.agent.clone(),
            nodes,
            seam_costs,
            total_value,
            total_seam_cost,
            objective: total_value - total_seam_cost,
        }
    }

    fn without(&self, art: &Artifacts, claims: &Claims, params: &SelectionParams) -> (Trellis, Start) {
        let sel = params;
        let blocked = |k: usize, i: usize| {
            let t = self.first + k as u32;
            let cell = art.graph(&self.agent, t).waypoints[i].cell;
            claims.blocks(t, cell, sel) || claims.event_full(t, cell, &art.world.events)
        };
        let mut trellis = self.trellis.clone();
        for (k, edges) in trellis.transitions.iter_mut().enumerate() {
            edges.retain(|e| !blocked(k + 1, e.to));
        }
        let n0 = trellis.rewards[0].len();
        let base: Vec<Option<f64>> = match &self.start {
            Start::Free => vec![Some(0.0); n0],
            Start::Entry(c) => c.clone(),
        };
        let start = Start::Entry(
            base.into_iter()
                .enumerate()
                .map(|(i, c)| c.filter(|_| !self.prefix.is_empty() || !blocked(0, i)))
                .collect(),
        );
        (trellis, start)
    }
}

fn problem(art: &Artifacts, agent: &EntityId, commit: Option<Commitment>) -> Result<AgentProblem, Error> {
    match commit {
        None => Ok(AgentProblem {
            agent: agent.clone(),
            first: 0,
            trellis: art.trellis(agent, 0),
            start: Start::Free,
            prefix: Vec::new(),
            prefix_costs: Vec::new(),
        }),
        Some(c) => {
            let old = c
                .plan
                .paths
                .get(agent)
                .ok_or_else(|| Error::Scenario(format!("no committed path for {agent}")))?;
            let through = c.through as usize;
            if through >= old.nodes.len() {
                return Err(Error::Scenario(format!("committed window {} beyond the horizon", c.through)));
            }
            let node = &old.nodes[through];
            let graph = art.graph(agent, c.through);
            let idx = graph
                .waypoints
                .iter()
                .position(|w| w.cell == node.cell)
                .ok_or(Error::InfeasibleFromPrefix {
                    agent: agent.clone(),
                    window: c.through,
                })?;
            Ok(AgentProblem {
                agent: agent.clone(),
                first: c.through,
                trellis: art.trellis(agent, c.through),
                start: Start::forced(graph.waypoints.len(), idx),
                prefix: old.nodes[..through].to_vec(),
                prefix_costs: old.seam_costs[..=through].to_vec(),
            })
        }
    }
}

/// Candidate generation, greedy selection, micro-paths and metrics.
pub fn plan(
    art: &Artifacts,
    config: &PipelineConfig,
    commit: Option<Commitment>,
    counters: &mut Counters,
) -> Result<PlanOutcome, Error> {
    let p = &config.params;
    let problems: Vec<AgentProblem> = art
        .world
        .agents
        .iter()
        .map(|a| problem(art, &a.id, commit))
        .collect::<Result<_, Error>>()?;
    let sets: Vec<CandidateSet> = problems
        .par_iter()
        .map(|pr| {
            let chains = top_m_chains(&pr.trellis, &pr.start, p.candidates).map_err(|e| match (e, commit) {
                (PlannerError::NoFeasibleChain(_), Some(c)) => Error::InfeasibleFromPrefix {
                    agent: pr.agent.clone(),
                    window: c.through,
                },
                (source, _) => Error::Planner {
                    agent: pr.agent.clone(),
                    source,
                },
            })?;
            Ok(CandidateSet {
                agent: pr.agent.clone(),
                paths: chains.iter().map(|c| pr.path(art, c)).collect(),
            })
        })
        .collect::<Result<_, Error>>()?;
    counters.chains_kept += sets.iter().map(|s| s.paths.len()).sum::<usize>();
    let candidates: BTreeMap<EntityId, CandidateSet> = sets.into_iter().map(|s| (s.agent.clone(), s)).collect();

    let sel = p.selection();
    let by_agent: BTreeMap<&EntityId, &AgentProblem> = problems.iter().map(|pr| (&pr.agent, pr)).collect();
    let mut plan = select_team_plan(&candidates, &art.world.events, &sel, |agent, claims| {
        let pr = by_agent[agent];
        let (trellis, start) = pr.without(art, claims, &sel);
        stitch_viterbi(&trellis, &start).ok().map(|c| pr.path(art, &c))
    })?;

    let legs: BTreeMap<EntityId, Vec<Option<CellPath>>> = plan
        .paths
        .par_iter()
        .map(|(agent, path)| {
            let caps = &art.world.agent(agent).expect("planned agent exists").caps;
            let legs = path
                .nodes
                .windows(2)
                .map(|w| {
                    let t = w[0].window as usize;
                    let hard = &art.tensors[&(agent.clone(), w[1].window)].masks.hard;
                    micro_path(&art.world.spec, &art.world.currents[t], hard, caps, w[0].cell, w[1].cell).ok()
                })
                .collect();
            (agent.clone(), legs)
        })
        .collect();
    let eval_fields: Vec<_> = art.evaluation.iter().map(|m| m.field.clone()).collect();
    let hard: Vec<_> = art.evaluation.iter().map(|m| m.masks.hard.clone()).collect();
    plan.metrics = team_metrics(&plan, &eval_fields, &hard, p.footprint_radius, &legs);
    Ok(PlanOutcome {
        plan,
        candidates,
        legs,
    })
}

/// Full compile and plan from a snapshot.
pub fn run_full(
    store: &FactStore,
    registry: &Registry,
    config: &PipelineConfig,
    commit: Option<Commitment>,
) -> Result<(Artifacts, PlanOutcome, Counters), Error> {
    let world = World::resolve(&store.snapshot(), registry)?;
    let mut counters = Counters::default();
    let art = Artifacts::build(world, config, None, &mut counters)?;
    let outcome = plan(&art, config, commit, &mut counters)?;
    Ok((art, outcome, counters))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub agent: EntityId,
    pub window: u32,
    pub row: usize,
    pub col: usize,
}

fn rows(plan: &TeamPlan) -> Vec<AssignmentRow> {
    plan.assignments()
        .into_iter()
        .map(|(agent, window, (row, col))| AssignmentRow { agent, window, row, col })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanReport {
    pub world_version: u64,
    pub changed_facts: usize,
    pub dirty_windows: Vec<u32>,
    pub committed_through: Option<u32>,
    pub tensors_recompiled: usize,
    pub tensors_reused: usize,
    pub total_tensors: usize,
    pub evaluation_recompiled: usize,
    pub edges_costed: usize,
    pub edges_reused: usize,
    pub plan_changed: bool,
    /// Earliest window where some agent's assignment moved.
    pub first_divergence: Option<u32>,
    pub old_metrics: TeamMetrics,
    pub new_metrics: TeamMetrics,
    pub old_assignments: Vec<AssignmentRow>,
    pub new_assignments: Vec<AssignmentRow>,
    pub incremental_ms: f64,
    pub full_ms: Option<f64>,
}

/// Fact store, compiled artifacts and the current plan, kept in step.
#[derive(Debug, Clone)]
pub struct Mpc {
    pub store: FactStore,
    registry: Arc<Registry>,
    config: PipelineConfig,
    artifacts: Artifacts,
    outcome: PlanOutcome,
    run: u64,
    last_changed: usize,
    /// Write artifacts and plan runs back into the store after each plan.
    pub write_back: bool,
}

impl Mpc {
    pub fn start(store: FactStore, registry: Arc<Registry>, config: PipelineConfig, write_back: bool) -> Result<(Mpc, Counters), Error> {
        let (artifacts, outcome, counters) = run_full(&store, &registry, &config, None)?;
        let mut mpc = Mpc {
            store,
            registry,
            config,
            artifacts,
            outcome,
            run: 0,
            last_changed: 0,
            write_back,
        };
        mpc.record()?;
        Ok((mpc, counters))
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn outcome(&self) -> &PlanOutcome {
        &self.outcome
    }

    pub fn plan(&self) -> &TeamPlan {
        &self.outcome.plan
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Id of the latest plan run; written to the store only with `write_back`.
    pub fn run_id(&self) -> EntityId {
        plan_run_id(self.run - 1)
    }

    fn record(&mut self) -> Result<(), Error> {
        if !self.write_back {
            self.run += 1;
            return Ok(());
        }
        let snap = self.store.snapshot();
        let mut cs = ChangeSet::new();
        let derived = [
            vocab::TENSOR_ARTIFACT,
            vocab::NAV_GRAPH,
            vocab::WAYPOINT,
            vocab::TRAVERSE_EDGE,
            vocab::EDGE_COST,
        ];
        let fresh: BTreeSet<Fact> = self.artifacts.facts().into_iter().collect();
        let stale_subjects: BTreeSet<EntityId> = derived.iter().flat_map(|c| snap.instances(c)).collect();
        for s in &stale_subjects {
            for f in snap.query(Some(s), None, None) {
                if !fresh.contains(f) {
                    cs.retract(f.clone());
                }
            }
        }
        for f in fresh {
            if !snap.contains(&f) {
                cs.assert(f);
            }
        }
        if self.run > 0 {
            cs.replace(&snap, plan_run_id(self.run - 1), term(vocab::STATUS), Value::Str("stale".into()));
        }
        let used: Vec<EntityId> = self
            .artifacts
            .world
            .agents
            .iter()
            .map(|a| a.policy.id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for f in plan_facts(&self.outcome.plan, &self.artifacts.world.spec, self.run, snap.version(), &used) {
            cs.assert(f);
        }
        self.store.commit(cs)?;
        self.run += 1;
        Ok(())
    }

    /// Commits a validated batch; returns the new version and its dirty windows.
    pub fn apply_update(&mut self, changes: ChangeSet) -> Result<(u64, BTreeSet<u32>), Error> {
        let before = self.store.version();
        let log_len = self.store.log().len();
        let violations = crate::facts::schema::validate(&self.store.preview(changes.clone())?, &standard_shapes());
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        self.store.commit(changes)?;
        self.last_changed = self.store.log().len() - log_len;
        let dirty = self.store.dirty_windows(before)?;
        Ok((self.store.version(), dirty))
    }

    /// Recompiles `dirty` windows and re-plans with windows `0..=committed_through` fixed.
    pub fn incremental_replan(
        &mut self,
        dirty: &BTreeSet<u32>,
        committed_through: Option<u32>,
    ) -> Result<ReplanReport, Error> {
        let began = Instant::now();
        if let (Some(c), Some(&d)) = (committed_through, dirty.iter().next()) {
            if c >= d {
                return Err(Error::CommittedWindowDirty { committed: c, dirty: d });
            }
        }
        let old_plan = self.outcome.plan.clone();
        let mut counters = Counters::default();
        if !dirty.is_empty() {
            let world = World::resolve(&self.store.snapshot(), &self.registry)?;
            let art = Artifacts::build(world, &self.config, Some((&self.artifacts, dirty)), &mut counters)?;
            let commit = committed_through.map(|through| Commitment { through, plan: &old_plan });
            let outcome = plan(&art, &self.config, commit, &mut counters)?;
            self.artifacts = art;
            self.outcome = outcome;
            self.record()?;
        } else {
            counters.tensors_reused = self.artifacts.tensors.len();
        }
        let new_plan = &self.outcome.plan;
        let first_divergence = new_plan
            .paths
            .iter()
            .filter_map(|(a, p)| {
                let old = old_plan.paths.get(a)?;
                p.nodes
                    .iter()
                    .zip(&old.nodes)
                    .find(|(x, y)| x.cell != y.cell)
                    .map(|(x, _)| x.window)
            })
            .min();
        Ok(ReplanReport {
            world_version: self.store.version(),
            changed_facts: if dirty.is_empty() { 0 } else { self.last_changed },
            dirty_windows: dirty.iter().copied().collect(),
            committed_through,
            tensors_recompiled: counters.tensors_compiled,
            tensors_reused: counters.tensors_reused,
            total_tensors: self.artifacts.tensors.len(),
            evaluation_recompiled: counters.evaluation_compiled,
            edges_costed: counters.edges_costed,
            edges_reused: counters.edges_reused,
            plan_changed: rows(new_plan) != rows(&old_plan),
            first_divergence,
            old_metrics: old_plan.metrics,
            new_metrics: new_plan.metrics,
            old_assignments: rows(&old_plan),
            new_assignments: rows(new_plan),
            incremental_ms: began.elapsed().as_secs_f64() * 1e3,
            full_ms: None,
        })
    }

    /// Rebuilds everything from the current snapshot with the given prefix fixed.
    pub fn full_rebuild(&self, committed_through: Option<u32>, prefix_from: &TeamPlan) -> Result<(Artifacts, PlanOutcome, Counters), Error> {
        let commit = committed_through.map(|through| Commitment { through, plan: prefix_from });
        run_full(&self.store, &self.registry, &self.config, commit)
    }
}

/// Soft cooling constraints for the next compile cycle, as facts.
pub fn cooling_facts(plan: &TeamPlan, art: &Artifacts, params: &PlannerParams) -> Vec<Fact> {
    cooling_overrides(plan, &art.world.spec, params.cooling_radius, params.cooling_attenuation)
        .iter()
        .flat_map(|c| c.to_facts())
        .collect()
}
