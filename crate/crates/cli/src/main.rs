use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail};
use clap::{Parser, Subcommand};
use serde_json::json;

use mission_compiler::export::{self, MetricsDoc, RunManifest};
use mission_compiler::facts::{parse_fact_file, ChangeSet, EntityId, FactStore, WorldSnapshot};
use mission_compiler::pipeline::{Artifacts, Mpc};
use mission_compiler::scenario::{load_scenario, reference_scenario, write_scenario, Scenario};
use mission_compiler::Error;

#[derive(Parser)]
#[command(name = "mission-compiler", version, about = "Compile mission facts into coordinated multi-agent plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile every (agent, window) tensor and navgraph.
    Compile {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Compile, stitch and deconflict; write GeoJSON, metrics and heatmaps.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Plan, apply a fact-file perturbation, replan incrementally.
    Replan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        perturb: PathBuf,
        #[arg(long)]
        committed_through: Option<u32>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also time a from-scratch rebuild for comparison.
        #[arg(long)]
        compare_full: bool,
    },
    /// Provenance, what-if and audit queries, printed as JSON lines.
    Query {
        /// A fact file written by `plan`.
        #[arg(long, conflicts_with = "scenario")]
        store: Option<PathBuf>,
        /// Plan this scenario first and query the written-back store.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        provenance: Option<String>,
        /// Edges whose energy exceeds this fraction of the agent budget.
        #[arg(long)]
        energy_fraction: Option<f64>,
        #[arg(long)]
        audit: bool,
    },
    /// Check a scenario against the shape rules.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Write the seeded reference scenario.
    GenWorld {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("MISSION_COMPILER_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring MISSION_COMPILER_THREADS={n}"),
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Validation(vs)) => {
                    for v in vs {
                        eprintln!("{}", json!({"entity": v.entity, "rule": v.rule, "reason": v.reason}));
                    }
                    1
                }
                Some(inner) => inner.exit_code(),
                None => 1,
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}

fn open(path: &Path, preset: Option<&str>) -> Result<Scenario, Error> {
    let mut sc = load_scenario(path)?;
    if let Some(p) = preset {
        sc.apply_preset(p)?;
    }
    Ok(sc)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Compile { scenario, out, preset } => compile(&scenario, &out, preset),
        Command::Plan { scenario, out, preset } => plan(&scenario, &out, preset).map(|_| ()),
        Command::Replan {
            scenario,
            perturb,
            committed_through,
            preset,
            out,
            compare_full,
        } => replan(&scenario, &perturb, committed_through, preset, out.as_deref(), compare_full),
        Command::Query {
            store,
            scenario,
            provenance,
            energy_fraction,
            audit,
        } => {
            let snap = match (store, scenario) {
                (Some(path), _) => read_store(&path)?,
                (None, Some(path)) => {
                    let sc = open(&path, None)?;
                    let (mpc, _) = Mpc::start(sc.store.clone(), sc.registry.clone(), sc.config(), true)?;
                    mpc.store.snapshot()
                }
                (None, None) => bail!("query needs --store or --scenario"),
            };
            query(&snap, provenance, energy_fraction, audit)
        }
        Command::Validate { scenario } => {
            let sc = load_scenario(&scenario)?;
            println!("{}", json!({"scenario": scenario, "facts": sc.store.snapshot().len(), "violations": 0}));
            Ok(())
        }
        Command::GenWorld { out, seed } => {
            let (doc, bundle) = reference_scenario(seed)?;
            let path = write_scenario(&out, &doc, &bundle)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn read_store(path: &Path) -> anyhow::Result<WorldSnapshot> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lines = parse_fact_file(&text).map_err(Error::from)?;
    let mut store = FactStore::new();
    let snap = store.snapshot();
    store.commit(ChangeSet::from_lines(&snap, lines)).map_err(Error::from)?;
    Ok(store.snapshot())
}

fn compile(scenario: &Path, out: &Path, preset: Option<String>) -> anyhow::Result<()> {
    let began = Instant::now();
    let sc = open(scenario, preset.as_deref())?;
    let world = mission_compiler::world::World::resolve(&sc.store.snapshot(), &sc.registry)?;
    let mut counters = Default::default();
    let art = Artifacts::build(world, &sc.config(), None, &mut counters)?;
    let mut m = RunManifest::new(&scenario.display().to_string(), preset, &art, counters);
    m.files = export::write_compiled(out, &art)?;
    export::write_json(out, "timings.json", &json!({"compile_ms": began.elapsed().as_secs_f64() * 1e3}))?;
    export::write_json(out, "manifest.json", &m)?;
    println!("{}", out.join("manifest.json").display());
    Ok(())
}

fn plan(scenario: &Path, out: &Path, preset: Option<String>) -> anyhow::Result<Mpc> {
    let began = Instant::now();
    let sc = open(scenario, preset.as_deref())?;
    let (mpc, counters) = Mpc::start(sc.store.clone(), sc.registry.clone(), sc.config(), true)?;
    let elapsed = began.elapsed().as_secs_f64() * 1e3;
    export::write_json(out, "timings.json", &json!({"plan_ms": elapsed}))?;
    export::write_plan_run(out, &scenario.display().to_string(), preset, &mpc, counters)?;
    let plan = mpc.plan();
    println!("{}", serde_json::to_string(&MetricsDoc::new(plan))?);
    Ok(mpc)
}

fn replan(
    scenario: &Path,
    perturb: &Path,
    committed_through: Option<u32>,
    preset: Option<String>,
    out: Option<&Path>,
    compare_full: bool,
) -> anyhow::Result<()> {
    let sc = open(scenario, preset.as_deref())?;
    let (mut mpc, _) = Mpc::start(sc.store.clone(), sc.registry.clone(), sc.config(), true)?;
    let text = fs::read_to_string(perturb).map_err(|source| Error::Io {
        path: perturb.display().to_string(),
        source,
    })?;
    let lines = parse_fact_file(&text).map_err(Error::from)?;
    let snap = mpc.store.snapshot();
    let cs = ChangeSet::from_lines(&snap, lines);
    let before = mpc.plan().clone();
    let (_, dirty) = mpc.apply_update(cs)?;
    let mut report = match mpc.incremental_replan(&dirty, committed_through) {
        Ok(r) => r,
        Err(e @ Error::InfeasibleFromPrefix { .. }) => {
            println!("{}", json!({"dirty_windows": dirty, "committed_through": committed_through, "error": e.to_string()}));
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    if compare_full {
        let began = Instant::now();
        mpc.full_rebuild(committed_through, &before)?;
        report.full_ms = Some(began.elapsed().as_secs_f64() * 1e3);
    }
    if let Some(out) = out {
        export::write_json(out, "replan.json", &report)?;
        export::write_json(out, "plan.geojson", &export::plan_geojson(mpc.plan()))?;
        export::write_json(out, "metrics.json", &MetricsDoc::new(mpc.plan()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn query(snap: &WorldSnapshot, provenance: Option<String>, energy: Option<f64>, audit: bool) -> anyhow::Result<()> {
    if provenance.is_none() && energy.is_none() && !audit {
        bail!("nothing to query; pass --provenance, --energy-fraction or --audit");
    }
    if let Some(id) = provenance {
        let id = EntityId::parse(&id).map_err(Error::from)?;
        let trace = export::provenance(snap, &id).map_err(Error::from)?;
        println!("{}", json!({"query": "provenance", "artifact": id, "sources": trace}));
    }
    if let Some(f) = energy {
        for hit in export::energy_what_if(snap, f) {
            println!("{}", json!({"query": "energy_what_if", "fraction": f, "hit": hit}));
        }
    }
    if audit {
        let run = export::latest_run(snap).ok_or_else(|| anyhow!("no completed plan run in the store"))?;
        for row in export::audit(snap, &run).map_err(Error::from)? {
            println!("{}", json!({"query": "audit", "run": run, "assignment": row}));
        }
    }
    Ok(())
}
