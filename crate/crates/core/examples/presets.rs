//! Plans the reference world under each preset and prints the rewards.
//!
//! `cargo run --release --example presets -- 7`

use mission_compiler::pipeline::run_full;
use mission_compiler::scenario::{reference_scenario, Scenario, PRESETS};

fn main() -> Result<(), mission_compiler::Error> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let (doc, grids) = reference_scenario(seed)?;
    let base = Scenario::from_bundle(doc, &grids)?;
    for name in PRESETS {
        let mut sc = base.clone();
        sc.apply_preset(name)?;
        let (_, out, _) = run_full(&sc.store, &sc.registry, &sc.config(), None)?;
        let m = out.plan.metrics;
        println!("{name:>10}  reward {:8.3}  coverage {:4}  violations {}", m.mission_reward, m.unique_coverage, m.hard_violations);
        for (agent, path) in &out.plan.paths {
            let cells: Vec<String> = path.nodes.iter().map(|w| format!("{:?}", w.cell)).collect();
            println!("{:>12} {}", agent.leaf(), cells.join(" "));
        }
    }
    Ok(())
}
