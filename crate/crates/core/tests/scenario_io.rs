mod common;

use std::fs;

use common::{random_field, small_scenario, unit_spec};
use mission_compiler::facts::{schema, standard_shapes};
use mission_compiler::grid::grd1;
use mission_compiler::pipeline::run_full;
use mission_compiler::scenario::{
    derive_frontness, gen_sst_series, load_scenario, reference_scenario, write_scenario, Scenario,
};
use mission_compiler::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn bundle_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, bundle) = reference_scenario(common::REFERENCE_SEED).unwrap();
    let path = write_scenario(dir.path(), &doc, &bundle).unwrap();
    let loaded = load_scenario(&path).unwrap();
    let direct = Scenario::from_bundle(doc, &bundle).unwrap();
    let (a, _, _) = run_full(&loaded.store, &loaded.registry, &loaded.config(), None).unwrap();
    let (b, _, _) = run_full(&direct.store, &direct.registry, &direct.config(), None).unwrap();
    assert_eq!(a.tensor_hashes(), b.tensor_hashes());
    for (key, field) in &bundle.fields {
        let bytes = fs::read(dir.path().join(key)).unwrap();
        assert_eq!(bytes, grd1::field_bytes(field));
    }
}

#[test]
fn grd1_bytes_are_stable_across_load_and_save() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (r, c) in [(2, 2), (7, 3), (16, 31)] {
        let spec = unit_spec(r, c);
        let f = random_field(spec, &mut rng);
        let p = dir.path().join(format!("f{r}x{c}.grd"));
        grd1::save_field(&p, &f).unwrap();
        let first = fs::read(&p).unwrap();
        let g = grd1::load_field(&p, &spec).unwrap();
        let q = dir.path().join("again.grd");
        grd1::save_field(&q, &g).unwrap();
        assert_eq!(first, fs::read(&q).unwrap());
    }
}

#[test]
fn missing_grid_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, bundle) = reference_scenario(1).unwrap();
    let path = write_scenario(dir.path(), &doc, &bundle).unwrap();
    fs::remove_file(dir.path().join("grids/poi.grd")).unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert!(err.to_string().contains("poi.grd"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn corrupt_grid_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, bundle) = reference_scenario(1).unwrap();
    let path = write_scenario(dir.path(), &doc, &bundle).unwrap();
    fs::write(dir.path().join("grids/base_3.grd"), b"GRD1 nope").unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert!(err.to_string().contains("base_3.grd"), "{err}");
}

#[test]
fn grid_spec_mismatch_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (doc, mut bundle) = small_scenario(vec![random_field(unit_spec(4, 4), &mut rng)], &["a"]);
    bundle.fields.insert("base_0.grd".into(), random_field(unit_spec(4, 5), &mut rng));
    assert!(matches!(Scenario::from_bundle(doc, &bundle), Err(Error::Scenario(_))));
}

#[test]
fn json_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{\n  \"name\": \"x\",\n  \"grid\": oops\n}\n").unwrap();
    let err = load_scenario(&p).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn fact_section_errors_carry_line_numbers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut doc, bundle) = small_scenario(vec![random_field(unit_spec(4, 4), &mut rng)], &["a"]);
    doc.facts = vec!["# ok".into(), "ex:window/0 ex:confidence \"unterminated".into()];
    let err = Scenario::from_bundle(doc, &bundle).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn minimal_scenario_plans_one_node() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (doc, bundle) = small_scenario(vec![random_field(unit_spec(6, 6), &mut rng)], &["solo"]);
    let sc = Scenario::from_bundle(doc, &bundle).unwrap();
    let (art, out, c) = run_full(&sc.store, &sc.registry, &sc.config(), None).unwrap();
    assert_eq!(art.tensors.len(), 1);
    assert_eq!(c.tensors_compiled, 1);
    let path = out.plan.paths.values().next().unwrap();
    assert_eq!(path.nodes.len(), 1);
    assert_eq!(out.plan.metrics.hard_violations, 0);
}

#[test]
fn validation_rejects_bad_confidence_and_policy_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bases = vec![random_field(unit_spec(4, 4), &mut rng), random_field(unit_spec(4, 4), &mut rng)];
    let (mut doc, bundle) = small_scenario(bases.clone(), &["a"]);
    doc.windows[1].confidence = Some(1.5);
    assert!(Scenario::from_bundle(doc, &bundle).is_err());

    let (mut doc, bundle) = small_scenario(bases.clone(), &["a"]);
    doc.policies.push(common::base_policy("Q"));
    doc.facts = vec!["ex:agent/a ex:usesPolicy ex:policy/Q".into()];
    match Scenario::from_bundle(doc, &bundle) {
        Err(Error::Validation(v)) => assert!(v.iter().any(|v| v.entity.to_string() == "ex:agent/a")),
        other => panic!("{other:?}"),
    }

    let (mut doc, bundle) = small_scenario(bases, &["a"]);
    doc.facts = vec!["- ex:agent/a ex:usesPolicy ex:policy/P".into()];
    assert!(matches!(Scenario::from_bundle(doc, &bundle), Err(Error::Validation(_))));
}

#[test]
fn reference_has_no_violations() {
    let sc = common::reference();
    assert!(schema::validate(&sc.store.snapshot(), &standard_shapes()).is_empty());
}

#[test]
fn frontness_matches_elementwise_oracle() {
    let spec = unit_spec(12, 9);
    let sst = gen_sst_series(&spec, 5, 99);
    let front = derive_frontness(&sst.fields).unwrap();
    assert_eq!(front.len(), 5);
    for (t, f) in front.iter().enumerate() {
        let (a, b) = if t < 4 { (t, t + 1) } else { (3, 4) };
        for (i, x) in f.data().iter().enumerate() {
            let want = (sst.fields[b].data()[i] - sst.fields[a].data()[i]).abs();
            assert_eq!(*x, want);
            assert!(*x >= 0.0);
        }
    }
}

#[test]
fn presets_switch_every_agent() {
    let mut sc = common::reference();
    sc.apply_preset("poi_focus").unwrap();
    let (art, _, _) = run_full(&sc.store, &sc.registry, &sc.config(), None).unwrap();
    assert!(art.world.agents.iter().all(|a| a.policy.name == "poi_focus"));
    assert!(sc.apply_preset("nope").is_err());
}

#[test]
fn documented_schema_example_parses() {
    let book = include_str!("../../../book/src/scenarios.md");
    let start = book.find("```json\n").unwrap() + 8;
    let end = start + book[start..].find("```").unwrap();
    let doc: mission_compiler::scenario::ScenarioDoc = serde_json::from_str(&book[start..end]).unwrap();
    assert_eq!(doc.constraints.len(), 2);
    assert_eq!(doc.windows[0].confidence, Some(0.9));
    assert!(mission_compiler::facts::parse_fact_file(&doc.facts.join("\n")).is_ok());
}
