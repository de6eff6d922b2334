use workbench_core::chain::{iterate_chain, ReEnumeration};
use workbench_core::check::{check_chain, check_construction};
use workbench_core::construction::{ConstructionState, Registry, StageBudget};
use workbench_core::io::{self, RunConfig};
use workbench_core::machine::programs;

#[test]
fn construction_survives_a_round_trip() {
    let registry = Registry::from_programs([
        ("const0".to_string(), programs::const_zero()),
        ("zero_after_query".to_string(), programs::zero_after_query()),
    ]);
    let budget = StageBudget::default();
    let mut state = ConstructionState::new(3, registry.clone(), budget).unwrap();
    state.run(60).unwrap();
    let config = RunConfig::BuildT2 {
        trees: 3,
        stages: 60,
        budget,
        registry,
        seed: 0,
    };
    let dir = tempfile::tempdir().unwrap();
    io::write_construction(dir.path(), &config, &state).unwrap();
    let back = io::read_construction(dir.path()).unwrap();

    assert_eq!(back.stage(), state.stage());
    assert_eq!(back.log(), state.log());
    assert_eq!(back.diagonal_set(), state.diagonal_set());
    assert_eq!(back.followers().len(), state.followers().len());
    for (a, b) in state.trees().iter().zip(back.trees()) {
        assert_eq!(a.to_snapshot(), b.to_snapshot());
    }
    assert!(check_construction(&back).is_empty());
}

#[test]
fn chain_survives_a_round_trip() {
    let enums = vec![
        ReEnumeration::table(vec![(2, 1), (1, 3)]).unwrap(),
        ReEnumeration::empty(),
    ];
    let chain = iterate_chain(&enums, 15).unwrap();
    let config = RunConfig::BuildChain {
        stages: 15,
        enums,
        embed_depth: 4,
        seed: 0,
    };
    let dir = tempfile::tempdir().unwrap();
    io::write_chain(dir.path(), &config, &chain).unwrap();
    let (back, depth) = io::read_chain(dir.path()).unwrap();
    assert_eq!(depth, 4);
    assert_eq!(back.levels.len(), 2);
    for (a, b) in chain.levels.iter().zip(&back.levels) {
        assert_eq!(a.upsilon().to_snapshot(), b.upsilon().to_snapshot());
        assert_eq!(a.marker_entries(), b.marker_entries());
        assert_eq!(a.decoded_values(), b.decoded_values());
    }
    assert!(check_chain(&back, depth).is_empty());
}

#[test]
fn large_trees_are_gzipped_and_read_back() {
    let tree = workbench_core::StagedTree::full(0, workbench_core::Alphabet::Binary, 14);
    let dir = tempfile::tempdir().unwrap();
    let written = io::write_tree(&dir.path().join("tree_0.json"), &tree).unwrap();
    assert!(
        written.to_string_lossy().ends_with(".json.gz"),
        "{}",
        written.display()
    );
    let back = io::read_tree(&written).unwrap();
    assert_eq!(back.to_snapshot(), tree.to_snapshot());
}
