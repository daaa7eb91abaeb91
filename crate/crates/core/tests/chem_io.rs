use gnvp_core::chem::{
    canonical_smiles, check_validity, from_graph, load_dataset, parse_dataset, parse_smiles_lite, to_graph,
    write_smiles, ChemError, LoadMode, ValenceTable,
};
use gnvp_core::data::{bundled_dataset, bundled_text};
use gnvp_core::graph::{permute_nodes, GraphSpec};
use gnvp_core::numeric::SeededRng;

fn corpora() -> Vec<(GraphSpec, gnvp_core::chem::Dataset)> {
    [GraphSpec::qm9lite(), GraphSpec::zinclite()]
        .into_iter()
        .map(|s| {
            let d = bundled_dataset(&s).unwrap().unwrap();
            (s, d)
        })
        .collect()
}

#[test]
fn bundled_corpora_have_expected_sizes() {
    let sizes: Vec<usize> = corpora().iter().map(|(_, d)| d.len()).collect();
    assert_eq!(sizes, vec![256, 64]);
    for (_, d) in corpora() {
        assert_eq!(d.canonical_set().len(), d.len());
    }
}

#[test]
fn canonical_form_ignores_atom_order() {
    let mut rng = SeededRng::new(2024);
    for (_, data) in corpora() {
        for m in data.molecules() {
            let key = canonical_smiles(&m);
            for _ in 0..100 {
                let mut order: Vec<usize> = (0..m.atom_count()).collect();
                rng.shuffle(&mut order);
                assert_eq!(canonical_smiles(&m.reorder(&order)), key);
            }
        }
    }
}

#[test]
fn canonical_form_ignores_graph_node_order() {
    let mut rng = SeededRng::new(5);
    let (spec, data) = corpora().remove(0);
    for g in data.graphs() {
        let key = canonical_smiles(&from_graph(&g, &spec));
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..spec.num_nodes).collect();
            rng.shuffle(&mut perm);
            let p = permute_nodes(&g, &perm).unwrap();
            assert_eq!(canonical_smiles(&from_graph(&p, &spec)), key);
        }
    }
}

#[test]
fn corpus_round_trips_through_graphs_and_text() {
    let table = ValenceTable::default();
    for (spec, data) in corpora() {
        for m in data.molecules() {
            assert!(check_validity(&m, &table).unwrap().valid);
            let key = canonical_smiles(&m);
            let g = to_graph(&m, &spec).unwrap();
            assert_eq!(canonical_smiles(&from_graph(&g, &spec)), key);
            let text = write_smiles(&m);
            assert_eq!(canonical_smiles(&parse_smiles_lite(&text).unwrap()), key);
            assert_eq!(canonical_smiles(&parse_smiles_lite(&key).unwrap()), key);
        }
    }
}

#[test]
fn dataset_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.smi");
    std::fs::write(&path, bundled_text("qm9lite").unwrap()).unwrap();
    let spec = GraphSpec::qm9lite();
    let data = load_dataset(&path, &spec, LoadMode::Strict).unwrap();
    assert_eq!(data.len(), 256);
    assert!(matches!(
        load_dataset(&dir.path().join("missing.smi"), &spec, LoadMode::Strict),
        Err(ChemError::Io { .. })
    ));
}

#[test]
fn strict_and_lenient_loading() {
    let spec = GraphSpec::qm9lite();
    let text = "CCO\n# comment\n\nC(C)(C)(C)(C)C\nCCCCCCCCCC\nCS\nC1CC\n";
    assert!(matches!(
        parse_dataset(text, &spec, LoadMode::Strict),
        Err(ChemError::DatasetLine { line: 4, .. })
    ));
    let lenient = parse_dataset(text, &spec, LoadMode::Lenient).unwrap();
    assert_eq!(lenient.len(), 1);
}
