use ndarray::Array2;
use painnet::classifiers::{ForestParams, RandomForest};
use painnet::network::{
    build_network, export_network, import_network, read_edge_csv, top_electrodes, DEFAULT_DEGREE_QUANTILE,
};
use painnet::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn electrodes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("E{:02}", i + 1)).collect()
}

fn complete_graph_keys(n: usize) -> Vec<String> {
    let names = electrodes(n);
    let mut keys = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for band in ["delta", "theta", "alpha", "beta", "gamma", "high_gamma"] {
                keys.push(format!("MSC:{}|{}:{band}", names[i], names[j]));
            }
        }
    }
    keys
}

#[test]
fn documented_summation() {
    let net = build_network([("MSC:A|B:alpha", 0.3), ("MSC:A|B:beta", 0.1), ("MSC:A|C:gamma", 0.2)]).unwrap();
    assert_eq!(net.edges.len(), 2);
    assert!((net.edges[0].weight - 0.4).abs() < 1e-15);
    assert!((net.node_strength["A"] - 0.6).abs() < 1e-15);
    assert_eq!(top_electrodes(&net, 2), vec!["A", "B"]);
    assert_eq!(top_electrodes(&net, 10).len(), 3);
}

#[test]
fn pib_only_input_is_an_empty_network_error() {
    let err = build_network([("PIB:A:alpha", 0.5)]).unwrap_err();
    assert!(matches!(err, Error::EmptyNetwork(_)));
    let mixed = build_network([("PIB:A:alpha", 0.5), ("MSC:A|B:alpha", 0.5)]).unwrap();
    assert_eq!(mixed.ignored_pib, 1);
}

#[test]
fn reversed_pair_names_are_canonicalized() {
    let a = build_network([("MSC:B|A:alpha", 0.2), ("MSC:A|B:beta", 0.3)]).unwrap();
    let b = build_network([("MSC:A|B:alpha", 0.2), ("MSC:B|A:beta", 0.3)]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.edges.len(), 1);
    assert_eq!((a.edges[0].a.as_str(), a.edges[0].b.as_str()), ("A", "B"));
}

#[test]
fn export_round_trip_with_twenty_electrodes() {
    let keys = complete_graph_keys(20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<f64> = keys.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let net = build_network(keys.iter().zip(raw.iter().map(|w| w / total))).unwrap();
    assert_eq!(net.nodes.len(), 20);
    assert_eq!(net.edges.len(), 190);
    assert!(net.node_degree.values().all(|&d| d <= 19));

    let dir = tempfile::tempdir().unwrap();
    export_network(&net, dir.path()).unwrap();
    assert_eq!(import_network(dir.path()).unwrap(), net);
    let csv = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 190);
    let from_csv = read_edge_csv(&dir.path().join("edges.csv"), DEFAULT_DEGREE_QUANTILE).unwrap();
    assert_eq!(from_csv.edges, net.edges);
    let svg = std::fs::read_to_string(dir.path().join("network.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<line").count(), 190);
}

#[test]
fn forest_importances_give_at_most_unit_weight() {
    let keys = complete_graph_keys(5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 120;
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Array2::from_shape_fn((n, keys.len()), |(r, c)| {
        let signal = if c % 7 == 0 { y[r] as f64 } else { 0.0 };
        signal + rng.random::<f64>()
    });
    let rf = RandomForest::fit(x.view(), &y, 2, &ForestParams::default(), 3).unwrap();
    let net = build_network(keys.iter().zip(rf.importances.iter().copied())).unwrap();
    assert!(net.total_weight() <= 1.0 + 1e-9);
    assert!((net.total_weight() - 1.0).abs() < 1e-9);
}

#[test]
fn export_into_unwritable_path_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let net = build_network([("MSC:A|B:alpha", 1.0)]).unwrap();
    let err = export_network(&net, &file.join("sub")).unwrap_err();
    assert!(err.to_string().contains("occupied"));
}

proptest! {
    #[test]
    fn input_order_does_not_matter(seed in any::<u64>(), n in 2usize..7) {
        let keys = complete_graph_keys(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries: Vec<(String, f64)> = keys
            .into_iter()
            .map(|k| (k, if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() }))
            .collect();
        let total: f64 = entries.iter().map(|e| e.1).sum::<f64>().max(1e-12);
        entries.iter_mut().for_each(|e| e.1 /= total);
        let base = build_network(entries.iter().map(|(k, v)| (k.as_str(), *v))).unwrap();
        rand::seq::SliceRandom::shuffle(entries.as_mut_slice(), &mut rng);
        let shuffled = build_network(entries.iter().map(|(k, v)| (k.as_str(), *v))).unwrap();
        prop_assert_eq!(&base, &shuffled);
        prop_assert_eq!(top_electrodes(&base, 3), top_electrodes(&shuffled, 3));
        prop_assert!(base.total_weight() <= 1.0 + 1e-9);
        prop_assert!(base.edges.iter().all(|e| e.weight > 0.0 && e.a < e.b));
        for node in &base.nodes {
            let s: f64 = base.edges.iter().filter(|e| &e.a == node || &e.b == node).map(|e| e.weight).sum();
            prop_assert!((s - base.node_strength[node]).abs() < 1e-12);
        }
    }
}
