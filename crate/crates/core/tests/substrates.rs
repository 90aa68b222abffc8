use proptest::prelude::*;
use swarmkit::engine::{run, Model};
use swarmkit::kernel::{Symbol, Value};
use swarmkit::scenarios::{self, ScenarioConfig};
use swarmkit::stigmergy::Mesh;

/// A connected graph on `n` replicas: a random spanning tree plus extra edges.
fn connected(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    let tree: Vec<_> = (1..n).map(|i| (0..i).prop_map(move |p| (p, i))).collect();
    (tree, prop::collection::vec((0..n, 0..n), 0..n)).prop_map(|(mut edges, extra)| {
        edges.extend(extra);
        edges
    })
}

proptest! {
    #[test]
    fn any_delivery_order_converges_to_the_latest_put(
        (n, edges, writers, picks) in (2usize..8).prop_flat_map(|n| (
            Just(n),
            connected(n),
            prop::collection::vec(0..n, 1..5),
            prop::collection::vec(any::<prop::sample::Index>(), 0..400),
        ))
    ) {
        let key = Symbol::new("k");
        let mut mesh = Mesh::new(n, &edges);
        for (i, &w) in writers.iter().enumerate() {
            mesh.put(w, &key, Value::Int(i as i64));
        }
        let best = writers
            .iter()
            .map(|&w| mesh.replicas()[w].entry(&key).unwrap().clone())
            .max_by_key(|e| e.rank())
            .unwrap();
        for pick in picks {
            if mesh.is_quiescent() {
                break;
            }
            mesh.deliver(pick.index(mesh.in_flight().len()));
        }
        mesh.drain();
        for r in mesh.replicas() {
            prop_assert_eq!(r.entry(&key), Some(&best));
        }
    }
}

#[test]
fn tuple_space_foraging_never_double_collects_on_random_runs() {
    let text = "scenario = \"foraging_scel\"\nwidth = 3\nheight = 3\nagents = 2\nitems = [[1, 1], [3, 3]]\n";
    let m = scenarios::foraging_scel(&ScenarioConfig::from_toml_with(text, &[]).unwrap()).unwrap();
    for seed in 0..50 {
        let r = run(&m, seed, 300, None).unwrap();
        for s in &r.states {
            assert_eq!(m.proposition("single_found", s), Some(true), "seed {seed}: {}", m.describe(s));
        }
    }
}

#[test]
fn broadcast_foraging_can_double_collect() {
    let text = "scenario = \"foraging_broadcast\"\nwidth = 3\nheight = 3\nagents = 2\nitems = [[2, 2]]\n";
    let m = scenarios::foraging_broadcast(&ScenarioConfig::from_toml_with(text, &[]).unwrap()).unwrap();
    let hit = (0..2000).any(|seed| {
        let r = run(&m, seed, 200, Some(&"double_credit".parse().unwrap())).unwrap();
        r.reached.is_some()
    });
    assert!(hit);
}
