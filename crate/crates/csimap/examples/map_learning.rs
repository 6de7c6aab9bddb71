//! CSI map walkthrough: feed a synthetic state walk into the graph, watch
//! edge weights learn the transition structure, predict, garbage-collect,
//! and round-trip through the file format.
//!
//! ```bash
//! cargo run --example map_learning
//! ```

use csimap::map::CsiMap;
use csimap::quantizer::Qcsi;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state(i: usize) -> Qcsi {
    Qcsi {
        shadow_idx: i,
        distance_idx: 0,
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut map = CsiMap::new(1, 0.1, 0.02, 1).unwrap();

    // A terminal that mostly dwells on each of three states and cycles
    // 0 -> 1 -> 2 -> 0, with occasional one-off detours to state 3.
    let mut current = 0usize;
    for step in 0..4000 {
        let next = match rng.gen_range(0..100u8) {
            0..=84 => current,
            85..=97 => (current + 1) % 3,
            _ => 3,
        };
        map.observe(0, state(next)).unwrap();
        current = if next == 3 { current } else { next };
        if step == 0 {
            println!("first observation creates node 0 and parks the cursor there");
        }
    }
    println!(
        "after 4000 observations: {} nodes, {} edges",
        map.node_count(),
        map.edge_count()
    );

    for s in 0..3 {
        let node = map.node_for(state(s)).unwrap();
        let mut edges = map.out_edges(node).unwrap();
        edges.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let rendered: Vec<String> = edges
            .iter()
            .map(|(to, w)| format!("->{} w={:.3}", map.qcsi_of(*to).unwrap().shadow_idx, w))
            .collect();
        println!("  state {s}: {}", rendered.join(", "));
        map.set_cursor(0, node).unwrap();
        println!(
            "    predict from {s} -> {}",
            map.predict(0).unwrap().shadow_idx
        );
    }

    let report = map.garbage_collect(0.05).unwrap();
    println!(
        "\ngarbage collection at threshold 0.05 removed {} edges and {} nodes",
        report.edges_removed, report.nodes_removed
    );
    println!(
        "remaining: {} nodes, {} edges",
        map.node_count(),
        map.edge_count()
    );

    let text = map.to_text();
    let reloaded = CsiMap::from_text(&text, 1).unwrap();
    println!("\nfile round-trip structural equality: {}", reloaded == map);
    println!(
        "serialized map:\n{}",
        text.lines().take(8).collect::<Vec<_>>().join("\n")
    );
    println!("...");
}
