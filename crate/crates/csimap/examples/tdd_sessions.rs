//! End-to-end protocol walkthrough: run full TDD sessions on the desk-scale
//! floor and watch the pilot fraction collapse as the maps learn.
//!
//! ```bash
//! cargo run --release --example tdd_sessions
//! ```

use csimap::quantizer::{design_codebook, DesignParams, SeedHints};
use csimap::sim::{build_state, collect_training_data, drive, ExperimentConfig, RunOptions};

fn main() {
    let mut cfg = ExperimentConfig::desk_default();
    cfg.num_sessions = 5000;
    cfg.window = 250;
    cfg.mobility.dwell_prob = 0.9;

    // Codebook from an all-pilot warmup, seeded with the known geometry.
    let data = collect_training_data(&cfg.system, &cfg.mobility, 200).unwrap();
    let params = DesignParams::new(
        cfg.quantizer.shadow_levels,
        cfg.quantizer.distance_levels,
        cfg.system.path_loss_exponent,
    );
    let hints = SeedHints {
        distances: Some(&data.distances),
        shadows: Some(&data.shadows),
    };
    let (codebook, _) = design_codebook(&data.gains, &params, hints).unwrap();

    let mut state = build_state(&cfg, &codebook, RunOptions::default()).unwrap();
    println!(
        "{} cells x {} terminals, dwell 0.9, learning rate {}",
        cfg.system.cells, cfg.system.uts_per_cell, cfg.map_params.learning_rate
    );
    println!("{:>8} {:>12} {:>10}", "session", "hit ratio", "alpha");

    let metrics = drive(&mut state, cfg.num_sessions, cfg.window, false);
    for checkpoint in [0usize, 9, 49, 199, 999, 2499, 4999] {
        println!(
            "{:>8} {:>12.4} {:>10.4}",
            checkpoint + 1,
            metrics.hit_ratio_series[checkpoint],
            metrics.alpha_series[checkpoint],
        );
    }
    println!(
        "\nterminal-session classes [pilot, forced pilot, hit, miss]: {:?}",
        metrics.class_counts
    );
    println!(
        "final windowed hit ratio {:.4}, mean pilot fraction {:.4}, mean sum-rate {:.2} bits/s/Hz",
        metrics.final_hit_ratio, metrics.mean_alpha, metrics.mean_sum_rate
    );
    println!(
        "map sizes per station: {:?}",
        (0..cfg.system.cells)
            .map(|c| state.map(c).node_count())
            .collect::<Vec<_>>()
    );
}
