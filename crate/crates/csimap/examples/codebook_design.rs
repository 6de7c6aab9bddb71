//! Quantizer walkthrough: collect training gains from an all-pilot warmup,
//! design the two-part codebook by Lloyd iteration, and round-trip values
//! through quantize/dequantize and the text file format.
//!
//! ```bash
//! cargo run --example codebook_design
//! ```

use csimap::quantizer::{dequantize, design_codebook, quantize, Codebook, DesignParams, SeedHints};
use csimap::sim::{collect_training_data, ExperimentConfig};

fn main() {
    let cfg = ExperimentConfig::desk_default();
    let data = collect_training_data(&cfg.system, &cfg.mobility, 200).unwrap();
    println!(
        "training set: {} measured gains, distances {:.1}..{:.1} m",
        data.gains.len(),
        data.distances.iter().cloned().fold(f64::INFINITY, f64::min),
        data.distances.iter().cloned().fold(0.0, f64::max),
    );

    let params = DesignParams::new(8, 8, cfg.system.path_loss_exponent);
    let hints = SeedHints {
        distances: Some(&data.distances),
        shadows: Some(&data.shadows),
    };
    let (codebook, report) = design_codebook(&data.gains, &params, hints).unwrap();
    println!(
        "designed 8x8 codebook in {} iterations, RMS distortion trace:",
        report.iterations
    );
    for (i, mse) in report.distortion_trace.iter().enumerate() {
        println!("  iteration {:>2}: {:.6e}", i, mse.sqrt());
    }

    println!("\nshadow set Z: {:?}", summarize(codebook.z_values()));
    println!("distance set R: {:?}", summarize(codebook.r_values()));

    let probe = data.gains[data.gains.len() / 2];
    let q = quantize(probe, &codebook);
    let (gain, beta) = dequantize(q, &codebook).unwrap();
    println!(
        "\nquantize(g = {probe:.4}) -> indices ({}, {})",
        q.shadow_idx, q.distance_idx
    );
    println!("dequantize -> g = {gain:.4}, beta = {beta:.3e}");

    let text = codebook.to_text();
    let reloaded = Codebook::from_text(&text).unwrap();
    println!("\nfile round-trip bit-exact: {}", reloaded == codebook);
    println!("file header: {}", text.lines().next().unwrap());
}

fn summarize(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v:.3}")).collect()
}
