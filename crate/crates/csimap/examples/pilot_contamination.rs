//! Pilot phase walkthrough: orthonormal pilots, cross-cell reuse, and what
//! contamination does to the least-squares channel estimate.
//!
//! ```bash
//! cargo run --example pilot_contamination
//! ```

use csimap::channel::{assemble_channel, draw_fast_fading};
use csimap::uplink::{ls_estimate, received_pilot_signal, PilotBook, PilotIndicator};
use csimap::Cplx;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn relative_error(estimate: &Array2<Cplx>, reference: &Array2<Cplx>) -> f64 {
    let err: f64 = estimate
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let norm: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    (err / norm).sqrt()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let antennas = 64;
    let terminals = 4;
    let pilot_len = 8;
    let uplink_snr = 10.0;
    let amp = (pilot_len as f64 * uplink_snr).sqrt();

    let book = PilotBook::dft(pilot_len, terminals).unwrap();
    println!(
        "pilot book: {} symbols x {} sequences, orthonormal columns",
        pilot_len, terminals
    );

    // Serving-cell channel plus one co-pilot neighbor at 13 dB lower gain.
    let own_beta = vec![1.0; terminals];
    let other_beta = vec![0.05; terminals];
    let own =
        assemble_channel(&draw_fast_fading(antennas, terminals, &mut rng), &own_beta).unwrap();
    let other = assemble_channel(
        &draw_fast_fading(antennas, terminals, &mut rng),
        &other_beta,
    )
    .unwrap();

    let everyone = PilotIndicator::all_on(terminals);
    let silent = PilotIndicator::all_off(terminals);

    // Alone on the pilot with noise: estimation error is pure noise.
    let received = received_pilot_signal(
        &[own.clone(), other.clone()],
        &[everyone.clone(), silent],
        &book,
        uplink_snr,
        1.0,
        &mut rng,
    )
    .unwrap();
    let estimate = ls_estimate(&received, &book).unwrap().mapv(|v| v / amp);
    println!("\nno co-pilot transmission:");
    println!(
        "  relative estimation error = {:.4}",
        relative_error(&estimate, &own)
    );

    // Neighbor reuses every pilot: the estimate is biased by its channel.
    let received = received_pilot_signal(
        &[own.clone(), other.clone()],
        &[everyone.clone(), everyone],
        &book,
        uplink_snr,
        1.0,
        &mut rng,
    )
    .unwrap();
    let estimate = ls_estimate(&received, &book).unwrap().mapv(|v| v / amp);
    let contaminated_ref = &own + &other;
    println!("\nneighbor cell reuses the pilots:");
    println!(
        "  error vs own channel        = {:.4}",
        relative_error(&estimate, &own)
    );
    println!(
        "  error vs own + neighbor sum = {:.4}",
        relative_error(&estimate, &contaminated_ref)
    );
    println!("\nthe estimate locks onto the co-pilot sum, not the serving channel;");
    println!("that bias is what the prediction map removes by skipping pilots");
}
