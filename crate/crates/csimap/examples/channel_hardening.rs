//! Channel model walkthrough: compose large-scale fading from shadowing and
//! path loss, draw the fast-fading matrix, and watch `G^H G / M` collapse
//! onto the large-scale diagonal as the array grows.
//!
//! ```bash
//! cargo run --example channel_hardening
//! ```

use csimap::channel::{
    assemble_channel, draw_fast_fading, draw_shadow, hardening_deviation, LargeScaleFading,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let exponent = 3.8;

    println!("large-scale fading beta = shadow / distance^{exponent}:");
    let mut large_scale = Vec::new();
    for distance in [1.5, 3.0, 5.0, 8.0] {
        let shadow = draw_shadow(8.0, &mut rng);
        let ls = LargeScaleFading::new(shadow, distance, exponent).unwrap();
        println!(
            "  r = {distance:>4.1} m, z = {shadow:>6.3} -> beta = {:.3e} ({:.1} dB)",
            ls.gain,
            10.0 * ls.gain.log10()
        );
        large_scale.push(ls.gain);
    }

    println!("\nhardening: relative deviation of G^H G / M from the diagonal");
    println!("{:>9} {:>12}", "antennas", "deviation");
    for antennas in [16usize, 64, 256, 1024, 4096] {
        let mut mean = 0.0;
        let draws = 30;
        for _ in 0..draws {
            let fast = draw_fast_fading(antennas, large_scale.len(), &mut rng);
            let composite = assemble_channel(&fast, &large_scale).unwrap();
            mean += hardening_deviation(&composite, &large_scale).unwrap();
        }
        println!("{:>9} {:>12.5}", antennas, mean / draws as f64);
    }
    println!("\neach 4x antenna step roughly halves the deviation (1/sqrt(M) scaling)");
}
