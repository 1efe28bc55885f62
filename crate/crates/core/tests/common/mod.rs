#![allow(dead_code)]

use markmle::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random records on a coarse time lattice, so `U` ties are common. Marks are
/// distinct except when a whole event record is repeated.
pub fn random_dataset(rng: &mut ChaCha20Rng, n: usize, k: usize, lattice: u32) -> Vec<Observation> {
    let mut out: Vec<Observation> = Vec::with_capacity(n);
    let mut next_mark = 0.0;
    for _ in 0..n {
        if let Some(prev) = out.iter().rfind(|o| o.delta_plus()) {
            if rng.random_bool(0.1) {
                out.push(prev.clone());
                continue;
            }
        }
        let mut slots: Vec<u32> = (1..=lattice).collect();
        for i in 0..k {
            let j = rng.random_range(i..slots.len());
            slots.swap(i, j);
        }
        let mut times: Vec<f64> = slots[..k].iter().map(|&s| s as f64 * 0.5).collect();
        times.sort_by(f64::total_cmp);
        let delta = rng.random_range(1..=k + 1);
        let mark = (delta <= k).then(|| {
            next_mark += 1.0;
            next_mark + rng.random::<f64>() * 0.5
        });
        out.push(Observation::new(times, delta, mark).unwrap());
    }
    out
}
