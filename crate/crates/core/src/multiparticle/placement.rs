use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Region;
use crate::{Error, Point, Result};

/// Centers of an nx × ny × nz lattice with the given spacing, centred on the origin.
pub fn lattice_positions(counts: [usize; 3], spacing: f64) -> Vec<Point> {
    let offset = |n: usize| (n as f64 - 1.0) * spacing / 2.0;
    let mut out = Vec::with_capacity(counts.iter().product());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                out.push(Point::new(
                    i as f64 * spacing - offset(counts[0]),
                    j as f64 * spacing - offset(counts[1]),
                    k as f64 * spacing - offset(counts[2]),
                ));
            }
        }
    }
    out
}

/// `n` uniform points in `region` at least `min_distance` apart, by seeded rejection sampling.
pub fn random_positions(n: usize, region: &Region, min_distance: f64, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Point> = Vec::with_capacity(n);
    let max_attempts = 1000 * n.max(1);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidConfiguration(format!(
                "could not place {n} points at separation {min_distance} (placed {})",
                out.len()
            )));
        }
        let p = Point::from_fn(|a, _| rng.gen_range(region.min[a]..=region.max[a]));
        if out.iter().all(|q| (p - q).norm() >= min_distance) {
            out.push(p);
        }
    }
    Ok(out)
}
