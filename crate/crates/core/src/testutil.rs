//! Random configurations shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Dataset;
use crate::points::Points;

/// `n` points uniform in `[0, n^(1/d)]^d` (unit density) with pairwise
/// distance at least `min_sep`, and a smooth target.
pub(crate) fn separated_data(seed: u64, n: usize, d: usize, min_sep: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).powf(1.0 / d as f64);
    let mut pts = Points::empty(d);
    while pts.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * side).collect();
        let far = pts
            .iter()
            .all(|z| z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= min_sep * min_sep);
        if far {
            pts.push(&x).unwrap();
        }
    }
    Dataset::from_fn(pts, |x| (0.7 * x[0]).cos() + 0.3 * x.iter().sum::<f64>()).unwrap()
}
