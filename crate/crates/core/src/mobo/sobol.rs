use crate::error::{Error, Result};

/// Longest sequence and widest point supported by the underlying generator.
pub const MAX_POINTS: usize = 1 << 16;
pub const MAX_DIM: usize = 256;

/// `n` Owen-scrambled Sobol points in `[0, 1)^d`. The scramble is keyed by
/// `seed`; power-of-two prefixes keep their stratification.
pub fn sobol_init(n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n > MAX_POINTS || d == 0 || d > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "Sobol design of {n} points in {d} dimensions is outside 1..={MAX_POINTS} x 1..={MAX_DIM}"
        )));
    }
    let key = (seed ^ (seed >> 32)) as u32;
    Ok((0..n as u32)
        .map(|i| (0..d as u32).map(|k| sobol_burley::sample(i, k, key) as f64).collect())
        .collect())
}

/// Largest gap between consecutive sorted coordinates, including both ends of
/// `[0, 1]`, over all one-dimensional projections.
pub fn max_projection_gap(points: &[Vec<f64>]) -> f64 {
    let d = points.first().map_or(0, Vec::len);
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let mut col: Vec<f64> = points.iter().map(|p| p[k]).collect();
        col.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for v in col.iter().chain([&1.0]) {
            worst = worst.max(v - prev);
            prev = *v;
        }
    }
    worst
}
