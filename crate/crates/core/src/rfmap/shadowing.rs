use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GridSpec;

/// Zero-mean Gaussian shadowing field in dB, row-major over `grid`.
///
/// White noise is passed through a stationary first-order autoregressive
/// filter along rows and then along columns. With per-cell coefficient
/// `rho = exp(-resolution / decorrelation)` the result has unit variance before
/// scaling and correlation `exp(-(|dx| + |dy|) / decorrelation)`, so along
/// either grid axis the correlation at lag `d` is exactly `exp(-d / decorrelation)`.
///
/// Each `(seed, sector_index)` pair selects an independent ChaCha stream.
pub fn shadowing_field(grid: &GridSpec, sigma_db: f64, decorrelation_m: f64, seed: u64, sector_index: u64) -> Vec<f64> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if sigma_db == 0.0 {
        return vec![0.0; rows * cols];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sector_index);
    let mut field: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();

    let rho = (-grid.resolution_m / decorrelation_m).exp();
    let innovation = (1.0 - rho * rho).sqrt();
    for r in 0..rows {
        let row = &mut field[r * cols..(r + 1) * cols];
        for c in 1..cols {
            row[c] = rho * row[c - 1] + innovation * row[c];
        }
    }
    for r in 1..rows {
        for c in 0..cols {
            field[r * cols + c] = rho * field[(r - 1) * cols + c] + innovation * field[r * cols + c];
        }
    }
    for v in &mut field {
        *v *= sigma_db;
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero_field() {
        let f = shadowing_field(&GridSpec::default(), 0.0, 50.0, 3, 0);
        assert_eq!(f.len(), 14_400);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sectors_get_independent_streams() {
        let g = GridSpec::default();
        let a = shadowing_field(&g, 8.0, 50.0, 3, 0);
        let b = shadowing_field(&g, 8.0, 50.0, 3, 1);
        let n = a.len() as f64;
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n / 64.0;
        assert!(corr.abs() < 0.15, "cross-sector correlation {corr}");
    }

    #[test]
    fn pooled_statistics_match_targets() {
        let g = GridSpec::default();
        let sigma = 8.0;
        let (mut sum_sq, mut n, mut lag_prod, mut lag_n) = (0.0, 0usize, 0.0, 0usize);
        let lag = 5; // 50 m at 10 m resolution
        for seed in 0..5 {
            let f = shadowing_field(&g, sigma, 50.0, seed, 0);
            let (rows, cols) = (g.rows(), g.cols());
            for r in 0..rows {
                for c in 0..cols {
                    let v = f[r * cols + c];
                    sum_sq += v * v;
                    n += 1;
                    if c + lag < cols {
                        lag_prod += v * f[r * cols + c + lag];
                        lag_n += 1;
                    }
                }
            }
        }
        let var = sum_sq / n as f64;
        assert!((var.sqrt() - sigma).abs() <= 0.8, "std {}", var.sqrt());
        let acf = lag_prod / lag_n as f64 / var;
        assert!((acf - (-1.0f64).exp()).abs() <= 0.1, "acf {acf}");
    }
}
