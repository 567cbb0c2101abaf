//! Uniform random search over the configuration lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::objectives::{
    evaluate, Configuration, Evaluation, SectorSetting, Thresholds, MAX_DOWNTILT_DEG, POWER_MAX_DBM, POWER_MIN_DBM,
};
use crate::rfmap::CoverageTensor;

/// Integer downtilts uniform on `0..=10`, powers uniform on `[30, 50]` dBm.
pub fn random_configuration<R: Rng>(rng: &mut R, sectors: usize) -> Configuration {
    let settings = (0..sectors)
        .map(|_| SectorSetting {
            downtilt_deg: rng.random_range(0..=MAX_DOWNTILT_DEG),
            power_dbm: rng.random_range(POWER_MIN_DBM..=POWER_MAX_DBM),
        })
        .collect();
    Configuration::new(settings).expect("sampled settings are in range")
}

/// Evaluates `n` independent random configurations.
pub fn random_search(tensor: &CoverageTensor, thresholds: &Thresholds, n: usize, seed: u64) -> Result<Vec<Evaluation>> {
    random_search_with(tensor, thresholds, n, seed, |_| {})
}

/// [`random_search`] that reports every evaluation as it happens.
pub fn random_search_with<F>(
    tensor: &CoverageTensor,
    thresholds: &Thresholds,
    n: usize,
    seed: u64,
    mut observe: F,
) -> Result<Vec<Evaluation>>
where
    F: FnMut(&Evaluation),
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let config = random_configuration(&mut rng, tensor.sectors());
            let objectives = evaluate(&config, tensor, thresholds)?;
            let e = Evaluation { config, objectives, lambda: None };
            observe(&e);
            Ok(e)
        })
        .collect()
}
