use cco_core::pareto::{hypervolume_2d, non_dominated, ParetoFront, Point2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_front(rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let n = rng.random_range(1..=12);
    let pts: Vec<Point2> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    non_dominated(&pts).points().to_vec()
}

#[test]
fn staircase_agrees_with_monte_carlo() {
    let reference = [1.05, 1.05];
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let samples = 1_000_000;
    for _ in 0..20 {
        let front = random_front(&mut rng);
        let hits = (0..samples)
            .filter(|_| {
                let q = [rng.random::<f64>() * reference[0], rng.random::<f64>() * reference[1]];
                front.iter().any(|p| p[0] <= q[0] && p[1] <= q[1])
            })
            .count();
        let area = reference[0] * reference[1];
        let frac = hits as f64 / samples as f64;
        let (mc, se) = (frac * area, area * (frac * (1.0 - frac) / samples as f64).sqrt());
        let exact = hypervolume_2d(&front, &reference);
        assert!((exact - mc).abs() <= 3.0 * se, "exact {exact} mc {mc} se {se}");
    }
}

proptest! {
    #[test]
    fn adding_points_never_shrinks_the_hypervolume(
        pts in prop::collection::vec((0.0f64..1.2, 0.0f64..1.2), 1..40),
    ) {
        let reference = [1.05, 1.05];
        let mut front = ParetoFront::default();
        let mut last = 0.0;
        for (a, b) in pts {
            front.insert([a, b], ());
            let hv = front.hypervolume(&reference);
            prop_assert!(hv >= last);
            last = hv;
        }
    }
}
