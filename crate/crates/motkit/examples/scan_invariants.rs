//! Exhaustive sweep of the randomized invariants over their whole seed
//! domain (the property tests sample from these same streams).

use motkit::curtain::{build_left_monotone, extract_t_maps, validate_t_maps};
use motkit::measures::Measure;
use rand::{Rng, SeedableRng};

fn random_ordered_pair(seed: u64, max_atoms: usize) -> (Measure, Measure) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_atoms);
    let mut atoms: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let weights: Vec<f64> = (0..atoms.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let nu = Measure::new(atoms, weights.iter().map(|w| w / total).collect()).unwrap();
    let mut bounds: Vec<usize> = (1..nu.len()).filter(|_| rng.gen_bool(0.4)).collect();
    bounds.push(nu.len());
    let mut mu_atoms = Vec::new();
    let mut mu_weights = Vec::new();
    let mut start = 0;
    for &end in &bounds {
        if end <= start {
            continue;
        }
        let w: f64 = nu.weights()[start..end].iter().sum();
        let bary = nu.atoms()[start..end]
            .iter()
            .zip(&nu.weights()[start..end])
            .map(|(x, wi)| x * wi)
            .sum::<f64>()
            / w;
        mu_atoms.push(bary);
        mu_weights.push(w);
        start = end;
    }
    (Measure::new(mu_atoms, mu_weights).unwrap(), nu)
}

fn main() {
    let mut worst_defect = 0.0f64;
    let mut worst_marginal = 0.0f64;
    for seed in 0..10_000u64 {
        for max_atoms in [25, 30] {
            let (mu, nu) = random_ordered_pair(seed, max_atoms);
            let pi = build_left_monotone(&mu, &nu).unwrap();
            let (m1, m2) = pi.marginals();
            assert!(m1.approx_eq(&mu, 1e-9, 1e-12), "mu marginal, seed {seed}");
            assert!(m2.approx_eq(&nu, 1e-9, 1e-12), "nu marginal, seed {seed}");
            for (got, want) in m1.weights().iter().zip(mu.weights()) {
                worst_marginal = worst_marginal.max((got - want).abs());
            }
            worst_defect = worst_defect.max(pi.martingale_defect());
            assert!(
                pi.find_left_monotone_violation().is_none(),
                "violation, seed {seed}"
            );
            let t = extract_t_maps(&pi).unwrap_or_else(|e| panic!("extract, seed {seed}: {e}"));
            assert!(
                validate_t_maps(&t).is_empty(),
                "map validation, seed {seed}"
            );
        }
    }
    assert!(worst_defect <= 1e-12, "worst defect {worst_defect}");
    println!(
        "10k seeds clean: worst martingale defect {worst_defect:.2e}, worst marginal gap {worst_marginal:.2e}"
    );
}
