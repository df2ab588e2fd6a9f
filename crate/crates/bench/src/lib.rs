//! Shared inputs for the benchmarks in `benches/`.

use dopt_core::check::rational_measure_with_atoms;
use dopt_core::canonical::moments_to_canonical;
use dopt_core::toda::{multiset_from_model, required_depth};
use dopt_core::{CanonicalSequence, ModelSpec, Rational};

/// Model of degree `m - 1` with two prior roots of multiplicity one.
pub fn model(m: usize) -> ModelSpec {
    ModelSpec::new(m, vec![-0.5, 2.0], vec![1, 1]).expect("valid model")
}

/// Deterministic interior canonical sequence deep enough for `spec`.
pub fn canonical_for(spec: &ModelSpec) -> CanonicalSequence<f64> {
    let depth = required_depth(spec.m, &multiset_from_model(spec));
    let values = (0..depth).map(|k| 0.2 + 0.6 * ((k as f64 * 0.618_034).fract())).collect();
    CanonicalSequence::new(values, None).expect("interior values")
}

/// Exact canonical moments of a fixed rational measure with `atoms` atoms.
pub fn rational_canonical(atoms: usize) -> CanonicalSequence<Rational> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(17);
    let mu = rational_measure_with_atoms(&mut rng, atoms);
    moments_to_canonical(&mu.moments(2 * atoms + 1)).expect("valid measure")
}
