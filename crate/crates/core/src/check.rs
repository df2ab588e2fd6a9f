//! Invariant suite over random instances, shared by the `check` command and
//! the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::canonical::{canonical_to_moments, hankel, measure_to_canonical, moments_to_canonical, CanonicalSequence};
use crate::error::Result;
use crate::measure::{DesignMeasure, Domain};
use crate::optimize::reconstruct_design;
use crate::oracle::{gen_hankel, info_matrix_det, GenHankelSpec};
use crate::scalar::{Rational, Scalar};
use crate::toda::{evaluate_objective, evaluate_with_multiset, multiset_from_model, ModelSpec, PriorMultiset};

/// Random measure on `[0, 1]` with up to `max_atoms` distinct rational
/// atoms (denominators up to 24) and positive rational weights.
pub fn random_rational_measure<R: Rng>(rng: &mut R, max_atoms: usize) -> DesignMeasure<Rational> {
    let n = rng.random_range(1..=max_atoms);
    rational_measure_with_atoms(rng, n)
}

/// As [`random_rational_measure`] with exactly `n <= 24` atoms.
pub fn rational_measure_with_atoms<R: Rng>(rng: &mut R, n: usize) -> DesignMeasure<Rational> {
    let den = rng.random_range(n as i64..=24);
    let mut nums: Vec<i64> = (0..=den).collect();
    for i in 0..n {
        let j = rng.random_range(i..nums.len());
        nums.swap(i, j);
    }
    let support = nums[..n].iter().map(|&k| Rational::ratio(k, den)).collect();
    let weights = (0..n).map(|_| Rational::from_int(rng.random_range(1..=9))).collect();
    DesignMeasure::normalized(Domain::UnitInterval, support, weights).expect("distinct atoms")
}

/// Random non-terminating canonical sequence with entries in `[0.05, 0.95]`.
pub fn random_canonical<R: Rng>(rng: &mut R, depth: usize) -> CanonicalSequence<f64> {
    let v = (0..depth).map(|_| rng.random_range(0.05..0.95)).collect();
    CanonicalSequence::new(v, None).expect("interior values")
}

/// Random model with `m` in `2..=4` and up to two roots outside `[0, 1]`.
pub fn random_model<R: Rng>(rng: &mut R) -> ModelSpec {
    let m = rng.random_range(2..=4);
    let pool = [-1.0, -0.5, 1.5, 2.0, 3.0];
    let count = rng.random_range(0..=2);
    let mut beta: Vec<f64> = Vec::new();
    while beta.len() < count {
        let v = pool[rng.random_range(0..pool.len())];
        if !beta.contains(&v) {
            beta.push(v);
        }
    }
    let b = beta.iter().map(|_| rng.random_range(1..=2)).collect();
    ModelSpec { m, beta, b }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<bool>;

fn pipeline_equals_determinant(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mu = random_rational_measure(rng, 5);
    let spec = random_model(rng);
    let t = multiset_from_model(&spec);
    let c = mu.moments(2 * spec.m + t.size() + 2);
    let p = moments_to_canonical(&c)?;
    let direct = gen_hankel(&c, &GenHankelSpec::new(t, spec.m))?;
    Ok(evaluate_objective(&p, &spec)? == direct)
}

fn information_equals_hankel(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mu = random_rational_measure(rng, 5);
    let spec = random_model(rng);
    let t = multiset_from_model(&spec);
    let c = mu.moments(2 * spec.m + t.size());
    Ok(info_matrix_det(&mu, &spec) == gen_hankel(&c, &GenHankelSpec::new(t, spec.m))?)
}

fn moment_round_trip(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mu = random_rational_measure(rng, 5);
    let c = mu.moments(12);
    let p = moments_to_canonical(&c)?;
    Ok(canonical_to_moments(&p, 12)?.values == c.values)
}

fn product_formula(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mu = random_rational_measure(rng, 5);
    let m = rng.random_range(1..=5);
    let c = mu.moments(2 * m);
    let p = moments_to_canonical(&c)?;
    Ok(evaluate_with_multiset(&p, m, &PriorMultiset::empty())? == hankel(&c, m, 0, false)?)
}

fn reconstruction_round_trip(rng: &mut ChaCha8Rng) -> Result<bool> {
    let depth = rng.random_range(1..=7);
    let p = random_canonical(rng, depth).terminate_last();
    let mu = reconstruct_design(&p)?;
    let back = measure_to_canonical(&mu)?;
    let (a, b) = (p.values(), back.values());
    Ok(a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8))
}

fn padding_independence(rng: &mut ChaCha8Rng) -> Result<bool> {
    let spec = random_model(rng);
    let depth = crate::toda::required_depth(spec.m, &multiset_from_model(&spec));
    let p = random_canonical(rng, depth);
    let mut values = p.values();
    *values.last_mut().expect("nonempty") = rng.random_range(0.05..0.95);
    let q = CanonicalSequence::new(values, None)?;
    let (a, b) = (evaluate_objective(&p, &spec)?, evaluate_objective(&q, &spec)?);
    Ok((a - b).abs() <= 1e-9 * a.abs())
}

fn symmetrize_round_trip(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mu = random_rational_measure(rng, 5).to_f64();
    let back = mu.symmetrize()?.desymmetrize()?;
    Ok(back.len() == mu.len()
        && back.atoms().zip(mu.atoms()).all(|((x, w), (y, v))| (x - y).abs() < 1e-12 && (w - v).abs() < 1e-12))
}

const CHECKS: [(&str, Check); 7] = [
    ("pipeline_equals_determinant", pipeline_equals_determinant),
    ("information_equals_hankel", information_equals_hankel),
    ("moment_round_trip", moment_round_trip),
    ("product_formula", product_formula),
    ("reconstruction_round_trip", reconstruction_round_trip),
    ("padding_independence", padding_independence),
    ("symmetrize_round_trip", symmetrize_round_trip),
];

/// Runs every check on `instances` random instances drawn from `seed`.
pub fn run_checks(seed: u64, instances: usize) -> CheckReport {
    let mut checks = Vec::with_capacity(CHECKS.len());
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64 * 1_000_003));
        let mut outcome = CheckOutcome { name, passed: 0, failed: 0, failures: Vec::new() };
        for k in 0..instances {
            match check(&mut rng) {
                Ok(true) => outcome.passed += 1,
                Ok(false) => {
                    outcome.failed += 1;
                    outcome.failures.push(format!("instance {k}: mismatch"));
                }
                Err(e) => {
                    outcome.failed += 1;
                    outcome.failures.push(format!("instance {k}: {e}"));
                }
            }
        }
        checks.push(outcome);
    }
    CheckReport {
        seed,
        instances,
        passed: checks.iter().map(|c| c.passed).sum(),
        failed: checks.iter().map(|c| c.failed).sum(),
        checks,
    }
}
