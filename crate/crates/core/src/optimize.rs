//! Maximization of `H_m^(T)` over the canonical-moment box and recovery of
//! the optimal design.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::canonical::{canonical_to_zeta, recurrence_from_zeta, CanonicalSequence, Terminal};
use crate::error::{DesignError, Result};
use crate::measure::{DesignMeasure, Domain};
use crate::nelder_mead::{minimize, NelderMeadOptions};
use crate::oracle::brute_force_design;
use crate::toda::{evaluate_objective, multiset_from_model, required_depth, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Box margin: free coordinates live in `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
    /// Relative convergence tolerance on the objective.
    pub tolerance: f64,
    pub seed: u64,
    /// Coordinates this close to a face become terminal.
    pub snap_tol: f64,
    /// Grid size for an oracle comparison after solving; none skips it.
    pub oracle_grid: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            restarts: 8,
            max_iters: 20_000,
            epsilon: 1e-7,
            tolerance: 1e-12,
            seed: 0,
            snap_tol: 1e-6,
            oracle_grid: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.1) {
            return Err(DesignError::InvalidSpec(format!("epsilon {} not in (0, 0.1)", self.epsilon)));
        }
        if self.restarts == 0 {
            return Err(DesignError::InvalidSpec("restarts must be at least 1".into()));
        }
        if !(self.snap_tol >= self.epsilon && self.snap_tol < 0.5) {
            return Err(DesignError::InvalidSpec("snap_tol must lie in [epsilon, 0.5)".into()));
        }
        Ok(())
    }

    pub(crate) fn nelder_mead(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iters: self.max_iters,
            f_tol: self.tolerance,
            ..NelderMeadOptions::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub restarts: usize,
    /// Objective reached by every restart, in restart order.
    pub restart_objectives: Vec<Option<f64>>,
    pub best_restart: usize,
    /// One-based indices whose value was within the snapping tolerance of a face.
    pub snapped_indices: Vec<usize>,
    /// No coordinate snapped, so the padding index was set to 1.
    pub padding_terminated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_objective: Option<f64>,
    /// `(oracle - objective) / oracle`; negative when the solver beats the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmean_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub p_star: CanonicalSequence<f64>,
    pub measure: DesignMeasure<f64>,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

impl Serialize for DesignResult {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        let mut s = serializer.serialize_struct("DesignResult", 4)?;
        s.serialize_field("design", &self.measure)?;
        s.serialize_field("canonical_moments", &self.p_star.values())?;
        s.serialize_field("objective", &self.objective)?;
        s.serialize_field("diagnostics", &self.diagnostics)?;
        s.end()
    }
}

pub(crate) struct MultistartOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub per_restart: Vec<f64>,
    pub best_index: usize,
    pub iterations: usize,
}

/// Uniform start in `[0.1, 0.9]^dim` for restart `index`.
pub(crate) fn random_start(seed: u64, index: usize, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    (0..dim).map(|_| rng.random_range(0.1..0.9)).collect()
}

/// Minimizes `objective` from `first` and `opts.restarts - 1` random starts,
/// in parallel. Ties go to the lowest restart index.
pub(crate) fn multistart<F>(first: Vec<f64>, objective: &F, opts: &SolveOptions) -> MultistartOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = first.len();
    let nm = opts.nelder_mead();
    let runs: Vec<_> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 { first.clone() } else { random_start(opts.seed, i, dim) };
            minimize(objective, &start, opts.epsilon, 1.0 - opts.epsilon, &nm)
        })
        .collect();
    let mut best_index = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value < runs[best_index].value {
            best_index = i;
        }
    }
    MultistartOutcome {
        x: runs[best_index].x.clone(),
        value: runs[best_index].value,
        per_restart: runs.iter().map(|r| r.value).collect(),
        best_index,
        iterations: runs.iter().map(|r| r.iterations).sum(),
    }
}

/// Odd entries 1/2; `p_{2j}` maximizes `(1 - p)^{a-1} p^a` with `a = m - j`,
/// the no-prior optimum; remaining entries 1/2.
pub fn default_start(m: usize, dim: usize, epsilon: f64) -> Vec<f64> {
    (1..=dim)
        .map(|k| {
            if k % 2 == 0 && k / 2 < m {
                let a = (m - k / 2) as f64;
                (a / (2.0 * a - 1.0)).clamp(epsilon, 1.0 - epsilon)
            } else {
                0.5
            }
        })
        .collect()
}

/// Turns free box coordinates into a terminating canonical sequence.
///
/// The first coordinate within `tol` of a face becomes the terminal. If none
/// is, the sequence is terminated with a 1 right after the free coordinates,
/// where the padding index sits.
pub fn snap_to_terminal(free: &[f64], tol: f64) -> (CanonicalSequence<f64>, Vec<usize>, bool) {
    let snapped: Vec<usize> = free
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < tol || v > 1.0 - tol)
        .map(|(i, _)| i + 1)
        .collect();
    match snapped.first() {
        Some(&k) => {
            let terminal = if free[k - 1] < tol { Terminal::Zero } else { Terminal::One };
            let p = CanonicalSequence::new(free[..k - 1].to_vec(), Some(terminal))
                .expect("free coordinates lie inside the box");
            (p, snapped, false)
        }
        None => {
            let p = CanonicalSequence::new(free.to_vec(), Some(Terminal::One))
                .expect("free coordinates lie inside the box");
            (p, snapped, true)
        }
    }
}

fn neg_log_objective(free: &[f64], spec: &ModelSpec) -> f64 {
    let mut values = free.to_vec();
    values.push(0.5);
    let Ok(p) = CanonicalSequence::new(values, None) else {
        return f64::INFINITY;
    };
    match evaluate_objective(&p, spec) {
        Ok(h) if h > 0.0 && h.is_finite() => -h.ln(),
        _ => f64::INFINITY,
    }
}

fn maximize_detailed(spec: &ModelSpec, opts: &SolveOptions) -> Result<(CanonicalSequence<f64>, Diagnostics)> {
    spec.validate()?;
    opts.validate()?;
    let dim = required_depth(spec.m, &multiset_from_model(spec)) - 1;
    let objective = |x: &[f64]| neg_log_objective(x, spec);
    let run = multistart(default_start(spec.m, dim, opts.epsilon), &objective, opts);
    if !run.value.is_finite() {
        return Err(DesignError::NoFeasiblePoint);
    }
    let (p, snapped_indices, padding_terminated) = snap_to_terminal(&run.x, opts.snap_tol);
    let diagnostics = Diagnostics {
        iterations: run.iterations,
        restarts: opts.restarts,
        restart_objectives: run
            .per_restart
            .iter()
            .map(|v| v.is_finite().then(|| (-v).exp()))
            .collect(),
        best_restart: run.best_index,
        snapped_indices,
        padding_terminated,
        ..Diagnostics::default()
    };
    Ok((p, diagnostics))
}

/// Multistart Nelder–Mead maximization of `H_m^(T)` over the canonical box,
/// returning the snapped, terminating maximizer.
pub fn maximize_objective(spec: &ModelSpec, opts: &SolveOptions) -> Result<CanonicalSequence<f64>> {
    maximize_detailed(spec, opts).map(|r| r.0)
}

/// Support and weights of the measure with terminating canonical moments
/// `p`: eigenvalues of the Jacobi matrix and squared first eigenvector
/// components.
pub fn reconstruct_design(p: &CanonicalSequence<f64>) -> Result<DesignMeasure<f64>> {
    if !p.is_terminated() {
        return Err(DesignError::NonTerminatingSequence);
    }
    let z = canonical_to_zeta(p);
    let rec = recurrence_from_zeta(&z, p.depth() + 1)?;
    let n = rec.beta.iter().position(|b| *b == 0.0).map_or(rec.alpha.len(), |i| i + 1);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rec.alpha[i]
        } else if i + 1 == j || j + 1 == i {
            rec.beta[i.min(j)].max(0.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut support = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let w = eig.eigenvectors[(0, i)].powi(2);
        if w > 0.0 {
            support.push(eig.eigenvalues[i].clamp(0.0, 1.0));
            weights.push(w);
        }
    }
    DesignMeasure::normalized(Domain::UnitInterval, support, weights)
}

/// D-optimal design for the model: maximize, snap, reconstruct.
pub fn solve(spec: &ModelSpec, opts: &SolveOptions) -> Result<DesignResult> {
    let (p_star, mut diagnostics) = maximize_detailed(spec, opts)?;
    let objective = evaluate_objective(&p_star, spec)?;
    let measure = reconstruct_design(&p_star)?;
    if let Some(grid) = opts.oracle_grid {
        let oracle = brute_force_design(spec, grid, spec.m)?;
        diagnostics.oracle_objective = Some(oracle.det);
        diagnostics.oracle_gap = Some((oracle.det - objective) / oracle.det);
    }
    Ok(DesignResult { p_star, measure, objective, diagnostics })
}
