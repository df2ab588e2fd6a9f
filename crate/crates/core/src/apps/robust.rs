//! Robust D-optimal designs for approximate polynomial regression with
//! symmetric prior information on `[-1, 1]`.
//!
//! A symmetric design `xi` on `[-1, 1]` is identified with the measure `mu`
//! on `[0, 1]` defined by `mu([0, x^2]) = xi([-x, x])`, and the search runs
//! over the canonical moments of `mu`.

use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalSequence;
use crate::error::{DesignError, Result};
use crate::measure::DesignMeasure;
use crate::optimize::{
    default_start, multistart, reconstruct_design, snap_to_terminal, DesignResult, Diagnostics,
    SolveOptions,
};
use crate::oracle::robust_quadratic_oracle;
use crate::scalar::Scalar;
use crate::toda::{evaluate_with_multiset, required_depth, stage_table, ModelSpec, PriorMultiset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSpec {
    pub m: usize,
    /// Contamination bound `|psi(x)| <= |x|^alpha`.
    pub alpha: u32,
    /// Bias budget.
    pub d: f64,
    /// Prior roots; each is used at `+beta_j` and `-beta_j`.
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub b: Vec<usize>,
}

impl RobustSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(DesignError::InvalidSpec("m must be at least 1".into()));
        }
        if !(self.d > 0.0) {
            return Err(DesignError::InvalidSpec(format!("budget d = {} must be positive", self.d)));
        }
        if self.beta.len() != self.b.len() {
            return Err(DesignError::InvalidSpec("beta and b differ in length".into()));
        }
        for (i, x) in self.beta.iter().enumerate() {
            if !x.is_finite() {
                return Err(DesignError::InvalidSpec(format!("beta_{i} is not finite")));
            }
            if self.beta[..i].iter().any(|y| y.abs() == x.abs()) {
                return Err(DesignError::InvalidSpec(format!("beta value {x} repeated up to sign")));
            }
        }
        if self.b.contains(&0) {
            return Err(DesignError::InvalidSpec("every b_j must be positive".into()));
        }
        Ok(())
    }

    /// `T'` on `[-1, 1]`: `+-beta_j` each with multiplicity `2 b_j`.
    pub fn symmetric_multiset(&self) -> PriorMultiset {
        let mut t = PriorMultiset::empty();
        for (&beta, &b) in self.beta.iter().zip(&self.b) {
            t.insert(beta.abs(), 2 * b).expect("finite");
            if beta != 0.0 {
                t.insert(-beta.abs(), 2 * b).expect("finite");
            }
        }
        t
    }

    /// The weight `prod (x^2 - beta_j^2)^{2 b_j}` seen from `mu`:
    /// `beta_j^2` with multiplicity `2 b_j` (or `b_j` at 0).
    pub fn squared_multiset(&self) -> PriorMultiset {
        let mut t = PriorMultiset::empty();
        for (&beta, &b) in self.beta.iter().zip(&self.b) {
            let mult = if beta == 0.0 { b } else { 2 * b };
            t.insert(beta * beta, mult).expect("finite");
        }
        t
    }

    /// `T` of the underlying prior model, `beta_j` with multiplicity `2 b_j`.
    pub fn prior_multiset(&self) -> PriorMultiset {
        PriorMultiset::from_entries(self.beta.iter().zip(&self.b).map(|(&v, &b)| (v, 2 * b)))
            .expect("validated")
    }

    /// The weighted model on `[-1, 1]` whose information determinant is
    /// `H_m^(T')(xi)`.
    pub fn symmetric_model(&self) -> ModelSpec {
        let mut beta = Vec::new();
        let mut b = Vec::new();
        for (&x, &bj) in self.beta.iter().zip(&self.b) {
            if x == 0.0 {
                beta.push(0.0);
                b.push(bj);
            } else {
                beta.extend([x.abs(), -x.abs()]);
                b.extend([bj, bj]);
            }
        }
        ModelSpec { m: self.m, beta, b }
    }

    fn constraint_range(&self) -> std::ops::RangeInclusive<usize> {
        let a = self.alpha as usize;
        (a / 2 + 1)..=((self.m + a) / 2)
    }

    /// Canonical depth on the `mu` side covering the objective, the
    /// constraint and one padding index.
    pub fn depth(&self) -> usize {
        let tm = self.squared_multiset();
        let mut depth = required_depth(self.m.div_ceil(2), &tm);
        if self.m / 2 > 0 {
            depth = depth.max(required_depth(self.m / 2, &tm.with(&[0.0]).expect("finite")));
        }
        if !self.constraint_range().is_empty() {
            let reach = self.m + self.alpha as usize - 1;
            depth = depth.max(reach + self.prior_multiset().size() + 1);
        }
        depth
    }
}

/// `S_{i,j}` for all `i <= imax`, `j <= jmax`: `S_{i,j} = 0` for `j < i`,
/// `S_{0,j} = 1`, `S_{i,j} = S_{i,j-1} + zeta_{j-i+1} S_{i-1,j}`.
pub fn s_table<S: Scalar>(zeta: &[S], imax: usize, jmax: usize) -> Result<Vec<Vec<S>>> {
    let mut table = vec![vec![S::zero(); jmax + 1]; imax + 1];
    for j in 0..=jmax {
        table[0][j] = S::one();
    }
    for i in 1..=imax {
        for j in i..=jmax {
            let idx = j - i + 1;
            let z = zeta.get(idx - 1).cloned().ok_or(DesignError::InsufficientDepth {
                needed: idx,
                available: zeta.len(),
            })?;
            table[i][j] = table[i][j - 1].clone() + z * table[i - 1][j].clone();
        }
    }
    Ok(table)
}

/// A single `S_{i,j}` over `zeta_1, zeta_2, ...`.
pub fn s_recursion<S: Scalar>(zeta: &[S], i: usize, j: usize) -> Result<S> {
    Ok(s_table(zeta, i, j)?[i][j].clone())
}

fn constraint_sum<S: Scalar>(zeta: &[S], spec: &RobustSpec) -> Result<S> {
    let total = spec.m + spec.alpha as usize;
    let range = spec.constraint_range();
    if range.is_empty() {
        return Ok(S::zero());
    }
    let table = s_table(zeta, *range.end(), total - 1)?;
    let mut sum = S::zero();
    for i in range {
        let s = table[i][total - i].clone();
        let mut term = s.clone() * s;
        for z in &zeta[..total - 2 * i] {
            term = term * z.clone();
        }
        sum = sum + term;
    }
    Ok(sum)
}

/// Bias constraint in canonical moments of `mu`:
/// `(c_0^(T'))^-1 sum_{i = floor(alpha/2)+1}^{floor((m+alpha)/2)} S_{i,m+alpha-i}^(T)^2 prod_{j <= m+alpha-2i} zeta_j^(T,0)`
/// with `T` the prior multiset applied to `mu`.
pub fn robust_constraint<S: Scalar>(p: &CanonicalSequence<S>, spec: &RobustSpec) -> Result<S> {
    spec.validate()?;
    if spec.constraint_range().is_empty() {
        return Ok(S::zero());
    }
    let reach = spec.m + spec.alpha as usize - 1;
    let table = stage_table(p, &spec.prior_multiset(), 0.0)?;
    let zeta: Vec<S> = (1..=reach)
        .map(|k| {
            table.get(k).ok_or(DesignError::InsufficientDepth { needed: reach, available: table.len() })
        })
        .collect::<Result<_>>()?;
    let sum = constraint_sum(&zeta, spec)?;
    if spec.beta.is_empty() {
        return Ok(sum);
    }
    let c0 = stage_table(p, &spec.squared_multiset(), 0.0)?.c0;
    if c0.is_zero() {
        return Err(DesignError::ZeroDenominator("c_0^(T')".into()));
    }
    Ok(sum / c0)
}

/// `H_m^(T')(xi) = H_{ceil(m/2)}^(Tmu)(mu) H_{floor(m/2)}^(Tmu + {0})(mu)`,
/// splitting the symmetric Hankel matrix into its even and odd blocks.
pub fn robust_objective<S: Scalar>(p: &CanonicalSequence<S>, spec: &RobustSpec) -> Result<S> {
    let tm = spec.squared_multiset();
    let even = evaluate_with_multiset(p, spec.m.div_ceil(2), &tm)?;
    if spec.m / 2 == 0 {
        return Ok(even);
    }
    let odd = evaluate_with_multiset(p, spec.m / 2, &tm.with(&[0.0])?)?;
    Ok(even * odd)
}

fn with_padding(free: &[f64]) -> Option<CanonicalSequence<f64>> {
    let mut v = free.to_vec();
    v.push(0.5);
    CanonicalSequence::new(v, None).ok()
}

/// Value and constraint at a box point, or `None` when undefined.
fn evaluate(free: &[f64], spec: &RobustSpec) -> Option<(f64, f64)> {
    let p = with_padding(free)?;
    let h = robust_objective(&p, spec).ok()?;
    let g = robust_constraint(&p, spec).ok()?;
    (h > 0.0 && h.is_finite() && g.is_finite()).then_some((h, g))
}

const PENALTY_ROUNDS: usize = 8;
const RETRACT_SLACK: f64 = 1e-4;

/// Pulls a slightly infeasible point back along the segment towards the
/// lower corner of the box, where the constraint vanishes, to the last
/// feasible point found by bisection.
fn retract(x: &[f64], spec: &RobustSpec, epsilon: f64) -> Option<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> { x.iter().map(|v| epsilon + t * (v - epsilon)).collect() };
    let feasible = |y: &[f64]| evaluate(y, spec).is_some_and(|(_, g)| g <= spec.d);
    if feasible(x) {
        return Some(x.to_vec());
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if !feasible(&at(lo)) {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(at(lo))
}

/// Maximizes `H_m^(T')(xi)` over symmetric designs subject to the bias
/// constraint `<= d`.
///
/// A quadratic penalty on the relative violation, escalated tenfold per
/// round until the incumbent is feasible, is followed by a polishing run
/// that rejects infeasible points outright.
pub fn solve_robust(spec: &RobustSpec, opts: &SolveOptions) -> Result<DesignResult> {
    spec.validate()?;
    opts.validate()?;
    let dim = spec.depth() - 1;
    let mut start = default_start(spec.m.div_ceil(2), dim, opts.epsilon);
    let mut factor = 1e2;
    let mut iterations = 0;
    let mut feasible = None;
    let mut last = None;
    for _ in 0..PENALTY_ROUNDS {
        let penalized = |x: &[f64]| match evaluate(x, spec) {
            Some((h, g)) => -h.ln() + factor * ((g - spec.d).max(0.0) / spec.d).powi(2),
            None => f64::INFINITY,
        };
        let run = multistart(start.clone(), &penalized, opts);
        iterations += run.iterations;
        if let Some((_, g)) = evaluate(&run.x, spec) {
            if g <= spec.d * (1.0 + RETRACT_SLACK) {
                feasible = retract(&run.x, spec, opts.epsilon);
            }
            if feasible.is_some() {
                last = Some(run);
                break;
            }
        }
        start = run.x.clone();
        last = Some(run);
        factor *= 10.0;
    }
    let Some(x) = feasible else {
        return Err(DesignError::InfeasibleBudget);
    };
    let barrier = |x: &[f64]| match evaluate(x, spec) {
        Some((h, g)) if g <= spec.d => -h.ln(),
        _ => f64::INFINITY,
    };
    let polish = multistart(x, &barrier, &SolveOptions { restarts: 1, ..opts.clone() });
    iterations += polish.iterations;
    let run = last.expect("at least one round");

    let (mut p, mut snapped, mut padded) = snap_to_terminal(&polish.x, opts.snap_tol);
    let ok = |p: &CanonicalSequence<f64>| {
        robust_constraint(p, spec).is_ok_and(|g| g <= spec.d) && robust_objective(p, spec).is_ok_and(|h| h > 0.0)
    };
    let mut notes = Vec::new();
    if !ok(&p) {
        p = CanonicalSequence::new(polish.x.clone(), Some(crate::canonical::Terminal::One))?;
        notes.push("snapping violated the budget; terminated after the free coordinates".into());
        snapped.clear();
        padded = true;
    }
    let objective = robust_objective(&p, spec)?;
    let constraint = robust_constraint(&p, spec)?;
    let mu = reconstruct_design(&p)?;
    let measure = mu.symmetrize()?;
    notes.push("canonical_moments describe mu with mu([0, x^2]) = xi([-x, x])".into());
    let diagnostics = Diagnostics {
        iterations,
        restarts: opts.restarts,
        best_restart: run.best_index,
        snapped_indices: snapped,
        padding_terminated: padded,
        constraint: Some(constraint),
        notes,
        ..Diagnostics::default()
    };
    Ok(DesignResult { p_star: p, measure, objective, diagnostics })
}

/// Objective of the unconstrained D-optimal design for `T'` on `[-1, 1]`,
/// computed on `[0, 1]` through `y = (x + 1) / 2` and scaled back by
/// `2^{m(m-1) + m |T'|}`.
pub fn unconstrained_reference(spec: &RobustSpec, opts: &SolveOptions) -> Result<(f64, DesignResult)> {
    spec.validate()?;
    let sym = spec.symmetric_model();
    let mapped = ModelSpec {
        m: spec.m,
        beta: sym.beta.iter().map(|x| (x + 1.0) / 2.0).collect(),
        b: sym.b.clone(),
    };
    let result = crate::optimize::solve(&mapped, opts)?;
    let t_size = spec.symmetric_multiset().size() as i32;
    let m = spec.m as i32;
    let scale = 2f64.powi(m * (m - 1) + m * t_size);
    Ok((result.objective * scale, result))
}

/// Best symmetric design over measures `mu` with at most two atoms on a
/// uniform grid of `[0, 1]` and weights on a grid of step `1 / weight_steps`,
/// subject to the constraint evaluated as `r^T B^-1 r` at `psi = x^alpha`.
pub fn robust_grid_oracle(
    spec: &RobustSpec,
    grid: usize,
    weight_steps: usize,
) -> Result<(f64, DesignMeasure<f64>)> {
    use crate::measure::Domain;
    use crate::oracle::info_matrix_det;
    spec.validate()?;
    let model = spec.symmetric_model();
    let points: Vec<f64> = (0..grid).map(|g| g as f64 / (grid - 1) as f64).collect();
    let mut best: Option<(f64, DesignMeasure<f64>)> = None;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i..] {
            for k in 1..=weight_steps {
                let w = k as f64 / weight_steps as f64;
                let mu = if a == b || k == weight_steps {
                    DesignMeasure::point_mass(Domain::UnitInterval, a)?
                } else {
                    DesignMeasure::new(Domain::UnitInterval, vec![a, b], vec![w, 1.0 - w])?
                };
                let xi = mu.symmetrize()?;
                let h = info_matrix_det(&xi, &model);
                if !(h > 0.0) || best.as_ref().is_some_and(|(v, _)| h <= *v) {
                    continue;
                }
                let g = robust_quadratic_oracle(&xi, spec.m, spec.alpha, &spec.beta, &spec.b)
                    .unwrap_or(f64::INFINITY);
                if g <= spec.d {
                    best = Some((h, xi));
                }
            }
        }
    }
    best.ok_or(DesignError::InfeasibleBudget)
}
