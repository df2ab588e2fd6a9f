//! Maximin designs for estimating `g_k(theta_k)`, approximated by power-mean
//! relaxations over the parameter box.

use serde::{Deserialize, Serialize};

use super::quadrature::gauss_legendre_on;
use crate::canonical::{canonical_to_moments, CanonicalSequence};
use crate::error::{DesignError, Result};
use crate::optimize::{
    default_start, multistart, reconstruct_design, snap_to_terminal, DesignResult, Diagnostics,
    SolveOptions,
};
use crate::oracle::{gen_hankel, GenHankelSpec};
use crate::scalar::Scalar;
use crate::toda::{multiset_from_model, required_depth, stage_table, ModelSpec};

pub const DEFAULT_P_SCHEDULE: [f64; 6] = [-1.0, -2.0, -4.0, -8.0, -16.0, -32.0];
pub const DEFAULT_NODES: usize = 16;

fn default_schedule() -> Vec<f64> {
    DEFAULT_P_SCHEDULE.to_vec()
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximinSpec {
    pub m: usize,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub b: Vec<usize>,
    /// `g_0..g_{m-1}`, coefficients in ascending powers.
    pub g: Vec<Vec<f64>>,
    /// `[s_k, t_k]` for each `theta_k`.
    pub theta_box: Vec<[f64; 2]>,
    #[serde(default = "default_schedule")]
    pub p_schedule: Vec<f64>,
    /// Gauss–Legendre nodes per nonlinear axis.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl MaximinSpec {
    pub fn new(m: usize, g: Vec<Vec<f64>>, theta_box: Vec<[f64; 2]>) -> Self {
        MaximinSpec {
            m,
            beta: vec![],
            b: vec![],
            g,
            theta_box,
            p_schedule: default_schedule(),
            nodes: DEFAULT_NODES,
        }
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec { m: self.m, beta: self.beta.clone(), b: self.b.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        if self.g.len() != self.m || self.theta_box.len() != self.m {
            return Err(DesignError::InvalidSpec("need one g_k and one box side per parameter".into()));
        }
        for (k, [s, t]) in self.theta_box.iter().enumerate() {
            if !(s.is_finite() && t.is_finite() && s < t) {
                return Err(DesignError::InvalidSpec(format!("theta_box[{k}] = [{s}, {t}] is empty")));
            }
        }
        if self.p_schedule.is_empty() || self.p_schedule.iter().any(|p| !(*p < 0.0)) {
            return Err(DesignError::InvalidSpec("p_schedule must be nonempty and negative".into()));
        }
        if self.p_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(DesignError::InvalidSpec("p_schedule must be strictly decreasing".into()));
        }
        if self.nodes == 0 {
            return Err(DesignError::InvalidSpec("nodes must be at least 1".into()));
        }
        if self.g.iter().flatten().any(|c| !c.is_finite()) {
            return Err(DesignError::InvalidSpec("g coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        required_depth(self.m, &multiset_from_model(&self.model()))
    }
}

/// Coefficients of the derivative.
fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn degree(c: &[f64]) -> usize {
    c.iter().rposition(|v| *v != 0.0).unwrap_or(0)
}

/// Prior density `h_k`: `2 g_k' g_k''` when `deg g_k >= 2`, else 1.
pub fn prior_density(g: &[f64], theta: f64) -> f64 {
    if degree(g) < 2 {
        return 1.0;
    }
    let d1 = derivative(g);
    let d2 = derivative(&d1);
    2.0 * horner(&d1, theta) * horner(&d2, theta)
}

/// `psi_0..psi_{count-1}` with `psi_k = H_{k+1}^(T) / H_k^(T)`, read off the
/// stage table at `(T, 0)` as `c_0 prod_{j <= k} zeta_{2j-1} zeta_{2j}`.
pub fn psi_all<S: Scalar>(p: &CanonicalSequence<S>, spec: &ModelSpec, count: usize) -> Result<Vec<S>> {
    spec.validate()?;
    let t = multiset_from_model(spec);
    let needed = required_depth(count, &t);
    if !p.is_terminated() && p.depth() < needed {
        return Err(DesignError::InsufficientDepth { needed, available: p.depth() });
    }
    let table = stage_table(p, &t, 0.0)?;
    let zeta = |k: usize| table.get(k).unwrap_or_else(S::zero);
    let mut out = Vec::with_capacity(count);
    let mut acc = table.c0.clone();
    for k in 0..count {
        if k > 0 {
            acc = acc * zeta(2 * k - 1) * zeta(2 * k);
        }
        out.push(acc.clone());
    }
    Ok(out)
}

pub fn psi_k<S: Scalar>(p: &CanonicalSequence<S>, spec: &ModelSpec, k: usize) -> Result<S> {
    let psi = psi_all(p, spec, k + 1)?;
    if k > 0 && psi[k - 1].is_zero() {
        return Err(DesignError::ZeroDenominator(format!("H_{k}^(T)")));
    }
    Ok(psi[k].clone())
}

/// `gamma = sum_k g_k'(theta_k)^2 psi_k` from precomputed `psi`.
fn gamma_from_psi(psi: &[f64], spec: &MaximinSpec, theta: &[f64]) -> f64 {
    spec.g
        .iter()
        .zip(theta)
        .zip(psi)
        .map(|((g, &th), &ps)| horner(&derivative(g), th).powi(2) * ps)
        .sum()
}

pub fn gamma(p: &CanonicalSequence<f64>, spec: &MaximinSpec, theta: &[f64]) -> Result<f64> {
    spec.validate()?;
    if theta.len() != spec.m {
        return Err(DesignError::InvalidSpec(format!("theta has {} coordinates, need {}", theta.len(), spec.m)));
    }
    for (k, (&th, [s, t])) in theta.iter().zip(&spec.theta_box).enumerate() {
        if !(th >= *s && th <= *t) {
            return Err(DesignError::InvalidSpec(format!("theta_{k} = {th} outside [{s}, {t}]")));
        }
    }
    Ok(gamma_from_psi(&psi_all(p, &spec.model(), spec.m)?, spec, theta))
}

/// Cubature grid over the box: a node list per nonlinear axis with weights
/// already multiplied by `h_k`, plus the product of the linear side lengths.
struct Cubature {
    axes: Vec<(usize, Vec<f64>, Vec<f64>)>,
    linear_volume: f64,
}

impl Cubature {
    fn new(spec: &MaximinSpec) -> Result<Self> {
        let mut axes = Vec::new();
        let mut linear_volume = 1.0;
        for (k, (g, [s, t])) in spec.g.iter().zip(&spec.theta_box).enumerate() {
            if degree(g) < 2 {
                linear_volume *= t - s;
                continue;
            }
            let (x, w) = gauss_legendre_on(spec.nodes, *s, *t);
            let mut hw = Vec::with_capacity(x.len());
            for (&xi, &wi) in x.iter().zip(&w) {
                let h = prior_density(g, xi);
                if !(h >= 0.0) {
                    return Err(DesignError::InvalidSpec(format!("prior density h_{k} negative at {xi}")));
                }
                hw.push(wi * h);
            }
            axes.push((k, x, hw));
        }
        Ok(Cubature { axes, linear_volume })
    }

    /// Sum of `f(theta) w` over the tensor grid; linear coordinates of
    /// `theta` are left at the box's lower corner.
    fn sum(&self, spec: &MaximinSpec, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
        let mut theta: Vec<f64> = spec.theta_box.iter().map(|b| b[0]).collect();
        let mut idx = vec![0usize; self.axes.len()];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (a, (k, x, hw)) in self.axes.iter().enumerate() {
                theta[*k] = x[idx[a]];
                w *= hw[idx[a]];
            }
            total += w * f(&theta)?;
            let mut a = 0;
            loop {
                if a == idx.len() {
                    return Ok(total * self.linear_volume);
                }
                idx[a] += 1;
                if idx[a] < self.axes[a].1.len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }
}

fn integrate_power(psi: &[f64], spec: &MaximinSpec, pexp: f64, cub: &Cubature) -> Result<f64> {
    cub.sum(spec, |theta| {
        let g = gamma_from_psi(psi, spec, theta);
        if !(g > 0.0) {
            return Err(DesignError::NonfinitePower(g));
        }
        Ok(g.powf(pexp))
    })
}

/// `int_Theta gamma^pexp prod_k h_k dtheta`, by tensor Gauss–Legendre on the
/// axes whose `g_k` is nonlinear. Linear axes contribute their side length.
pub fn p_mean_objective(p: &CanonicalSequence<f64>, spec: &MaximinSpec, pexp: f64) -> Result<f64> {
    spec.validate()?;
    if !(pexp < 0.0) {
        return Err(DesignError::InvalidSpec(format!("exponent {pexp} must be negative")));
    }
    let psi = psi_all(p, &spec.model(), spec.m)?;
    integrate_power(&psi, spec, pexp, &Cubature::new(spec)?)
}

/// Normalized power mean `(int gamma^pexp dpi / int dpi)^(1/pexp)`, which
/// lies between the minimum and maximum of `gamma`.
pub fn p_mean_value(p: &CanonicalSequence<f64>, spec: &MaximinSpec, pexp: f64) -> Result<f64> {
    let integral = p_mean_objective(p, spec, pexp)?;
    let cub = Cubature::new(spec)?;
    let mass = cub.sum(spec, |_| Ok(1.0))?;
    Ok((integral / mass).powf(1.0 / pexp))
}

/// Minimum of `(g')^2` over `[s, t]`: dense sampling, then golden-section
/// refinement around the best sample.
fn min_sq_derivative(g: &[f64], s: f64, t: f64) -> f64 {
    let d = derivative(g);
    let f = |x: f64| horner(&d, x).powi(2);
    const N: usize = 2000;
    let h = (t - s) / N as f64;
    let mut best = (f(s), s);
    for i in 1..=N {
        let x = s + h * i as f64;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    let (mut a, mut b) = ((best.1 - h).max(s), (best.1 + h).min(t));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - r * (b - a);
        let e = a + r * (b - a);
        if f(c) < f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    best.0.min(f(0.5 * (a + b)))
}

/// `min_theta gamma`. `gamma` separates across coordinates, so the minimum
/// is `sum_k psi_k min (g_k')^2`.
pub fn min_gamma(p: &CanonicalSequence<f64>, spec: &MaximinSpec) -> Result<f64> {
    spec.validate()?;
    let psi = psi_all(p, &spec.model(), spec.m)?;
    Ok(min_gamma_from_psi(&psi, spec))
}

fn min_gamma_from_psi(psi: &[f64], spec: &MaximinSpec) -> f64 {
    spec.g
        .iter()
        .zip(&spec.theta_box)
        .zip(psi)
        .map(|((g, [s, t]), ps)| ps * min_sq_derivative(g, *s, *t))
        .sum()
}

fn padded(free: &[f64]) -> Option<CanonicalSequence<f64>> {
    let mut v = free.to_vec();
    v.push(0.5);
    CanonicalSequence::new(v, None).ok()
}

/// One design per exponent of the schedule, each stage warm-started from
/// the previous maximizer of the normalized power mean.
pub fn solve_maximin(spec: &MaximinSpec, opts: &SolveOptions) -> Result<Vec<DesignResult>> {
    spec.validate()?;
    opts.validate()?;
    let model = spec.model();
    let cub = Cubature::new(spec)?;
    let mass = cub.sum(spec, |_| Ok(1.0))?;
    let dim = spec.depth() - 1;
    let mut start = default_start(spec.m, dim, opts.epsilon);
    let mut path = Vec::with_capacity(spec.p_schedule.len());
    for &pexp in &spec.p_schedule {
        let objective = |x: &[f64]| {
            let value = padded(x)
                .and_then(|p| psi_all(&p, &model, spec.m).ok())
                .and_then(|psi| integrate_power(&psi, spec, pexp, &cub).ok());
            match value {
                Some(v) if v > 0.0 && v.is_finite() => -(v / mass).ln() / pexp,
                _ => f64::INFINITY,
            }
        };
        let run = multistart(start.clone(), &objective, opts);
        if !run.value.is_finite() {
            return Err(DesignError::NoFeasiblePoint);
        }
        start = run.x.clone();
        let (p, snapped_indices, padding_terminated) = snap_to_terminal(&run.x, opts.snap_tol);
        let psi = psi_all(&p, &model, spec.m)?;
        let objective = (integrate_power(&psi, spec, pexp, &cub)? / mass).powf(1.0 / pexp);
        let measure = reconstruct_design(&p)?;
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
            pmean_exponent: Some(pexp),
            min_gamma: Some(min_gamma_from_psi(&psi, spec)),
            ..Diagnostics::default()
        };
        path.push(DesignResult { p_star: p, measure, objective, diagnostics });
    }
    Ok(path)
}

/// Brute-force maximin: every design whose free canonical coordinates lie
/// on a uniform `design_grid` in `(0, 1)`, scored by the minimum of `gamma`
/// over a tensor `theta_grid` of the box, with `psi_k` from generalized
/// Hankel determinants of the design's moments. Feasible for small depth only.
pub fn maximin_grid_oracle(
    spec: &MaximinSpec,
    design_grid: usize,
    theta_grid: usize,
) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    let model = spec.model();
    let t = multiset_from_model(&model);
    let dim = spec.depth() - 1;
    if design_grid < 2 || theta_grid < 2 {
        return Err(DesignError::InvalidSpec("grids need at least 2 points".into()));
    }
    let levels: Vec<f64> = (0..design_grid)
        .map(|i| i as f64 / (design_grid - 1) as f64)
        .map(|v| v.clamp(1e-9, 1.0 - 1e-9))
        .collect();
    // (g_k')^2 on each axis of the theta grid
    let slopes: Vec<Vec<f64>> = spec
        .theta_box
        .iter()
        .zip(&spec.g)
        .map(|([s, e], g)| {
            let d = derivative(g);
            (0..theta_grid)
                .map(|i| horner(&d, s + (e - s) * i as f64 / (theta_grid - 1) as f64).powi(2))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let mut values: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        values.push(0.5);
        let p = CanonicalSequence::new(values, None)?;
        let c = canonical_to_moments(&p, 2 * spec.m - 2 + t.size())?;
        let mut h = Vec::with_capacity(spec.m + 1);
        for k in 0..=spec.m {
            h.push(gen_hankel(&c, &GenHankelSpec::new(t.clone(), k))?);
        }
        if h.iter().all(|v| *v > 0.0) {
            let psi: Vec<f64> = (0..spec.m).map(|k| h[k + 1] / h[k]).collect();
            let mut worst = f64::INFINITY;
            let mut ti = vec![0usize; spec.m];
            loop {
                let g: f64 = ti.iter().enumerate().map(|(k, &i)| slopes[k][i] * psi[k]).sum();
                worst = worst.min(g);
                if !advance(&mut ti, theta_grid) {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(v, _)| worst > *v) {
                best = Some((worst, p.values()[..dim].to_vec()));
            }
        }
        if !advance(&mut idx, design_grid) {
            break;
        }
    }
    best.ok_or(DesignError::NoFeasiblePoint)
}

fn advance(idx: &mut [usize], size: usize) -> bool {
    for v in idx.iter_mut() {
        *v += 1;
        if *v < size {
            return true;
        }
        *v = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::moments_to_canonical;
    use crate::measure::{DesignMeasure, Domain};
    use crate::scalar::Rational;

    fn quadratic_spec() -> MaximinSpec {
        MaximinSpec::new(2, vec![vec![0.0, 1.0], vec![0.0, 0.0, 1.0]], vec![[1.0, 2.0], [1.0, 2.0]])
    }

    #[test]
    fn psi_examples() {
        let p = CanonicalSequence::new(vec![0.5, 0.5, 0.5], None).unwrap();
        let model = ModelSpec::unconstrained(2);
        assert_eq!(psi_k(&p, &model, 0).unwrap(), 1.0);
        assert!((psi_k(&p, &model, 1).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn psi_matches_hankel_ratios_with_prior() {
        let mu = DesignMeasure::<Rational>::normalized(
            Domain::UnitInterval,
            vec![Rational::ratio(1, 9), Rational::ratio(1, 3), Rational::ratio(5, 7), Rational::ratio(19, 20)],
            vec![Rational::ratio(1, 4), Rational::ratio(1, 3), Rational::ratio(1, 5), Rational::ratio(1, 6)],
        )
        .unwrap();
        let c = mu.moments(9);
        let p = moments_to_canonical(&c).unwrap();
        let model = ModelSpec { m: 3, beta: vec![2.0], b: vec![1] };
        let t = multiset_from_model(&model);
        let psi = psi_all(&p, &model, 3).unwrap();
        for k in 0..3 {
            let num = gen_hankel(&c, &GenHankelSpec::new(t.clone(), k + 1)).unwrap();
            let den = gen_hankel(&c, &GenHankelSpec::new(t.clone(), k)).unwrap();
            assert_eq!(psi[k], num / den, "k = {k}");
        }
    }

    #[test]
    fn linear_g_gives_constant_gamma() {
        let spec = MaximinSpec::new(2, vec![vec![3.0, 1.0], vec![0.0, 1.0]], vec![[0.0, 1.0], [2.0, 5.0]]);
        let p = CanonicalSequence::new(vec![0.4, 0.7, 0.5], None).unwrap();
        let g = gamma(&p, &spec, &[0.2, 3.0]).unwrap();
        let psi = psi_all(&p, &spec.model(), 2).unwrap();
        assert!((g - psi.iter().sum::<f64>()).abs() < 1e-15);
        let obj = p_mean_objective(&p, &spec, -2.0).unwrap();
        assert!((obj - g.powi(-2) * 3.0).abs() < 1e-12 * obj);
    }

    #[test]
    fn quadratic_gamma_at_corner() {
        let spec = quadratic_spec();
        let p = CanonicalSequence::new(vec![0.3, 0.6, 0.5], None).unwrap();
        let psi = psi_all(&p, &spec.model(), 2).unwrap();
        let g = gamma(&p, &spec, &[2.0, 2.0]).unwrap();
        assert!((g - (psi[0] + 16.0 * psi[1])).abs() < 1e-14);
        assert!(gamma(&p, &spec, &[2.5, 1.0]).is_err());
    }

    #[test]
    fn single_axis_cubature_matches_closed_form() {
        // gamma = 1 + 4 theta^2 z, h = 8 theta; substitute u = theta^2.
        let spec = quadratic_spec();
        let p = CanonicalSequence::new(vec![0.3, 0.6, 0.5], None).unwrap();
        let z = psi_all(&p, &spec.model(), 2).unwrap()[1];
        for pexp in [-1.0, -2.0, -3.5] {
            let a = 4.0 * z;
            let anti = |u: f64| 4.0 * (1.0 + a * u).powf(pexp + 1.0) / (a * (pexp + 1.0));
            let exact = if pexp == -1.0 {
                4.0 * ((1.0 + 4.0 * a).ln() - (1.0 + a).ln()) / a
            } else {
                anti(4.0) - anti(1.0)
            };
            let got = p_mean_objective(&p, &spec, pexp).unwrap();
            assert!((got - exact).abs() <= 1e-8 * exact.abs(), "{pexp}: {got} vs {exact}");
        }
    }

    #[test]
    fn power_mean_sandwich_and_limit() {
        let spec = quadratic_spec();
        let p = CanonicalSequence::new(vec![0.3, 0.6, 0.5], None).unwrap();
        let lo = min_gamma(&p, &spec).unwrap();
        let hi = gamma(&p, &spec, &[1.0, 2.0]).unwrap();
        let mut prev = f64::INFINITY;
        for pexp in [-1.0, -4.0, -16.0, -64.0, -512.0] {
            let v = p_mean_value(&p, &spec, pexp).unwrap();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!((prev - lo) / lo < 2e-2, "{prev} vs {lo}");
    }

    #[test]
    fn nonpositive_gamma_is_reported() {
        let spec = MaximinSpec::new(1, vec![vec![0.0, 0.0, 1.0]], vec![[0.0, 1.0]]);
        let p = CanonicalSequence::new(vec![0.5], None).unwrap();
        assert!(p_mean_objective(&p, &spec, -1.0).is_ok());
        let spec = MaximinSpec::new(1, vec![vec![0.0, 0.0, 1.0]], vec![[-1.0, 1.0]]);
        assert!(p_mean_objective(&p, &spec, -1.0).is_err());
    }

    #[test]
    fn invalid_specs() {
        let mut spec = quadratic_spec();
        spec.p_schedule = vec![-2.0, -1.0];
        assert!(spec.validate().is_err());
        let mut spec = quadratic_spec();
        spec.theta_box[0] = [2.0, 1.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn quadratic_instance_path() {
        let spec = quadratic_spec();
        let opts = SolveOptions { restarts: 2, ..SolveOptions::default() };
        let path = solve_maximin(&spec, &opts).unwrap();
        assert_eq!(path.len(), 6);
        let mut prev = 0.0;
        for r in &path {
            let g = r.diagnostics.min_gamma.unwrap();
            assert!(g >= prev - 1e-6);
            prev = g;
        }
        assert!((prev - 2.0).abs() < 1e-6, "{prev}");
    }
}
