//! Box-constrained Nelder–Mead.
//!
//! Trial points are clamped into the box. Coefficients follow the
//! dimension-adaptive choice of Gao and Han, which behaves better than the
//! classic ones beyond a handful of dimensions. Infeasible points are
//! reported by the objective as `+inf`.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop when the spread of simplex values falls below this (relative).
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    pub initial_step: f64,
    /// Fresh-simplex restarts from the incumbent after convergence.
    pub polish_rounds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iters: 20_000,
            f_tol: 1e-12,
            x_tol: 1e-10,
            initial_step: 0.1,
            polish_rounds: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn clamp(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// One Nelder–Mead run from `x0` inside `[lo, hi]^n`.
pub fn minimize_once<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    lo: f64,
    hi: f64,
    step: f64,
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    if n == 0 {
        return Minimum { value: f(&start), x: start, iterations: 0 };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let sigma = if n == 1 { 0.5 } else { sigma };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), f(&start)));
    for i in 0..n {
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi { v[i] + step } else { v[i] - step };
        clamp(&mut v, lo, hi);
        let fv = f(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() {
            let spread = (worst - best).abs();
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= opts.f_tol * (1.0 + best.abs()) && diameter <= opts.x_tol {
                break;
            }
            if diameter == 0.0 {
                break;
            }
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst_x = simplex[n].0.clone();
        let mut xr = combine(&centroid, &worst_x, -alpha);
        clamp(&mut xr, lo, hi);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let mut xe = combine(&centroid, &worst_x, -gamma);
            clamp(&mut xe, lo, hi);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (target, bound) = if fr < worst { (&xr, fr) } else { (&worst_x, worst) };
        let mut xc = combine(&centroid, target, rho);
        clamp(&mut xc, lo, hi);
        let fc = f(&xc);
        let accept = if fr < worst { fc <= bound } else { fc < bound };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let best_x = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut v = combine(&best_x, &entry.0, sigma);
            clamp(&mut v, lo, hi);
            let fv = f(&v);
            *entry = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, iterations }
}

/// Nelder–Mead followed by polishing restarts with shrinking simplices.
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    lo: f64,
    hi: f64,
    opts: &NelderMeadOptions,
) -> Minimum {
    let mut best = minimize_once(f, x0, lo, hi, opts.initial_step, opts);
    let mut step = opts.initial_step;
    for _ in 0..opts.polish_rounds {
        step = (step * 0.3).max(1e-6);
        let next = minimize_once(f, &best.x, lo, hi, step, opts);
        let iterations = best.iterations + next.iterations;
        let improved = next.value < best.value - opts.f_tol * best.value.abs();
        if next.value <= best.value {
            best = Minimum { iterations, ..next };
        } else {
            best.iterations = iterations;
        }
        if !improved {
            break;
        }
    }
    best
}
