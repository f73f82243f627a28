//! Nelder–Mead simplex search with dimension-adaptive coefficients.

#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    /// Stop when the spread of objective values on the simplex falls below this.
    pub tol_f: f64,
    /// ... and the simplex fits in a cube of this half-width.
    pub tol_x: f64,
    pub max_evals: usize,
    pub initial_step: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            tol_f: 1e-8,
            tol_x: 1e-6,
            max_evals: 20_000,
            initial_step: 0.2,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    cfg: &NelderMeadConfig,
) -> NelderMeadResult {
    let mut evals = 0usize;
    let mut best = x0.to_vec();
    let mut best_f = f(x0);
    evals += 1;
    let mut converged = false;
    for round in 0..=cfg.restarts {
        let r = run(
            &mut f,
            &best,
            best_f,
            cfg,
            cfg.max_evals.saturating_sub(evals),
        );
        evals += r.evals;
        let improved = best_f - r.f;
        if r.f <= best_f {
            best = r.x;
            best_f = r.f;
        }
        converged = r.converged;
        if !r.converged || (round > 0 && improved.abs() <= cfg.tol_f) {
            break;
        }
    }
    NelderMeadResult {
        x: best,
        f: best_f,
        evals,
        converged,
    }
}

fn run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    cfg: &NelderMeadConfig,
    budget: usize,
) -> NelderMeadResult {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0;
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut values = vec![f0];
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += cfg.initial_step;
        values.push(f(&x));
        evals += 1;
        simplex.push(x);
    }
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while evals < budget {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (lo, hi, second) = (order[0], order[n], order[n - 1]);
        let spread = values[hi] - values[lo];
        let size = simplex
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[lo]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= cfg.tol_f && size <= cfg.tol_x {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[hi])
                .map(|(c, x)| c + t * (c - x))
                .collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < values[lo] {
            let xe = along(alpha * gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[hi] = xe;
                values[hi] = fe;
            } else {
                simplex[hi] = xr;
                values[hi] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[hi] = xr;
            values[hi] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[hi] {
            let xc = along(alpha * rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[hi].min(fr) {
            simplex[hi] = xc;
            values[hi] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let best = simplex[lo].clone();
        for k in 0..=n {
            if k == lo {
                continue;
            }
            for (x, b) in simplex[k].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            values[k] = f(&simplex[k]);
            evals += 1;
        }
    }
    let lo = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    NelderMeadResult {
        x: simplex[lo].clone(),
        f: values[lo],
        evals,
        converged,
    }
}
