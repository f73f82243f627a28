//! Grouping firms by output behaviour, and what changes when costs become
//! common knowledge.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{derive_seed, stream_rng};
use crate::error::{invalid, Result};
use crate::panel::Panel;
use crate::simulator::{draw_latent, outcomes, InfoRegime, TrendSpec};
use crate::stats::{mean, variance};
use crate::theta::StructuralModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupingResult {
    pub k: usize,
    /// `(mean output, SD of output)` per cluster.
    pub centroids: Vec<(f64, f64)>,
    pub assignment: Vec<usize>,
    pub within_ss: f64,
}

/// Lloyd's algorithm on each firm's (mean, SD) of output, started from
/// k-means++ seeds; the best of 20 restarts is kept.
pub fn kmeans_firms(panel: &Panel, k: usize, seed: u64) -> Result<GroupingResult> {
    let n = panel.n_firms();
    if k == 0 || k > n {
        return Err(invalid(format!(
            "k = {k} must be between 1 and the number of firms ({n})"
        )));
    }
    if panel.len() < 2 {
        return Err(invalid("need at least two markets"));
    }
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let c = panel.column(i);
            (mean(&c), variance(&c).sqrt())
        })
        .collect();
    kmeans(&pts, k, seed, 20)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

pub fn kmeans(pts: &[(f64, f64)], k: usize, seed: u64, restarts: usize) -> Result<GroupingResult> {
    if k == 0 || k > pts.len() {
        return Err(invalid(format!(
            "k = {k} must be between 1 and {}",
            pts.len()
        )));
    }
    let mut best: Option<GroupingResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream_rng(seed, r as u64);
        // k-means++ seeding.
        let mut cent = vec![pts[rng.random_range(0..pts.len())]];
        while cent.len() < k {
            let d: Vec<f64> = pts
                .iter()
                .map(|&p| {
                    cent.iter()
                        .map(|&c| dist2(p, c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d.iter().sum();
            let next = if total > 0.0 {
                let mut x = rng.random::<f64>() * total;
                let mut pick = d.len() - 1;
                for (i, di) in d.iter().enumerate() {
                    if x < *di {
                        pick = i;
                        break;
                    }
                    x -= di;
                }
                pick
            } else {
                // All points coincide with a centroid; any unused point will do.
                (0..pts.len())
                    .find(|i| !cent.contains(&pts[*i]))
                    .unwrap_or(0)
            };
            cent.push(pts[next]);
        }
        let mut assign = vec![usize::MAX; pts.len()];
        for _ in 0..1000 {
            let mut changed = false;
            for (i, &p) in pts.iter().enumerate() {
                let g = (0..k)
                    .min_by(|&a, &b| dist2(p, cent[a]).total_cmp(&dist2(p, cent[b])))
                    .expect("k >= 1");
                if assign[i] != g {
                    assign[i] = g;
                    changed = true;
                }
            }
            for (g, c) in cent.iter_mut().enumerate() {
                let members: Vec<(f64, f64)> = pts
                    .iter()
                    .zip(&assign)
                    .filter(|(_, &a)| a == g)
                    .map(|(p, _)| *p)
                    .collect();
                if !members.is_empty() {
                    let m = members.len() as f64;
                    *c = (
                        members.iter().map(|p| p.0).sum::<f64>() / m,
                        members.iter().map(|p| p.1).sum::<f64>() / m,
                    );
                }
            }
            if !changed {
                break;
            }
        }
        let within_ss: f64 = pts
            .iter()
            .zip(&assign)
            .map(|(&p, &g)| dist2(p, cent[g]))
            .sum();
        if best.as_ref().is_none_or(|b| within_ss < b.within_ss) {
            best = Some(GroupingResult {
                k,
                centroids: cent,
                assignment: assign,
                within_ss,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Consumer surplus under linear inverse demand `p = u - βQ`:
/// `∫₀^Q (u - βx) dx - pQ = βQ²/2`.
pub fn consumer_surplus(beta: f64, total_output: f64) -> f64 {
    0.5 * beta * total_output * total_output
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimePeriod {
    pub period: usize,
    /// Average output per firm in each group, averaged over simulations.
    pub q_private: Vec<f64>,
    pub q_complete: Vec<f64>,
    pub p_private: f64,
    pub p_complete: f64,
    pub cs_private: f64,
    pub cs_complete: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeComparison {
    pub t_sim: usize,
    pub n_sims: usize,
    pub n_groups: usize,
    pub periods: Vec<RegimePeriod>,
    pub cs_private_mean: f64,
    pub cs_complete_mean: f64,
    /// `cs_complete_mean / cs_private_mean`.
    pub cs_ratio: f64,
    /// Standard error of the mean per-simulation CS difference (complete
    /// minus private).
    pub cs_diff_se: f64,
    /// Largest output gap between the regimes over all markets.
    pub max_abs_output_gap: f64,
}

/// Simulates `n_sims` paths of `t_sim` markets. Both regimes are fed the same
/// latent shocks, so differences are not sampling noise. Per-period figures
/// average over simulations first, then over the firms of a group.
pub fn compare_regimes(
    model: &StructuralModel,
    groups: &[usize],
    trend: &TrendSpec,
    t_sim: usize,
    n_sims: usize,
    seed: u64,
) -> Result<RegimeComparison> {
    let n = model.n_firms();
    if groups.len() != n {
        return Err(invalid("need a group for every firm"));
    }
    if t_sim == 0 || n_sims == 0 {
        return Err(invalid("need at least one period and one simulation"));
    }
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let group_size: Vec<f64> = (0..n_groups)
        .map(|g| groups.iter().filter(|&&x| x == g).count() as f64)
        .collect();
    let sims = (0..n_sims)
        .into_par_iter()
        .map(|s| {
            let latent = draw_latent(model, trend, t_sim, derive_seed(seed, s as u64))?;
            let private = outcomes(model, trend, &latent, InfoRegime::Private)?;
            let complete = outcomes(model, trend, &latent, InfoRegime::Complete)?;
            Ok((private, complete))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut periods = Vec::with_capacity(t_sim);
    let mut max_gap = 0.0f64;
    for t in 0..t_sim {
        let mut qp = vec![0.0; n_groups];
        let mut qc = vec![0.0; n_groups];
        let (mut pp, mut pc, mut csp, mut csc) = (0.0, 0.0, 0.0, 0.0);
        for (a, b) in &sims {
            for i in 0..n {
                qp[groups[i]] += a.q[t][i];
                qc[groups[i]] += b.q[t][i];
                max_gap = max_gap.max((a.q[t][i] - b.q[t][i]).abs());
            }
            pp += a.p[t];
            pc += b.p[t];
            csp += consumer_surplus(model.beta, a.q[t].iter().sum());
            csc += consumer_surplus(model.beta, b.q[t].iter().sum());
        }
        let m = n_sims as f64;
        for g in 0..n_groups {
            qp[g] /= m * group_size[g].max(1.0);
            qc[g] /= m * group_size[g].max(1.0);
        }
        periods.push(RegimePeriod {
            period: t + 1,
            q_private: qp,
            q_complete: qc,
            p_private: pp / m,
            p_complete: pc / m,
            cs_private: csp / m,
            cs_complete: csc / m,
        });
    }
    let per_sim: Vec<(f64, f64)> = sims
        .iter()
        .map(|(a, b)| {
            let f = |p: &Panel| {
                p.q.iter()
                    .map(|r| consumer_surplus(model.beta, r.iter().sum()))
                    .sum::<f64>()
                    / t_sim as f64
            };
            (f(a), f(b))
        })
        .collect();
    let cs_private_mean = per_sim.iter().map(|x| x.0).sum::<f64>() / n_sims as f64;
    let cs_complete_mean = per_sim.iter().map(|x| x.1).sum::<f64>() / n_sims as f64;
    let diffs: Vec<f64> = per_sim.iter().map(|x| x.1 - x.0).collect();
    let cs_diff_se = if n_sims > 1 {
        (variance(&diffs) / n_sims as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(RegimeComparison {
        t_sim,
        n_sims,
        n_groups,
        periods,
        cs_private_mean,
        cs_complete_mean,
        cs_ratio: cs_complete_mean / cs_private_mean,
        cs_diff_se,
        max_abs_output_gap: max_gap,
    })
}

impl RegimeComparison {
    /// Long-format time series: one row per period and regime.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "period,regime,p,cs")?;
        for g in 0..self.n_groups {
            write!(f, ",q_group{}", g + 1)?;
        }
        writeln!(f)?;
        for r in &self.periods {
            for (name, p, cs, q) in [
                ("private", r.p_private, r.cs_private, &r.q_private),
                ("complete", r.p_complete, r.cs_complete, &r.q_complete),
            ] {
                write!(f, "{},{name},{p},{cs}", r.period)?;
                for x in q {
                    write!(f, ",{x}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}
