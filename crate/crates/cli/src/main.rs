//! `cournot`: simulate, test, identify and estimate Cournot markets with
//! privately observed costs.
//!
//! Exit codes: 0 success, 1 invalid input (bad config, missing file, failed
//! private-information check), 2 numerical failure.

mod config;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cournot_core::counterfactual::{compare_regimes, kmeans_firms};
use cournot_core::distributions::Univariate;
use cournot_core::estimation::detrend::{detrend, DetrendResult};
use cournot_core::estimation::mle::{estimate, Estimate};
use cournot_core::estimation::subsample::subsample_ci_mle;
use cournot_core::extensions::{
    draw_entry, entry_frequency, identify_conduct, identify_fv_nonlinear, identify_lambda_nonlinear,
    identify_loglinear, selective_entry_outcomes, simulate_nonlinear_panel, solve_nonlinear_equilibrium,
    ConditionalMeans, NlSource, NonlinearDemandSpec, NonlinearIdentified, NonlinearPopulation,
};
use cournot_core::identification::{identify, identify_beta, test_private_information, Source};
use cournot_core::model::{ConductProfile, ModelPrimitives};
use cournot_core::montecarlo::run_monte_carlo;
use cournot_core::panel::Panel;
use cournot_core::simulator::{simulate_regime, InfoRegime};
use cournot_core::stats::{quantile_type7, sorted};
use cournot_core::Error as CoreError;

use config::{Design, RunConfig};

#[derive(Parser)]
#[command(name = "cournot", version, about = "Cournot markets with private cost information")]
struct Cli {
    /// JSON run configuration; omitted blocks take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving JSON and CSV outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    Private,
    Complete,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel `t,p,q1..qI`
    Simulate {
        /// Panel path; defaults to `<out-dir>/panel.csv`
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "T")]
        t_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        regime: Option<Regime>,
        /// Also write the latent shocks here
        #[arg(long)]
        latent: Option<PathBuf>,
    },
    /// Test the private-information restrictions on a panel
    Check {
        #[arg(long)]
        panel: PathBuf,
    },
    /// Nonparametric identification from a panel, or from the configured
    /// model's population law when no panel is given
    Identify {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Maximum likelihood estimation
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        /// Skip the exponential-trend test
        #[arg(long)]
        no_detrend: bool,
    },
    /// Subsampling confidence intervals around a maximum likelihood estimate
    Ci {
        #[arg(long)]
        panel: PathBuf,
        /// Reuse an `estimates.json`; otherwise the panel is estimated first
        #[arg(long)]
        estimates: Option<PathBuf>,
        #[arg(long)]
        no_detrend: bool,
    },
    /// Private versus complete information under common shocks
    Counterfactual {
        /// Parameters from an `estimates.json`; defaults to the config
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Group firms by k-means on this panel instead of the configured
        /// groups
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long = "T")]
        t_sim: Option<usize>,
        #[arg(long)]
        sims: Option<usize>,
    },
    /// Repeated simulate, detrend, estimate cycles
    Montecarlo {
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long = "T")]
        t_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Group firms by the mean and spread of their outputs
    Cluster {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Nonlinear demand, conduct and selective entry
    Extensions {
        #[command(subcommand)]
        which: ExtCommand,
    },
}

#[derive(Subcommand)]
enum ExtCommand {
    /// Solve the nonlinear-demand game at one market
    Solve,
    /// Simulate a nonlinear-demand panel
    Simulate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify log-linear demand, cost curvature and cost quantiles
    Identify {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Recover cost curvature and conjectural variations
    Conduct {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Simulate selective entry
    Entry,
}

/// A well-formed run whose data fail a model restriction.
#[derive(Debug)]
struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("private-information restrictions rejected")
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<CheckFailed>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::NonConvergence(_)
                | CoreError::Singular(_)
                | CoreError::Numerical(_)
                | CoreError::Infeasible(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(f, value).map_err(CoreError::from)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_panel(path: &Path) -> Result<Panel> {
    Panel::read_csv(path).with_context(|| format!("reading panel {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct EstimatesFile {
    names: Vec<String>,
    values: Vec<f64>,
    estimate: Estimate,
    detrend: Option<DetrendResult>,
    t_len: usize,
}

fn prepare(panel: Panel, cfg: &RunConfig, no_detrend: bool) -> Result<(Panel, Option<DetrendResult>)> {
    if no_detrend {
        return Ok((panel, None));
    }
    let (p, fit) = detrend(&panel, &cfg.detrend)?;
    for w in &fit.warnings {
        eprintln!("detrend: {w}");
    }
    Ok((p, Some(fit)))
}

fn run_estimate(panel: &Panel, cfg: &RunConfig, dt: Option<DetrendResult>) -> Result<EstimatesFile> {
    if panel.n_firms() != cfg.theta.n_firms() {
        bail!(CoreError::InvalidParameter(format!(
            "panel has {} firms but the configured parameters describe {}",
            panel.n_firms(),
            cfg.theta.n_firms()
        )));
    }
    let est = estimate(panel, &cfg.theta, &cfg.estimation)?;
    if !est.converged {
        eprintln!("warning: search stopped before meeting its tolerances");
    }
    Ok(EstimatesFile {
        names: est.names.clone(),
        values: est.theta.to_vec(),
        estimate: est,
        detrend: dt,
        t_len: panel.len(),
    })
}

fn quartiles(x: &[f64]) -> (f64, f64) {
    let s = sorted(x);
    (quantile_type7(&s, 0.25), quantile_type7(&s, 0.75))
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = |name: &str| cli.out_dir.join(name);

    match cli.command {
        Command::Simulate { out: path, t_len, seed, regime, latent } => {
            let model = cfg.model()?;
            let regime = match regime {
                Some(Regime::Private) => InfoRegime::Private,
                Some(Regime::Complete) => InfoRegime::Complete,
                None => cfg.simulate.regime,
            };
            let sim = simulate_regime(
                &model,
                &cfg.trend(),
                t_len.unwrap_or(cfg.simulate.t_len),
                seed.unwrap_or(cfg.simulate.seed),
                regime,
            )?;
            let path = path.unwrap_or_else(|| out("panel.csv"));
            sim.panel.write_csv(&path)?;
            println!("wrote {}", path.display());
            if let Some(l) = latent {
                sim.latent.write_csv(&l)?;
                println!("wrote {}", l.display());
            }
        }
        Command::Check { panel } => {
            let panel = read_panel(&panel)?;
            let d = test_private_information(&panel, &cfg.identify.diagnostics)?;
            for f in &d.firms {
                println!(
                    "firm {:>3}: {} (band {}, rival ratio {:.4}, price ratio {:.4}{})",
                    f.firm + 1,
                    if f.pass { "PASS" } else { "FAIL" },
                    f.n_band,
                    f.ratio_rivals,
                    f.ratio_price,
                    if f.mass_point { ", mass point at zero" } else { "" }
                );
            }
            write_json(&out("diagnostics.json"), &d)?;
            println!("{}", if d.all_pass { "PASS" } else { "FAIL" });
            if !d.all_pass {
                return Err(CheckFailed.into());
            }
        }
        Command::Identify { panel } => {
            let report = match panel {
                Some(p) => {
                    let panel = read_panel(&p)?;
                    identify(&Source::Sample { panel: &panel, band: cfg.identify.band }, &cfg.identify)?
                }
                None => {
                    let model = cfg.model()?;
                    identify(&Source::Population(&model), &cfg.identify)?
                }
            };
            report.write(&cli.out_dir)?;
            println!("beta {:.6} lambda {:.6}", report.beta_hat, report.lambda_hat);
            println!("wrote {}", out("identification_report.json").display());
        }
        Command::Estimate { panel, no_detrend } => {
            let (panel, dt) = prepare(read_panel(&panel)?, &cfg, no_detrend)?;
            let file = run_estimate(&panel, &cfg, dt)?;
            for (n, v) in file.names.iter().zip(&file.values) {
                println!("{n:>12} {v:.6}");
            }
            write_json(&out("estimates.json"), &file)?;
        }
        Command::Ci { panel, estimates, no_detrend } => {
            let (panel, dt) = prepare(read_panel(&panel)?, &cfg, no_detrend)?;
            let full = match estimates {
                Some(path) => {
                    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    let e: EstimatesFile = serde_json::from_reader(f).map_err(CoreError::from)?;
                    e.estimate
                }
                None => run_estimate(&panel, &cfg, dt)?.estimate,
            };
            let ci = subsample_ci_mle(&panel, &full, &cfg.estimation, &cfg.subsample)?;
            for k in 0..ci.names.len() {
                println!("{:>12} {:.6} [{:.6}, {:.6}]", ci.names[k], ci.estimate[k], ci.lower[k], ci.upper[k]);
            }
            write_json(&out("ci.json"), &ci)?;
        }
        Command::Counterfactual { estimates, panel, t_sim, sims } => {
            // Estimated parameters come with their own groups; a preset
            // design puts every firm in a group of its own.
            let (model, own_groups) = match estimates {
                Some(path) => {
                    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    let e: EstimatesFile = serde_json::from_reader(f).map_err(CoreError::from)?;
                    (e.estimate.theta.model()?, e.estimate.theta.firm_group)
                }
                None => match cfg.design {
                    Design::Theta => (cfg.theta.model()?, cfg.theta.firm_group.clone()),
                    Design::BoundaryDesign => {
                        let m = cfg.model()?;
                        let g = (0..m.n_firms()).collect();
                        (m, g)
                    }
                },
            };
            let groups = match (panel, &cfg.counterfactual.groups) {
                (Some(p), _) => kmeans_firms(&read_panel(&p)?, cfg.cluster.k, cfg.cluster.seed)?.assignment,
                (None, Some(g)) => g.clone(),
                (None, None) => own_groups,
            };
            let cmp = compare_regimes(
                &model,
                &groups,
                &cfg.trend(),
                t_sim.unwrap_or(cfg.counterfactual.t_sim),
                sims.unwrap_or(cfg.counterfactual.n_sims),
                cfg.counterfactual.seed,
            )?;
            println!(
                "mean CS private {:.4} complete {:.4} ratio {:.4}",
                cmp.cs_private_mean, cmp.cs_complete_mean, cmp.cs_ratio
            );
            let path = out("regime_comparison.csv");
            cmp.write_csv(&path)?;
            println!("wrote {}", path.display());
            write_json(&out("counterfactual.json"), &cmp)?;
        }
        Command::Montecarlo { reps, t_len, seed } => {
            let mut mc = cfg.montecarlo.clone();
            mc.reps = reps.unwrap_or(mc.reps);
            mc.t_len = t_len.unwrap_or(mc.t_len);
            mc.seed = seed.unwrap_or(mc.seed);
            let res = run_monte_carlo(&cfg.theta, &cfg.trend(), &mc)?;
            println!("{:>12} {:>10} {:>10} {:>10}", "parameter", "bias", "sd", "rmse");
            for r in &res.table {
                println!("{:>12} {:>10.4} {:>10.4} {:>10.4}", r.parameter, r.bias, r.sd, r.rmse);
            }
            for (r, e) in &res.failures {
                eprintln!("replication {r} failed: {e}");
            }
            let path = out("mc_table.csv");
            res.write_table_csv(&path)?;
            println!("wrote {}", path.display());
            write_json(&out("montecarlo.json"), &res)?;
        }
        Command::Cluster { panel, k } => {
            let g = kmeans_firms(&read_panel(&panel)?, k.unwrap_or(cfg.cluster.k), cfg.cluster.seed)?;
            for (c, (m, s)) in g.centroids.iter().enumerate() {
                let members: Vec<String> = (0..g.assignment.len())
                    .filter(|&i| g.assignment[i] == c)
                    .map(|i| (i + 1).to_string())
                    .collect();
                println!("cluster {}: mean {m:.3} sd {s:.3} firms {}", c + 1, members.join(" "));
            }
            write_json(&out("clusters.json"), &g)?;
        }
        Command::Extensions { which } => run_extension(which, &cfg, &cli.out_dir)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary {
    w: f64,
    u: f64,
    sweeps: usize,
    residual: f64,
    foc_residual: f64,
}

#[derive(Serialize)]
struct NonlinearReport {
    demand: cournot_core::extensions::LogLinearDemandId,
    lambda: cournot_core::extensions::NonlinearLambda,
    cost_quantiles: Vec<cournot_core::extensions::NonlinearFv>,
}

#[derive(Serialize)]
struct ConductReport {
    u: f64,
    u_prime: f64,
    beta: f64,
    kappa_1: f64,
    means_u: Vec<f64>,
    means_u_prime: Vec<f64>,
    estimate: cournot_core::extensions::ConductEstimate,
}

#[derive(Serialize)]
struct EntryReport {
    markets: usize,
    entry_frequency: f64,
    mean_entrants: f64,
}

fn run_extension(which: ExtCommand, cfg: &RunConfig, dir: &Path) -> Result<()> {
    let nl = &cfg.extensions.nonlinear;
    match which {
        ExtCommand::Solve => {
            let model = nl.model()?;
            let mid = |(a, b): (f64, f64)| 0.5 * (a + b);
            let (w, u) = nl.at.unwrap_or((mid(model.w_law.support()), mid(model.u_law.support())));
            let eq = solve_nonlinear_equilibrium(&model, w, u, &nl.solver)?;
            let path = dir.join("nonlinear_strategies.csv");
            eq.write_csv(&path)?;
            println!("wrote {}", path.display());
            let s = SolveSummary { w, u, sweeps: eq.sweeps, residual: eq.residual, foc_residual: eq.foc_residual() };
            println!("converged in {} sweeps, first-order residual {:.2e}", s.sweeps, s.foc_residual);
            write_json(&dir.join("nonlinear_equilibrium.json"), &s)?;
        }
        ExtCommand::Simulate { out } => {
            let panel = simulate_nonlinear_panel(&nl.model()?, nl.t_len, nl.seed, &nl.solver)?;
            let path = out.unwrap_or_else(|| dir.join("nonlinear_panel.csv"));
            panel.write_csv(&path)?;
            println!("wrote {}", path.display());
        }
        ExtCommand::Identify { panel } => {
            let panel = panel.map(|p| read_panel(&p)).transpose()?;
            let pop;
            let source = match &panel {
                Some(p) => NlSource::Sample { panel: p, band: nl.band },
                None => {
                    pop = NonlinearPopulation::new(nl.model()?, nl.solver)?;
                    NlSource::Population(&pop)
                }
            };
            let demand_id = identify_loglinear(&source, &nl.alpha_pairs)?;
            let demand = NonlinearDemandSpec::LogLinear { beta: demand_id.beta };
            let lambda = identify_lambda_nonlinear(&source, &demand, &nl.lambda_id)?;
            let id = NonlinearIdentified {
                demand,
                lambda: lambda.lambda,
                u_lower: demand_id.u_lower,
                u_upper: demand_id.u_upper,
            };
            let cost_quantiles = (0..source.n_firms())
                .map(|i| identify_fv_nonlinear(&source, i, &nl.report_alpha, &id))
                .collect::<cournot_core::Result<Vec<_>>>()?;
            println!(
                "beta {:.6} (dispersion {:.2e}) lambda {:.6}",
                demand_id.beta, demand_id.dispersion, lambda.lambda
            );
            let report = NonlinearReport { demand: demand_id, lambda, cost_quantiles };
            write_json(&dir.join("nonlinear_identification.json"), &report)?;
        }
        ExtCommand::Conduct { panel } => {
            let c = &cfg.extensions.conduct;
            let kappa_1 = c.kappa.first().copied().unwrap_or(0.0);
            let (at_u, at_u_prime, beta) = match panel {
                Some(p) => {
                    let panel = read_panel(&p)?;
                    let id = &cfg.identify;
                    let source = Source::Sample { panel: &panel, band: id.band };
                    let n = panel.n_firms();
                    let beta = (0..n)
                        .map(|i| identify_beta(&source, i, id.alpha, id.alpha_prime).map(|b| b.beta))
                        .sum::<cournot_core::Result<f64>>()?
                        / n as f64;
                    let (u, u2) = c.u_pair.unwrap_or_else(|| quartiles(&panel.demand_shocks(beta)));
                    (
                        ConditionalMeans::from_panel(&panel, beta, u, &c.band)?,
                        ConditionalMeans::from_panel(&panel, beta, u2, &c.band)?,
                        beta,
                    )
                }
                None => {
                    let model = cfg.model()?;
                    let prim: ModelPrimitives = model.primitives();
                    let profile = if c.kappa.is_empty() {
                        ConductProfile::cournot(prim.n_firms())
                    } else {
                        ConductProfile { kappa: c.kappa.clone() }
                    };
                    let (u, u2) = match c.u_pair {
                        Some(pair) => pair,
                        None => (model.u_law.quantile(0.25)?, model.u_law.quantile(0.75)?),
                    };
                    (
                        ConditionalMeans::population(&prim, &profile, u)?,
                        ConditionalMeans::population(&prim, &profile, u2)?,
                        prim.beta,
                    )
                }
            };
            let estimate = identify_conduct(&at_u, &at_u_prime, beta, kappa_1)?;
            println!("lambda {:.6} kappa {:?}", estimate.lambda, estimate.kappa);
            let report = ConductReport {
                u: at_u.u,
                u_prime: at_u_prime.u,
                beta,
                kappa_1,
                means_u: at_u.q,
                means_u_prime: at_u_prime.q,
                estimate,
            };
            write_json(&dir.join("conduct.json"), &report)?;
        }
        ExtCommand::Entry => {
            let e = &cfg.extensions.entry;
            let (w_law, u_law) = (e.w.law()?, e.u.law()?);
            let draws = draw_entry(&e.spec, e.n_firms, &w_law, &u_law, e.t_len, e.seed)?;
            let prim = ModelPrimitives {
                beta: e.beta,
                lambda: e.lambda,
                mu_v: vec![e.spec.signal_cost.mean_given(0.5)?; e.n_firms],
                v_bounds: vec![e.spec.signal_cost.bounds(); e.n_firms],
                w_bounds: w_law.support(),
                u_lower: u_law.support().0,
            };
            let panel = selective_entry_outcomes(&e.spec, &prim, &draws)?;
            let path = dir.join("entry_panel.csv");
            panel.write_csv(&path)?;
            println!("wrote {}", path.display());
            let freq = entry_frequency(&panel.entry)?;
            let report = EntryReport {
                markets: panel.panel.len(),
                entry_frequency: freq,
                mean_entrants: freq * e.n_firms as f64,
            };
            println!("entry frequency {:.4}", report.entry_frequency);
            write_json(&dir.join("entry.json"), &report)?;
        }
    }
    Ok(())
}
