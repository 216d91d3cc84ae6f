use iem_core::continuous::{empirical_moments, expected_wealth, simulate_graph_sample};
use iem_core::dual::{canonical_measure, detailed_balance_check, sector_transition_matrix, simulate_dual};
use iem_core::duality::{
    scaling_limit_check, scaling_variance_gap_exact, verify_generator_duality, verify_path_duality,
    verify_self_duality,
};
use iem_core::su11::{
    cheap_duality_consistency, regenerate_self_duality, verify_adjointness, verify_commutation,
    verify_intertwining, verify_su11_relations, Ladder,
};
use iem_core::{ExchangeKernel, ModelParams, OccupationVector, RngStream, WealthVector};

use crate::config::{Command, ExperimentConfig};
use crate::graph::parse_graph;
use crate::report::Record;
use crate::CliError;

pub const GENERATOR_TOL: f64 = 1e-10;
pub const STATIONARY_TOL: f64 = 1e-12;
pub const DETAILED_BALANCE_TOL: f64 = 1e-12;
pub const SELF_DUALITY_TOL: f64 = 1e-10;
pub const CONSERVATION_TOL: f64 = 1e-9;
pub const SCALING_GAP_TOL: f64 = 5e-3;
pub const COMMUTATION_TOL: f64 = 1e-11;
pub const ALGEBRA_TOL: f64 = 1e-12;
pub const ADJOINT_TOL: f64 = 1e-13;
pub const INTERTWINING_TOL: f64 = 1e-12;
pub const REGENERATION_TOL: f64 = 1e-9;
pub const CHEAP_TOL: f64 = 1e-10;
/// Monte Carlo band for one comparison, in standard errors.
pub const SINGLE_SIGMAS: f64 = 3.0;
/// Band for several simultaneous comparisons.
pub const MULTI_SIGMAS: f64 = 4.0;

pub fn run(cfg: &ExperimentConfig) -> Result<Record, CliError> {
    let mut rec = Record::new(cfg);
    let p = cfg.params();
    match cfg.command {
        Command::Simulate => simulate(cfg, &p, &mut rec)?,
        Command::SimulateDual => simulate_dual_cmd(cfg, &p, &mut rec)?,
        Command::VerifyDuality => verify_duality(cfg, &p, &mut rec)?,
        Command::VerifySelfDuality => verify_self(cfg, &p, &mut rec)?,
        Command::Stationary => stationary(cfg, &p, &mut rec),
        Command::DetailedBalance => {
            let r = detailed_balance_check(&p, cfg.theta, cfg.big_n.unwrap_or(12))?;
            rec.at_most("max_violation", r, DETAILED_BALANCE_TOL);
        }
        Command::Ergodic => ergodic(cfg, &p, &mut rec)?,
        Command::ScalingLimit => scaling(cfg, &p, &mut rec)?,
        Command::Su11 => su11(cfg, &p, &mut rec)?,
        Command::WealthSpread => wealth_spread(cfg, &p, &mut rec)?,
    }
    Ok(rec)
}

fn rng(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed, 0)
}

fn wealth_for(cfg: &ExperimentConfig, kernel: &ExchangeKernel, default: impl FnOnce(usize) -> Vec<f64>) -> Result<WealthVector, CliError> {
    let n = kernel.num_vertices();
    let values = match &cfg.init {
        Some(v) => v.clone(),
        None => default(n),
    };
    if values.len() != n {
        return Err(CliError::Usage(format!("--init has {} values but the graph has {n} vertices", values.len())));
    }
    Ok(WealthVector::new(values)?)
}

fn occupation_for(cfg: &ExperimentConfig, kernel: &ExchangeKernel) -> Result<OccupationVector, CliError> {
    let n = kernel.num_vertices();
    let counts = match &cfg.xi {
        Some(v) => v.clone(),
        None => {
            let mut v = vec![0; n];
            v[0] = cfg.n;
            if n > 1 {
                v[1] = cfg.m;
            }
            v
        }
    };
    if counts.len() != n {
        return Err(CliError::Usage(format!("--xi has {} counts but the graph has {n} vertices", counts.len())));
    }
    Ok(OccupationVector::new(counts))
}

fn two_site_default(cfg: &ExperimentConfig) -> impl FnOnce(usize) -> Vec<f64> + '_ {
    move |n| {
        let mut v = vec![1.0; n];
        v[0] = cfg.x;
        if n > 1 {
            v[1] = cfg.y;
        }
        v
    }
}

fn simulate(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let kernel = parse_graph(&cfg.graph)?;
    let init = wealth_for(cfg, &kernel, two_site_default(cfg))?;
    let horizon = cfg.time.unwrap_or(1.0);
    let out = simulate_graph_sample(p, &kernel, &init, horizon, &mut rng(cfg))?;
    for (i, v) in out.state.values().iter().enumerate() {
        rec.num(&format!("state.{i}"), *v);
    }
    rec.int("jump_count", out.jump_count);
    let drift = (out.state.total() - init.total()).abs() / init.total().max(1.0);
    rec.at_most("total_wealth_drift", drift, CONSERVATION_TOL);
    Ok(())
}

fn simulate_dual_cmd(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let kernel = parse_graph(&cfg.graph)?;
    let init = occupation_for(cfg, &kernel)?;
    let out = simulate_dual(p, &kernel, &init, cfg.time.unwrap_or(1.0), &mut rng(cfg))?;
    for (i, v) in out.counts().iter().enumerate() {
        rec.int(&format!("state.{i}"), *v);
    }
    rec.at_most("particle_drift", out.total().abs_diff(init.total()) as f64, 0.0);
    Ok(())
}

fn verify_duality(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    // The generator check runs on the default grid unless a point was pinned
    // through --N (largest n + m).
    let max_total = cfg.big_n.unwrap_or(8);
    let grid = [0.75, 1.5, 2.25, 3.0];
    let mut worst: f64 = 0.0;
    for n in 0..=max_total {
        for m in 0..=(max_total - n) {
            for &x in &grid {
                for &y in &grid {
                    worst = worst.max(verify_generator_duality(p, n, m, x, y)?);
                }
            }
        }
    }
    rec.at_most("generator_residual_grid", worst, GENERATOR_TOL);
    let point = verify_generator_duality(p, cfg.n, cfg.m, cfg.x, cfg.y)?;
    rec.at_most("generator_residual_point", point, GENERATOR_TOL);

    let kernel = parse_graph(&cfg.graph)?;
    let xi = occupation_for(cfg, &kernel)?;
    let x = wealth_for(cfg, &kernel, two_site_default(cfg))?;
    let report = verify_path_duality(p, &kernel, &xi, &x, cfg.time.unwrap_or(0.8), cfg.replicas, &rng(cfg))?;
    rec.num("path.continuous_mean", report.mc_mean);
    rec.num("path.continuous_se", report.mc_se);
    rec.num("path.dual_value", report.dual_value);
    rec.num("path.dual_se", report.dual_se);
    rec.text("path.dual_exact", report.dual_exact.to_string());
    let se = report.mc_se.hypot(report.dual_se);
    let z = if se > 0.0 { (report.mc_mean - report.dual_value).abs() / se } else { 0.0 };
    rec.at_most("path.z_score", z, SINGLE_SIGMAS);
    Ok(())
}

fn verify_self(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let max_total = cfg.big_n.unwrap_or(8);
    let time = cfg.time.unwrap_or(1.0);
    let mut worst: f64 = 0.0;
    for left in 0..=max_total {
        for right in 0..=max_total {
            worst = worst.max(verify_self_duality(p, left, right, time)?);
        }
    }
    rec.at_most("max_residual", worst, SELF_DUALITY_TOL);
    Ok(())
}

fn stationary(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) {
    let total = cfg.big_n.unwrap_or(2);
    let canon = canonical_measure(p, total);
    for (k, v) in canon.distribution.probs.iter().enumerate() {
        rec.num(&format!("prob.{k}"), *v);
    }
    rec.num("partition", canon.partition);
    let pm = sector_transition_matrix(p, total);
    let m = pm.matrix();
    let pi = &canon.distribution.probs;
    let residual = (0..pi.len())
        .map(|j| ((0..pi.len()).map(|i| pi[i] * m[(i, j)]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    rec.at_most("stationarity_residual", residual, STATIONARY_TOL);
}

fn beta_moment(a: f64, k: usize) -> f64 {
    (0..k).map(|j| (a + j as f64) / (2.0 * a + j as f64)).product()
}

fn ergodic(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let kernel = ExchangeKernel::two();
    let init = wealth_for(cfg, &kernel, |_| vec![3.0, 0.0])?;
    let total = init.total();
    if total <= 0.0 {
        return Err(CliError::Domain("ergodic split needs positive total wealth".into()));
    }
    let est = empirical_moments(
        p,
        &kernel,
        &init,
        cfg.time.unwrap_or(100.0),
        4,
        |w| {
            let u = w[0] / total;
            vec![u, u * u, u.powi(3), u.powi(4)]
        },
        cfg.replicas,
        &rng(cfg),
    )?;
    for (k, e) in est.iter().enumerate() {
        let target = beta_moment(p.shape(), k + 1);
        rec.num(&format!("moment.{}.mean", k + 1), e.mean);
        rec.num(&format!("moment.{}.se", k + 1), e.std_error);
        rec.num(&format!("moment.{}.target", k + 1), target);
        rec.at_most(&format!("moment.{}.z_score", k + 1), e.z_score(target), MULTI_SIGMAS);
    }
    Ok(())
}

fn scaling(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let (x, y) = (cfg.x, cfg.y);
    let gaps = scaling_limit_check(p, x, y, cfg.big_k, cfg.replicas, &rng(cfg))?;
    rec.at_most("mean_gap", gaps.mean_gap, SCALING_GAP_TOL);
    rec.at_most("second_moment_gap", gaps.second_moment_gap, SCALING_GAP_TOL);
    rec.at_most("variance_gap", gaps.variance_gap, SCALING_GAP_TOL);
    rec.num("variance_gap_exact", scaling_variance_gap_exact(p, x, y, cfg.big_k));
    Ok(())
}

fn su11(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let max_total = cfg.big_n.unwrap_or(12);
    for kind in Ladder::ALL {
        let r = verify_commutation(p, kind, 0..=max_total);
        rec.at_most(&format!("commutation.{}", kind.name()), r, COMMUTATION_TOL);
    }
    let alg = verify_su11_relations(p, 20);
    rec.at_most("algebra.plus_minus", alg.plus_minus, ALGEBRA_TOL);
    rec.at_most("algebra.plus_zero", alg.plus_zero, ALGEBRA_TOL);
    rec.at_most("algebra.minus_zero", alg.minus_zero, ALGEBRA_TOL);
    rec.int("algebra.interior_rows", alg.interior_rows as u64);
    rec.at_most("adjointness", verify_adjointness(p, cfg.theta, 30)?, ADJOINT_TOL);
    rec.at_most("intertwining", verify_intertwining(p, 12), INTERTWINING_TOL);
    rec.at_most("regeneration", regenerate_self_duality(p, max_total.min(8)), REGENERATION_TOL);
    let cheap = cheap_duality_consistency(p, cfg.theta, max_total.min(8), cfg.time.unwrap_or(1.0))?;
    rec.at_most("cheap_duality", cheap, CHEAP_TOL);
    Ok(())
}

fn wealth_spread(cfg: &ExperimentConfig, p: &ModelParams, rec: &mut Record) -> Result<(), CliError> {
    let graph = if cfg.graph == "two" && cfg.init.is_none() { "path:5" } else { cfg.graph.as_str() };
    let kernel = parse_graph(graph)?;
    let init = wealth_for(cfg, &kernel, |n| (0..n).map(|i| if i == 0 { n as f64 } else { 0.0 }).collect())?;
    let t = cfg.time.unwrap_or(2.0);
    let exact = expected_wealth(p, &kernel, &init, t)?;
    let n = kernel.num_vertices();
    let est = empirical_moments(p, &kernel, &init, t, n, |w| w.values().to_vec(), cfg.replicas, &rng(cfg))?;
    let sigmas = if n > 1 { MULTI_SIGMAS } else { SINGLE_SIGMAS };
    for (i, (e, target)) in est.iter().zip(&exact).enumerate() {
        rec.num(&format!("vertex.{i}.mean"), e.mean);
        rec.num(&format!("vertex.{i}.se"), e.std_error);
        rec.num(&format!("vertex.{i}.expected"), *target);
        rec.at_most(&format!("vertex.{i}.z_score"), e.z_score(*target), sigmas);
    }
    Ok(())
}
