//! Monte-Carlo SINR-versus-SNR driver.

use rayon::prelude::*;
use serde::Serialize;

use crate::array::{perturbed_asv, sample_covariance, sample_snapshots, substream, synth_covariance};
use crate::error::{Error, Result};
use crate::harness::plan::{ExperimentPlan, MethodSpec, SolverKind};
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::solver::{cg_rdrcb_fast, mvdr, mvdr_reduced, rcb_elementspace, rdrcb_generic, sinr};
use crate::uncertainty::UncertaintySet;

/// Aggregate over the successful trials of one (method, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub snr_db: f64,
    pub mean_sinr_db: f64,
    pub std_sinr_db: f64,
    pub mean_power_db: f64,
    /// Successful trials.
    pub trials: usize,
    pub mean_flops: f64,
    /// Trials excluded because the solve failed.
    pub failures: usize,
}

/// One failed trial, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub method: String,
    pub snr_db: f64,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    sinr_db: f64,
    power_db: f64,
    flops: u64,
}

/// `sigma_0^2` for a given SNR with the sensor noise power as reference.
pub fn soi_power(snr_db: f64, sensor_noise_power: f64) -> f64 {
    sensor_noise_power * 10f64.powf(snr_db / 10.0)
}

fn solve_method(
    method: &MethodSpec,
    set: Option<&UncertaintySet>,
    r_hat: &HermitianMatrix,
    nominal: &ComplexVector,
) -> Result<(ComplexVector, f64, u64)> {
    let reducer = match (method.drt, method.n) {
        (Some(drt), Some(n)) => Some(drt.build(r_hat, nominal, n)?),
        _ => None,
    };
    let flops = reducer.as_ref().map_or(0, |b| b.flops);
    let sol = match (method.solver, &reducer, set) {
        (SolverKind::Mvdr, None, _) => mvdr(r_hat, nominal)?,
        (SolverKind::Mvdr, Some(b), _) => mvdr_reduced(r_hat, &b.reducer, nominal)?,
        (SolverKind::Robust, None, Some(s)) => rcb_elementspace(r_hat, s)?,
        (SolverKind::Robust, Some(b), Some(s)) => rdrcb_generic(r_hat, &b.reducer, s)?,
        (SolverKind::RobustFast, Some(b), Some(s)) => cg_rdrcb_fast(r_hat, &b.reducer, s)?,
        _ => return Err(Error::Config(format!("method '{}' is not runnable", method.label))),
    };
    Ok((sol.weights_es, sol.power, flops))
}

/// Runs every (SNR, trial) cell. Each cell draws its data from its own
/// substream, and all methods see the same draw, so results do not depend on
/// scheduling or thread count.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let scenario = &plan.scenario;
    let geometry = &scenario.geometry;
    let nominal = scenario.soi.nominal_asv(geometry);
    let sets: Vec<Option<UncertaintySet>> = plan
        .methods
        .iter()
        .map(|m| m.set.as_ref().map(|s| s.build(&nominal)).transpose())
        .collect::<Result<_>>()?;

    let trials = plan.trials;
    let cells: Vec<(usize, usize)> = (0..plan.snr_grid_db.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();

    let outcomes: Vec<Vec<std::result::Result<TrialOutcome, String>>> = cells
        .par_iter()
        .map(|&(s, t)| {
            let snr = plan.snr_grid_db[s];
            let mut rng = substream(scenario.seed, (s * trials + t) as u64);
            let a0 = perturbed_asv(&scenario.soi, geometry, &mut rng);
            let interferers: Vec<ComplexVector> = scenario
                .interferers
                .iter()
                .map(|i| perturbed_asv(i, geometry, &mut rng))
                .collect();
            let mut cfg = scenario.clone();
            cfg.soi.power = soi_power(snr, scenario.sensor_noise_power);
            let p0 = cfg.soi.power;
            let data = synth_covariance(&cfg, &a0, &interferers).and_then(|(r, q)| {
                let r_hat = if plan.use_exact_covariance {
                    r.add_identity(cfg.diagonal_loading)
                } else {
                    let x = sample_snapshots(&r, cfg.snapshots, &mut rng)?;
                    sample_covariance(&x, cfg.diagonal_loading)
                };
                Ok((r_hat, q))
            });
            plan.methods
                .iter()
                .zip(&sets)
                .map(|(method, set)| {
                    let (r_hat, q) = data.as_ref().map_err(|e| e.to_string())?;
                    let (w, power, flops) =
                        solve_method(method, set.as_ref(), r_hat, &nominal).map_err(|e| e.to_string())?;
                    let sinr_db = sinr(&w, &a0, p0, q).map_err(|e| e.to_string())?;
                    if !sinr_db.is_finite() || !(power > 0.0) {
                        return Err(format!("non-finite result (sinr {sinr_db}, power {power})"));
                    }
                    Ok(TrialOutcome {
                        sinr_db,
                        power_db: 10.0 * power.log10(),
                        flops,
                    })
                })
                .collect()
        })
        .collect();

    let mut out = ExperimentOutput::default();
    for (mi, method) in plan.methods.iter().enumerate() {
        for (s, &snr) in plan.snr_grid_db.iter().enumerate() {
            let mut ok = Vec::with_capacity(trials);
            for t in 0..trials {
                match &outcomes[s * trials + t][mi] {
                    Ok(o) => ok.push(*o),
                    Err(reason) => out.failures.push(TrialFailure {
                        method: method.label.clone(),
                        snr_db: snr,
                        trial: t,
                        reason: reason.clone(),
                    }),
                }
            }
            out.rows.push(aggregate(&method.label, snr, &ok, trials - ok.len()));
        }
    }
    Ok(out)
}

fn aggregate(label: &str, snr_db: f64, ok: &[TrialOutcome], failures: usize) -> ResultRow {
    let n = ok.len();
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            ok.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let mean_sinr = mean(&|o| o.sinr_db);
    let std_sinr = if n > 1 {
        let ss: f64 = ok.iter().map(|o| (o.sinr_db - mean_sinr).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else if n == 1 {
        0.0
    } else {
        f64::NAN
    };
    ResultRow {
        method: label.to_string(),
        snr_db,
        mean_sinr_db: mean_sinr,
        std_sinr_db: std_sinr,
        mean_power_db: mean(&|o| o.power_db),
        trials: n,
        mean_flops: mean(&|o| o.flops as f64),
        failures,
    }
}
