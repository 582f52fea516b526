//! Experiment plans, the Monte-Carlo driver, complexity tables and CSV output.

mod complexity;
mod csv;
mod plan;
mod run;
mod selftest;

pub use complexity::{complexity_report, render_complexity, ComplexityRow};
pub use csv::{emit_csv, format_significant, render_csv, CSV_HEADER};
pub use plan::{
    desk_plan, ExperimentPlan, MethodSpec, OutputSpec, SetSpec, SolverKind, DESK_EPS,
    DESK_SIGMA_E, PLAN_VERSION,
};
pub use run::{run_experiment, soi_power, ExperimentOutput, ResultRow, TrialFailure};
pub use selftest::{run_selftest, SelfTestCheck};

/// Plain-text summary table of aggregated rows.
pub fn render_summary(rows: &[ResultRow]) -> String {
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$} {:>8} {:>12} {:>10} {:>12} {:>7} {:>7}\n",
        "method", "snr_db", "sinr_db", "std_db", "power_db", "trials", "failed"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$} {:>8.2} {:>12.4} {:>10.4} {:>12.4} {:>7} {:>7}\n",
            r.method, r.snr_db, r.mean_sinr_db, r.std_sinr_db, r.mean_power_db, r.trials, r.failures
        ));
    }
    out
}
