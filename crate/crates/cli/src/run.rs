//! Mode dispatch: turns a prepared configuration into result rows.

use oneshot::bounds::{evaluate, BoundOptions};
use oneshot::codecsim::{simulate, SimulationOptions};
use oneshot::scenario::Scenario;
use oneshot::second_order::{bc_region_membership, gp_rate, p2p_rate, RateQuery, RegionOptions};

use crate::config::Prepared;
use crate::error::{CliError, Result};
use crate::report::{Row, Value};

/// Standard errors of slack allowed when checking that the simulated
/// success rate is at least the bound.
pub const DOMINANCE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Bound,
    Simulate,
    Rate,
    Region,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bound => "bound",
            Mode::Simulate => "simulate",
            Mode::Rate => "rate",
            Mode::Region => "region",
        }
    }
}

struct Rows<'a> {
    prepared: &'a Prepared,
    mode: Mode,
    seed: Option<u64>,
    rows: Vec<Row>,
}

impl Rows<'_> {
    fn push(&mut self, key: impl Into<String>, value: f64) {
        self.rows.push(Row {
            scenario: self.prepared.name.to_string(),
            mode: self.mode.as_str().to_string(),
            key: key.into(),
            value: Value(value),
            seed: self.seed,
            config_digest: self.prepared.digest.clone(),
        });
    }
}

fn unsupported(mode: Mode, p: &Prepared, reason: &'static str) -> CliError {
    CliError::ModeUnsupported {
        mode: mode.as_str(),
        scenario: p.name,
        reason,
    }
}

/// Runs `mode` on the prepared configuration. `threads` caps the simulation
/// worker count; results do not depend on it.
pub fn run(p: &Prepared, mode: Mode, threads: Option<usize>) -> Result<Vec<Row>> {
    let mut out = Rows {
        prepared: p,
        mode,
        seed: None,
        rows: Vec::new(),
    };
    match mode {
        Mode::Bound => {
            let result = evaluate(&p.scenario, &p.q, &p.gammas, &BoundOptions::default())?;
            out.push("correct_lb", result.correct_lb);
            for term in &result.terms {
                out.push(format!("term:{}", term.name), term.mean);
            }
            for g in &result.error_ub_by_gamma {
                out.push(format!("error_ub:gamma={}", Value(g.gamma)), g.error_ub);
            }
        }
        Mode::Simulate => {
            let mc = p
                .mc
                .ok_or_else(|| unsupported(mode, p, "needs an `mc` block or --trials"))?;
            out.seed = Some(mc.seed);
            let bound = evaluate(&p.scenario, &p.q, &[], &BoundOptions::default())?;
            let mut opts = SimulationOptions::new(mc.trials, mc.seed);
            opts.threads = threads;
            let report = simulate(&p.scenario, &p.q, &opts)?;
            out.push("trials", report.trials as f64);
            out.push("successes", report.successes as f64);
            out.push("erasures", report.erasures as f64);
            out.push("estimate", report.estimate);
            out.push("std_error", report.std_error);
            out.push("correct_lb", bound.correct_lb);
            let dominates = report.dominates(bound.correct_lb, DOMINANCE_SIGMAS);
            out.push("dominates", if dominates { 1.0 } else { 0.0 });
        }
        Mode::Rate | Mode::Region => {
            let rq = p
                .rate_query
                .as_ref()
                .ok_or_else(|| unsupported(mode, p, "needs a `rate_query` block"))?;
            let query = RateQuery {
                n: rq.n,
                epsilon: rq.epsilon.0,
            };
            let log_coefficient = rq.log_coefficient.map_or(1.0, |c| c.0);
            match (&p.scenario, mode) {
                (Scenario::PointToPoint(_) | Scenario::GelfandPinsker(_), Mode::Rate) => {
                    let r = if matches!(p.scenario, Scenario::PointToPoint(_)) {
                        p2p_rate(&p.q, query, log_coefficient)?
                    } else {
                        gp_rate(&p.q, query, log_coefficient)?
                    };
                    out.push("rate", r.rate);
                    out.push("dispersion_offset", r.dispersion_offset);
                    out.push("witness", r.witness);
                }
                (Scenario::Marton2(_), _) => {
                    let [r1, r2] = rq.point.ok_or_else(|| {
                        CliError::invalid("rate_query.point is required for marton2")
                    })?;
                    let mut options = RegionOptions {
                        log_coefficient,
                        ..RegionOptions::default()
                    };
                    if let Some(g) = rq.grid {
                        options.grid = g.0;
                    }
                    let m = bc_region_membership(&p.q, query, (r1.0, r2.0), options)?;
                    out.push("r1", r1.0);
                    out.push("r2", r2.0);
                    out.push("member", if m.member { 1.0 } else { 0.0 });
                    if let Some((w1, w2)) = m.witness {
                        out.push("binning_rate_1", w1);
                        out.push("binning_rate_2", w2);
                    }
                }
                _ => {
                    return Err(unsupported(
                        mode,
                        p,
                        "rate needs p2p, gelfand_pinsker or marton2; region needs marton2",
                    ))
                }
            }
        }
    }
    Ok(out.rows)
}
