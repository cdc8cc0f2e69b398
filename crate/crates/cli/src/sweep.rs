//! Ramp-duration sweeps: shooting ranking plus one closed-loop run per ramp.

use std::fmt::Write as _;
use std::thread;

use onco_core::model::find_equilibria;
use onco_core::planner::{
    evaluate_candidate, rank_candidates, Rejection, ShootingCandidate, ShootingCriteria,
};
use onco_core::scenario::{run_scenario, Goal, ScenarioConfig, Summary};
use onco_core::{PatientState, Result};

use crate::config::config_hash;

pub const RANKING_HEADER: &str = "rank,ramp_time,status,total_u_ol,total_v_ol,peak_u_ol,peak_v_ol,\
run_total_u,run_total_v,run_distance_benign,run_basin,config_hash";

/// Outcome for one ramp duration.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub ramp_time: f64,
    pub shooting: std::result::Result<ShootingCandidate, Rejection>,
    pub run: Summary,
    pub run_aborted: bool,
    pub config_hash: String,
}

fn goal_state(cfg: &ScenarioConfig) -> Result<PatientState> {
    Ok(match cfg.reference.goal {
        Goal::Benign => find_equilibria(&cfg.params)?.benign.state,
        Goal::State(s) => s,
    })
}

fn evaluate(
    base: &ScenarioConfig,
    ramp: f64,
    criteria: &ShootingCriteria,
    goal: PatientState,
) -> Result<SweepEntry> {
    let mut cfg = base.clone();
    cfg.reference.ramp_time = ramp;
    cfg.validate()?;
    let mut p = cfg.params;
    p.eta_x_nom = cfg.eta_x_assumed;
    p.eta_y_nom = cfg.eta_y_assumed;
    let shooting = evaluate_candidate(cfg.initial, goal, ramp, criteria, &p, cfg.dt, cfg.duration)?;
    let rec = run_scenario(&cfg)?;
    Ok(SweepEntry {
        ramp_time: ramp,
        shooting,
        run: rec.summary,
        run_aborted: rec.abort.is_some(),
        config_hash: config_hash(&cfg),
    })
}

/// Evaluates every ramp in parallel. Admissible entries come first in
/// shooting order, then the rejected ones in input order.
pub fn sweep(
    base: &ScenarioConfig,
    ramps: &[f64],
    criteria: &ShootingCriteria,
) -> Result<Vec<SweepEntry>> {
    if ramps.is_empty() {
        return Err(onco_core::Error::InvalidArgument("no ramp candidates"));
    }
    criteria.validate()?;
    let goal = goal_state(base)?;
    let results: Vec<Result<SweepEntry>> = thread::scope(|s| {
        let handles: Vec<_> = ramps
            .iter()
            .map(|&r| s.spawn(move || evaluate(base, r, criteria, goal)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let (mut ok, rejected): (Vec<_>, Vec<_>) =
        entries.into_iter().partition(|e| e.shooting.is_ok());
    let mut ranked: Vec<ShootingCandidate> =
        ok.iter().map(|e| e.shooting.clone().unwrap()).collect();
    rank_candidates(&mut ranked);
    ok.sort_by_key(|e| {
        ranked
            .iter()
            .position(|c| c.ramp_time.to_bits() == e.ramp_time.to_bits())
            .unwrap_or(usize::MAX)
    });
    ok.extend(rejected);
    Ok(ok)
}

pub fn ranking_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RANKING_HEADER}");
    let mut rank = 0;
    for e in entries {
        let planner = match &e.shooting {
            Ok(c) => {
                rank += 1;
                let peak = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
                format!(
                    "{rank},{},admissible,{},{},{},{}",
                    e.ramp_time,
                    c.total_u,
                    c.total_v,
                    peak(&c.schedule.u_ol),
                    peak(&c.schedule.v_ol)
                )
            }
            Err(why) => format!("-,{},rejected: {},,,,", e.ramp_time, why.label()),
        };
        let basin = if e.run_aborted {
            "aborted"
        } else {
            e.run.basin.label()
        };
        let _ = writeln!(
            out,
            "{planner},{},{},{},{basin},{}",
            e.run.total_u, e.run.total_v, e.run.distance_benign, e.config_hash
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use onco_core::scenario::preset;

    #[test]
    fn slower_ramps_rank_first_and_budgets_reject() {
        let base = preset("fast").unwrap();
        let entries = sweep(&base, &[5.0, 20.0, 10.0], &ShootingCriteria::default()).unwrap();
        let order: Vec<f64> = entries.iter().map(|e| e.ramp_time).collect();
        assert_eq!(order, vec![20.0, 10.0, 5.0]);

        let tight = ShootingCriteria {
            max_total_u: Some(1.0),
            ..Default::default()
        };
        let entries = sweep(&base, &[5.0, 20.0], &tight).unwrap();
        assert_eq!(entries[0].ramp_time, 20.0);
        assert_eq!(
            entries[1].shooting.as_ref().unwrap_err(),
            &Rejection::TotalU
        );
        let table = ranking_csv(&entries);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(2).unwrap().starts_with("-,5,rejected"));
    }

    #[test]
    fn empty_ramp_list_is_an_error() {
        assert!(sweep(&preset("fast").unwrap(), &[], &ShootingCriteria::default()).is_err());
    }
}
