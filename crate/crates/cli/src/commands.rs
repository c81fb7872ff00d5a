//! Subcommand implementations. Each returns the full output text; sweep
//! points evaluate in parallel with rows emitted in sweep order.

use rayon::prelude::*;
use serde::Serialize;

use finitekey::acceptance::FrequencyVector;
use finitekey::authsim::{
    run_app, run_channel, AdversaryAction, AdversaryPolicy, DeliveryStatus, Direction, SendEvent,
};
use finitekey::decoy::{photon_bounds, Deviation, ObservedDecoyCounts, OutcomeCounts};
use finitekey::detector::{delta_metrics_noswap, delta_metrics_swap, DetectorSpec};
use finitekey::keyrate::{AbortReason, BudgetMode, KeyLengthReport};
use finitekey::postselect::{
    decoy_bb84_blocks, qubit_bb84_blocks, required_iid_epsilon, x_block_diagonal, PSParams,
};
use finitekey::simulate::{
    decoy_report_expected, expected_key_rate, honest_probs_decoy, honest_probs_qubit,
    qubit_report_from_fobs, expected_decoy_counts, RateMode, SYM_X_ERR, SYM_X_OK,
};

use crate::config::{ConfigError, RunConfig};
use crate::output::{csv_row, fmt_num, transcript_json_line};
use crate::{CliError, OutputFormat};

const CSV_VERSION: &str = "finitekey-csv-v1";

/// Inclusive linear grid over one dotted config key.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(text: &str) -> Result<Sweep, ConfigError> {
        let bad = |m: &str| ConfigError {
            message: format!("sweep '{text}': {m}"),
        };
        let (key, range) = text
            .split_once('=')
            .ok_or_else(|| bad("expected KEY=START:STOP:STEPS"))?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected START:STOP:STEPS"));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad("bad START"))?;
        let stop: f64 = parts[1].parse().map_err(|_| bad("bad STOP"))?;
        let steps: usize = parts[2].parse().map_err(|_| bad("bad STEPS"))?;
        if steps == 0 {
            return Err(bad("STEPS must be at least 1"));
        }
        let values = if steps == 1 {
            vec![start]
        } else {
            (0..steps)
                .map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Ok(Sweep {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// The configurations a run evaluates: the base one, or one per sweep value.
fn sweep_points(cfg: &RunConfig, sweep: &Option<Sweep>) -> Result<Vec<RunConfig>, ConfigError> {
    match sweep {
        None => Ok(vec![cfg.clone()]),
        Some(s) => s
            .values
            .iter()
            .map(|&v| {
                let mut point = cfg.clone();
                point.override_value(&s.key, v)?;
                Ok(point)
            })
            .collect(),
    }
}

fn abort_label(reason: &Option<AbortReason>) -> String {
    match reason {
        None => String::new(),
        Some(AbortReason::NoDetections) => "no_detections".to_string(),
        Some(AbortReason::PhaseErrorSaturated) => "phase_error_saturated".to_string(),
        Some(AbortReason::PenaltiesExceedEntropy) => "penalties_exceed_entropy".to_string(),
    }
}

#[derive(Serialize)]
struct KeyratePoint<'a> {
    loss_db: f64,
    n: u64,
    delta1: f64,
    delta2: f64,
    report: &'a KeyLengthReport,
}

fn run_parallel<F>(points: Vec<RunConfig>, eval: F) -> Result<Vec<String>, CliError>
where
    F: Fn(&RunConfig) -> Result<Vec<String>, CliError> + Sync,
{
    let mut indexed: Vec<(usize, Result<Vec<String>, CliError>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| (i, eval(cfg)))
        .collect();
    indexed.sort_by_key(|(i, _)| *i);
    let mut rows = Vec::new();
    for (_, r) in indexed {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn cmd_keyrate(
    cfg: &RunConfig,
    decoy: bool,
    sweep: &Option<Sweep>,
    format: OutputFormat,
) -> Result<String, CliError> {
    let points = sweep_points(cfg, sweep)?;
    let header = if decoy {
        format!(
            "# {CSV_VERSION} keyrate-decoy\nloss_db,n,delta1,delta2,b1min_K,phase_error_bound,lambda_ec,key_length,key_rate,aborted_reason"
        )
    } else {
        format!(
            "# {CSV_VERSION} keyrate-qubit\nloss_db,n,delta1,delta2,e_x_obs,phase_error_bound,lambda_ec,key_length,key_rate,aborted_reason"
        )
    };
    let rows = run_parallel(points, |point| {
        let channel = point.channel()?;
        let mode = if decoy { BudgetMode::Decoy } else { BudgetMode::Qubit };
        let params = point.protocol(mode)?;
        let n = params.n;
        let (report, rounds_cell) = if decoy {
            let report = decoy_report_expected(&channel, &params)?;
            let b1 = report
                .photon_bounds
                .as_ref()
                .map(|pb| pb.k_con.b1_min)
                .unwrap_or(0.0);
            (report, b1)
        } else {
            let dist = honest_probs_qubit(&channel, &params)?;
            let counts: Vec<u64> = dist
                .probs
                .iter()
                .map(|p| (p * n as f64).round() as u64)
                .collect();
            let fobs = FrequencyVector::new(counts);
            let n_x = (fobs.counts()[SYM_X_ERR] + fobs.counts()[SYM_X_OK]) as f64;
            let e_x = if n_x > 0.0 {
                fobs.counts()[SYM_X_ERR] as f64 / n_x
            } else {
                1.0
            };
            (qubit_report_from_fobs(&fobs, &channel, &params)?, e_x)
        };
        let deltas = finitekey::detector::delta_metrics(&channel.detector)?;
        match format {
            OutputFormat::Csv => Ok(vec![csv_row(&[
                fmt_num(channel.loss_db),
                fmt_num(n as f64),
                fmt_num(deltas.delta1),
                fmt_num(deltas.delta2),
                fmt_num(rounds_cell),
                fmt_num(report.phase_error_bound),
                fmt_num(report.lambda_ec),
                fmt_num(report.key_length as f64),
                fmt_num(report.key_length as f64 / n as f64),
                abort_label(&report.aborted),
            ])]),
            OutputFormat::Json => {
                let point = KeyratePoint {
                    loss_db: channel.loss_db,
                    n,
                    delta1: deltas.delta1,
                    delta2: deltas.delta2,
                    report: &report,
                };
                Ok(vec![serde_json::to_string(&point).expect("serialize")])
            }
        }
    })?;
    Ok(match format {
        OutputFormat::Csv => format!("{header}\n{}\n", rows.join("\n")),
        OutputFormat::Json => format!("{}\n", rows.join("\n")),
    })
}

pub fn cmd_delta(cfg: &RunConfig, sweep: &Option<Sweep>, format: OutputFormat) -> Result<String, CliError> {
    let points = sweep_points(cfg, sweep)?;
    let header = format!(
        "# {CSV_VERSION} delta\neta_det,delta_eta,dc_det,delta_dc,delta1_noswap,delta2_noswap,delta1_swap,delta2_swap"
    );
    let rows = run_parallel(points, |point| {
        let spec = point.detector()?;
        let no_swap = DetectorSpec { swap: false, ..spec };
        let with_swap = DetectorSpec { swap: true, ..spec };
        let m_ns = delta_metrics_noswap(&no_swap)?;
        let m_sw = delta_metrics_swap(&with_swap)?;
        match format {
            OutputFormat::Csv => Ok(vec![csv_row(&[
                fmt_num(spec.eta_det),
                fmt_num(spec.delta_eta),
                fmt_num(spec.dc_det),
                fmt_num(spec.delta_dc),
                fmt_num(m_ns.delta1),
                fmt_num(m_ns.delta2),
                fmt_num(m_sw.delta1),
                fmt_num(m_sw.delta2),
            ])]),
            OutputFormat::Json => Ok(vec![format!(
                "{{\"detector\":{},\"noswap\":{},\"swap\":{}}}",
                serde_json::to_string(&spec).expect("serialize"),
                serde_json::to_string(&m_ns).expect("serialize"),
                serde_json::to_string(&m_sw).expect("serialize"),
            )]),
        }
    })?;
    Ok(match format {
        OutputFormat::Csv => format!("{header}\n{}\n", rows.join("\n")),
        OutputFormat::Json => format!("{}\n", rows.join("\n")),
    })
}

pub fn cmd_decoy_bounds(cfg: &RunConfig, format: OutputFormat) -> Result<String, CliError> {
    let spec = cfg.intensities()?;
    let budget = cfg.budget(BudgetMode::Decoy)?;
    let eps_d = budget.eps_d().ok_or(finitekey::Error::Domain(
        "decoy bounds require a decoy-mode epsilon budget",
    ))?;
    let counts: ObservedDecoyCounts = if cfg.has_section("counts") {
        ObservedDecoyCounts::new(
            OutcomeCounts::new([
                cfg.get_f64("counts", "x_err1")?,
                cfg.get_f64("counts", "x_err2")?,
                cfg.get_f64("counts", "x_err3")?,
            ])?,
            OutcomeCounts::new([
                cfg.get_f64("counts", "x_con1")?,
                cfg.get_f64("counts", "x_con2")?,
                cfg.get_f64("counts", "x_con3")?,
            ])?,
            OutcomeCounts::new([
                cfg.get_f64("counts", "k_con1")?,
                cfg.get_f64("counts", "k_con2")?,
                cfg.get_f64("counts", "k_con3")?,
            ])?,
        )?
    } else {
        let channel = cfg.channel()?;
        let params = cfg.protocol(BudgetMode::Decoy)?;
        let dist = honest_probs_decoy(&channel, &params)?;
        expected_decoy_counts(&dist, params.n)?.0
    };
    let deviation = Deviation::Hoeffding(eps_d);
    let mut rows = Vec::new();
    for (name, oc) in [
        ("x_err", &counts.x_err),
        ("x_con", &counts.x_con),
        ("k_con", &counts.k_con),
    ] {
        let b = photon_bounds(oc, &spec, deviation)?;
        match format {
            OutputFormat::Csv => rows.push(csv_row(&[
                name.to_string(),
                fmt_num(oc.total()),
                fmt_num(b.b0_min),
                fmt_num(b.b1_min),
                fmt_num(b.b1_max),
            ])),
            OutputFormat::Json => rows.push(format!(
                "{{\"outcome\":\"{name}\",\"n_total\":{},\"bounds\":{}}}",
                fmt_num(oc.total()),
                serde_json::to_string(&b).expect("serialize")
            )),
        }
    }
    Ok(match format {
        OutputFormat::Csv => format!(
            "# {CSV_VERSION} decoy-bounds\noutcome,n_total,b0_min,b1_min,b1_max\n{}\n",
            rows.join("\n")
        ),
        OutputFormat::Json => format!("{}\n", rows.join("\n")),
    })
}

pub fn cmd_postselect(cfg: &RunConfig, sweep: &Option<Sweep>, format: OutputFormat) -> Result<String, CliError> {
    let points = sweep_points(cfg, sweep)?;
    let header = format!(
        "# {CSV_VERSION} postselect\nprotocol,n,x,log2_g,key_penalty_bits,eps_tilde_log2,required_iid_log2"
    );
    let rows = run_parallel(points, |point| {
        let n = point.get_u64("postselect", "n")?;
        let protocol = if point.has("postselect", "protocol") {
            point.get_str("postselect", "protocol")?.to_string()
        } else {
            "custom".to_string()
        };
        let x = match protocol.as_str() {
            "qubit" => x_block_diagonal(&qubit_bb84_blocks())? as u32,
            "decoy" => x_block_diagonal(&decoy_bb84_blocks(3, 4))? as u32,
            "custom" => point.get_u64("postselect", "x")? as u32,
            other => {
                return Err(ConfigError {
                    message: format!("'postselect.protocol' must be qubit, decoy or custom, got '{other}'"),
                }
                .into())
            }
        };
        let eps_target = point.get_eps("postselect", "eps_target")?;
        let params = PSParams::with_default_eps_tilde(n, x, eps_target)?;
        let required = required_iid_epsilon(eps_target, &params)?;
        match format {
            OutputFormat::Csv => Ok(vec![csv_row(&[
                protocol,
                fmt_num(n as f64),
                fmt_num(x as f64),
                fmt_num(params.log2_g()),
                fmt_num(params.key_penalty_bits()),
                fmt_num(params.eps_tilde().log2()),
                fmt_num(required.log2()),
            ])]),
            OutputFormat::Json => Ok(vec![format!(
                "{{\"protocol\":\"{protocol}\",\"n\":{n},\"x\":{x},\"params\":{},\"required_iid_log2\":{}}}",
                serde_json::to_string(&params).expect("serialize"),
                fmt_num(required.log2()),
            )]),
        }
    })?;
    Ok(match format {
        OutputFormat::Csv => format!("{header}\n{}\n", rows.join("\n")),
        OutputFormat::Json => format!("{}\n", rows.join("\n")),
    })
}

pub fn cmd_simulate(cfg: &RunConfig, seed: u64, format: OutputFormat) -> Result<String, CliError> {
    let channel = cfg.channel()?;
    let params = cfg.protocol(BudgetMode::Qubit)?;
    let trials = cfg.get_u64_or("simulate", "trials", 25)? as u32;
    let mode = if cfg.has("simulate", "mode") {
        cfg.get_str("simulate", "mode")?.to_string()
    } else {
        "both".to_string()
    };
    let mut rows = Vec::new();
    let mut push = |label: &str, t: f64, rate: f64, se: f64| match format {
        OutputFormat::Csv => rows.push(csv_row(&[
            label.to_string(),
            fmt_num(t),
            fmt_num(rate),
            fmt_num(se),
            fmt_num(trials as f64),
            fmt_num(seed as f64),
        ])),
        OutputFormat::Json => rows.push(format!(
            "{{\"mode\":\"{label}\",\"t\":{},\"mean_rate\":{},\"std_err\":{},\"trials\":{trials},\"seed\":{seed}}}",
            fmt_num(t),
            fmt_num(rate),
            fmt_num(se),
        )),
    };
    if mode == "variable" || mode == "both" {
        let (rate, se) = expected_key_rate(RateMode::Variable, &channel, &params, trials, seed)?;
        push("variable", 0.0, rate, se);
    }
    if mode == "fixed" || mode == "both" {
        let t_start = cfg.get_f64_or("simulate", "t_start", 1e-5)?;
        let t_stop = cfg.get_f64_or("simulate", "t_stop", 3e-2)?;
        let t_steps = cfg.get_u64_or("simulate", "t_steps", 10)? as usize;
        if !(t_start > 0.0 && t_stop >= t_start) {
            return Err(ConfigError {
                message: "simulate tolerances need 0 < t_start <= t_stop".to_string(),
            }
            .into());
        }
        for i in 0..t_steps.max(1) {
            // Log-spaced tolerance grid.
            let f = if t_steps <= 1 {
                0.0
            } else {
                i as f64 / (t_steps - 1) as f64
            };
            let t = t_start * (t_stop / t_start).powf(f);
            let (rate, se) = expected_key_rate(RateMode::Fixed(t), &channel, &params, trials, seed)?;
            push("fixed", t, rate, se);
        }
    }
    if rows.is_empty() {
        return Err(ConfigError {
            message: format!("'simulate.mode' must be variable, fixed or both, got '{mode}'"),
        }
        .into());
    }
    Ok(match format {
        OutputFormat::Csv => format!(
            "# {CSV_VERSION} simulate\nmode,t,mean_rate,std_err,trials,seed\n{}\n",
            rows.join("\n")
        ),
        OutputFormat::Json => format!("{}\n", rows.join("\n")),
    })
}

/// Summary plus optional JSONL traces for the authentication simulator.
pub struct AuthsimOutput {
    pub summary: String,
    pub traces: Option<String>,
}

pub fn cmd_authsim(cfg: &RunConfig, seed: u64, want_traces: bool) -> Result<AuthsimOutput, CliError> {
    let n_messages = cfg.get_u64_or("authsim", "n_messages", 8)? as usize;
    let runs = cfg.get_u64_or("authsim", "runs", 10_000)?;
    let key_bits = cfg.get_u64_or("authsim", "key_bits", 256)? as usize;
    let scenario = if cfg.has("authsim", "scenario") {
        cfg.get_str("authsim", "scenario")?.to_string()
    } else {
        "random".to_string()
    };
    let schedule: Vec<SendEvent> = (0..n_messages)
        .map(|i| SendEvent {
            direction: if i % 2 == 0 { Direction::AToB } else { Direction::BToA },
            payload: vec![i as u8, 0xC3],
            t_sent: 10.0 * (i as f64 + 1.0),
        })
        .collect();

    let mut traces = want_traces.then(String::new);
    let mut k_violations = 0u64;
    let mut both_abort_violations = 0u64;
    let mut core_abort_runs = 0u64;
    let mut honest_ok = true;
    let total_runs;
    match scenario.as_str() {
        "honest" => {
            total_runs = 1;
            let policy = AdversaryPolicy::honest();
            let core = run_channel(&schedule, &policy)?;
            let out = run_app(Some(key_bits), Some(key_bits), &core, &policy)?;
            honest_ok = out.l_a == key_bits && out.l_b == key_bits;
            if let Some(t) = traces.as_mut() {
                for e in core.iter().chain(out.events.iter()) {
                    t.push_str(&transcript_json_line(e));
                    t.push('\n');
                }
            }
        }
        "tamper" => {
            total_runs = 1;
            let mut actions = vec![AdversaryAction::Pass; n_messages];
            if let Some(a) = actions.get_mut(n_messages / 2) {
                *a = AdversaryAction::Tamper;
            }
            let policy = AdversaryPolicy::explicit(actions, vec![]);
            let core = run_channel(&schedule, &policy)?;
            let out = run_app(Some(key_bits), Some(key_bits), &core, &policy)?;
            core_abort_runs = 1;
            if (out.l_a, out.l_b) != (0, 0) {
                both_abort_violations += 1;
            }
            if let Some(t) = traces.as_mut() {
                for e in core.iter().chain(out.events.iter()) {
                    t.push_str(&transcript_json_line(e));
                    t.push('\n');
                }
            }
        }
        "random" => {
            total_runs = runs;
            for run in 0..runs {
                let policy = AdversaryPolicy::randomized(seed.wrapping_add(run), n_messages, 2);
                let core = run_channel(&schedule, &policy)?;
                let out = run_app(Some(key_bits), Some(key_bits), &core, &policy)?;
                let in_k = out.l_a == out.l_b || out.l_a == 0 || out.l_b == 0;
                if !in_k {
                    k_violations += 1;
                }
                let aborted = core.iter().any(|e| e.status == DeliveryStatus::AuthAbort);
                if aborted {
                    core_abort_runs += 1;
                    if (out.l_a, out.l_b) != (0, 0) {
                        both_abort_violations += 1;
                    }
                }
                if run == 0 {
                    if let Some(t) = traces.as_mut() {
                        for e in core.iter().chain(out.events.iter()) {
                            t.push_str(&transcript_json_line(e));
                            t.push('\n');
                        }
                    }
                }
            }
        }
        other => {
            return Err(ConfigError {
                message: format!("'authsim.scenario' must be honest, tamper or random, got '{other}'"),
            }
            .into())
        }
    }
    let summary = format!(
        "# {CSV_VERSION} authsim\nscenario,runs,core_abort_runs,k_violations,both_abort_violations,honest_ok\n{}\n",
        csv_row(&[
            scenario,
            fmt_num(total_runs as f64),
            fmt_num(core_abort_runs as f64),
            fmt_num(k_violations as f64),
            fmt_num(both_abort_violations as f64),
            (if honest_ok { "true" } else { "false" }).to_string(),
        ])
    );
    Ok(AuthsimOutput { summary, traces })
}
