use std::f64::consts::PI;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use vibronic::fock::ModeParams;
use vibronic::hamiltonian::{build_effective_hamiltonian, build_full_hamiltonian, DriveParams};
use vibronic::propagator::{
    evolve_sampled, linear_grid, EvolveOptions, EvolveStats, Hamiltonian, Observable, VibronicState,
};
use vibronic::protocols::{
    protocol_bell_motional, protocol_entanglement_transfer, protocol_hole_burning, resolved_drive, BranchSummary,
    Correction, Model, PulseSpec,
};
use vibronic::spectroscopy::{find_magic_eta, max_transfer, scan as run_scan};

use crate::config::{Level, RunConfig};
use crate::output::{fmt_f64, fmt_opt, Sink};

fn pool(cfg: &RunConfig) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.workers()).build()?)
}

fn options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions::with_tol(cfg.tol)
}

#[derive(Serialize)]
struct ObservableSummary {
    name: String,
    max: f64,
    last: f64,
}

#[derive(Serialize)]
struct RabiRun {
    initial: Level,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    observables: Option<Vec<ObservableSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<EvolveStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Sideband flopping trajectories, one CSV per initial level.
pub fn rabi(cfg: &RunConfig, sink: &mut Sink) -> anyhow::Result<bool> {
    let r = &cfg.rabi;
    let params = ModeParams::new(r.eta, r.eta_r(), r.k, r.k_r, r.n_cm_max, r.n_rel_max)?.with_sideband(r.sideband);
    let drive = DriveParams::new(r.omega, r.delta())?.with_phi0(r.phi0);
    let pulse = PulseSpec {
        area: PI * r.window,
        mode: params,
        target: r.target,
        correction: r.correction,
        model: r.model,
        drive,
    };
    // without drive there is no coupling to set the time scale
    let (drive, coupling) = if r.omega == 0.0 { (drive.uncorrected(), 0.0) } else { resolved_drive(&pulse)? };
    let t_final = match r.duration {
        Some(t) => t,
        None if coupling > 0.0 => PI * r.window / (2.0 * coupling),
        None => bail!("field `rabi.duration` is required when the target coupling vanishes"),
    };
    let h: Box<dyn Hamiltonian> = match r.model {
        Model::Full => Box::new(build_full_hamiltonian(&params, &drive)?),
        Model::Effective => Box::new(build_effective_hamiltonian(&params, &drive)?.driven(&drive)?),
    };
    let observables: Vec<Observable> =
        r.observables.iter().map(|l| Observable::Population { label: l.label, n: l.n, n_r: l.n_r }).collect();
    let grid = linear_grid(t_final, r.samples);
    let opts = options(cfg);

    let results: Vec<_> = pool(cfg)?.install(|| {
        r.initial
            .par_iter()
            .map(|l| {
                let psi = VibronicState::basis_state(params.basis(), l.label, l.n, l.n_r)?;
                evolve_sampled(&psi, h.as_ref(), &grid, &observables, &opts).map(|(traj, _)| traj)
            })
            .collect()
    });

    let mut ok = true;
    let mut runs = Vec::new();
    for (level, result) in r.initial.iter().zip(results) {
        let file = format!("rabi_{}.csv", level.name());
        match result {
            Ok(traj) => {
                let mut header = vec!["t".to_string()];
                header.extend(traj.names.iter().cloned());
                let mut out = sink.csv(&file, &header)?;
                for (t, row) in traj.times.iter().zip(&traj.values) {
                    out.row(std::iter::once(fmt_f64(*t)).chain(row.iter().map(|v| fmt_f64(*v))))?;
                }
                out.finish()?;
                let summary = traj
                    .names
                    .iter()
                    .enumerate()
                    .map(|(j, name)| ObservableSummary {
                        name: name.clone(),
                        max: traj.values.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max),
                        last: traj.values.last().map_or(f64::NAN, |row| row[j]),
                    })
                    .collect();
                runs.push(RabiRun {
                    initial: *level,
                    file,
                    observables: Some(summary),
                    stats: Some(traj.stats),
                    error: None,
                });
            }
            Err(e) => {
                ok = false;
                log::error!("rabi run from {}: {e}", level.name());
                runs.push(RabiRun {
                    initial: *level,
                    file,
                    observables: None,
                    stats: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let summary = json!({
        "coupling": coupling,
        "duration": t_final,
        "delta_i": drive.delta_i,
        "delta_ii": drive.delta_ii,
        "runs": runs,
    });
    sink.json("rabi_summary.json", &summary)?;
    Ok(ok)
}

fn distribution_columns(prefix: &str, branches: &[BranchSummary], header: &mut Vec<String>, cols: &mut Vec<Vec<f64>>) {
    for b in branches {
        header.push(format!("{prefix}{}", b.label));
        cols.push(b.cm_distribution.clone());
        header.push(format!("{prefix}{}_joint", b.label));
        cols.push(b.joint_cm_distribution.clone());
    }
}

fn write_columns(sink: &mut Sink, name: &str, header: &[String], cols: &[Vec<f64>]) -> anyhow::Result<()> {
    let len = cols.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = sink.csv(name, header)?;
    for n in 0..len {
        let row =
            std::iter::once(n.to_string()).chain(cols.iter().map(|c| c.get(n).map_or(String::new(), |v| fmt_f64(*v))));
        out.row(row)?;
    }
    out.finish()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ProtocolName {
    Fock,
    Bell,
    Transfer,
}

pub fn protocol(cfg: &RunConfig, name: ProtocolName, sink: &mut Sink) -> anyhow::Result<bool> {
    let opts = options(cfg);
    match name {
        ProtocolName::Fock => {
            let report = protocol_hole_burning(&cfg.fock, &opts, cfg.seed).context("hole-burning protocol")?;
            sink.json("fock_report.json", &report)?;
            let mut header = vec!["n".to_string(), "poisson".to_string()];
            let mut cols = vec![report.poisson.clone()];
            for (i, stage) in report.stages.iter().enumerate() {
                distribution_columns(&format!("pulse{}_", i + 1), &stage.branches, &mut header, &mut cols);
            }
            write_columns(sink, "fock_distributions.csv", &header, &cols)?;
        }
        ProtocolName::Bell | ProtocolName::Transfer => {
            let (stem, report) = if name == ProtocolName::Bell {
                ("bell", protocol_bell_motional(&cfg.bell, &opts, cfg.seed).context("Bell protocol")?)
            } else {
                (
                    "transfer",
                    protocol_entanglement_transfer(&cfg.transfer, &opts, cfg.seed).context("transfer protocol")?,
                )
            };
            sink.json(&format!("{stem}_report.json"), &report)?;
            let mut header = vec!["n".to_string()];
            let mut cols = Vec::new();
            distribution_columns("", &report.branches, &mut header, &mut cols);
            write_columns(sink, &format!("{stem}_distributions.csv"), &header, &cols)?;
        }
    }
    Ok(true)
}

fn magic_entry(cfg: &RunConfig, n: usize, opts: &EvolveOptions) -> (Value, bool) {
    let m = &cfg.magic_eta;
    let result = match find_magic_eta(n, m.brackets.get(&n).copied()) {
        Ok(r) => r,
        Err(e) => return (json!({ "n": n, "error": e.to_string() }), false),
    };
    let mut entry = serde_json::to_value(&result).expect("plain data");
    if !m.check_dynamics {
        return (entry, true);
    }
    let mut ok = true;
    let checks: Vec<Value> = m
        .n_r
        .iter()
        .map(|&n_r| {
            let eta = result.eta_star;
            let run = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, n + 5, n_r + 2)
                .and_then(|p| DriveParams::new(1.0, m.delta_per_eta * eta).map(|d| (p, d)))
                .and_then(|(p, d)| max_transfer(&p, &d, n, n_r, Correction::None, 2.0, 400, opts));
            match run {
                Ok(v) => json!({ "n_r": n_r, "max_transfer": v }),
                Err(e) => {
                    ok = false;
                    json!({ "n_r": n_r, "error": e.to_string() })
                }
            }
        })
        .collect();
    entry["uncorrected_transfer"] = Value::Array(checks);
    (entry, ok)
}

pub fn magic_eta(cfg: &RunConfig, sink: &mut Sink) -> anyhow::Result<bool> {
    let opts = options(cfg);
    let entries: Vec<(Value, bool)> =
        pool(cfg)?.install(|| cfg.magic_eta.n.par_iter().map(|&n| magic_entry(cfg, n, &opts)).collect());
    let ok = entries.iter().all(|(_, ok)| *ok);
    let results: Vec<Value> = entries.into_iter().map(|(v, _)| v).collect();
    sink.json("magic_eta.json", &json!({ "results": results }))?;
    Ok(ok)
}

pub fn scan(cfg: &RunConfig, sink: &mut Sink) -> anyhow::Result<bool> {
    let header: Vec<String> = [
        "index",
        "eta",
        "eta_r",
        "delta",
        "n",
        "n_r",
        "shift_down",
        "shift_up",
        "splitting",
        "coupling",
        "pi_time",
        "max_transfer",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut out = sink.csv("scan.csv", &header)?;
    let mut failures = 0;
    let written = run_scan(&cfg.scan.grid, &cfg.scan.observables, cfg.workers(), &options(cfg), |row| {
        if row.error.is_some() {
            failures += 1;
        }
        let p = row.point;
        out.row([
            p.index.to_string(),
            fmt_f64(p.eta),
            fmt_f64(p.eta_r),
            fmt_f64(p.delta),
            p.n.to_string(),
            p.n_r.to_string(),
            fmt_opt(row.shift_down),
            fmt_opt(row.shift_up),
            fmt_opt(row.splitting),
            fmt_opt(row.coupling),
            fmt_opt(row.pi_time),
            fmt_opt(row.max_transfer),
            row.error.clone().unwrap_or_default(),
        ])
    })??;
    out.finish()?;
    log::info!("scan wrote {written} rows, {failures} failed");
    Ok(failures == 0)
}
