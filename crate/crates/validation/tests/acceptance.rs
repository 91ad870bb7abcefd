//! Acceptance suite. Prints one line per sub-check and one PASS/FAIL line per
//! criterion; exits non-zero if any criterion fails.
//!
//! Truncation doubling (criterion 5) recomputes the observables of criteria
//! 1, 2, 3 and 6 with both cutoffs doubled, so those criteria hand their
//! values forward.

use std::f64::consts::PI;
use std::process::ExitCode;

use num_complex::Complex64 as C64;
use vibronic::fock::{mode_weight, ModeParams, Sideband};
use vibronic::hamiltonian::{build_effective_hamiltonian, build_full_hamiltonian, stark_shifts, DriveParams};
use vibronic::operator::{ElectronicLabel, Factor, OperatorMatrix};
use vibronic::propagator::{
    evolve, evolve_between, evolve_sampled, fidelity, linear_grid, EvolveOptions, Observable, VibronicState,
    DEFAULT_TOL,
};
use vibronic::protocols::{
    protocol_bell_motional, protocol_entanglement_transfer, protocol_hole_burning, resolved_drive, Correction,
    HoleBurningConfig, HoleBurningReport, Model, MotionalProtocolConfig, MotionalProtocolReport, PulseSpec, Target,
};
use vibronic::spectroscopy::{find_magic_eta, max_transfer, resonance_residual};
use vibronic::Result;
use vibronic_validation::oracle::{effective_elementwise, expm, laguerre_exact, logm2};
use vibronic_validation::{Criterion, Suite};

const SEED: u64 = 7;
const DOUBLING_TOL: f64 = 1e-3;

fn opts() -> EvolveOptions {
    EvolveOptions::with_tol(DEFAULT_TOL)
}

/// Named observables of one criterion, for the truncation-doubling check.
type Observables = Vec<(String, f64)>;

// ---------------------------------------------------------------- criterion 1

struct SidebandFlop {
    resonant: f64,
    off_resonant: f64,
    /// largest |‖ψ‖² - 1| between consecutive samples
    max_norm_drift: f64,
}

/// η = 0.5, δ = 40ηΩ, drive Stark-corrected for |↓↓,0,0⟩ ↔ |↑↑,1,0⟩, two
/// π-times of full dynamics sampled densely against the fast 2π/δ wiggle.
fn sideband_flop(n_cm_max: usize, n_rel_max: usize) -> Result<SidebandFlop> {
    let eta = 0.5;
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, n_cm_max, n_rel_max)?;
    let pulse = PulseSpec::pi(params, Target { n: 0, n_r: 0 }, DriveParams::new(1.0, 40.0 * eta)?);
    let (drive, coupling) = resolved_drive(&pulse)?;
    let h = build_full_hamiltonian(&params, &drive)?;
    let grid = linear_grid(PI / coupling, 8001);
    let run = |n: usize| -> Result<(f64, f64)> {
        let psi = VibronicState::basis_state(params.basis(), ElectronicLabel::DownDown, n, 0)?;
        let obs = [Observable::Population { label: ElectronicLabel::UpUp, n: n + 1, n_r: 0 }];
        let (traj, _) = evolve_sampled(&psi, &h, &grid, &obs, &opts())?;
        Ok((traj.values.iter().map(|r| r[0]).fold(0.0, f64::max), traj.max_norm_drift))
    };
    let (resonant, drift_a) = run(0)?;
    let (off_resonant, drift_b) = run(1)?;
    Ok(SidebandFlop { resonant, off_resonant, max_norm_drift: drift_a.max(drift_b) })
}

fn criterion_1(suite: &mut Suite) -> (Option<SidebandFlop>, Observables) {
    let mut c = Criterion::new(1, "resonant sideband transfer, eta = 0.5, delta = 40 eta Omega, full dynamics");
    let mut values = Vec::new();
    let flop = match sideband_flop(8, 3) {
        Ok(f) => {
            c.at_least("max P(uu,1,0) from |dd,0,0>", f.resonant, 0.98);
            c.check(
                "off-resonant |dd,1,0> -> |uu,2,0> at most 1/5 of resonant",
                f.off_resonant <= f.resonant / 5.0,
                format!("{:.6} <= {:.6}", f.off_resonant, f.resonant / 5.0),
            );
            values.push(("resonant transfer".into(), f.resonant));
            values.push(("off-resonant transfer".into(), f.off_resonant));
            Some(f)
        }
        Err(e) => {
            c.error("full dynamics", e);
            None
        }
    };
    suite.record(c);
    (flop, values)
}

// ---------------------------------------------------------------- criterion 2

fn hole_burning(n_cm_max: Option<usize>, n_rel_max: usize) -> Result<HoleBurningReport> {
    let cfg = HoleBurningConfig { n_cm_max, n_rel_max, ..HoleBurningConfig::default() };
    protocol_hole_burning(&cfg, &opts(), Some(SEED))
}

fn hole_burning_values(r: &HoleBurningReport) -> Observables {
    let (first, second) = (&r.stages[0], &r.stages[1]);
    vec![
        ("P(uu) after first pulse".into(), first.followed_probability),
        ("P(dd, 4) after first pulse".into(), first.hole_depth),
        ("max Poisson weight change".into(), first.max_distribution_change),
        ("P(dd) after second pulse".into(), second.followed_probability),
        ("fidelity with |6,0>".into(), r.fidelity),
    ]
}

fn criterion_2(suite: &mut Suite) -> (Option<HoleBurningReport>, Observables) {
    let mut c = Criterion::new(2, "Fock-state hole burning, eta = 0.3, coherent nbar = 4");
    let report = match hole_burning(None, 2) {
        Ok(r) => r,
        Err(e) => {
            c.error("hole-burning protocol", e);
            suite.record(c);
            return (None, Vec::new());
        }
    };
    let (first, second) = (&report.stages[0], &report.stages[1]);
    c.within("P(uu branch) after the 4 -> 5 pulse", first.followed_probability, 0.25, 0.35);
    c.below("dd branch P(n = 4)", first.hole_depth, 0.02);
    c.below("dd branch, other Poisson weights, max |change|", first.max_distribution_change, 0.03);
    c.within("P(dd) after the 5 -> 6 pulse on the uu branch", second.followed_probability, 0.84, 0.90);
    c.at_least("fidelity with |6,0>", report.fidelity, 0.98);
    let values = hole_burning_values(&report);
    suite.record(c);
    (Some(report), values)
}

// ---------------------------------------------------------------- criterion 3

fn magic_transfer(n: usize, eta: f64, n_r: usize, scale: usize) -> Result<f64> {
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, scale * (n + 5), scale * (n_r + 2))?;
    let drive = DriveParams::new(1.0, 40.0 * eta)?;
    max_transfer(&params, &drive, n, n_r, Correction::None, 2.0, 4001, &opts())
}

fn criterion_3(suite: &mut Suite) -> Observables {
    let mut c = Criterion::new(3, "magic Lamb-Dicke values and uncorrected transfer at each root");
    let mut values = Vec::new();
    for (n, expected) in [(1, 0.51), (2, 0.42), (8, 0.24)] {
        let root = match find_magic_eta(n, None) {
            Ok(r) => r,
            Err(e) => {
                c.error(&format!("root N = {n}"), e);
                continue;
            }
        };
        c.within(&format!("eta* for N = {n}"), root.eta_star, expected - 0.01, expected + 0.01);
        for n_r in [0, 2] {
            match magic_transfer(n, root.eta_star, n_r, 1) {
                Ok(t) => {
                    c.at_least(&format!("uncorrected transfer N = {n}, n_r = {n_r}"), t, 0.95);
                    values.push((format!("magic transfer N = {n}, n_r = {n_r}"), t));
                }
                Err(e) => c.error(&format!("transfer N = {n}, n_r = {n_r}"), e),
            }
        }
    }
    suite.record(c);
    values
}

// ---------------------------------------------------------------- criterion 4

fn laguerre_worst_relative_error() -> f64 {
    let xs = [0.0576, 0.09, 0.1736, 0.25, 0.5, 1.0, 2.5];
    let mut worst: f64 = 0.0;
    for n in 0..=30 {
        for k in 0..=4 {
            for &x in &xs {
                let exact = laguerre_exact(n as u64, k as u64, x);
                worst = worst.max((vibronic::fock::laguerre(n, k, x) - exact).abs() / exact.abs());
            }
        }
    }
    worst
}

fn expm_deficit() -> Result<f64> {
    let eta = 0.5;
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, 5, 3)?;
    let eff = build_effective_hamiltonian(&params, &DriveParams::new(1.0, 20.0)?)?;
    let basis = params.basis();
    let amps = (0..basis.dim()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
    let psi = VibronicState::from_amplitudes(basis, amps)?;
    let t = 250.0;
    let u = OperatorMatrix::new(expm(&eff.total.matrix().mapv(|z| z * C64::new(0.0, -t))), Factor::Vibronic(basis))?;
    let exact = VibronicState::from_amplitudes(basis, u.apply(psi.amplitudes()))?;
    let out = evolve(&psi, &eff.total, t, DEFAULT_TOL)?;
    Ok(1.0 - fidelity(&exact, &out)?)
}

fn elementwise_diff() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (eta, phi0) in [(0.5, 0.0), (0.3, 0.7), (0.24, -1.3)] {
        let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, 9, 4)?;
        let drive = DriveParams::new(1.0, 40.0 * eta)?.with_phi0(phi0);
        let eff = build_effective_hamiltonian(&params, &drive)?;
        let oracle = effective_elementwise(&params, &drive);
        let diff = eff.total.matrix().iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Light shifts of |↓↓,n,0⟩ and |↑↑,n+1,0⟩ read off full dynamics at
/// δ = 200Ω: the 2×2 block U of the propagator over T = π/(8Ω₀) gives the
/// secular Hamiltonian i log(U) / T, whose diagonal holds the shifts.
fn stark_slow_phase(n: usize) -> Result<(f64, f64, f64, f64)> {
    let eta = 0.5;
    let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), 1, 0, n + 4, 3)?;
    let drive = DriveParams::new(1.0, 200.0)?;
    let table = stark_shifts(&params, &drive)?;
    let h = build_full_hamiltonian(&params, &drive)?;
    let t = PI / (8.0 * drive.omega0());
    let levels = [(ElectronicLabel::DownDown, n), (ElectronicLabel::UpUp, n + 1)];
    let mut u = [[C64::new(0.0, 0.0); 2]; 2];
    for (j, &(label, m)) in levels.iter().enumerate() {
        let psi = VibronicState::basis_state(params.basis(), label, m, 0)?;
        let (out, _) = evolve_between(&psi, &h, 0.0, t, &EvolveOptions::with_tol(1e-10))?;
        for (i, &(l, mi)) in levels.iter().enumerate() {
            u[i][j] = out.amplitude(l, mi, 0);
        }
    }
    let log = logm2(u);
    let secular = |i: usize| (C64::new(0.0, 1.0) * log[i][i] / t).re;
    Ok((secular(0), table.shift_down[n][0], secular(1), table.shift_up[n][0]))
}

fn criterion_4(suite: &mut Suite) {
    let mut c = Criterion::new(4, "oracle equivalences");
    c.below("laguerre vs exact series, n <= 30, max relative error", laguerre_worst_relative_error(), 1e-10);
    match expm_deficit() {
        Ok(d) => {
            c.below("evolve vs matrix exponential, fidelity deficit", d, 1e-8);
        }
        Err(e) => c.error("matrix exponential oracle", e),
    }
    match elementwise_diff() {
        Ok(d) => {
            c.below("k = 1, k_r = 0 elementwise Hamiltonian vs builder, max entry diff", d, 1e-12);
        }
        Err(e) => c.error("elementwise Hamiltonian", e),
    }
    for n in 0..4 {
        match stark_slow_phase(n) {
            Ok((fit_down, down, fit_up, up)) => {
                let rel_down = (fit_down - down).abs() / down.abs();
                let rel_up = (fit_up - up).abs() / up.abs();
                c.check(
                    &format!("light shifts n = {n} vs full dynamics at delta = 200"),
                    rel_down < 0.05 && rel_up < 0.05,
                    format!("down {fit_down:.6e} vs {down:.6e} ({rel_down:.2e}), up {fit_up:.6e} vs {up:.6e} ({rel_up:.2e}) < 5%"),
                );
            }
            Err(e) => c.error(&format!("light shifts n = {n}"), e),
        }
    }
    suite.record(c);
}

// ---------------------------------------------------------------- criterion 6

fn motional(n_cm_max: usize, n_rel_max: usize, model: Model) -> MotionalProtocolConfig {
    let mut cfg = MotionalProtocolConfig { n_cm_max, n_rel_max, ..MotionalProtocolConfig::default() };
    cfg.drive.model = model;
    cfg
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data")
}

fn criterion_6(suite: &mut Suite, hole: Option<&HoleBurningReport>) -> Observables {
    let mut c = Criterion::new(6, "state-engineering protocols");
    let mut values = Vec::new();
    let defaults = MotionalProtocolConfig::default();
    let (n_cm, n_rel) = (defaults.n_cm_max, defaults.n_rel_max);
    let mut sums = Vec::new();
    let mut bell_full: Option<MotionalProtocolReport> = None;

    match protocol_bell_motional(&motional(n_cm, n_rel, Model::Effective), &opts(), Some(SEED)) {
        Ok(r) => {
            c.at_least("Bell state, effective model fidelity", r.fidelity, 0.999);
            sums.push(r.branch_probability_sum);
        }
        Err(e) => c.error("Bell protocol, effective model", e),
    }
    match protocol_bell_motional(&motional(n_cm, n_rel, Model::Full), &opts(), Some(SEED)) {
        Ok(r) => {
            c.at_least("Bell state, full dynamics fidelity", r.fidelity, 0.95);
            values.push(("Bell full fidelity".into(), r.fidelity));
            sums.push(r.branch_probability_sum);
            bell_full = Some(r);
        }
        Err(e) => c.error("Bell protocol, full dynamics", e),
    }
    match protocol_entanglement_transfer(&motional(n_cm, n_rel, Model::Full), &opts(), Some(SEED)) {
        Ok(r) => {
            c.at_least("entanglement transfer, full dynamics fidelity", r.fidelity, 0.95);
            values.push(("transfer full fidelity".into(), r.fidelity));
            sums.push(r.branch_probability_sum);
        }
        Err(e) => c.error("entanglement transfer, full dynamics", e),
    }
    if let Some(h) = hole {
        sums.extend(h.stages.iter().map(|s| s.branch_probability_sum));
    }
    let worst = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    c.check(
        "branch probabilities sum to 1",
        !sums.is_empty() && worst <= 1e-9,
        format!("max |sum - 1| = {worst:.2e} <= 1e-9 over {} measurements", sums.len()),
    );

    if let Some(first) = &bell_full {
        match protocol_bell_motional(&motional(n_cm, n_rel, Model::Full), &opts(), Some(SEED)) {
            Ok(again) => {
                c.check(
                    "Bell rerun with the same seed is bit-identical",
                    json(first) == json(&again),
                    "report JSON compared",
                );
            }
            Err(e) => c.error("Bell rerun", e),
        }
    }
    if let Some(first) = hole {
        match hole_burning(None, 2) {
            Ok(again) => {
                c.check(
                    "hole-burning rerun with the same seed is bit-identical",
                    json(first) == json(&again),
                    format!("report JSON compared, sampled branches {:?}", again.sampled.unwrap_or_default()),
                );
            }
            Err(e) => c.error("hole-burning rerun", e),
        }
    }
    suite.record(c);
    values
}

// ---------------------------------------------------------------- criterion 5

fn structural_invariants(c: &mut Criterion) -> Result<()> {
    let cases = [
        (0.5, 1, 0, Sideband::Blue, 0.0),
        (0.3, 1, 0, Sideband::Red, 0.4),
        (0.4, 0, 2, Sideband::Blue, 0.0),
        (0.45, 1, 2, Sideband::Blue, -0.8),
        (0.35, 1, 1, Sideband::Blue, 0.0),
        (0.35, 2, 1, Sideband::Red, 1.1),
        (0.6, 2, 0, Sideband::Blue, 0.0),
    ];
    let (mut herm, mut off_diag, mut stray, mut odd): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (eta, k, k_r, sideband, phi0) in cases {
        let params = ModeParams::new(eta, ModeParams::stretch_eta(eta), k, k_r, 7, 6)?.with_sideband(sideband);
        let drive = DriveParams::new(1.0, 40.0 * eta)?.with_phi0(phi0);
        let full = build_full_hamiltonian(&params, &drive)?;
        for t in [0.0, 0.37, 5.0, 123.4] {
            herm = herm.max(full.at(t).hermiticity_error());
        }
        let eff = build_effective_hamiltonian(&params, &drive)?;
        for part in [&eff.h1, &eff.h2, &eff.h3, &eff.total] {
            herm = herm.max(part.hermiticity_error());
        }
        off_diag = off_diag.max(eff.h3.off_diagonal_norm());
        let basis = params.basis();
        let (lo_label, hi_label) = match sideband {
            Sideband::Blue => (ElectronicLabel::DownDown, ElectronicLabel::UpUp),
            Sideband::Red => (ElectronicLabel::UpUp, ElectronicLabel::DownDown),
        };
        let h1_max = eff.h1.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if k_r % 2 == 1 {
            odd = odd.max(h1_max);
        }
        for row in 0..basis.dim() {
            for col in 0..basis.dim() {
                let (a, b) = (basis.decode(row), basis.decode(col));
                let allowed = (a.0 == hi_label && b.0 == lo_label && a.1 == b.1 + k && a.2 == b.2 + k_r)
                    || (b.0 == hi_label && a.0 == lo_label && b.1 == a.1 + k && b.2 == a.2 + k_r);
                if !allowed {
                    stray = stray.max(eff.h1.get(row, col).norm());
                }
            }
        }
    }
    c.below("Hermiticity of H(t) and of the effective parts, max |H - H^dagger|", herm, 1e-12);
    c.below("light-shift part diagonal, off-diagonal norm", off_diag, 1e-15);
    c.below("two-ion flip couples only the sideband pairs, largest stray entry", stray, 1e-15);
    c.below("odd k_r suppresses the two-ion flip, largest entry", odd, 1e-15);

    let mut worst: f64 = 0.0;
    for eta in [0.2, 0.3, 0.42, 0.5, 0.7] {
        let eta_r = ModeParams::stretch_eta(eta);
        let params = ModeParams::new(eta, eta_r, 1, 0, 12, 6)?;
        let table = stark_shifts(&params, &DriveParams::new(1.0, 40.0 * eta)?)?;
        for n in 0..11 {
            let r = resonance_residual(eta, n);
            for n_r in 0..6 {
                let common = 2.0 * table.omega0 * mode_weight(n_r, 0, eta_r).powi(2);
                worst = worst.max((table.splitting(n, n_r) / common - r).abs() / r.abs().max(1.0));
            }
        }
    }
    c.below("splitting factorizes as 2 Omega0 g0(n_r)^2 x residual(eta, N)", worst, 1e-12);
    Ok(())
}

fn doubled_values() -> Result<Observables> {
    let mut values = Vec::new();
    let flop = sideband_flop(16, 6)?;
    values.push(("resonant transfer".into(), flop.resonant));
    values.push(("off-resonant transfer".into(), flop.off_resonant));
    let base = HoleBurningConfig::default();
    let cutoff = hole_burning(None, base.n_rel_max)?.n_cm_max;
    values.extend(hole_burning_values(&hole_burning(Some(2 * cutoff), 2 * base.n_rel_max)?));
    for n in [1, 2, 8] {
        let root = find_magic_eta(n, None)?;
        for n_r in [0, 2] {
            values.push((format!("magic transfer N = {n}, n_r = {n_r}"), magic_transfer(n, root.eta_star, n_r, 2)?));
        }
    }
    let d = MotionalProtocolConfig::default();
    let (n_cm, n_rel) = (2 * d.n_cm_max, 2 * d.n_rel_max);
    values.push((
        "Bell full fidelity".into(),
        protocol_bell_motional(&motional(n_cm, n_rel, Model::Full), &opts(), Some(SEED))?.fidelity,
    ));
    values.push((
        "transfer full fidelity".into(),
        protocol_entanglement_transfer(&motional(n_cm, n_rel, Model::Full), &opts(), Some(SEED))?.fidelity,
    ));
    Ok(values)
}

fn criterion_5(suite: &mut Suite, flop: Option<&SidebandFlop>, baseline: &Observables) {
    let mut c = Criterion::new(5, "structural invariants");
    if let Err(e) = structural_invariants(&mut c) {
        c.error("structural checks", e);
    }
    match flop {
        Some(f) => {
            c.below("norm conservation between samples of the resonant run", f.max_norm_drift, 1e-9);
        }
        None => c.error("norm conservation", "resonant run unavailable"),
    }
    match doubled_values() {
        Ok(doubled) => {
            for (name, value) in baseline {
                match doubled.iter().find(|(n, _)| n == name) {
                    Some((_, v)) => {
                        c.below(&format!("truncation doubling: {name}, |change|"), (v - value).abs(), DOUBLING_TOL);
                    }
                    None => c.error(&format!("truncation doubling: {name}"), "no doubled value"),
                }
            }
        }
        Err(e) => c.error("truncation doubling", e),
    }
    suite.record(c);
}

fn main() -> ExitCode {
    let mut suite = Suite::default();
    let (flop, mut baseline) = criterion_1(&mut suite);
    let (hole, values) = criterion_2(&mut suite);
    baseline.extend(values);
    baseline.extend(criterion_3(&mut suite));
    criterion_4(&mut suite);
    let values = criterion_6(&mut suite, hole.as_ref());
    baseline.extend(values);
    criterion_5(&mut suite, flop.as_ref(), &baseline);
    suite.finish()
}
