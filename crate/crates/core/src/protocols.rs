//! Pulse-level state engineering: selective pulses, electronic measurement
//! and the three motional-state protocols (hole burning, motional Bell state,
//! entanglement transfer).

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{ModeParams, Sideband};
use crate::hamiltonian::{
    build_effective_hamiltonian, build_full_hamiltonian, corrected_drive_with, target_levels, DriveParams,
    EffectiveHamiltonian, TargetLevels,
};
use crate::operator::{BasisDescriptor, ElectronicLabel};
use crate::propagator::{evolve_between, EvolveOptions, EvolveStats, VibronicState};

/// Couplings below this are treated as absent.
const MIN_COUPLING: f64 = 1e-14;

/// Largest Poisson weight allowed beyond the CM truncation.
pub const TRUNCATION_TAIL_LIMIT: f64 = 1e-8;

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Correction {
    /// δ_I = δ_II = δ
    None,
    /// Detunings split by the light-shift difference of the target pair.
    #[default]
    StarkCorrected,
    Manual {
        delta_i: f64,
        delta_ii: f64,
    },
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Two-pulse interaction Hamiltonian with all rotating terms.
    #[default]
    Full,
    /// Second-order effective Hamiltonian H₁ + H₂ + H₃.
    Effective,
}

/// Lower motional level (N, N_r) of the addressed pair.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub n: usize,
    pub n_r: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Rotation angle; π transfers the pair completely.
    pub area: f64,
    /// Sideband orders, sideband colour and truncation.
    pub mode: ModeParams,
    pub target: Target,
    pub correction: Correction,
    pub model: Model,
    pub drive: DriveParams,
}

impl PulseSpec {
    pub fn pi(mode: ModeParams, target: Target, drive: DriveParams) -> Self {
        Self { area: PI, mode, target, correction: Correction::StarkCorrected, model: Model::Full, drive }
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.area = area;
        self
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }
}

/// What a pulse did, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct PulseRecord {
    pub area: f64,
    pub k: usize,
    pub k_r: usize,
    pub sideband: Sideband,
    pub target: Target,
    pub model: Model,
    pub coupling: f64,
    pub duration: f64,
    pub delta_i: f64,
    pub delta_ii: f64,
    pub stats: EvolveStats,
}

fn check_coupling(params: &ModeParams, levels: &TargetLevels, c: C64) -> Result<()> {
    if params.k_r % 2 == 1 {
        return Err(Error::VanishingCoupling {
            n: levels.down_fock.0.min(levels.up_fock.0),
            n_r: levels.down_fock.1.min(levels.up_fock.1),
            reason: format!("odd relative order k_r = {} cancels the two-ion flip", params.k_r),
        });
    }
    if c.norm() < MIN_COUPLING {
        return Err(Error::VanishingCoupling {
            n: levels.down_fock.0.min(levels.up_fock.0),
            n_r: levels.down_fock.1.min(levels.up_fock.1),
            reason: format!("|g_eff| = {:e}", c.norm()),
        });
    }
    Ok(())
}

/// g_eff = |⟨up|H₁|down⟩| of the pair with lower level (n, n_r).
pub fn effective_coupling(params: &ModeParams, drive: &DriveParams, n: usize, n_r: usize) -> Result<f64> {
    let eff = build_effective_hamiltonian(params, drive)?;
    let levels = target_levels(params, n, n_r)?;
    let c = eff.coupling(&levels);
    check_coupling(params, &levels, c)?;
    Ok(c.norm())
}

/// area / (2 g_eff), in units of 1/Ω.
pub fn pulse_duration(params: &ModeParams, drive: &DriveParams, n: usize, n_r: usize, area: f64) -> Result<f64> {
    check_area(area)?;
    Ok(area / (2.0 * effective_coupling(params, drive, n, n_r)?))
}

fn check_area(area: f64) -> Result<()> {
    if !(area.is_finite() && area >= 0.0) {
        return Err(invalid("area", format!("must be finite and >= 0, got {area}")));
    }
    Ok(())
}

struct ResolvedPulse {
    eff: EffectiveHamiltonian,
    levels: TargetLevels,
    coupling: C64,
    drive: DriveParams,
    duration: f64,
}

fn resolve(pulse: &PulseSpec) -> Result<ResolvedPulse> {
    check_area(pulse.area)?;
    let eff = build_effective_hamiltonian(&pulse.mode, &pulse.drive)?;
    let levels = target_levels(&pulse.mode, pulse.target.n, pulse.target.n_r)?;
    let coupling = eff.coupling(&levels);
    check_coupling(&pulse.mode, &levels, coupling)?;
    let drive = match pulse.correction {
        Correction::None => pulse.drive.uncorrected(),
        Correction::StarkCorrected => {
            corrected_drive_with(&eff, &pulse.mode, &pulse.drive, pulse.target.n, pulse.target.n_r)?
        }
        Correction::Manual { delta_i, delta_ii } => pulse.drive.with_detunings(delta_i, delta_ii)?,
    };
    let duration = pulse.area / (2.0 * coupling.norm());
    Ok(ResolvedPulse { eff, levels, coupling, drive, duration })
}

/// Detunings the pulse is applied with, and its coupling g_eff.
pub fn resolved_drive(pulse: &PulseSpec) -> Result<(DriveParams, f64)> {
    let r = resolve(pulse)?;
    Ok((r.drive, r.coupling.norm()))
}

fn check_basis(state: &VibronicState, params: &ModeParams) -> Result<()> {
    if state.basis() != params.basis() {
        return Err(Error::DimensionMismatch { expected: params.basis().dim(), found: state.dim() });
    }
    Ok(())
}

/// Evolves `state` for the derived pulse duration, starting at t = 0.
pub fn apply_pulse(
    state: &VibronicState,
    pulse: &PulseSpec,
    opts: &EvolveOptions,
) -> Result<(VibronicState, PulseRecord)> {
    check_basis(state, &pulse.mode)?;
    let r = resolve(pulse)?;
    let (out, stats) = if pulse.area == 0.0 {
        (state.clone(), EvolveStats::default())
    } else {
        match pulse.model {
            Model::Full => {
                let h = build_full_hamiltonian(&pulse.mode, &r.drive)?;
                evolve_between(state, &h, 0.0, r.duration, opts)?
            }
            Model::Effective => {
                let h = r.eff.driven(&r.drive)?;
                evolve_between(state, &h, 0.0, r.duration, opts)?
            }
        }
    };
    log::debug!(
        "pulse area {} on {:?}: g = {:e}, T = {}, {} steps",
        pulse.area,
        pulse.target,
        r.coupling.norm(),
        r.duration,
        stats.accepted_steps
    );
    let record = PulseRecord {
        area: pulse.area,
        k: pulse.mode.k,
        k_r: pulse.mode.k_r,
        sideband: pulse.mode.sideband,
        target: pulse.target,
        model: pulse.model,
        coupling: r.coupling.norm(),
        duration: r.duration,
        delta_i: r.drive.delta_i,
        delta_ii: r.drive.delta_ii,
        stats,
    };
    Ok((out, record))
}

/// The pulse as an isolated two-level rotation: the target pair evolves
/// exactly under its 2×2 block of the effective Hamiltonian (coupling phase,
/// light shifts and the beat between the two drives), every other level only
/// picks up its own light-shift phase.
pub fn ideal_pulse(state: &VibronicState, pulse: &PulseSpec) -> Result<VibronicState> {
    check_basis(state, &pulse.mode)?;
    let r = resolve(pulse)?;
    let t = r.duration;
    let h3 = r.eff.h3.diagonal();
    let mut amps: Vec<C64> =
        state.amplitudes().iter().zip(&h3).map(|(a, s)| a * C64::from_polar(1.0, -s.re * t)).collect();

    // In the frame ψ_up = e^{iβt} φ_up the pair block is static:
    // [[s_d, c*], [c, s_u + β]] with β = δ_I - δ_II.
    let beta = r.drive.delta_i - r.drive.delta_ii;
    let s_d = h3[r.levels.down].re;
    let s_u = h3[r.levels.up].re + beta;
    let c = r.coupling;
    let mean = 0.5 * (s_d + s_u);
    let half = 0.5 * (s_d - s_u);
    let rabi = (half * half + c.norm_sqr()).sqrt();
    let (cos, sinc) = ((rabi * t).cos(), if rabi > 0.0 { (rabi * t).sin() / rabi } else { t });
    let i = C64::i();
    let phase = C64::from_polar(1.0, -mean * t);
    let u_dd = phase * (cos - i * sinc * half);
    let u_uu = phase * (cos + i * sinc * half);
    let u_ud = phase * (-i * sinc * c);
    let u_du = phase * (-i * sinc * c.conj());

    let (d0, u0) = (state.amplitudes()[r.levels.down], state.amplitudes()[r.levels.up]);
    amps[r.levels.down] = u_dd * d0 + u_du * u0;
    amps[r.levels.up] = C64::from_polar(1.0, beta * t) * (u_ud * d0 + u_uu * u0);
    VibronicState::from_amplitudes(state.basis(), amps)
}

/// One electronic measurement outcome.
#[derive(Clone, Debug)]
pub struct BranchOutcome {
    pub label: ElectronicLabel,
    pub probability: f64,
    pub post_state: VibronicState,
}

/// All outcomes with nonzero probability, in the order ↓↓, ↓↑, ↑↓, ↑↑.
pub fn measure_electronic(state: &VibronicState) -> Vec<BranchOutcome> {
    ElectronicLabel::ALL
        .iter()
        .filter_map(|&label| {
            state.project(label).map(|(probability, post_state)| BranchOutcome { label, probability, post_state })
        })
        .collect()
}

/// Draws one branch index with the outcome probabilities.
pub fn sample_branch<R: Rng + ?Sized>(outcomes: &[BranchOutcome], rng: &mut R) -> Option<usize> {
    let total: f64 = outcomes.iter().map(|o| o.probability).sum();
    if outcomes.is_empty() || total <= 0.0 {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, o) in outcomes.iter().enumerate() {
        if u < o.probability {
            return Some(i);
        }
        u -= o.probability;
    }
    Some(outcomes.len() - 1)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-outcome fluorescence record: ↑↑ scatters no light.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Fluorescence {
    pub dark: f64,
    pub bright: f64,
}

pub fn fluorescence(outcomes: &[BranchOutcome]) -> Fluorescence {
    let dark = outcomes.iter().filter(|o| o.label == ElectronicLabel::UpUp).map(|o| o.probability).sum();
    let bright = outcomes.iter().filter(|o| o.label != ElectronicLabel::UpUp).map(|o| o.probability).sum();
    Fluorescence { dark, bright }
}

/// Poisson weights e^{-n̄} n̄ⁿ/n! for n < len.
pub fn poisson(nbar: f64, len: usize) -> Vec<f64> {
    let mut p = (-nbar).exp();
    (0..len)
        .map(|n| {
            let out = p;
            p *= nbar / (n + 1) as f64;
            out
        })
        .collect()
}

/// Σ_{n ≥ n_cm_max} Poisson(n̄).
pub fn poisson_tail(nbar: f64, n_cm_max: usize) -> f64 {
    let mut p = poisson(nbar, n_cm_max + 1)[n_cm_max];
    let mut tail = 0.0;
    let mut n = n_cm_max;
    while p > 0.0 && (p > tail * 1e-17 || (n as f64) < nbar) {
        tail += p;
        n += 1;
        p *= nbar / n as f64;
    }
    tail
}

/// Smallest CM truncation whose Poisson tail is below `limit`.
pub fn coherent_cutoff(nbar: f64, limit: f64) -> usize {
    let mut n = 1;
    while poisson_tail(nbar, n) >= limit {
        n += 1;
    }
    n
}

/// Coherent CM amplitudes with real α = √n̄.
pub fn coherent_amplitudes(nbar: f64, n_cm_max: usize) -> Result<Vec<C64>> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(invalid("nbar", format!("must be finite and >= 0, got {nbar}")));
    }
    let tail = poisson_tail(nbar, n_cm_max);
    if tail >= TRUNCATION_TAIL_LIMIT {
        return Err(Error::TruncationTail { tail, limit: TRUNCATION_TAIL_LIMIT, n_cm_max });
    }
    Ok(poisson(nbar, n_cm_max).into_iter().map(|p| C64::new(p.sqrt(), 0.0)).collect())
}

fn unit(len: usize, at: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); len];
    v[at] = C64::new(1.0, 0.0);
    v
}

fn electronic(label: ElectronicLabel) -> [C64; 4] {
    let mut e = [C64::new(0.0, 0.0); 4];
    e[label.index()] = C64::new(1.0, 0.0);
    e
}

/// Drive and truncation shared by the protocol configs. δ defaults to 40ηΩ.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDrive {
    pub eta: f64,
    /// Defaults to η/3^{1/4}.
    #[serde(default)]
    pub eta_r: Option<f64>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub phi0: f64,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub correction: Correction,
}

fn one() -> f64 {
    1.0
}

impl ProtocolDrive {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            eta_r: None,
            omega: 1.0,
            delta: None,
            phi0: 0.0,
            model: Model::Full,
            correction: Correction::StarkCorrected,
        }
    }

    pub fn eta_r(&self) -> f64 {
        self.eta_r.unwrap_or_else(|| ModeParams::stretch_eta(self.eta))
    }

    pub fn drive(&self) -> Result<DriveParams> {
        let delta = self.delta.unwrap_or(40.0 * self.eta * self.omega);
        Ok(DriveParams::new(self.omega, delta)?.with_phi0(self.phi0))
    }

    fn pulse(&self, mode: ModeParams, target: Target, area: f64) -> Result<PulseSpec> {
        Ok(PulseSpec { area, mode, target, correction: self.correction, model: self.model, drive: self.drive()? })
    }

    fn mode(&self, k: usize, k_r: usize, n_cm_max: usize, n_rel_max: usize) -> Result<ModeParams> {
        ModeParams::new(self.eta, self.eta_r(), k, k_r, n_cm_max, n_rel_max)
    }
}

/// Per-branch summary: probability and CM phonon distributions.
#[derive(Clone, Debug, Serialize)]
pub struct BranchSummary {
    pub label: ElectronicLabel,
    pub probability: f64,
    /// P(n | label)
    pub cm_distribution: Vec<f64>,
    /// P(label, n)
    pub joint_cm_distribution: Vec<f64>,
}

fn summarize(state: &VibronicState, outcomes: &[BranchOutcome]) -> Vec<BranchSummary> {
    outcomes
        .iter()
        .map(|o| BranchSummary {
            label: o.label,
            probability: o.probability,
            cm_distribution: o.post_state.joint_cm_distribution(o.label),
            joint_cm_distribution: state.joint_cm_distribution(o.label),
        })
        .collect()
}

fn probability_sum(outcomes: &[BranchOutcome]) -> f64 {
    outcomes.iter().map(|o| o.probability).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoleBurningConfig {
    pub drive: ProtocolDrive,
    pub nbar: f64,
    /// Lower CM level N of each successive N → N+1 pulse. The first acts on
    /// the ↓↓ branch (blue sideband); each later one acts on the branch the
    /// previous pulse flipped into (red sideband from ↑↑, blue from ↓↓).
    pub pulses: Vec<usize>,
    /// Defaults to the smallest cutoff with Poisson tail below 1e-8.
    pub n_cm_max: Option<usize>,
    pub n_rel_max: usize,
}

impl Default for HoleBurningConfig {
    fn default() -> Self {
        Self { drive: ProtocolDrive::new(0.3), nbar: 4.0, pulses: vec![4, 5], n_cm_max: None, n_rel_max: 2 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HoleBurningStage {
    pub pulse: PulseRecord,
    pub branches: Vec<BranchSummary>,
    pub branch_probability_sum: f64,
    pub fluorescence: Fluorescence,
    /// Branch holding the flipped population, which the next pulse acts on.
    pub followed: ElectronicLabel,
    pub followed_probability: f64,
    /// |⟨followed, N+1, 0|post-measurement state⟩|²
    pub fock_fidelity: f64,
    /// P(unflipped label, N): the depth of the hole left behind.
    pub hole_depth: f64,
    /// max_{n ≠ N} |P(unflipped label, n) - P_in(n)|, against the branch's
    /// distribution before the pulse.
    pub max_distribution_change: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HoleBurningReport {
    pub n_cm_max: usize,
    pub n_rel_max: usize,
    pub poisson: Vec<f64>,
    pub stages: Vec<HoleBurningStage>,
    /// Fidelity of the final followed branch with its target Fock state.
    pub fidelity: f64,
    /// Overall probability of following every flipped branch.
    pub success_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<Vec<ElectronicLabel>>,
}

/// Coherent |α⟩ ⊗ |0_r⟩ in ↓↓, then successive selective π pulses, each
/// followed by an electronic measurement.
pub fn protocol_hole_burning(
    config: &HoleBurningConfig,
    opts: &EvolveOptions,
    seed: Option<u64>,
) -> Result<HoleBurningReport> {
    if config.pulses.is_empty() {
        return Err(invalid("pulses", "at least one pulse is required"));
    }
    let needed = config.pulses.iter().max().expect("non-empty") + 3;
    let n_cm_max = config.n_cm_max.unwrap_or_else(|| coherent_cutoff(config.nbar, TRUNCATION_TAIL_LIMIT).max(needed));
    let n_rel_max = config.n_rel_max;
    let basis = BasisDescriptor::new(n_cm_max, n_rel_max);
    let cm = coherent_amplitudes(config.nbar, n_cm_max)?;
    let mut state = VibronicState::product(basis, electronic(ElectronicLabel::DownDown), &cm, &unit(n_rel_max, 0))?;
    let mut rng = seed.map(seeded_rng);
    let mut sampled = seed.map(|_| Vec::new());

    let mut label = ElectronicLabel::DownDown;
    let mut stages = Vec::with_capacity(config.pulses.len());
    let mut success = 1.0;
    for &n in &config.pulses {
        let (sideband, flipped) = match label {
            ElectronicLabel::DownDown => (Sideband::Blue, ElectronicLabel::UpUp),
            ElectronicLabel::UpUp => (Sideband::Red, ElectronicLabel::DownDown),
            other => return Err(invalid("pulses", format!("cannot continue from branch {other}"))),
        };
        let mode = config.drive.mode(1, 0, n_cm_max, n_rel_max)?.with_sideband(sideband);
        let pulse = config.drive.pulse(mode, Target { n, n_r: 0 }, PI)?;
        let before = state.joint_cm_distribution(label);
        let (after, record) = apply_pulse(&state, &pulse, opts)?;
        let outcomes = measure_electronic(&after);
        if let (Some(rng), Some(sampled)) = (rng.as_mut(), sampled.as_mut()) {
            if let Some(i) = sample_branch(&outcomes, rng) {
                sampled.push(outcomes[i].label);
            }
        }
        let remaining = after.joint_cm_distribution(label);
        let max_distribution_change = remaining
            .iter()
            .zip(&before)
            .enumerate()
            .filter(|&(m, _)| m != n)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max);
        let branch = outcomes.iter().find(|o| o.label == flipped).ok_or_else(|| Error::VanishingCoupling {
            n,
            n_r: 0,
            reason: format!("no population reached {flipped}"),
        })?;
        let fock_fidelity = branch.post_state.population(flipped, n + 1, 0);
        success *= branch.probability;
        stages.push(HoleBurningStage {
            pulse: record,
            branches: summarize(&after, &outcomes),
            branch_probability_sum: probability_sum(&outcomes),
            fluorescence: fluorescence(&outcomes),
            followed: flipped,
            followed_probability: branch.probability,
            fock_fidelity,
            hole_depth: remaining[n],
            max_distribution_change,
        });
        state = branch.post_state.clone();
        label = flipped;
    }
    Ok(HoleBurningReport {
        n_cm_max,
        n_rel_max,
        poisson: poisson(config.nbar, n_cm_max),
        fidelity: stages.last().expect("non-empty").fock_fidelity,
        stages,
        success_probability: success,
        sampled,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionalProtocolConfig {
    pub drive: ProtocolDrive,
    pub n_cm_max: usize,
    pub n_rel_max: usize,
}

impl Default for MotionalProtocolConfig {
    fn default() -> Self {
        Self { drive: ProtocolDrive::new(0.5), n_cm_max: 5, n_rel_max: 6 }
    }
}

/// Amplitudes of the two components of a two-term target state.
#[derive(Clone, Debug, Serialize)]
pub struct TwoComponent {
    pub labels: [String; 2],
    pub populations: [f64; 2],
    /// arg(b / a) of the simulated state.
    pub relative_phase: f64,
    /// arg(b / a) of the ideal-rotation reference.
    pub ideal_relative_phase: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MotionalProtocolReport {
    pub pulses: Vec<PulseRecord>,
    /// Populations of the two addressed levels after each pulse.
    pub intermediate_populations: Vec<[f64; 2]>,
    pub components: TwoComponent,
    /// |⟨ideal|ψ⟩|², against the target with the phases the ideal pulse
    /// sequence imprints.
    pub fidelity: f64,
    /// Fidelity with the target maximized over the relative phase of its two
    /// components.
    pub fidelity_phase_insensitive: f64,
    pub branches: Vec<BranchSummary>,
    pub branch_probability_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<ElectronicLabel>,
}

fn level_name(label: ElectronicLabel, n: usize, n_r: usize) -> String {
    format!("{label}_{n}_{n_r}")
}

fn two_component_report(
    state: &VibronicState,
    ideal: &VibronicState,
    a: (ElectronicLabel, usize, usize),
    b: (ElectronicLabel, usize, usize),
) -> (TwoComponent, f64) {
    let (za, zb) = (state.amplitude(a.0, a.1, a.2), state.amplitude(b.0, b.1, b.2));
    let (ia, ib) = (ideal.amplitude(a.0, a.1, a.2), ideal.amplitude(b.0, b.1, b.2));
    let insensitive = 0.5 * (za.norm() + zb.norm()).powi(2);
    let comp = TwoComponent {
        labels: [level_name(a.0, a.1, a.2), level_name(b.0, b.1, b.2)],
        populations: [za.norm_sqr(), zb.norm_sqr()],
        relative_phase: (zb * za.conj()).arg(),
        ideal_relative_phase: (ib * ia.conj()).arg(),
    };
    (comp, insensitive)
}

/// Final state, ideal-pulse reference, pulse records and pair populations.
type SequenceOutcome = (VibronicState, VibronicState, Vec<PulseRecord>, Vec<[f64; 2]>);

fn run_sequence(initial: &VibronicState, pulses: &[PulseSpec], opts: &EvolveOptions) -> Result<SequenceOutcome> {
    let mut state = initial.clone();
    let mut ideal = initial.clone();
    let mut records = Vec::new();
    let mut populations = Vec::new();
    for pulse in pulses {
        let (next, record) = apply_pulse(&state, pulse, opts)?;
        ideal = ideal_pulse(&ideal, pulse)?;
        let levels = target_levels(&pulse.mode, pulse.target.n, pulse.target.n_r)?;
        populations.push([next.amplitudes()[levels.down].norm_sqr(), next.amplitudes()[levels.up].norm_sqr()]);
        records.push(record);
        state = next;
    }
    Ok((state, ideal, records, populations))
}

fn finish_report(
    state: &VibronicState,
    ideal: &VibronicState,
    records: Vec<PulseRecord>,
    populations: Vec<[f64; 2]>,
    a: (ElectronicLabel, usize, usize),
    b: (ElectronicLabel, usize, usize),
    seed: Option<u64>,
) -> Result<MotionalProtocolReport> {
    let (components, fidelity_phase_insensitive) = two_component_report(state, ideal, a, b);
    let outcomes = measure_electronic(state);
    let sampled = seed.and_then(|s| sample_branch(&outcomes, &mut seeded_rng(s))).map(|i| outcomes[i].label);
    Ok(MotionalProtocolReport {
        pulses: records,
        intermediate_populations: populations,
        components,
        fidelity: ideal.overlap(state)?.norm_sqr().min(1.0),
        fidelity_phase_insensitive,
        branches: summarize(state, &outcomes),
        branch_probability_sum: probability_sum(&outcomes),
        sampled,
    })
}

/// π/2 on {|↓↓,0,0⟩, |↑↑,0,2⟩} (k = 0, k_r = 2), then π on
/// {|↓↓,0,0⟩, |↑↑,1,0⟩} (k = 1, k_r = 0), aiming at
/// |↑↑⟩ ⊗ (|1,0⟩ + |0,2⟩)/√2.
pub fn protocol_bell_motional(
    config: &MotionalProtocolConfig,
    opts: &EvolveOptions,
    seed: Option<u64>,
) -> Result<MotionalProtocolReport> {
    let d = &config.drive;
    let (n_cm, n_rel) = (config.n_cm_max, config.n_rel_max);
    let origin = Target { n: 0, n_r: 0 };
    let pulses =
        [d.pulse(d.mode(0, 2, n_cm, n_rel)?, origin, FRAC_PI_2)?, d.pulse(d.mode(1, 0, n_cm, n_rel)?, origin, PI)?];
    let initial = VibronicState::basis_state(BasisDescriptor::new(n_cm, n_rel), ElectronicLabel::DownDown, 0, 0)?;
    let (state, ideal, records, populations) = run_sequence(&initial, &pulses, opts)?;
    finish_report(
        &state,
        &ideal,
        records,
        populations,
        (ElectronicLabel::UpUp, 1, 0),
        (ElectronicLabel::UpUp, 0, 2),
        seed,
    )
}

/// (|↓↓⟩ + |↑↑⟩)/√2 ⊗ |0,0⟩, then π on {|↓↓,0,0⟩, |↑↑,1,2⟩}, aiming at
/// |↑↑⟩ ⊗ (|0,0⟩ + |1,2⟩)/√2.
pub fn protocol_entanglement_transfer(
    config: &MotionalProtocolConfig,
    opts: &EvolveOptions,
    seed: Option<u64>,
) -> Result<MotionalProtocolReport> {
    let d = &config.drive;
    let (n_cm, n_rel) = (config.n_cm_max, config.n_rel_max);
    let pulses = [d.pulse(d.mode(1, 2, n_cm, n_rel)?, Target { n: 0, n_r: 0 }, PI)?];
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let zero = C64::new(0.0, 0.0);
    let initial =
        VibronicState::product(BasisDescriptor::new(n_cm, n_rel), [h, zero, zero, h], &unit(n_cm, 0), &unit(n_rel, 0))?;
    let (state, ideal, records, populations) = run_sequence(&initial, &pulses, opts)?;
    finish_report(
        &state,
        &ideal,
        records,
        populations,
        (ElectronicLabel::UpUp, 0, 0),
        (ElectronicLabel::UpUp, 1, 2),
        seed,
    )
}
