//! Interaction-picture Hamiltonians of the two-pulse Raman drive.
//!
//! Units: ħ = 1 and all frequencies are angular frequencies in units of the
//! Rabi frequency Ω (so times are in units of 1/Ω).
//!
//! The full model keeps the two rotating terms of the drive,
//!
//! ```text
//! H(t) = Ω (S'_+ ⊗ X e^{iδ_I t} + S''_+ ⊗ H_00 e^{-iδ_II t}) + h.c.
//! ```
//!
//! where X is the sideband operator (see [`sideband_operator`]). With
//! δ_I = δ_II = δ this is the uncorrected drive; a Stark-corrected drive moves
//! the two detunings apart by the differential light shift of the target pair.
//!
//! The effective model is the second-order expansion in Ω/δ, split into the
//! two-ion sideband flip H₁, the exchange term H₂ and the diagonal light
//! shifts H₃, with Ω₀ = Ω²/δ.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{
    build_collective_flips, carrier_operator, mode_weight, sideband_operator, ModeParams, Sideband, SpinOperators,
};
use crate::operator::{ElectronicLabel, OperatorMatrix};
use crate::propagator::{HarmonicHamiltonian, HarmonicTerm};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rabi frequency Ω.
    pub omega: f64,
    /// Nominal detuning δ.
    pub delta: f64,
    /// Detuning of the sideband pulse.
    pub delta_i: f64,
    /// Detuning of the carrier pulse.
    pub delta_ii: f64,
    /// Phase from the equilibrium ion separation.
    #[serde(default)]
    pub phi0: f64,
}

impl DriveParams {
    /// Uncorrected drive, δ_I = δ_II = δ, φ₀ = 0.
    pub fn new(omega: f64, delta: f64) -> Result<Self> {
        let drive = Self { omega, delta, delta_i: delta, delta_ii: delta, phi0: 0.0 };
        drive.validate()?;
        Ok(drive)
    }

    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn with_detunings(mut self, delta_i: f64, delta_ii: f64) -> Result<Self> {
        self.delta_i = delta_i;
        self.delta_ii = delta_ii;
        self.validate()?;
        Ok(self)
    }

    pub fn uncorrected(mut self) -> Self {
        self.delta_i = self.delta;
        self.delta_ii = self.delta;
        self
    }

    /// Ω₀ = Ω²/δ
    pub fn omega0(&self) -> f64 {
        self.omega * self.omega / self.delta
    }

    /// δ/Ω, which must be large for the effective model to hold.
    pub fn detuning_ratio(&self) -> f64 {
        self.delta / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid("omega", format!("must be finite and >= 0, got {}", self.omega)));
        }
        for (field, v) in [("delta", self.delta), ("delta_i", self.delta_i), ("delta_ii", self.delta_ii)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !self.phi0.is_finite() {
            return Err(invalid("phi0", "must be finite"));
        }
        Ok(())
    }
}

/// Builds H(t) of the full two-pulse model.
pub fn build_full_hamiltonian(params: &ModeParams, drive: &DriveParams) -> Result<HarmonicHamiltonian> {
    params.validate()?;
    drive.validate()?;
    log::debug!("full Hamiltonian with delta/Omega = {}", drive.detuning_ratio());
    let flips = build_collective_flips(drive.phi0, params.k_r);
    let omega = C64::new(drive.omega, 0.0);
    let sideband = flips.s_prime.kron(&sideband_operator(params)?).scale(omega);
    let carrier = flips.s_double_prime.kron(&carrier_operator(params)?).scale(omega);
    HarmonicHamiltonian::new(vec![
        HarmonicTerm { operator: sideband.adjoint(), frequency: -drive.delta_i },
        HarmonicTerm { operator: sideband, frequency: drive.delta_i },
        HarmonicTerm { operator: carrier.adjoint(), frequency: drive.delta_ii },
        HarmonicTerm { operator: carrier, frequency: -drive.delta_ii },
    ])
}

/// H_eff = H₁ + H₂ + H₃ on the full vibronic space.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub h1: OperatorMatrix,
    pub h2: OperatorMatrix,
    pub h3: OperatorMatrix,
    pub total: OperatorMatrix,
    /// Part of H₁ that raises |↓↓⟩ to |↑↑⟩; H₁ = raising + raising†.
    h1_raising: OperatorMatrix,
    omega0: f64,
}

pub fn build_effective_hamiltonian(params: &ModeParams, drive: &DriveParams) -> Result<EffectiveHamiltonian> {
    params.validate()?;
    drive.validate()?;
    let omega0 = drive.omega0();
    let spins = SpinOperators::new();
    let x = sideband_operator(params)?;
    let y = carrier_operator(params)?;
    let x_dag = x.adjoint();
    let y_sq = y.dot(&y);

    let eps = if params.k_r.is_multiple_of(2) { 2.0 } else { 0.0 };
    let parity = if params.k_r.is_multiple_of(2) { 1.0 } else { -1.0 };

    let pair_raise = spins.s_plus1.dot(&spins.s_plus2);
    let h1_raising = pair_raise.kron(&x.commutator(&y)).scale(C64::new(omega0 * eps, 0.0));
    let h1 = h1_raising.plus_adjoint();

    let exchange = spins.s_plus1.dot(&spins.s_minus2);
    let h2 = exchange.kron(&x.commutator(&x_dag)).scale(C64::from_polar(omega0 * parity, drive.phi0)).plus_adjoint();

    // The trailing "+ h.c." of the shift term doubles its real diagonal.
    let excited = spins.s_plus1.dot(&spins.s_minus1).add(&spins.s_plus2.dot(&spins.s_minus2));
    let ground = spins.s_minus1.dot(&spins.s_plus1).add(&spins.s_minus2.dot(&spins.s_plus2));
    let h3 = excited
        .kron(&x.dot(&x_dag).sub(&y_sq))
        .sub(&ground.kron(&x_dag.dot(&x).sub(&y_sq)))
        .scale(C64::new(omega0, 0.0));

    let total = h1.add(&h2).add(&h3);
    Ok(EffectiveHamiltonian { h1, h2, h3, total, h1_raising, omega0 })
}

impl EffectiveHamiltonian {
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Effective dynamics under a possibly Stark-corrected drive: the two-ion
    /// flip picks up the beat e^{i(δ_I - δ_II)t} between the two pulses.
    pub fn driven(&self, drive: &DriveParams) -> Result<HarmonicHamiltonian> {
        drive.validate()?;
        let beat = drive.delta_i - drive.delta_ii;
        HarmonicHamiltonian::new(vec![
            HarmonicTerm { operator: self.h2.add(&self.h3), frequency: 0.0 },
            HarmonicTerm { operator: self.h1_raising.clone(), frequency: beat },
            HarmonicTerm { operator: self.h1_raising.adjoint(), frequency: -beat },
        ])
    }

    /// ⟨up|H₁|down⟩ for the target pair.
    pub fn coupling(&self, levels: &TargetLevels) -> C64 {
        self.h1.get(levels.up, levels.down)
    }

    pub fn level_shifts(&self, levels: &TargetLevels) -> LevelShifts {
        LevelShifts { down: self.h3.get(levels.down, levels.down).re, up: self.h3.get(levels.up, levels.up).re }
    }
}

/// Flat indices of the pair {|↓↓, ·⟩, |↑↑, ·⟩} connected by H₁.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TargetLevels {
    pub down: usize,
    pub up: usize,
    /// (n, n_r) of the |↓↓⟩ member.
    pub down_fock: (usize, usize),
    /// (n, n_r) of the |↑↑⟩ member.
    pub up_fock: (usize, usize),
}

/// Resolves the pair addressed by a pulse whose lower motional level is
/// (n, n_r). Blue sideband: |↓↓, n, n_r⟩ ↔ |↑↑, n+k, n_r+k_r⟩. Red sideband:
/// |↑↑, n, n_r⟩ ↔ |↓↓, n+k, n_r+k_r⟩.
///
/// Both levels must sit at least k (k_r) below the truncation edge so their
/// virtual couplings are all represented.
pub fn target_levels(params: &ModeParams, n: usize, n_r: usize) -> Result<TargetLevels> {
    params.validate()?;
    let (k, k_r) = (params.k, params.k_r);
    if n + 2 * k >= params.n_cm_max || n_r + 2 * k_r >= params.n_rel_max {
        return Err(Error::OutsideTruncation {
            n,
            n_r,
            k,
            k_r,
            n_cm_max: params.n_cm_max,
            n_rel_max: params.n_rel_max,
        });
    }
    let lower = (n, n_r);
    let upper = (n + k, n_r + k_r);
    let (down_fock, up_fock) = match params.sideband {
        Sideband::Blue => (lower, upper),
        Sideband::Red => (upper, lower),
    };
    let basis = params.basis();
    Ok(TargetLevels {
        down: basis.index(ElectronicLabel::DownDown, down_fock.0, down_fock.1).expect("checked"),
        up: basis.index(ElectronicLabel::UpUp, up_fock.0, up_fock.1).expect("checked"),
        down_fock,
        up_fock,
    })
}

/// Light shifts of the two members of a target pair (diagonal of H₃).
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct LevelShifts {
    pub down: f64,
    pub up: f64,
}

impl LevelShifts {
    /// Δω = shift_up - shift_down
    pub fn splitting(&self) -> f64 {
        self.up - self.down
    }
}

/// Closed-form light shifts for the first blue CM sideband (k = 1, k_r = 0):
///
/// ```text
/// shift_down(n, n_r) = 2Ω₀ g₀²(n_r) [f₀²(n) - η²(n+1) f₁²(n)]     of |↓↓, n,   n_r⟩
/// shift_up(n, n_r)   = 2Ω₀ g₀²(n_r) [η²(n+1) f₁²(n) - f₀²(n+1)]   of |↑↑, n+1, n_r⟩
/// ```
#[derive(Clone, Debug, Serialize)]
pub struct StarkShiftTable {
    pub omega0: f64,
    /// `[n][n_r]`, n < n_cm_max - 1
    pub shift_down: Vec<Vec<f64>>,
    /// `[n][n_r]`, shift of the upper level n + 1
    pub shift_up: Vec<Vec<f64>>,
}

impl StarkShiftTable {
    pub fn splitting(&self, n: usize, n_r: usize) -> f64 {
        self.shift_up[n][n_r] - self.shift_down[n][n_r]
    }
}

pub fn stark_shifts(params: &ModeParams, drive: &DriveParams) -> Result<StarkShiftTable> {
    params.validate()?;
    drive.validate()?;
    if params.k != 1 || params.k_r != 0 || params.sideband != Sideband::Blue {
        return Err(invalid(
            "params",
            "closed-form shifts cover the first blue CM sideband (k = 1, k_r = 0); use the H3 diagonal otherwise",
        ));
    }
    let omega0 = drive.omega0();
    let (eta, eta_r) = (params.eta, params.eta_r);
    let mut shift_down = Vec::with_capacity(params.n_cm_max - 1);
    let mut shift_up = Vec::with_capacity(params.n_cm_max - 1);
    for n in 0..params.n_cm_max - 1 {
        let f0 = mode_weight(n, 0, eta);
        let f0_next = mode_weight(n + 1, 0, eta);
        let sideband = eta * eta * (n + 1) as f64 * mode_weight(n, 1, eta).powi(2);
        let (mut down, mut up) = (Vec::new(), Vec::new());
        for n_r in 0..params.n_rel_max {
            let scale = 2.0 * omega0 * mode_weight(n_r, 0, eta_r).powi(2);
            down.push(scale * (f0 * f0 - sideband));
            up.push(scale * (sideband - f0_next * f0_next));
        }
        shift_down.push(down);
        shift_up.push(up);
    }
    Ok(StarkShiftTable { omega0, shift_down, shift_up })
}

/// Retunes the drive so the pair with lower motional level (n, n_r) is
/// resonant: δ_I = δ - Δω/2, δ_II = δ + Δω/2.
pub fn corrected_drive(params: &ModeParams, drive: &DriveParams, n: usize, n_r: usize) -> Result<DriveParams> {
    let eff = build_effective_hamiltonian(params, drive)?;
    corrected_drive_with(&eff, params, drive, n, n_r)
}

pub fn corrected_drive_with(
    eff: &EffectiveHamiltonian,
    params: &ModeParams,
    drive: &DriveParams,
    n: usize,
    n_r: usize,
) -> Result<DriveParams> {
    let levels = target_levels(params, n, n_r)?;
    let split = eff.level_shifts(&levels).splitting();
    drive.with_detunings(drive.delta - 0.5 * split, drive.delta + 0.5 * split)
}
