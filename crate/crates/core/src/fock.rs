//! Fock-space algebra for the two motional modes and the two-spin factor.
//!
//! Ladder operators are truncated at `n_max - 1`: raising operators map the
//! top Fock level to zero.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operator::{BasisDescriptor, Factor, OperatorMatrix};

/// Ratio ν_r / ν of the stretch to centre-of-mass frequency for two ions.
pub const STRETCH_FREQUENCY_RATIO: f64 = 1.732_050_807_568_877_2;

/// Associated Laguerre polynomial L_n^k(x) by upward three-term recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let alpha = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for i in 1..n {
        let i = i as f64;
        let next = ((2.0 * i + 1.0 + alpha - x) * cur - (i + alpha) * prev) / (i + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// m! / (m + k)! as a product of reciprocals.
pub fn factorial_ratio(m: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc / (m + j) as f64)
}

/// Diagonal weight e^{-η²/2} m!/(m+k)! L_m^k(η²).
///
/// With the CM parameter this is f_k(m); with the relative-mode parameter it
/// is g_k(m).
pub fn mode_weight(m: usize, k: usize, eta: f64) -> f64 {
    let x = eta * eta;
    (-0.5 * x).exp() * factorial_ratio(m, k) * laguerre(m, k, x)
}

pub fn mode_weight_f(m: usize, k: usize, eta: f64) -> f64 {
    mode_weight(m, k, eta)
}

pub fn mode_weight_g(m: usize, k: usize, eta_r: f64) -> f64 {
    mode_weight(m, k, eta_r)
}

/// Direction of the motional sideband addressed by the first Raman pulse.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    /// |↓↓, n, n_r⟩ ↔ |↑↑, n + k, n_r + k_r⟩
    #[default]
    Blue,
    /// |↑↑, n, n_r⟩ ↔ |↓↓, n + k, n_r + k_r⟩
    Red,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// CM Lamb-Dicke parameter.
    pub eta: f64,
    /// Relative-mode Lamb-Dicke parameter.
    pub eta_r: f64,
    /// CM sideband order.
    pub k: usize,
    /// Relative-mode sideband order.
    pub k_r: usize,
    #[serde(default)]
    pub sideband: Sideband,
    pub n_cm_max: usize,
    pub n_rel_max: usize,
}

impl ModeParams {
    pub fn new(eta: f64, eta_r: f64, k: usize, k_r: usize, n_cm_max: usize, n_rel_max: usize) -> Result<Self> {
        let params = Self { eta, eta_r, k, k_r, sideband: Sideband::Blue, n_cm_max, n_rel_max };
        params.validate()?;
        Ok(params)
    }

    /// Relative-mode Lamb-Dicke parameter of a two-ion crystal,
    /// η_r = η (ν / ν_r)^{1/2}.
    pub fn stretch_eta(eta: f64) -> f64 {
        eta / STRETCH_FREQUENCY_RATIO.sqrt()
    }

    pub fn with_sideband(mut self, sideband: Sideband) -> Self {
        self.sideband = sideband;
        self
    }

    pub fn with_orders(mut self, k: usize, k_r: usize) -> Result<Self> {
        self.k = k;
        self.k_r = k_r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_truncation(mut self, n_cm_max: usize, n_rel_max: usize) -> Result<Self> {
        self.n_cm_max = n_cm_max;
        self.n_rel_max = n_rel_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(invalid("eta", format!("must be finite and > 0, got {}", self.eta)));
        }
        if !(self.eta_r.is_finite() && self.eta_r >= 0.0) {
            return Err(invalid("eta_r", format!("must be finite and >= 0, got {}", self.eta_r)));
        }
        if self.n_cm_max < self.k + 2 {
            return Err(invalid("n_cm_max", format!("must be >= k + 2 = {}, got {}", self.k + 2, self.n_cm_max)));
        }
        if self.n_rel_max < self.k_r + 2 {
            return Err(invalid("n_rel_max", format!("must be >= k_r + 2 = {}, got {}", self.k_r + 2, self.n_rel_max)));
        }
        Ok(())
    }

    pub fn basis(&self) -> BasisDescriptor {
        BasisDescriptor::new(self.n_cm_max, self.n_rel_max)
    }
}

/// Single-mode ladder operators plus the k-th and k_r-th raising powers.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub a: OperatorMatrix,
    pub a_dag: OperatorMatrix,
    pub b: OperatorMatrix,
    pub b_dag: OperatorMatrix,
    pub a_dag_k: OperatorMatrix,
    pub b_dag_kr: OperatorMatrix,
}

/// Annihilation operator on an `n_max`-level mode: ⟨n-1|a|n⟩ = √n.
pub fn annihilation(factor: Factor) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(factor).into_matrix();
    for n in 1..factor.dim() {
        op[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(op, factor).expect("square matrix of the factor's dimension")
}

pub fn build_mode_operators(params: &ModeParams) -> Result<ModeOperators> {
    params.validate()?;
    let a = annihilation(Factor::Cm(params.n_cm_max));
    let b = annihilation(Factor::Rel(params.n_rel_max));
    let a_dag = a.adjoint();
    let b_dag = b.adjoint();
    let a_dag_k = a_dag.pow(params.k);
    let b_dag_kr = b_dag.pow(params.k_r);
    Ok(ModeOperators { a, a_dag, b, b_dag, a_dag_k, b_dag_kr })
}

fn weight_diagonal(n_max: usize, k: usize, eta: f64, factor: Factor) -> OperatorMatrix {
    let diag: Vec<C64> = (0..n_max).map(|n| C64::new(mode_weight(n, k, eta), 0.0)).collect();
    OperatorMatrix::from_diagonal(&diag, factor).expect("diagonal sized to the factor")
}

/// F_k(η²) on the CM mode.
pub fn build_f(params: &ModeParams) -> Result<OperatorMatrix> {
    params.validate()?;
    Ok(build_f_order(params, params.k))
}

/// G_{k_r}(η_r²) on the relative mode.
pub fn build_g(params: &ModeParams) -> Result<OperatorMatrix> {
    params.validate()?;
    Ok(build_g_order(params, params.k_r))
}

pub(crate) fn build_f_order(params: &ModeParams, k: usize) -> OperatorMatrix {
    weight_diagonal(params.n_cm_max, k, params.eta, Factor::Cm(params.n_cm_max))
}

pub(crate) fn build_g_order(params: &ModeParams, k_r: usize) -> OperatorMatrix {
    weight_diagonal(params.n_rel_max, k_r, params.eta_r, Factor::Rel(params.n_rel_max))
}

/// i^m as an exact complex unit.
pub fn i_pow(m: usize) -> C64 {
    match m % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// H_{k,k_r} = (iη)^k (iη_r)^{k_r} F_k ⊗ G_{k_r}, diagonal on CM ⊗ relative.
pub fn build_h_kkr(params: &ModeParams) -> Result<OperatorMatrix> {
    params.validate()?;
    Ok(h_kkr_orders(params, params.k, params.k_r))
}

pub(crate) fn h_kkr_orders(params: &ModeParams, k: usize, k_r: usize) -> OperatorMatrix {
    let magnitude = params.eta.powi(k as i32) * params.eta_r.powi(k_r as i32);
    let phase = i_pow(k + k_r);
    build_f_order(params, k).kron(&build_g_order(params, k_r)).scale(phase * magnitude)
}

/// Motional part of the sideband term: a†^k b†^{k_r} H_{k,k_r} for the blue
/// sideband, H_{k,k_r} a^k b^{k_r} for the red one.
pub fn sideband_operator(params: &ModeParams) -> Result<OperatorMatrix> {
    let ops = build_mode_operators(params)?;
    let h = h_kkr_orders(params, params.k, params.k_r);
    let raise = ops.a_dag_k.kron(&ops.b_dag_kr);
    Ok(match params.sideband {
        Sideband::Blue => raise.dot(&h),
        Sideband::Red => h.dot(&raise.adjoint()),
    })
}

/// Motional part of the carrier term, H_{0,0} = F_0 ⊗ G_0.
pub fn carrier_operator(params: &ModeParams) -> Result<OperatorMatrix> {
    params.validate()?;
    Ok(h_kkr_orders(params, 0, 0))
}

/// Single-ion flip operators S_{±j} on the two-spin factor.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub s_plus1: OperatorMatrix,
    pub s_plus2: OperatorMatrix,
    pub s_minus1: OperatorMatrix,
    pub s_minus2: OperatorMatrix,
}

impl SpinOperators {
    pub fn new() -> Self {
        // |↑⟩⟨↓| with ↓ = 0, ↑ = 1
        let mut raise = OperatorMatrix::zeros(Factor::Generic(2)).into_matrix();
        raise[[1, 0]] = C64::new(1.0, 0.0);
        let raise = OperatorMatrix::new(raise, Factor::Generic(2)).expect("2x2");
        let id = OperatorMatrix::identity(Factor::Generic(2));
        let retag = |op: OperatorMatrix| OperatorMatrix::new(op.into_matrix(), Factor::Electronic).expect("4x4");
        let s_plus1 = retag(raise.kron(&id));
        let s_plus2 = retag(id.kron(&raise));
        Self { s_minus1: s_plus1.adjoint(), s_minus2: s_plus2.adjoint(), s_plus1, s_plus2 }
    }
}

impl Default for SpinOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Collective raising operators of the sideband (S'_+) and carrier (S''_+) terms.
#[derive(Clone, Debug)]
pub struct CollectiveFlips {
    pub s_prime: OperatorMatrix,
    pub s_double_prime: OperatorMatrix,
}

pub fn build_collective_flips(phi0: f64, k_r: usize) -> CollectiveFlips {
    let spins = SpinOperators::new();
    let half = C64::from_polar(1.0, 0.5 * phi0);
    let sign = if k_r.is_multiple_of(2) { 1.0 } else { -1.0 };
    let first = spins.s_plus1.scale(half);
    let second = spins.s_plus2.scale(half.conj());
    CollectiveFlips { s_prime: first.add(&second.scale(C64::new(sign, 0.0))), s_double_prime: first.add(&second) }
}
