//! Norm-preserving time evolution of vibronic states.
//!
//! Integration uses the Dormand-Prince 5(4) pair with local extrapolation.
//! A step of length h is accepted when the embedded error estimate is at most
//! `tol * h`, i.e. the error budget is per unit time. The final state is
//! renormalized and the removed drift is logged and returned in the stats.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::operator::{BasisDescriptor, ElectronicLabel, OperatorMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Normalized amplitude vector over |e1, e2, n, n_r⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct VibronicState {
    basis: BasisDescriptor,
    amplitudes: Vec<C64>,
}

impl VibronicState {
    pub fn basis_state(basis: BasisDescriptor, label: ElectronicLabel, n: usize, n_r: usize) -> Result<Self> {
        let idx = basis
            .index(label, n, n_r)
            .ok_or_else(|| invalid("state", format!("|{label},{n},{n_r}⟩ outside truncation")))?;
        let mut amplitudes = vec![ZERO; basis.dim()];
        amplitudes[idx] = C64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(basis: BasisDescriptor, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: amplitudes.len() });
        }
        let mut state = Self { basis, amplitudes };
        let norm = state.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("state", "amplitudes have zero or non-finite norm"));
        }
        state.normalize();
        Ok(state)
    }

    /// Product of an electronic state with CM and relative mode states.
    pub fn product(basis: BasisDescriptor, electronic: [C64; 4], cm: &[C64], rel: &[C64]) -> Result<Self> {
        if cm.len() != basis.n_cm_max {
            return Err(Error::DimensionMismatch { expected: basis.n_cm_max, found: cm.len() });
        }
        if rel.len() != basis.n_rel_max {
            return Err(Error::DimensionMismatch { expected: basis.n_rel_max, found: rel.len() });
        }
        let mut amplitudes = Vec::with_capacity(basis.dim());
        for e in electronic {
            for c in cm {
                for r in rel {
                    amplitudes.push(e * c * r);
                }
            }
        }
        Self::from_amplitudes(basis, amplitudes)
    }

    pub fn basis(&self) -> BasisDescriptor {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: ElectronicLabel, n: usize, n_r: usize) -> C64 {
        self.basis.index(label, n, n_r).map_or(ZERO, |i| self.amplitudes[i])
    }

    pub fn population(&self, label: ElectronicLabel, n: usize, n_r: usize) -> f64 {
        self.amplitude(label, n, n_r).norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm and returns the removed deviation |‖ψ‖ - 1|.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm();
        let inv = 1.0 / norm;
        self.amplitudes.iter_mut().for_each(|z| *z *= inv);
        (norm - 1.0).abs()
    }

    fn block(&self, label: ElectronicLabel) -> &[C64] {
        let m = self.basis.motional_dim();
        &self.amplitudes[label.index() * m..(label.index() + 1) * m]
    }

    pub fn electronic_population(&self, label: ElectronicLabel) -> f64 {
        self.block(label).iter().map(|z| z.norm_sqr()).sum()
    }

    /// P(label, n) summed over n_r; not renormalized.
    pub fn joint_cm_distribution(&self, label: ElectronicLabel) -> Vec<f64> {
        self.block(label).chunks(self.basis.n_rel_max).map(|row| row.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    /// P(n) summed over the electronic and relative degrees of freedom.
    pub fn cm_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.n_cm_max];
        for label in ElectronicLabel::ALL {
            for (acc, p) in out.iter_mut().zip(self.joint_cm_distribution(label)) {
                *acc += p;
            }
        }
        out
    }

    /// Projects onto one electronic configuration. Returns the probability and
    /// the renormalized post-measurement state, or `None` for a null branch.
    pub fn project(&self, label: ElectronicLabel) -> Option<(f64, VibronicState)> {
        let p = self.electronic_population(label);
        if p <= 0.0 {
            return None;
        }
        let m = self.basis.motional_dim();
        let mut amplitudes = vec![ZERO; self.dim()];
        amplitudes[label.index() * m..(label.index() + 1) * m].copy_from_slice(self.block(label));
        let mut post = Self { basis: self.basis, amplitudes };
        post.normalize();
        Some((p, post))
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &VibronicState) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Copies the state into a larger (or equal) truncation.
    pub fn embed(&self, basis: BasisDescriptor) -> Result<Self> {
        if basis.n_cm_max < self.basis.n_cm_max || basis.n_rel_max < self.basis.n_rel_max {
            return Err(invalid("basis", "embedding target is smaller than the source"));
        }
        let mut amplitudes = vec![ZERO; basis.dim()];
        for (i, &z) in self.amplitudes.iter().enumerate() {
            let (label, n, n_r) = self.basis.decode(i);
            amplitudes[basis.index(label, n, n_r).expect("inside larger basis")] = z;
        }
        Ok(Self { basis, amplitudes })
    }
}

/// |⟨a|b⟩|²
pub fn fidelity(a: &VibronicState, b: &VibronicState) -> Result<f64> {
    Ok(a.overlap(b)?.norm_sqr().min(1.0))
}

/// A Hamiltonian that can act on a state vector at time t.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;

    /// `out ← H(t) psi`
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);
}

/// Row-compressed nonzeros of a dense operator, used only for fast
/// matrix-vector products inside the integrator.
#[derive(Clone, Debug)]
struct CompressedRows {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CompressedRows {
    fn from_dense(op: &OperatorMatrix) -> Self {
        let m = op.matrix();
        let mut row_start = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for row in m.rows() {
            for (j, &z) in row.iter().enumerate() {
                if z != ZERO {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_start.push(cols.len());
        }
        Self { row_start, cols, vals }
    }

    fn accumulate(&self, coeff: C64, psi: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let range = self.row_start[i]..self.row_start[i + 1];
            let mut acc = ZERO;
            for (&j, &v) in self.cols[range.clone()].iter().zip(&self.vals[range]) {
                acc += v * psi[j];
            }
            *o += coeff * acc;
        }
    }
}

/// One term `operator · e^{i frequency t}` of a harmonic Hamiltonian.
#[derive(Clone, Debug)]
pub struct HarmonicTerm {
    pub operator: OperatorMatrix,
    pub frequency: f64,
}

/// H(t) = Σ_j M_j e^{i ω_j t}. Hermiticity at every t is the caller's
/// responsibility (terms come in adjoint pairs with opposite frequencies) and
/// is checked at construction on a few sample times.
#[derive(Clone, Debug)]
pub struct HarmonicHamiltonian {
    dim: usize,
    terms: Vec<HarmonicTerm>,
    compiled: Vec<CompressedRows>,
}

impl HarmonicHamiltonian {
    pub fn new(terms: Vec<HarmonicTerm>) -> Result<Self> {
        let dim = terms.first().map(|t| t.operator.dim()).ok_or_else(|| invalid("terms", "empty"))?;
        if let Some(bad) = terms.iter().find(|t| t.operator.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.operator.dim() });
        }
        let compiled = terms.iter().map(|t| CompressedRows::from_dense(&t.operator)).collect();
        let h = Self { dim, terms, compiled };
        for t in [0.0, 0.37, 1.9] {
            let err = h.at(t).hermiticity_error();
            if err > 1e-10 {
                return Err(invalid("terms", format!("H({t}) not Hermitian (error {err:e})")));
            }
        }
        Ok(h)
    }

    pub fn constant(op: OperatorMatrix) -> Result<Self> {
        Self::new(vec![HarmonicTerm { operator: op, frequency: 0.0 }])
    }

    pub fn terms(&self) -> &[HarmonicTerm] {
        &self.terms
    }

    /// Dense H(t).
    pub fn at(&self, t: f64) -> OperatorMatrix {
        let factor = self.terms[0].operator.factor();
        self.terms.iter().fold(OperatorMatrix::zeros(factor), |acc, term| {
            acc.add(&term.operator.scale(C64::from_polar(1.0, term.frequency * t)))
        })
    }

    /// Largest |ω_j|; bounds the fastest oscillation the integrator must follow.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency.abs()).fold(0.0, f64::max)
    }
}

impl Hamiltonian for HarmonicHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for (term, rows) in self.terms.iter().zip(&self.compiled) {
            rows.accumulate(C64::from_polar(1.0, term.frequency * t), psi, out);
        }
    }
}

impl Hamiltonian for OperatorMatrix {
    fn dim(&self) -> usize {
        OperatorMatrix::dim(self)
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        for (o, row) in out.iter_mut().zip(self.matrix().rows()) {
            *o = row.iter().zip(psi).map(|(m, p)| m * p).sum();
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Local error budget per unit time.
    pub tol: f64,
    pub initial_step: Option<f64>,
    /// Smallest allowed step, relative to max(1, |t|).
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, initial_step: None, min_step: 1e-13, max_steps: 200_000_000 }
    }
}

impl EvolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid("tol", format!("must be finite and > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvolveStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Total |‖ψ‖ - 1| removed by renormalization.
    pub norm_drift: f64,
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// B - B*, with the seventh (FSAL) stage weight last
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Adaptive integrator state for i dψ/dt = H(t) ψ.
struct Stepper<'h, H: Hamiltonian + ?Sized> {
    h: &'h H,
    opts: EvolveOptions,
    t: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    step: f64,
    stats: EvolveStats,
}

impl<'h, H: Hamiltonian + ?Sized> Stepper<'h, H> {
    fn new(h: &'h H, t0: f64, y: Vec<C64>, opts: EvolveOptions) -> Self {
        let n = y.len();
        let mut s = Self {
            h,
            opts,
            t: t0,
            y,
            k: std::array::from_fn(|_| vec![ZERO; n]),
            tmp: vec![ZERO; n],
            step: 0.0,
            stats: EvolveStats::default(),
        };
        s.rhs_into_k(0, t0);
        let rate = s.k[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        s.step = opts.initial_step.unwrap_or(0.01 / rate.max(1e-8));
        s
    }

    // k[slot] ← -i H(t) tmp  (tmp holds the stage input; slot 0 uses y)
    fn rhs_into_k(&mut self, slot: usize, t: f64) {
        let input = if slot == 0 { &self.y } else { &self.tmp };
        self.h.apply(t, input, &mut self.k[slot]);
        for z in self.k[slot].iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }

    fn stage_input(&mut self, dt: f64, coeffs: &[f64]) {
        for i in 0..self.y.len() {
            let mut acc = ZERO;
            for (j, &a) in coeffs.iter().enumerate() {
                acc += self.k[j][i] * a;
            }
            self.tmp[i] = self.y[i] + acc * dt;
        }
    }

    fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let direction = if t_target >= self.t { 1.0 } else { -1.0 };
        while (t_target - self.t) * direction > 0.0 {
            if self.stats.accepted_steps + self.stats.rejected_steps >= self.opts.max_steps {
                return Err(Error::StepLimit { t: self.t, max_steps: self.opts.max_steps });
            }
            if self.step < self.opts.min_step * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t, h: self.step });
            }
            let remaining = (t_target - self.t).abs();
            let last = self.step >= remaining;
            let h_abs = if last { remaining } else { self.step };
            let dt = direction * h_abs;

            let stages: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
            for (s, coeffs) in stages.iter().enumerate() {
                self.stage_input(dt, coeffs);
                self.rhs_into_k(s + 1, self.t + C[s + 1] * dt);
            }
            self.stage_input(dt, &B);
            self.rhs_into_k(6, self.t + dt);

            let mut err_sq = 0.0;
            for i in 0..self.y.len() {
                let mut e = ZERO;
                for (j, &w) in E.iter().enumerate() {
                    e += self.k[j][i] * w;
                }
                err_sq += (e * dt).norm_sqr();
            }
            let err = err_sq.sqrt();
            let budget = self.opts.tol * h_abs;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (budget / err).powf(0.25)).clamp(0.2, 5.0) };

            if err <= budget {
                self.t = if last { t_target } else { self.t + dt };
                std::mem::swap(&mut self.y, &mut self.tmp);
                self.k.swap(0, 6);
                self.stats.accepted_steps += 1;
                // a step shortened to land on the target says little about the next one
                if !last || factor > 1.0 {
                    self.step = h_abs * factor;
                }
            } else {
                self.stats.rejected_steps += 1;
                self.step = h_abs * factor.min(0.9);
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) -> f64 {
        let norm = self.y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let drift = (norm - 1.0).abs();
        self.y.iter_mut().for_each(|z| *z /= norm);
        self.stats.norm_drift += drift;
        if drift > 0.0 {
            log::debug!("renormalized at t = {}: |norm - 1| = {:e}", self.t, drift);
        }
        // stage derivative is linear in y
        self.k[0].iter_mut().for_each(|z| *z /= norm);
        drift
    }
}

fn check_dim<H: Hamiltonian + ?Sized>(state: &VibronicState, h: &H) -> Result<()> {
    if h.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: h.dim() });
    }
    Ok(())
}

/// Evolves `state` from t = 0 to `t_final` under `h`.
pub fn evolve<H: Hamiltonian + ?Sized>(state: &VibronicState, h: &H, t_final: f64, tol: f64) -> Result<VibronicState> {
    evolve_between(state, h, 0.0, t_final, &EvolveOptions::with_tol(tol)).map(|(s, _)| s)
}

/// Evolves from `t0` to `t1`; `t1 < t0` integrates backwards in time.
pub fn evolve_between<H: Hamiltonian + ?Sized>(
    state: &VibronicState,
    h: &H,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<(VibronicState, EvolveStats)> {
    opts.validate()?;
    check_dim(state, h)?;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(invalid("t_final", "must be finite"));
    }
    let mut stepper = Stepper::new(h, t0, state.amplitudes.clone(), *opts);
    stepper.advance_to(t1)?;
    stepper.renormalize();
    let out = VibronicState { basis: state.basis, amplitudes: stepper.y };
    Ok((out, stepper.stats))
}

/// Quantity recorded at each sample of a trajectory.
#[derive(Clone, Debug)]
pub enum Observable {
    /// |⟨label, n, n_r|ψ⟩|²
    Population { label: ElectronicLabel, n: usize, n_r: usize },
    /// Total population of one electronic configuration.
    Electronic(ElectronicLabel),
    /// |⟨reference|ψ⟩|² under a caller-chosen name.
    Fidelity { name: String, reference: VibronicState },
    /// ‖ψ‖² before renormalization at the sample point.
    Norm,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Population { label, n, n_r } => format!("P_{label}_{n}_{n_r}"),
            Observable::Electronic(label) => format!("P_{label}"),
            Observable::Fidelity { name, .. } => name.clone(),
            Observable::Norm => "norm".to_string(),
        }
    }

    fn evaluate(&self, state: &VibronicState, norm_sq: f64) -> Result<f64> {
        Ok(match self {
            Observable::Population { label, n, n_r } => state.population(*label, *n, *n_r),
            Observable::Electronic(label) => state.electronic_population(*label),
            Observable::Fidelity { reference, .. } => fidelity(reference, state)?,
            Observable::Norm => norm_sq,
        })
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Observables sampled on a time grid (units of 1/Ω).
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[sample][observable]`
    pub values: Vec<Vec<f64>>,
    pub stats: EvolveStats,
    /// Largest single renormalization applied at a sample point.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }
}

/// Evolves from t = 0 through every point of `t_grid` (non-decreasing,
/// starting at or after 0), recording `observables` at each one. The state is
/// renormalized at every sample point.
pub fn evolve_sampled<H: Hamiltonian + ?Sized>(
    state: &VibronicState,
    h: &H,
    t_grid: &[f64],
    observables: &[Observable],
    opts: &EvolveOptions,
) -> Result<(Trajectory, VibronicState)> {
    opts.validate()?;
    check_dim(state, h)?;
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(invalid("t_grid", "sample times must be finite and >= 0"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("t_grid", "sample times must be non-decreasing"));
    }
    let mut stepper = Stepper::new(h, 0.0, state.amplitudes.clone(), *opts);
    let mut values = Vec::with_capacity(t_grid.len());
    let mut max_norm_drift: f64 = 0.0;
    for &t in t_grid {
        stepper.advance_to(t)?;
        let norm_sq = stepper.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        max_norm_drift = max_norm_drift.max(stepper.renormalize());
        let snapshot = VibronicState { basis: state.basis, amplitudes: stepper.y.clone() };
        let row = observables.iter().map(|o| o.evaluate(&snapshot, norm_sq)).collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    let final_state = VibronicState { basis: state.basis, amplitudes: stepper.y };
    let trajectory = Trajectory {
        times: t_grid.to_vec(),
        names: observables.iter().map(Observable::name).collect(),
        values,
        stats: stepper.stats,
        max_norm_drift,
    };
    Ok((trajectory, final_state))
}

/// Evenly spaced grid of `samples` points on [0, t_final].
pub fn linear_grid(t_final: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![t_final],
        _ => (0..samples).map(|i| t_final * i as f64 / (samples - 1) as f64).collect(),
    }
}
