//! Resonance analysis: magic Lamb-Dicke values and parameter scans.

use std::f64::consts::PI;

use rayon::prelude::*;
use roots::{find_root_brent, SearchError, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{mode_weight, ModeParams, Sideband};
use crate::hamiltonian::{build_effective_hamiltonian, build_full_hamiltonian, target_levels, DriveParams};
use crate::operator::ElectronicLabel;
use crate::propagator::{evolve_sampled, linear_grid, EvolveOptions, Observable, VibronicState};
use crate::protocols::{resolved_drive, Correction, Model, PulseSpec, Target};

/// Pre-scan step used to bracket magic values.
pub const PRESCAN_STEP: f64 = 0.01;
/// Upper end of the default pre-scan.
pub const PRESCAN_MAX: f64 = 2.0;
const RESIDUAL_TOL: f64 = 1e-10;

/// Light-shift difference of |↑↑, n+1⟩ and |↓↓, n⟩ for the first blue CM
/// sideband, with the common factor 2Ω₀g₀²(n_r) removed:
/// 2η²(n+1)f₁²(n) - f₀²(n) - f₀²(n+1).
pub fn resonance_residual(eta: f64, n: usize) -> f64 {
    let f0 = mode_weight(n, 0, eta);
    let f0_next = mode_weight(n + 1, 0, eta);
    let f1 = mode_weight(n, 1, eta);
    2.0 * eta * eta * (n + 1) as f64 * f1 * f1 - f0 * f0 - f0_next * f0_next
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagicEtaResult {
    pub n: usize,
    pub eta_star: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    /// More than one sign change was seen inside the bracket.
    pub non_monotonic: bool,
}

/// First sign change of the residual on a 0.01 grid starting at 0.01.
pub fn default_bracket(n: usize) -> Result<(f64, f64)> {
    let per_unit = (1.0 / PRESCAN_STEP).round();
    let steps = (PRESCAN_MAX * per_unit).round() as usize;
    let mut lo = PRESCAN_STEP;
    let mut f_lo = resonance_residual(lo, n);
    for i in 2..=steps {
        // i / 100 rather than i * 0.01 keeps the bracket ends at their decimal values
        let hi = i as f64 / per_unit;
        let f_hi = resonance_residual(hi, n);
        if f_lo * f_hi <= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoSignChange {
        lo: PRESCAN_STEP,
        hi: PRESCAN_MAX,
        f_lo: resonance_residual(PRESCAN_STEP, n),
        f_hi: resonance_residual(PRESCAN_MAX, n),
    })
}

fn count_sign_changes(n: usize, (lo, hi): (f64, f64)) -> usize {
    let points = 200;
    let values: Vec<f64> =
        (0..=points).map(|i| resonance_residual(lo + (hi - lo) * i as f64 / points as f64, n)).collect();
    values.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

/// Root of the residual for level n inside `bracket` (or the default one).
pub fn find_magic_eta(n: usize, bracket: Option<(f64, f64)>) -> Result<MagicEtaResult> {
    let bracket = match bracket {
        Some(b) => b,
        None => default_bracket(n)?,
    };
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(invalid("bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let (f_lo, f_hi) = (resonance_residual(lo, n), resonance_residual(hi, n));
    if f_lo * f_hi > 0.0 {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let mut conv = SimpleConvergency { eps: 1e-15, max_iter: 200 };
    let eta_star = find_root_brent(lo, hi, |x| resonance_residual(x, n), &mut conv).map_err(|e| match e {
        SearchError::NoBracketing => Error::NoSignChange { lo, hi, f_lo, f_hi },
        _ => Error::NoConvergence { iterations: 200 },
    })?;
    let residual = resonance_residual(eta_star, n);
    if residual.abs() >= RESIDUAL_TOL {
        return Err(Error::NoConvergence { iterations: 200 });
    }
    Ok(MagicEtaResult { n, eta_star, residual, bracket, non_monotonic: count_sign_changes(n, bracket) > 1 })
}

/// Largest population reached in the upper member of the pair with lower
/// level (n, n_r), starting from the lower member, over `window` π-times of
/// full dynamics sampled at `samples` points.
#[allow(clippy::too_many_arguments)]
pub fn max_transfer(
    params: &ModeParams,
    drive: &DriveParams,
    n: usize,
    n_r: usize,
    correction: Correction,
    window: f64,
    samples: usize,
    opts: &EvolveOptions,
) -> Result<f64> {
    let levels = target_levels(params, n, n_r)?;
    let (start_label, start) = match params.sideband {
        Sideband::Blue => (ElectronicLabel::DownDown, levels.down_fock),
        Sideband::Red => (ElectronicLabel::UpUp, levels.up_fock),
    };
    let (end_label, end) = match params.sideband {
        Sideband::Blue => (ElectronicLabel::UpUp, levels.up_fock),
        Sideband::Red => (ElectronicLabel::DownDown, levels.down_fock),
    };
    let pulse = PulseSpec {
        area: PI * window,
        mode: *params,
        target: Target { n, n_r },
        correction,
        model: Model::Full,
        drive: *drive,
    };
    let (drive, coupling) = resolved_drive(&pulse)?;
    let t_final = PI * window / (2.0 * coupling);
    let h = build_full_hamiltonian(params, &drive)?;
    let psi = VibronicState::basis_state(params.basis(), start_label, start.0, start.1)?;
    let obs = [Observable::Population { label: end_label, n: end.0, n_r: end.1 }];
    let (traj, _) = evolve_sampled(&psi, &h, &linear_grid(t_final, samples.max(2)), &obs, opts)?;
    Ok(traj.values.iter().map(|row| row[0]).fold(0.0, f64::max))
}

/// Quantities evaluated at each scan point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanObservables {
    /// Light shifts of the pair and their difference.
    pub shifts: bool,
    /// g_eff and the π-pulse duration.
    pub coupling: bool,
    /// Full-dynamics maximum transfer; expensive.
    pub max_transfer: bool,
    pub correction: Correction,
    /// Length of the max-transfer run in π-times.
    pub window: f64,
    pub samples: usize,
}

impl Default for ScanObservables {
    fn default() -> Self {
        Self {
            shifts: true,
            coupling: true,
            max_transfer: false,
            correction: Correction::None,
            window: 2.0,
            samples: 400,
        }
    }
}

/// Cartesian grid; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGrid {
    pub eta: Vec<f64>,
    /// Empty means η/3^{1/4} at each η.
    pub eta_r: Vec<f64>,
    /// δ in units of Ω.
    pub delta: Vec<f64>,
    pub n: Vec<usize>,
    pub n_r: Vec<usize>,
    pub omega: f64,
    pub k: usize,
    pub k_r: usize,
    pub sideband: Sideband,
    /// Extra CM levels kept above n + 2k at each point.
    pub cm_margin: usize,
    /// Extra relative levels kept above n_r + 2k_r.
    pub rel_margin: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            eta: vec![0.5],
            eta_r: Vec::new(),
            delta: vec![20.0],
            n: vec![0],
            n_r: vec![0],
            omega: 1.0,
            k: 1,
            k_r: 0,
            sideband: Sideband::Blue,
            cm_margin: 3,
            rel_margin: 2,
        }
    }
}

/// One grid point.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub index: usize,
    pub eta: f64,
    pub eta_r: f64,
    pub delta: f64,
    pub n: usize,
    pub n_r: usize,
}

impl ScanGrid {
    pub fn len(&self) -> usize {
        self.eta.len() * self.eta_r.len().max(1) * self.delta.len() * self.n.len() * self.n_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let reals = self.eta.iter().chain(&self.eta_r).chain(&self.delta);
        if reals.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid", "all grid values must be finite"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<ScanPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &eta in &self.eta {
            let eta_rs = if self.eta_r.is_empty() { vec![ModeParams::stretch_eta(eta)] } else { self.eta_r.clone() };
            for &eta_r in &eta_rs {
                for &delta in &self.delta {
                    for &n in &self.n {
                        for &n_r in &self.n_r {
                            out.push(ScanPoint { index: out.len(), eta, eta_r, delta, n, n_r });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub point: ScanPoint,
    pub shift_down: Option<f64>,
    pub shift_up: Option<f64>,
    pub splitting: Option<f64>,
    pub coupling: Option<f64>,
    pub pi_time: Option<f64>,
    pub max_transfer: Option<f64>,
    pub error: Option<String>,
}

impl ScanRow {
    fn empty(point: ScanPoint) -> Self {
        Self {
            point,
            shift_down: None,
            shift_up: None,
            splitting: None,
            coupling: None,
            pi_time: None,
            max_transfer: None,
            error: None,
        }
    }
}

fn evaluate_point(grid: &ScanGrid, obs: &ScanObservables, p: ScanPoint, opts: &EvolveOptions) -> ScanRow {
    let mut row = ScanRow::empty(p);
    if let Err(e) = fill_row(grid, obs, &mut row, opts) {
        row.error = Some(e.to_string());
    }
    row
}

fn fill_row(grid: &ScanGrid, obs: &ScanObservables, row: &mut ScanRow, opts: &EvolveOptions) -> Result<()> {
    let p = row.point;
    let params = ModeParams::new(
        p.eta,
        p.eta_r,
        grid.k,
        grid.k_r,
        p.n + 2 * grid.k + grid.cm_margin.max(1),
        p.n_r + 2 * grid.k_r + grid.rel_margin.max(1),
    )?
    .with_sideband(grid.sideband);
    let drive = DriveParams::new(grid.omega, p.delta)?;
    let eff = build_effective_hamiltonian(&params, &drive)?;
    let levels = target_levels(&params, p.n, p.n_r)?;
    if obs.shifts {
        let s = eff.level_shifts(&levels);
        row.shift_down = Some(s.down);
        row.shift_up = Some(s.up);
        row.splitting = Some(s.splitting());
    }
    if obs.coupling {
        let g = eff.coupling(&levels).norm();
        row.coupling = Some(g);
        row.pi_time = Some(PI / (2.0 * g));
    }
    if obs.max_transfer {
        row.max_transfer =
            Some(max_transfer(&params, &drive, p.n, p.n_r, obs.correction, obs.window, obs.samples, opts)?);
    }
    Ok(())
}

/// Evaluates every grid point on a pool of `workers` threads and hands the
/// rows to `sink` in grid order as they complete. Point failures are recorded
/// in the row; the scan itself only fails on an invalid grid or pool.
pub fn scan<F: FnMut(&ScanRow) -> std::result::Result<(), E>, E>(
    grid: &ScanGrid,
    obs: &ScanObservables,
    workers: usize,
    opts: &EvolveOptions,
    mut sink: F,
) -> Result<std::result::Result<usize, E>> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let points = grid.points();
    let chunk = 4 * workers.max(1);
    let mut written = 0;
    for batch in points.chunks(chunk) {
        let rows: Vec<ScanRow> =
            pool.install(|| batch.par_iter().map(|&p| evaluate_point(grid, obs, p, opts)).collect());
        for row in &rows {
            if let Err(e) = sink(row) {
                return Ok(Err(e));
            }
            written += 1;
        }
    }
    Ok(Ok(written))
}

/// Collects all rows of a scan.
pub fn scan_collect(
    grid: &ScanGrid,
    obs: &ScanObservables,
    workers: usize,
    opts: &EvolveOptions,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    scan(grid, obs, workers, opts, |r| {
        rows.push(r.clone());
        Ok::<(), std::convert::Infallible>(())
    })?
    .unwrap_or_else(|e| match e {});
    Ok(rows)
}
