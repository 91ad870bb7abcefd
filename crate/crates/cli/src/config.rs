use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use vibronic::fock::{ModeParams, Sideband};
use vibronic::operator::ElectronicLabel;
use vibronic::propagator::DEFAULT_TOL;
use vibronic::protocols::{Correction, HoleBurningConfig, Model, MotionalProtocolConfig, Target};
use vibronic::spectroscopy::{ScanGrid, ScanObservables};

/// Everything a run depends on. The echo of this struct at the head of each
/// output file can be fed back with `--config` to repeat the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand that produced an echo; ignored on input.
    pub command: Option<String>,
    pub tol: f64,
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to every CSV.
    pub gnuplot: bool,
    pub rabi: RabiConfig,
    pub fock: HoleBurningConfig,
    pub bell: MotionalProtocolConfig,
    pub transfer: MotionalProtocolConfig,
    pub magic_eta: MagicEtaConfig,
    pub scan: ScanConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            tol: DEFAULT_TOL,
            seed: None,
            workers: None,
            out: None,
            gnuplot: false,
            rabi: RabiConfig::default(),
            fock: HoleBurningConfig::default(),
            bell: MotionalProtocolConfig::default(),
            transfer: MotionalProtocolConfig::default(),
            magic_eta: MagicEtaConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

/// A basis level |label, n, n_r⟩.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub label: ElectronicLabel,
    pub n: usize,
    pub n_r: usize,
}

impl Level {
    pub fn new(label: ElectronicLabel, n: usize, n_r: usize) -> Self {
        Self { label, n, n_r }
    }

    pub fn name(&self) -> String {
        format!("{}_{}_{}", self.label, self.n, self.n_r)
    }
}

/// Sideband Rabi flopping from one or more initial levels under a drive
/// tuned to `target`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    pub eta: f64,
    /// Defaults to η/3^{1/4}.
    pub eta_r: Option<f64>,
    pub omega: f64,
    /// Defaults to 40ηΩ, or 40η in units of the reference Ω when the drive is off.
    pub delta: Option<f64>,
    pub phi0: f64,
    pub k: usize,
    pub k_r: usize,
    pub sideband: Sideband,
    pub n_cm_max: usize,
    pub n_rel_max: usize,
    pub target: Target,
    pub correction: Correction,
    pub model: Model,
    /// One trajectory per initial level.
    pub initial: Vec<Level>,
    pub observables: Vec<Level>,
    /// Run length in π-times of the target pair.
    pub window: f64,
    /// Explicit run length in units of 1/Ω; overrides `window`.
    pub duration: Option<f64>,
    pub samples: usize,
}

impl Default for RabiConfig {
    fn default() -> Self {
        use ElectronicLabel::{DownDown, UpUp};
        Self {
            eta: 0.5,
            eta_r: None,
            omega: 1.0,
            delta: None,
            phi0: 0.0,
            k: 1,
            k_r: 0,
            sideband: Sideband::Blue,
            n_cm_max: 8,
            n_rel_max: 3,
            target: Target { n: 0, n_r: 0 },
            correction: Correction::StarkCorrected,
            model: Model::Full,
            initial: vec![Level::new(DownDown, 0, 0), Level::new(DownDown, 1, 0)],
            observables: vec![
                Level::new(DownDown, 0, 0),
                Level::new(UpUp, 1, 0),
                Level::new(DownDown, 1, 0),
                Level::new(UpUp, 2, 0),
            ],
            window: 2.0,
            duration: None,
            samples: 4001,
        }
    }
}

impl RabiConfig {
    pub fn eta_r(&self) -> f64 {
        self.eta_r.unwrap_or_else(|| ModeParams::stretch_eta(self.eta))
    }

    pub fn delta(&self) -> f64 {
        let scale = if self.omega > 0.0 { self.omega } else { 1.0 };
        self.delta.unwrap_or(40.0 * self.eta * scale)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagicEtaConfig {
    pub n: Vec<usize>,
    /// Per-level brackets; levels without one use the coarse pre-scan.
    pub brackets: BTreeMap<usize, (f64, f64)>,
    /// Also run uncorrected full dynamics at each root.
    pub check_dynamics: bool,
    pub n_r: Vec<usize>,
    /// δ/(ηΩ) for the dynamics check.
    pub delta_per_eta: f64,
}

impl Default for MagicEtaConfig {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 8],
            brackets: BTreeMap::new(),
            check_dynamics: false,
            n_r: vec![0, 2],
            delta_per_eta: 40.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub grid: ScanGrid,
    pub observables: ScanObservables,
}

/// Reads a config from a file, or from stdin for `-`.
pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading config from stdin")?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?
    };
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize(de) {
        Ok(cfg) => Ok(cfg),
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            bail!("field `{path}`: {inner}")
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            bail!("field `tol`: must be finite and > 0, got {}", self.tol);
        }
        if self.workers == Some(0) {
            bail!("field `workers`: must be at least 1");
        }
        let r = &self.rabi;
        if r.samples == 0 {
            bail!("field `rabi.samples`: must be at least 1");
        }
        if !(r.window.is_finite() && r.window >= 0.0) {
            bail!("field `rabi.window`: must be finite and >= 0");
        }
        if let Some(d) = r.duration {
            if !(d.is_finite() && d >= 0.0) {
                bail!("field `rabi.duration`: must be finite and >= 0");
            }
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
