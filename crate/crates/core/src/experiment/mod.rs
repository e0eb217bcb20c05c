//! Declarative experiment runs over the chain model.
//!
//! A run is described by a flat TOML file:
//!
//! ```toml
//! kind = "quench_fidelity"
//! L = 25
//! N = 3
//! U = 1.0
//! L_i_list = [3, 5]
//! M_list = [3, 4, 8]
//! t_grid = [0.0, 10.0, 20.0]
//! output_dir = "out/quench"
//! ```
//!
//! Keys not given fall back to per-kind defaults (see [`ExperimentSpec::resolved`]).
//! Every run writes its CSV files plus a `manifest.json` into `output_dir`.
//! Output CSVs depend only on the resolved spec, so reruns are byte-identical.

mod runners;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::optimizer::OptimizerConfig;

pub use runners::{free_fermion_check, quench_state};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-step traces for a ground state and two released states.
    ConvergenceTrace,
    /// Free-fermion quench where `M = L_i` orbitals are exact.
    SlowTail,
    /// Ground-state `I_max` over chain lengths and interactions.
    GsSweep,
    /// `I_max` and energies along a quench.
    QuenchFidelity,
    /// Exact vs approximant densities at checkpoints.
    DensityCompare,
    /// Optimized `I` next to the occupation-number bound.
    BoundReport,
    /// A single state read from a wave-function dump.
    Optimize,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ConvergenceTrace => "convergence_trace",
            Self::SlowTail => "slow_tail",
            Self::GsSweep => "gs_sweep",
            Self::QuenchFidelity => "quench_fidelity",
            Self::DensityCompare => "density_compare",
            Self::BoundReport => "bound_report",
            Self::Optimize => "optimize",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<f64>,
    /// Single confinement; merged into `L_i_list`.
    #[serde(rename = "L_i", default, skip_serializing_if = "Option::is_none")]
    pub confinement: Option<usize>,
    #[serde(rename = "L_i_list", default)]
    pub confinements: Vec<usize>,
    /// Interaction after release; defaults to `U` (0 for `slow_tail`).
    #[serde(rename = "quench_U", default, skip_serializing_if = "Option::is_none")]
    pub quench_interaction: Option<f64>,
    #[serde(rename = "M_list", default)]
    pub m_list: Vec<usize>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(rename = "L_range", default)]
    pub l_range: Vec<usize>,
    #[serde(rename = "U_list", default)]
    pub u_list: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_tolerance: Option<f64>,
    /// Wave-function dump for `optimize` and `bound_report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavefunction: Option<PathBuf>,
}

impl ExperimentSpec {
    /// A spec of the given kind with every optional key unset.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            length: None,
            n_particles: None,
            interaction: None,
            confinement: None,
            confinements: Vec::new(),
            quench_interaction: None,
            m_list: Vec::new(),
            t_grid: Vec::new(),
            l_range: Vec::new(),
            u_list: Vec::new(),
            output_dir: default_output_dir(),
            restarts: None,
            seed: None,
            max_sweeps: None,
            sweep_tolerance: None,
            wavefunction: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file. A relative `wavefunction` path is taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml_str(&text)?;
        spec.rebase_paths(path);
        Ok(spec)
    }

    /// Parse a config file for a run of `kind`. The file may omit `kind`;
    /// if it names a different one, that is a config error.
    pub fn from_file_as(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        match table.get("kind") {
            None => {
                table.insert("kind".into(), toml::Value::String(kind.name().into()));
            }
            Some(toml::Value::String(k)) if k == kind.name() => {}
            Some(other) => {
                return Err(Error::Config(format!(
                    "config is for kind {other}, not {}",
                    kind.name()
                )))
            }
        }
        let mut spec: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.rebase_paths(path);
        Ok(spec)
    }

    fn rebase_paths(&mut self, config: &Path) {
        if let (Some(wf), Some(dir)) = (&self.wavefunction, config.parent()) {
            if wf.is_relative() {
                self.wavefunction = Some(dir.join(wf));
            }
        }
    }

    /// Fill unset keys with the defaults of `kind`.
    pub fn resolved(&self) -> Self {
        use ExperimentKind::*;
        let mut s = self.clone();
        let (l, n, u) = match s.kind {
            ConvergenceTrace => (20, 4, 1.0),
            SlowTail => (12, 3, 1.0),
            GsSweep => (0, 5, 10.0),
            QuenchFidelity | DensityCompare | BoundReport => (25, 3, 1.0),
            Optimize => (0, 0, 0.0),
        };
        if s.kind != Optimize {
            s.n_particles.get_or_insert(n);
            if s.kind != GsSweep {
                s.length.get_or_insert(l);
                s.interaction.get_or_insert(u);
            }
        }
        if let Some(li) = s.confinement.take() {
            if !s.confinements.contains(&li) {
                s.confinements.insert(0, li);
            }
        }
        let n = s.n_particles.unwrap_or(0);
        match s.kind {
            ConvergenceTrace => {
                if s.confinements.is_empty() {
                    s.confinements.push(n);
                }
                if s.t_grid.is_empty() {
                    s.t_grid = vec![10.0, 40.0];
                }
                if s.m_list.is_empty() {
                    s.m_list.push(n);
                }
            }
            SlowTail => {
                if s.confinements.is_empty() {
                    s.confinements.push(5);
                }
                if s.t_grid.is_empty() {
                    s.t_grid.push(20.0);
                }
                s.quench_interaction.get_or_insert(0.0);
                s.restarts.get_or_insert(9);
                s.max_sweeps.get_or_insert(40);
            }
            GsSweep => {
                if s.l_range.is_empty() {
                    s.l_range = (n..=2 * n + 2).collect();
                }
                if s.u_list.is_empty() {
                    s.u_list = vec![s.interaction.unwrap_or(10.0)];
                }
                if s.m_list.is_empty() {
                    s.m_list.push(n);
                }
            }
            QuenchFidelity => {
                if s.confinements.is_empty() {
                    s.confinements = vec![3, 5];
                }
                if s.t_grid.is_empty() {
                    s.t_grid = (0..=100).map(f64::from).collect();
                }
                if s.m_list.is_empty() {
                    s.m_list = (n..=n + 5).collect();
                }
            }
            DensityCompare => {
                if s.confinements.is_empty() {
                    s.confinements = vec![3, 5];
                }
                if s.t_grid.is_empty() {
                    s.t_grid = vec![20.0, 100.0];
                }
                if s.m_list.is_empty() {
                    s.m_list = vec![n, n + 5];
                }
            }
            BoundReport => {
                if s.wavefunction.is_none() {
                    if s.confinements.is_empty() {
                        s.confinements = vec![3];
                    }
                    if s.t_grid.is_empty() {
                        s.t_grid = vec![20.0];
                    }
                    if s.m_list.is_empty() {
                        s.m_list = vec![n];
                    }
                }
            }
            Optimize => {}
        }
        if matches!(
            s.kind,
            ConvergenceTrace | QuenchFidelity | DensityCompare | BoundReport
        ) {
            let u = s.interaction;
            s.quench_interaction = s.quench_interaction.or(u);
        }
        s.restarts.get_or_insert(6);
        s.seed.get_or_insert(0);
        s.max_sweeps.get_or_insert(500);
        s.sweep_tolerance.get_or_insert(1e-12);
        s
    }

    /// Chain of the resolved spec with length `l` and interaction `u`.
    fn chain(&self, l: usize, u: f64) -> ChainSpec {
        ChainSpec::new(l, self.n_particles.unwrap_or(0), u)
    }

    pub(crate) fn optimizer(&self, m: usize) -> OptimizerConfig {
        OptimizerConfig::new(m)
            .with_seed(self.seed.unwrap_or(0))
            .with_restarts(self.restarts.unwrap_or(6))
            .with_max_sweeps(self.max_sweeps.unwrap_or(500))
            .with_tolerance(self.sweep_tolerance.unwrap_or(1e-12))
    }

    /// Check a resolved spec: model sizes, grids and `N <= M <= L` everywhere.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let cfg = |msg: String| Err(Error::Config(msg));
        self.optimizer(1).validate()?;
        if self.t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return cfg("t_grid entries must be finite and >= 0".into());
        }
        if self.m_list.contains(&0) {
            return cfg("M_list entries must be positive".into());
        }
        if self.kind == Optimize {
            if self.wavefunction.is_none() {
                return cfg("optimize needs `wavefunction`".into());
            }
            if self.m_list.is_empty() {
                return cfg("optimize needs `M_list`".into());
            }
            return Ok(());
        }
        if self.kind == BoundReport && self.wavefunction.is_some() {
            if self.m_list.is_empty() {
                return cfg("bound_report needs `M_list`".into());
            }
            return Ok(());
        }
        let n = self.n_particles.unwrap_or(0);
        let lengths: Vec<usize> = if self.kind == GsSweep {
            if self.u_list.iter().any(|u| !u.is_finite()) {
                return cfg("U_list entries must be finite".into());
            }
            self.l_range.clone()
        } else {
            vec![self.length.unwrap_or(0)]
        };
        let u = self.interaction.unwrap_or(0.0);
        if !u.is_finite() || !self.quench_interaction.unwrap_or(0.0).is_finite() {
            return cfg("U and quench_U must be finite".into());
        }
        for &l in &lengths {
            self.chain(l, u).validate()?;
            for &li in &self.confinements {
                self.chain(l, u).confined(li).validate()?;
            }
            let ms: Vec<usize> = if self.kind == SlowTail {
                self.confinements.clone()
            } else {
                self.m_list.clone()
            };
            for m in ms {
                if m < n || m > l {
                    return cfg(format!("need N <= M <= L, got N={n} M={m} L={l}"));
                }
            }
        }
        if self.kind == DensityCompare && self.confinements.len() != self.t_grid.len() {
            return cfg("density_compare pairs L_i_list with t_grid; lengths differ".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the spec, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output_dir = PathBuf::new();
        let json = serde_json::to_string(&content).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// One produced file, before it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub wall_time_s: f64,
}

/// Record of a run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub kind: ExperimentKind,
    pub spec_sha256: String,
    pub spec: ExperimentSpec,
    /// `(seed, stream)` pairs, one per restart.
    pub seeds: Vec<(u64, u64)>,
    pub outputs: Vec<ManifestEntry>,
    pub wall_time_s: f64,
}

/// Resolve, validate and compute all outputs of `spec` without touching disk.
pub fn execute(spec: &ExperimentSpec) -> Result<(ExperimentSpec, Vec<OutputFile>)> {
    let spec = spec.resolved();
    spec.validate()?;
    let files = runners::dispatch(&spec)?;
    Ok((spec, files))
}

/// Run `spec`, write its outputs and `manifest.json` into `output_dir`.
pub fn run(spec: &ExperimentSpec) -> Result<RunManifest> {
    let start = Instant::now();
    let (spec, files) = execute(spec)?;
    fs::create_dir_all(&spec.output_dir)?;
    let mut outputs = Vec::with_capacity(files.len());
    for file in &files {
        fs::write(spec.output_dir.join(&file.name), &file.contents)?;
        outputs.push(ManifestEntry {
            path: file.name.clone(),
            sha256: hex::encode(Sha256::digest(file.contents.as_bytes())),
            wall_time_s: file.wall_time_s,
        });
    }
    let restarts = spec.restarts.unwrap_or(0) as u64;
    let seed = spec.seed.unwrap_or(0);
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: spec.kind,
        spec_sha256: spec.hash(),
        seeds: (0..restarts).map(|r| (seed, r)).collect(),
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        spec,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(manifest.spec.output_dir.join("manifest.json"), json + "\n")?;
    log::info!(
        "{}: wrote {} files to {}",
        manifest.kind.name(),
        manifest.outputs.len(),
        manifest.spec.output_dir.display()
    );
    Ok(manifest)
}
