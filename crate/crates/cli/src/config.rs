//! Run configuration, read from a TOML file. Every field has a default that
//! matches the reference hardware, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use hdent::analysis::{NoiseMethod, DEFAULT_RESAMPLES};
use hdent::mub::is_prime;
use hdent::qstate::SchmidtState;
use hdent::tagstream::{Basis, BinningConfig, ClockConfig, SourceModel};
use hdent::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    PathwayI,
    #[serde(rename = "pathway_ii")]
    PathwayII,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub resamples: usize,
    pub clock: ClockConfig,
    pub source: SourceSection,
    pub binning: BinningSection,
    pub mub: MubSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Pairs per second.
    pub pair_rate: f64,
    /// Background counts per second on each detector.
    pub background_rate_per_detector: f64,
    pub jitter_fwhm_ps: f64,
    pub p_mix: f64,
    pub franson_phase: f64,
    /// Bins of the emission grid; every analysed `d` must divide into it.
    pub generation_dim: usize,
    pub eta_hwp: f64,
    pub nf_method: NoiseMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningSection {
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MubSection {
    pub d: usize,
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Background rates (Pathway I) or mixing weights `p` (Pathway II).
    pub noise: Option<Vec<f64>>,
    pub n_frames: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::PathwayI,
            seed: 1,
            output_dir: PathBuf::from("hdent-out"),
            resamples: DEFAULT_RESAMPLES,
            clock: ClockConfig::default(),
            source: SourceSection::default(),
            binning: BinningSection::default(),
            mub: MubSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            pair_rate: 2.0e6,
            background_rate_per_detector: 0.0,
            jitter_fwhm_ps: 800.0,
            p_mix: 1.0,
            franson_phase: 0.0,
            generation_dim: 80,
            eta_hwp: 1.0,
            nf_method: NoiseMethod::GroundTruth,
        }
    }
}

impl Default for BinningSection {
    fn default() -> Self {
        Self {
            dims: vec![10, 20, 40, 80],
        }
    }
}

impl Default for MubSection {
    fn default() -> Self {
        Self { d: 3, k: vec![2, 3, 4] }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            noise: None,
            n_frames: 100_000,
        }
    }
}

pub const DEFAULT_BACKGROUND_GRID: [f64; 10] = [0.0, 1e6, 3e6, 6e6, 1e7, 1.5e7, 2e7, 3e7, 4e7, 6e7];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.clock.validate()?;
        match self.experiment {
            Experiment::PathwayI => {
                self.binnings()?;
            }
            Experiment::PathwayII => self.check_mub()?,
        }
        Ok(())
    }

    pub fn binnings(&self) -> Result<Vec<BinningConfig>> {
        if self.binning.dims.is_empty() {
            return Err(Error::Config("binning.dims is empty".into()));
        }
        self.binning
            .dims
            .iter()
            .map(|&d| {
                let b = BinningConfig::new(&self.clock, d)?;
                if !self.source.generation_dim.is_multiple_of(d) {
                    return Err(Error::Config(format!(
                        "d = {d} does not divide source.generation_dim = {}",
                        self.source.generation_dim
                    )));
                }
                Ok(b)
            })
            .collect()
    }

    pub fn check_mub(&self) -> Result<()> {
        if !is_prime(self.mub.d) {
            return Err(Error::UnsupportedDimension { dim: self.mub.d });
        }
        if self.mub.k.is_empty() {
            return Err(Error::Config("mub.k is empty".into()));
        }
        Ok(())
    }

    pub fn source_model(&self, basis: Basis) -> Result<SourceModel> {
        BinningConfig::new(&self.clock, self.source.generation_dim)?;
        let s = &self.source;
        let model = SourceModel {
            pair_rate: s.pair_rate,
            background_rate_per_detector: s.background_rate_per_detector,
            jitter_fwhm_seconds: s.jitter_fwhm_ps * 1e-12,
            p_mix: s.p_mix,
            basis,
            franson_phase: s.franson_phase,
            state: SchmidtState::max_entangled(s.generation_dim)?,
        };
        model.validate()?;
        Ok(model)
    }

    /// Pathway I background grid.
    pub fn background_grid(&self) -> Result<Vec<f64>> {
        match &self.sweep.noise {
            Some(v) if v.is_empty() => Err(Error::Empty("empty noise grid")),
            Some(v) => Ok(v.clone()),
            None => Ok(DEFAULT_BACKGROUND_GRID.to_vec()),
        }
    }

    /// Pathway II grid of mixing weights.
    pub fn p_grid(&self) -> Result<Vec<f64>> {
        match &self.sweep.noise {
            Some(v) if v.is_empty() => Err(Error::Empty("empty noise grid")),
            Some(v) => Ok(v.clone()),
            None => Ok((0..=100).map(|i| i as f64 / 100.0).collect()),
        }
    }
}
