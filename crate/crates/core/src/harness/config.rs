//! Experiment configuration, defaults and override handling.

use serde::{Deserialize, Serialize};

use crate::detection::ReceiverMode;
use crate::geometry::NetworkConfig;
use crate::idd::IddConfig;
use crate::modem::Modulation;
use crate::pilots::EstimationRoute;
use crate::{Error, Result};

/// How the noise power is matched to the target SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrAveraging {
    /// Calibrate against the drawn channel of each block.
    PerRealization,
    /// Calibrate against the expected channel energy from the betas.
    Ensemble,
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub idd: IddConfig,
    pub snr_grid_db: Vec<f64>,
    /// Independent channel realizations per sweep cell.
    pub trials: usize,
    /// Pilot symbols per coherence block.
    pub tau_p: usize,
    /// Data symbols per coherence block.
    pub tau_u: usize,
    pub modulation: Modulation,
    pub master_seed: u64,
    pub output_path: Option<String>,
    /// LDPC codeword length.
    pub code_len: usize,
    /// LDPC message length.
    pub message_len: usize,
    pub code_seed: u64,
    /// Retained interference components; default `min(M, tau_p - K)`.
    pub est_rank: Option<usize>,
    pub estimation_route: EstimationRoute,
    /// Receiver modes to sweep; empty means just `idd.receiver_mode`.
    pub receiver_modes: Vec<ReceiverMode>,
    /// Keep one geometry across all trials instead of redrawing it.
    pub freeze_geometry: bool,
    pub snr_averaging: SnrAveraging,
    /// Detector uses true channels (estimation still runs for diagnostics).
    pub genie_channels: bool,
    /// Worker threads; `None` defers to `CFSIM_WORKERS` or the core count.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            idd: IddConfig::default(),
            snr_grid_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            trials: 500,
            tau_p: 10,
            tau_u: 190,
            modulation: Modulation::Qpsk,
            master_seed: 1,
            output_path: None,
            code_len: 512,
            message_len: 256,
            code_seed: 1,
            est_rank: None,
            estimation_route: EstimationRoute::PostChannel,
            receiver_modes: Vec::new(),
            freeze_geometry: false,
            snr_averaging: SnrAveraging::PerRealization,
            genie_channels: false,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    /// Estimation rank after applying the default rule.
    pub fn resolved_est_rank(&self) -> usize {
        self.est_rank.unwrap_or_else(|| {
            self.network
                .ocl_count
                .min(self.tau_p.saturating_sub(self.network.ue_count))
        })
    }

    /// Modes the sweep iterates over.
    pub fn resolved_modes(&self) -> Vec<ReceiverMode> {
        if self.receiver_modes.is_empty() {
            vec![self.idd.receiver_mode]
        } else {
            self.receiver_modes.clone()
        }
    }

    /// Validate, returning non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.network.validate()?;
        self.idd.validate()?;
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db must not be empty".into()));
        }
        if self.tau_p < self.network.ue_count {
            return Err(Error::Config(format!(
                "tau_p = {} is shorter than the {} orthogonal pilots required",
                self.tau_p, self.network.ue_count
            )));
        }
        if self.message_len == 0 || self.message_len >= self.code_len {
            return Err(Error::Config("need code_len > message_len >= 1".into()));
        }
        let mc = self.modulation.bits_per_symbol();
        if self.code_len % mc != 0 {
            return Err(Error::Config(format!(
                "code_len {} is not a multiple of {mc} bits per symbol",
                self.code_len
            )));
        }
        let needs_ocl_estimation = self
            .resolved_modes()
            .iter()
            .any(|m| *m != ReceiverMode::LinearIclOnly);
        let excess = self.tau_p - self.network.ue_count;
        if needs_ocl_estimation && excess == 0 {
            return Err(Error::Config(
                "tau_p equals the UE count: no pilot excess, interference estimation impossible"
                    .into(),
            ));
        }
        if let Some(rank) = self.est_rank {
            let max_rank = self.network.total_antennas().min(excess);
            if rank == 0 || rank > max_rank {
                return Err(Error::Config(format!(
                    "est_rank {rank} outside 1..={max_rank}"
                )));
            }
        }
        let mut warnings = Vec::new();
        if needs_ocl_estimation
            && self.tau_p <= self.network.ue_count + self.network.ocl_count
        {
            warnings.push(format!(
                "tau_p = {} <= K + M = {}: the pilot excess cannot span all interferers, \
                 interference estimation is rank-limited",
                self.tau_p,
                self.network.ue_count + self.network.ocl_count
            ));
        }
        Ok(warnings)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Apply `key.path=value` overrides on the JSON form of this config.
    ///
    /// Values are parsed as JSON when possible and fall back to strings, so
    /// `trials=2000`, `network.ocl_placement=in_square` and
    /// `snr_grid_db=[0,10,20]` all work.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for entry in overrides {
            let (path, raw) = entry.split_once('=').ok_or_else(|| {
                Error::Config(format!("override '{entry}' is not of the form key=value"))
            })?;
            let parsed: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let segments: Vec<&str> = path.split('.').collect();
            set_json_path(&mut value, path, &segments, parsed)?;
        }
        Ok(serde_json::from_value(value)?)
    }
}

fn set_json_path(
    node: &mut serde_json::Value,
    full_path: &str,
    segments: &[&str],
    parsed: serde_json::Value,
) -> Result<()> {
    let obj = node.as_object_mut().ok_or_else(|| {
        Error::Config(format!("override path '{full_path}' does not address an object"))
    })?;
    match segments {
        [last] => {
            obj.insert((*last).to_string(), parsed);
            Ok(())
        }
        [head, rest @ ..] => {
            let child = obj
                .entry((*head).to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            set_json_path(child, full_path, rest, parsed)
        }
        [] => Err(Error::Config(format!("empty override path '{full_path}'"))),
    }
}
