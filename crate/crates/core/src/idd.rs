//! Iterative detection and decoding over a group of coherence blocks.
//!
//! One Monte Carlo trial covers one codeword per UE. A codeword of `n` bits
//! needs `n / M_c` symbols, which can exceed the `tau_u` data symbols of a
//! single coherence block; the engine therefore spreads each codeword
//! round-robin over `B = ceil(n / (M_c tau_u))` consecutive blocks with
//! independent channel draws (geometry and large-scale fading stay fixed
//! within the group). Each block runs its own pilot phase and estimation.
//!
//! Per IDD iteration: soft-symbol statistics from the current a-priori LLRs
//! (zeros on the first pass), MMSE-PIC detection per stream, extrinsic LLR
//! computation, then one LDPC decode per UE whose extrinsic output becomes the
//! detector's a-priori for the next pass. Estimated OCL streams are never
//! decoded; in the modified-PIC mode their soft statistics are refreshed from
//! detector-side extrinsic LLRs instead.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{mmse_filter, mmse_filters_shared, ReceiverMode, StackedModel};
use crate::geometry::{place_nodes, NetworkConfig, NetworkScenario};
use crate::harness::{calibrate_noise, calibrate_noise_from_betas, SnrAveraging};
use crate::ldpc::{LdpcCode, LlrFrame, LlrKind};
use crate::linalg::{crandn_matrix, CMat, CVec};
use crate::modem::{Constellation, DetectorOutput, SoftSymbolState};
use crate::pilots::{
    estimate_block, ls_channel_estimate, nmse_db, received_pilot_block, EstimationRoute, PilotBook,
};
use crate::rng::{self, derive_rng, derive_seed};
use crate::{Error, Result};

/// Iteration and receiver settings of the IDD loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IddConfig {
    /// Outer detector/decoder iterations.
    pub idd_iterations: usize,
    /// Inner LDPC decoder iterations per outer pass.
    pub decoder_iters: usize,
    pub receiver_mode: ReceiverMode,
    /// LLR clip magnitude at module boundaries.
    pub llr_clip: f64,
    /// Reuse one covariance factorization per block and iteration instead of
    /// solving each stream's system independently (identical results).
    pub shared_covariance: bool,
    /// Lower bound on the per-stream residual variances used by the filter
    /// covariance and the output variance (never by the cancellation means).
    /// Represents channel-model error the soft feedback cannot remove; zero
    /// reproduces the covariance equations literally.
    pub variance_floor: f64,
}

impl Default for IddConfig {
    fn default() -> Self {
        Self {
            idd_iterations: 3,
            decoder_iters: 10,
            receiver_mode: ReceiverMode::ModifiedPicIclOcl,
            llr_clip: 50.0,
            shared_covariance: false,
            variance_floor: 0.0,
        }
    }
}

impl IddConfig {
    pub fn validate(&self) -> Result<()> {
        if self.idd_iterations < 1 {
            return Err(Error::Config("idd_iterations must be >= 1".into()));
        }
        if self.decoder_iters < 1 {
            return Err(Error::Config("decoder_iters must be >= 1".into()));
        }
        if !(self.llr_clip > 0.0) {
            return Err(Error::Config("llr_clip must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.variance_floor) {
            return Err(Error::Config("variance_floor must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Outcome of one trial (one codeword per UE across a block group).
#[derive(Debug, Clone)]
pub struct BlockResult {
    /// Final hard-decided message bits per UE.
    pub decoded_bits: Vec<Vec<u8>>,
    /// Message-bit errors after the final IDD iteration.
    pub bit_errors: usize,
    /// Codewords with at least one message-bit error after the final pass.
    pub frame_errors: usize,
    pub total_bits: usize,
    pub total_frames: usize,
    /// Message-bit error rate after each IDD iteration.
    pub per_iteration_ber: Vec<f64>,
    pub per_iteration_bit_errors: Vec<usize>,
    pub per_iteration_frame_errors: Vec<usize>,
    /// Channel-estimation NMSE averaged over the group's blocks, dB.
    pub nmse_channel_db: f64,
    /// Interference-estimation NMSE averaged over the group's blocks, dB.
    /// NaN when the mode performs no interference estimation.
    pub nmse_interference_db: f64,
}

/// Immutable per-experiment state shared by all Monte Carlo trials.
#[derive(Debug, Clone)]
pub struct BlockEngine {
    pub network: NetworkConfig,
    pub idd: IddConfig,
    pub code: LdpcCode,
    pub constellation: Constellation,
    pub pilots: PilotBook,
    /// Data symbols per coherence block.
    pub tau_u: usize,
    /// Retained singular components of the interference estimate.
    pub est_rank: usize,
    pub estimation_route: EstimationRoute,
    pub target_snr_db: f64,
    pub snr_averaging: SnrAveraging,
    /// Use true channels in the detector (estimation still runs for NMSE).
    pub genie_channels: bool,
    /// Freeze geometry and large-scale fading across trials.
    pub geometry_seed: Option<u64>,
}

impl BlockEngine {
    /// Coherence blocks spanned by one codeword.
    pub fn blocks_per_group(&self) -> usize {
        self.symbols_per_codeword().div_ceil(self.tau_u)
    }

    pub fn symbols_per_codeword(&self) -> usize {
        self.code.codeword_len() / self.constellation.bits_per_symbol()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.idd.validate()?;
        let mc = self.constellation.bits_per_symbol();
        if self.code.codeword_len() % mc != 0 {
            return Err(Error::Config(format!(
                "codeword length {} is not a multiple of {} bits per symbol",
                self.code.codeword_len(),
                mc
            )));
        }
        let blocks = self.blocks_per_group();
        let per_block = self.symbols_per_codeword().div_ceil(blocks);
        if per_block > self.tau_u {
            return Err(Error::Config(format!(
                "codeword segmentation needs {per_block} slots per block but tau_u = {}",
                self.tau_u
            )));
        }
        if self.pilots.ue_count() != self.network.ue_count {
            return Err(Error::Config("pilot book does not match the UE count".into()));
        }
        Ok(())
    }

    /// Run one trial. Deterministic in `seed`.
    pub fn run_block(&self, seed: u64) -> Result<BlockResult> {
        self.validate()?;
        let cfg = &self.network;
        let mode = self.idd.receiver_mode;
        let include_ocl = mode != ReceiverMode::LinearIclOnly;
        let k = cfg.ue_count;
        let mc = self.constellation.bits_per_symbol();
        let n = self.code.codeword_len();
        let n_sym = self.symbols_per_codeword();
        let blocks = self.blocks_per_group();

        // Geometry and large-scale fading are shared by the whole group.
        let geo_seed = self.geometry_seed.unwrap_or(seed);
        let mut scenario = place_nodes(cfg, geo_seed)?;
        scenario.fill_large_scale(cfg, geo_seed)?;

        // Slot maps: block b carries codeword symbols b, b+B, b+2B, ...
        let slot_symbols: Vec<Vec<usize>> = (0..blocks)
            .map(|b| (b..n_sym).step_by(blocks).collect())
            .collect();

        // Per-UE messages and codewords.
        let mut bits_rng = derive_rng(seed, &[rng::label::DATA_BITS]);
        let messages: Vec<Vec<u8>> = (0..k)
            .map(|_| {
                (0..self.code.message_len())
                    .map(|_| if rand::Rng::random::<bool>(&mut bits_rng) { 1u8 } else { 0u8 })
                    .collect()
            })
            .collect();
        let codewords: Vec<Vec<u8>> = messages
            .iter()
            .map(|m| self.code.encode(m))
            .collect::<Result<_>>()?;
        let tx_symbols: Vec<Vec<Complex64>> = codewords
            .iter()
            .map(|cw| self.constellation.modulate(cw))
            .collect::<Result<_>>()?;

        // Per-block channel, estimation and data observations.
        let mut per_block = Vec::with_capacity(blocks);
        let mut nmse_ch_acc = 0.0;
        let mut nmse_int_acc = 0.0;
        let mut nmse_int_count = 0usize;
        for b in 0..blocks {
            let block_seed = derive_seed(seed, &[rng::label::BLOCK, b as u64]);
            scenario.draw_channels(cfg, block_seed)?;
            let noise_var = match self.snr_averaging {
                SnrAveraging::PerRealization => {
                    calibrate_noise(&scenario.channel_ue, &[1.0], self.target_snr_db, cfg)?
                }
                SnrAveraging::Ensemble => {
                    calibrate_noise_from_betas(&scenario.beta_ue, self.target_snr_db, cfg)?
                }
            };
            let block =
                self.prepare_block(&scenario, b, block_seed, noise_var, include_ocl, &tx_symbols, &slot_symbols[b])?;
            nmse_ch_acc += block.nmse_channel_db;
            if block.nmse_interference_db.is_finite() {
                nmse_int_acc += block.nmse_interference_db;
                nmse_int_count += 1;
            }
            per_block.push(block);
        }

        // IDD loop state.
        let iters = self.idd.idd_iterations;
        let clip = self.idd.llr_clip;
        let mut serving_apriori = vec![vec![0.0f64; n]; k];
        // OCL a-priori LLRs per block, stream and slot (modified PIC only).
        let mut ocl_apriori: Vec<Vec<Vec<Vec<f64>>>> = per_block
            .iter()
            .map(|blk| vec![vec![vec![0.0; mc]; blk.slots]; blk.ocl_streams])
            .collect();

        let mut per_iteration_bit_errors = Vec::with_capacity(iters);
        let mut per_iteration_frame_errors = Vec::with_capacity(iters);
        let mut per_iteration_ber = Vec::with_capacity(iters);
        let mut decoded_bits: Vec<Vec<u8>> = vec![Vec::new(); k];

        for _iter in 0..iters {
            let mut detector_llrs = vec![vec![0.0f64; n]; k];
            for (b, blk) in per_block.iter().enumerate() {
                self.detect_block(
                    blk,
                    &serving_apriori,
                    &mut ocl_apriori[b],
                    &mut detector_llrs,
                )?;
            }
            // Decode each UE and harvest stats.
            let mut bit_errors = 0usize;
            let mut frame_errors = 0usize;
            for ue in 0..k {
                for v in detector_llrs[ue].iter_mut() {
                    *v = v.clamp(-clip, clip);
                }
                let intrinsic = LlrFrame::new(detector_llrs[ue].clone(), LlrKind::Intrinsic);
                let out = self.code.decode(&intrinsic);
                let message = self.code.extract_message(&out.hard_bits);
                let errors = message
                    .iter()
                    .zip(&messages[ue])
                    .filter(|(a, b)| a != b)
                    .count();
                bit_errors += errors;
                frame_errors += usize::from(errors > 0);
                decoded_bits[ue] = message;
                // Decoder extrinsic feeds the next detection pass.
                serving_apriori[ue] = out
                    .extrinsic
                    .values
                    .iter()
                    .map(|v| v.clamp(-clip, clip))
                    .collect();
            }
            per_iteration_bit_errors.push(bit_errors);
            per_iteration_frame_errors.push(frame_errors);
            per_iteration_ber.push(bit_errors as f64 / (k * self.code.message_len()) as f64);
        }

        Ok(BlockResult {
            decoded_bits,
            bit_errors: *per_iteration_bit_errors.last().unwrap(),
            frame_errors: *per_iteration_frame_errors.last().unwrap(),
            total_bits: k * self.code.message_len(),
            total_frames: k,
            per_iteration_ber,
            per_iteration_bit_errors,
            per_iteration_frame_errors,
            nmse_channel_db: nmse_ch_acc / blocks as f64,
            nmse_interference_db: if nmse_int_count > 0 {
                nmse_int_acc / nmse_int_count as f64
            } else {
                f64::NAN
            },
        })
    }

    fn prepare_block(
        &self,
        scenario: &NetworkScenario,
        block_index: usize,
        block_seed: u64,
        noise_var: f64,
        include_ocl: bool,
        tx_symbols: &[Vec<Complex64>],
        symbols: &[usize],
    ) -> Result<PreparedBlock> {
        let cfg = &self.network;
        let nl = cfg.total_antennas();
        let k = cfg.ue_count;
        let m = cfg.ocl_count;
        let slots = symbols.len();
        let qpsk = Constellation::new(crate::modem::Modulation::Qpsk);

        let channel_ocl = if include_ocl {
            scenario.channel_ocl.clone()
        } else {
            CMat::zeros(nl, 0)
        };

        // Pilot phase.
        let mut pilot_sym_rng = derive_rng(block_seed, &[rng::label::OCL_PILOT_SYMBOLS]);
        let ocl_pilot_cols = channel_ocl.ncols();
        let s_pilot = CMat::from_fn(self.pilots.tau_p, ocl_pilot_cols, |_, _| {
            qpsk.random_symbols(1, &mut pilot_sym_rng)[0]
        });
        let mut pilot_noise_rng = derive_rng(block_seed, &[rng::label::PILOT_NOISE]);
        let pilot_noise = crandn_matrix(nl, self.pilots.tau_p, noise_var, &mut pilot_noise_rng);
        let y_pilot = received_pilot_block(
            &scenario.channel_ue,
            &channel_ocl,
            &self.pilots,
            &s_pilot,
            &pilot_noise,
        )?;

        // Estimation.
        let (h_hat, g_hat, nmse_channel_db, nmse_interference_db) = if include_ocl {
            let est = estimate_block(
                &y_pilot,
                &self.pilots,
                self.est_rank,
                self.estimation_route,
                Some((&scenario.channel_ue, &channel_ocl, &s_pilot)),
            )?;
            (est.h_hat, est.g_hat, est.nmse_channel_db, est.nmse_interference_db)
        } else {
            let h_hat = ls_channel_estimate(&y_pilot, &self.pilots);
            let nmse = nmse_db(&h_hat, &scenario.channel_ue)?;
            (h_hat, CMat::zeros(nl, 0), nmse, f64::NAN)
        };

        // Detector model: estimates by default, true channels under the genie flag.
        let (model_h, model_g) = if self.genie_channels {
            (scenario.channel_ue.clone(), channel_ocl.clone())
        } else {
            (h_hat, rescale_interference_columns(&g_hat, &self.pilots, noise_var))
        };
        let mut columns = CMat::zeros(nl, k + model_g.ncols());
        columns.columns_mut(0, k).copy_from(&model_h);
        if model_g.ncols() > 0 {
            columns.columns_mut(k, model_g.ncols()).copy_from(&model_g);
        }
        let model = StackedModel::new(columns, k, noise_var);

        // Data phase.
        let mut ocl_data_rng = derive_rng(block_seed, &[rng::label::OCL_DATA_SYMBOLS]);
        let ocl_data = if include_ocl {
            CMat::from_fn(m, slots, |_, _| {
                self.constellation.random_symbols(1, &mut ocl_data_rng)[0]
            })
        } else {
            CMat::zeros(0, slots)
        };
        let mut data_noise_rng = derive_rng(block_seed, &[rng::label::DATA_NOISE]);
        let mut y_data = crandn_matrix(nl, slots, noise_var, &mut data_noise_rng);
        for (p, &t) in symbols.iter().enumerate() {
            let mut col = y_data.column_mut(p);
            for ue in 0..k {
                col.axpy(
                    tx_symbols[ue][t],
                    &scenario.channel_ue.column(ue),
                    Complex64::new(1.0, 0.0),
                );
            }
            if include_ocl {
                for i in 0..m {
                    col.axpy(
                        ocl_data[(i, p)],
                        &scenario.channel_ocl.column(i),
                        Complex64::new(1.0, 0.0),
                    );
                }
            }
        }

        let ocl_streams = if self.idd.receiver_mode == ReceiverMode::ModifiedPicIclOcl {
            model.stream_count() - k
        } else {
            0
        };
        let _ = block_index;
        Ok(PreparedBlock {
            model,
            y_data,
            symbols: symbols.to_vec(),
            slots,
            ocl_streams,
            nmse_channel_db,
            nmse_interference_db,
        })
    }

    /// One detection pass over a block; fills detector extrinsic LLRs and, in
    /// the modified-PIC mode, refreshes the OCL stream a-priori LLRs.
    fn detect_block(
        &self,
        blk: &PreparedBlock,
        serving_apriori: &[Vec<f64>],
        ocl_apriori: &mut [Vec<Vec<f64>>],
        detector_llrs: &mut [Vec<f64>],
    ) -> Result<()> {
        let mode = self.idd.receiver_mode;
        let cfg = &self.network;
        let k = cfg.ue_count;
        let mc = self.constellation.bits_per_symbol();
        let model = &blk.model;
        let streams = model.stream_count();
        let slots = blk.slots;
        let clip = self.idd.llr_clip;

        // Per-slot soft statistics, already mode-adjusted.
        let mut means = DMatrix::<Complex64>::zeros(streams, slots);
        let mut vars = DMatrix::<f64>::zeros(streams, slots);
        let informed_serving = matches!(mode, ReceiverMode::ModifiedPicIclOcl | ReceiverMode::PicIcl);
        let floor = self.idd.variance_floor;
        for p in 0..slots {
            let t = blk.symbols[p];
            for ue in 0..k {
                if informed_serving {
                    let llrs = &serving_apriori[ue][t * mc..(t + 1) * mc];
                    let (mean, var) = self.constellation.soft_symbol(llrs);
                    means[(ue, p)] = mean;
                    vars[(ue, p)] = var.max(floor * model.stream_powers[ue]);
                } else {
                    vars[(ue, p)] = model.stream_powers[ue];
                }
            }
            for s in k..streams {
                if mode == ReceiverMode::ModifiedPicIclOcl {
                    let (mean, var) = self.constellation.soft_symbol(&ocl_apriori[s - k][p]);
                    means[(s, p)] = mean;
                    vars[(s, p)] = var.max(floor * model.stream_powers[s]);
                } else {
                    vars[(s, p)] = model.stream_powers[s];
                }
            }
        }

        // Filters from block-averaged variances (one covariance per iteration).
        let mut filter_soft = SoftSymbolState::uninformative(streams);
        for s in 0..streams {
            filter_soft.variances[s] = vars.row(s).sum() / slots as f64;
        }
        let filters: Vec<CVec> = if self.idd.shared_covariance {
            mmse_filters_shared(model, &filter_soft)?
        } else {
            (0..streams)
                .map(|d| mmse_filter(model, d, &filter_soft))
                .collect::<Result<_>>()?
        };

        // Cross gains mu[d][i] = w_d^H a_i and filter norms.
        let mut w_stack = CMat::zeros(model.columns.nrows(), streams);
        for (d, w) in filters.iter().enumerate() {
            w_stack.set_column(d, w);
        }
        let cross = w_stack.adjoint() * &model.columns; // streams x streams
        let filtered = w_stack.adjoint() * &blk.y_data; // streams x slots
        let w_norm_sq: Vec<f64> = filters.iter().map(|w| w.norm_squared()).collect();

        let cancel_upper = match mode {
            ReceiverMode::ModifiedPicIclOcl => streams,
            ReceiverMode::PicIcl => k,
            ReceiverMode::LinearIclOcl | ReceiverMode::LinearIclOnly => 0,
        };
        let detect_streams = if mode == ReceiverMode::ModifiedPicIclOcl {
            streams
        } else {
            k
        };

        for p in 0..slots {
            let t = blk.symbols[p];
            for d in 0..detect_streams {
                let mut estimate = filtered[(d, p)];
                for i in 0..cancel_upper {
                    if i != d {
                        let mean = means[(i, p)];
                        if mean.norm_sqr() > 0.0 {
                            estimate -= cross[(d, i)] * mean;
                        }
                    }
                }
                let mut noise_var = model.noise_var * w_norm_sq[d];
                for i in 0..streams {
                    if i != d {
                        noise_var += vars[(i, p)] * cross[(d, i)].norm_sqr();
                    }
                }
                let out = DetectorOutput {
                    symbol_estimate: estimate,
                    gain: cross[(d, d)],
                    noise_var,
                };
                if d < k {
                    let apriori = &serving_apriori[d][t * mc..(t + 1) * mc];
                    let llrs = self.constellation.extrinsic_llrs(&out, apriori)?;
                    detector_llrs[d][t * mc..(t + 1) * mc].copy_from_slice(&llrs);
                } else {
                    let prior = &ocl_apriori[d - k][p];
                    let llrs = self.constellation.extrinsic_llrs(&out, prior)?;
                    let clipped: Vec<f64> = llrs.iter().map(|v| v.clamp(-clip, clip)).collect();
                    ocl_apriori[d - k][p] = clipped;
                }
            }
        }
        Ok(())
    }
}

/// Rescale estimated interference directions to their data-phase amplitude.
///
/// `estimate_ocl` returns `Ghat = U_r sqrt(S_r)`, whose column energy is the
/// pilot-domain singular value. A unit-variance virtual data symbol along
/// direction `u_r` must instead carry the per-despread-symbol signal
/// amplitude `s_r / sqrt(tau_p - K)` (debiased for the noise energy picked up
/// by the singular value), otherwise the PIC mean subtraction operates at the
/// wrong physical scale.
fn rescale_interference_columns(g_hat: &CMat, pilots: &PilotBook, noise_var: f64) -> CMat {
    let excess = pilots.complement.ncols();
    if excess == 0 || g_hat.ncols() == 0 {
        return g_hat.clone();
    }
    let nl = g_hat.nrows() as f64;
    let mut out = g_hat.clone();
    for mut col in out.column_iter_mut() {
        let sigma = col.norm_squared(); // singular value s_r
        if sigma <= 0.0 {
            continue;
        }
        let debiased_sq = (sigma * sigma - nl * noise_var * sigma).max(sigma * sigma * 1e-6);
        let target = (debiased_sq / excess as f64).sqrt();
        // Column currently has norm sqrt(sigma); bring it to norm `target`.
        col.scale_mut(target / sigma.sqrt());
    }
    out
}

struct PreparedBlock {
    model: StackedModel,
    y_data: CMat,
    /// Codeword symbol index carried by each slot.
    symbols: Vec<usize>,
    slots: usize,
    /// OCL streams whose soft statistics this mode refreshes.
    ocl_streams: usize,
    nmse_channel_db: f64,
    nmse_interference_db: f64,
}
