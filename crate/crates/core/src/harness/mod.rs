//! Monte Carlo experiment driver: SNR calibration, sweeps and persistence.
//!
//! Sweeps iterate over the SNR grid and the configured receiver modes, run
//! `trials` independent block groups per cell in parallel, and reduce the
//! per-trial results sequentially in trial order, so output is deterministic
//! regardless of worker count. NMSE diagnostics aggregate as the mean of the
//! per-trial dB values (the per-trial error ratios are heavy-tailed across
//! random geometries; a linear mean would be dominated by rare placements).

mod config;

pub use config::{ExperimentConfig, SnrAveraging};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::detection::ReceiverMode;
use crate::geometry::{place_nodes, NetworkConfig};
use crate::idd::{BlockEngine, BlockResult};
use crate::ldpc::{build_code, LdpcCode, LlrFrame, LlrKind};
use crate::linalg::{crandn_matrix, CMat};
use crate::modem::Constellation;
use crate::pilots::{estimate_block, make_pilots, EstimationRoute};
use crate::rng::{self, derive_rng, derive_seed};
use crate::{Error, Result};

/// Noise power matching the target SNR for one drawn channel:
/// `sigma_w^2 = sum_k rho_k |h_k|^2 / (snr * N * L * K)`.
///
/// `powers` holds per-UE transmit powers; a single entry broadcasts.
pub fn calibrate_noise(
    channel_ue: &CMat,
    powers: &[f64],
    target_snr_db: f64,
    config: &NetworkConfig,
) -> Result<f64> {
    let k = channel_ue.ncols();
    if k == 0 {
        return Err(Error::Domain("no serving channels to calibrate against".into()));
    }
    if powers.len() != 1 && powers.len() != k {
        return Err(Error::Dimension(format!(
            "powers must have 1 or {k} entries, got {}",
            powers.len()
        )));
    }
    let mut numerator = 0.0;
    for j in 0..k {
        let rho = powers[j.min(powers.len() - 1)];
        numerator += rho * channel_ue.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if numerator <= 0.0 {
        return Err(Error::Domain("degenerate zero-energy channel".into()));
    }
    let snr = 10f64.powf(target_snr_db / 10.0);
    let denom = snr * (config.total_antennas() * config.ue_count) as f64;
    Ok(numerator / denom)
}

/// Ensemble variant of [`calibrate_noise`] using expected channel energy.
pub fn calibrate_noise_from_betas(
    beta_ue: &[Vec<f64>],
    target_snr_db: f64,
    config: &NetworkConfig,
) -> Result<f64> {
    let total: f64 = beta_ue.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::Domain("degenerate zero-energy betas".into()));
    }
    let expected_energy = config.antennas_per_ap as f64 * total;
    let snr = 10f64.powf(target_snr_db / 10.0);
    Ok(expected_energy / (snr * (config.total_antennas() * config.ue_count) as f64))
}

/// One sweep cell: a (SNR, receiver mode, IDD iteration) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mode: ReceiverMode,
    pub idd_iter: usize,
    pub ber: f64,
    pub fer: f64,
    pub nmse_ch_db: f64,
    pub nmse_int_db: f64,
    pub trials: usize,
    /// Wilson 95% confidence interval on the pooled bit error rate.
    pub ci_low: f64,
    pub ci_high: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

/// Wilson score interval for `x` successes out of `n`.
pub fn wilson_interval(x: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n_f = n as f64;
    let p = x as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn mean_db(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for v in values {
        if v.is_finite() {
            acc += v;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        acc / count as f64
    }
}

/// Build the immutable per-cell engine for a config.
pub fn build_engine(
    cfg: &ExperimentConfig,
    code: &LdpcCode,
    snr_db: f64,
    mode: ReceiverMode,
) -> Result<BlockEngine> {
    let mut idd = cfg.idd.clone();
    idd.receiver_mode = mode;
    let engine = BlockEngine {
        network: cfg.network.clone(),
        idd,
        code: code.clone(),
        constellation: Constellation::new(cfg.modulation),
        pilots: make_pilots(cfg.tau_p, cfg.network.ue_count, 1.0)?,
        tau_u: cfg.tau_u,
        est_rank: cfg.resolved_est_rank(),
        estimation_route: cfg.estimation_route,
        target_snr_db: snr_db,
        snr_averaging: cfg.snr_averaging,
        genie_channels: cfg.genie_channels,
        geometry_seed: cfg
            .freeze_geometry
            .then(|| derive_seed(cfg.master_seed, &[rng::label::GEOMETRY])),
    };
    engine.validate()?;
    Ok(engine)
}

/// Run the full sweep described by `config`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let warnings = config.validate()?;
    let start = Instant::now();
    let mut code = build_code(config.code_len, config.message_len, config.code_seed)?;
    code.max_iters = config.idd.decoder_iters;
    let modes = config.resolved_modes();
    let mut rows = Vec::new();
    for (snr_idx, &snr_db) in config.snr_grid_db.iter().enumerate() {
        for &mode in modes.iter() {
            let cell_start = Instant::now();
            let engine = build_engine(config, &code, snr_db, mode)?;
            // Trial seeds are shared across receiver modes, so mode
            // comparisons are paired on identical channel realizations.
            let results: Vec<BlockResult> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = derive_seed(
                        config.master_seed,
                        &[
                            rng::label::SNR_POINT,
                            snr_idx as u64,
                            rng::label::TRIAL,
                            trial as u64,
                        ],
                    );
                    engine.run_block(seed)
                })
                .collect::<Result<_>>()?;
            let wall = cell_start.elapsed().as_secs_f64();
            let iters = config.idd.idd_iterations;
            let total_bits: usize = results.iter().map(|r| r.total_bits).sum();
            let total_frames: usize = results.iter().map(|r| r.total_frames).sum();
            let nmse_ch = mean_db(results.iter().map(|r| r.nmse_channel_db));
            let nmse_int = mean_db(results.iter().map(|r| r.nmse_interference_db));
            for iter in 0..iters {
                let bit_errors: usize = results
                    .iter()
                    .map(|r| r.per_iteration_bit_errors[iter])
                    .sum();
                let frame_errors: usize = results
                    .iter()
                    .map(|r| r.per_iteration_frame_errors[iter])
                    .sum();
                let (ci_low, ci_high) = wilson_interval(bit_errors, total_bits);
                rows.push(SweepRow {
                    snr_db,
                    mode,
                    idd_iter: iter + 1,
                    ber: bit_errors as f64 / total_bits as f64,
                    fer: frame_errors as f64 / total_frames as f64,
                    nmse_ch_db: nmse_ch,
                    nmse_int_db: nmse_int,
                    trials: config.trials,
                    ci_low,
                    ci_high,
                    wall_time_s: wall,
                });
            }
        }
    }
    Ok(SweepResult {
        rows,
        config: config.clone(),
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Fixed CSV header of the sweep output.
pub const SWEEP_CSV_HEADER: &str =
    "snr_db,mode,idd_iter,ber,fer,nmse_ch_db,nmse_int_db,trials,ci_low,ci_high";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Write the sweep CSV and its JSON sidecar; returns both paths.
pub fn emit_results(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("sweep.csv");
    let mut out = std::fs::File::create(&csv_path)?;
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.snr_db),
            r.mode.as_str(),
            r.idd_iter,
            fmt_f64(r.ber),
            fmt_f64(r.fer),
            fmt_f64(r.nmse_ch_db),
            fmt_f64(r.nmse_int_db),
            r.trials,
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
        )?;
    }
    let json_path = dir.join("sweep_config.json");
    let sidecar = serde_json::json!({
        "master_seed": result.config.master_seed,
        "config": result.config,
        "warnings": result.warnings,
        "wall_time_s": result.wall_time_s,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok((csv_path, json_path))
}

/// Parse a sweep CSV back into rows.
pub fn read_results_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected: Vec<&str> = SWEEP_CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Config(format!("unexpected CSV header: {headers:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad CSV field '{}': {e}", &record[i])))
        };
        let mode = match &record[1] {
            "linear_icl_ocl" => ReceiverMode::LinearIclOcl,
            "pic_icl" => ReceiverMode::PicIcl,
            "modified_pic_icl_ocl" => ReceiverMode::ModifiedPicIclOcl,
            "linear_icl_only" => ReceiverMode::LinearIclOnly,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        };
        rows.push(SweepRow {
            snr_db: field(0)?,
            mode,
            idd_iter: record[2]
                .parse()
                .map_err(|e| Error::Config(format!("bad idd_iter: {e}")))?,
            ber: field(3)?,
            fer: field(4)?,
            nmse_ch_db: field(5)?,
            nmse_int_db: field(6)?,
            trials: record[7]
                .parse()
                .map_err(|e| Error::Config(format!("bad trials: {e}")))?,
            ci_low: field(8)?,
            ci_high: field(9)?,
            wall_time_s: 0.0,
        });
    }
    Ok(rows)
}

/// One row of the estimation-only sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub snr_db: f64,
    pub nmse_ch_db: f64,
    pub nmse_int_pre_db: f64,
    pub nmse_int_post_db: f64,
    pub trials: usize,
}

/// Estimation-quality sweep: channel NMSE plus interference NMSE through the
/// pre- and post-channel-estimation routes (no data phase, no decoding).
pub fn run_estimation_sweep(config: &ExperimentConfig) -> Result<Vec<EstimationRow>> {
    config.validate()?;
    let net = &config.network;
    let rank = config.resolved_est_rank();
    let pilots = make_pilots(config.tau_p, net.ue_count, 1.0)?;
    let qpsk = Constellation::new(crate::modem::Modulation::Qpsk);
    let mut rows = Vec::with_capacity(config.snr_grid_db.len());
    for (snr_idx, &snr_db) in config.snr_grid_db.iter().enumerate() {
        let samples: Vec<(f64, f64, f64)> = (0..config.trials)
            .into_par_iter()
            .map(|trial| -> Result<(f64, f64, f64)> {
                let seed = derive_seed(
                    config.master_seed,
                    &[rng::label::SNR_POINT, snr_idx as u64, rng::label::TRIAL, trial as u64],
                );
                let geo_seed = if config.freeze_geometry {
                    derive_seed(config.master_seed, &[rng::label::GEOMETRY])
                } else {
                    seed
                };
                let mut scenario = place_nodes(net, geo_seed)?;
                scenario.fill_large_scale(net, geo_seed)?;
                scenario.draw_channels(net, seed)?;
                let noise_var = match config.snr_averaging {
                    SnrAveraging::PerRealization => {
                        calibrate_noise(&scenario.channel_ue, &[1.0], snr_db, net)?
                    }
                    SnrAveraging::Ensemble => {
                        calibrate_noise_from_betas(&scenario.beta_ue, snr_db, net)?
                    }
                };
                let mut sym_rng = derive_rng(seed, &[rng::label::OCL_PILOT_SYMBOLS]);
                let s_pilot = CMat::from_fn(config.tau_p, net.ocl_count, |_, _| {
                    qpsk.random_symbols(1, &mut sym_rng)[0]
                });
                let mut noise_rng = derive_rng(seed, &[rng::label::PILOT_NOISE]);
                let noise = crandn_matrix(
                    net.total_antennas(),
                    config.tau_p,
                    noise_var,
                    &mut noise_rng,
                );
                let y = crate::pilots::received_pilot_block(
                    &scenario.channel_ue,
                    &scenario.channel_ocl,
                    &pilots,
                    &s_pilot,
                    &noise,
                )?;
                let truth = Some((&scenario.channel_ue, &scenario.channel_ocl, &s_pilot));
                let post = estimate_block(&y, &pilots, rank, EstimationRoute::PostChannel, truth)?;
                let pre = estimate_block(&y, &pilots, rank, EstimationRoute::PreChannel, truth)?;
                Ok((
                    post.nmse_channel_db,
                    pre.nmse_interference_db,
                    post.nmse_interference_db,
                ))
            })
            .collect::<Result<_>>()?;
        rows.push(EstimationRow {
            snr_db,
            nmse_ch_db: mean_db(samples.iter().map(|s| s.0)),
            nmse_int_pre_db: mean_db(samples.iter().map(|s| s.1)),
            nmse_int_post_db: mean_db(samples.iter().map(|s| s.2)),
            trials: config.trials,
        });
    }
    Ok(rows)
}

pub const ESTIMATION_CSV_HEADER: &str = "snr_db,nmse_ch_db,nmse_int_pre_db,nmse_int_post_db,trials";

pub fn emit_estimation_csv(rows: &[EstimationRow], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{ESTIMATION_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.snr_db),
            fmt_f64(r.nmse_ch_db),
            fmt_f64(r.nmse_int_pre_db),
            fmt_f64(r.nmse_int_post_db),
            r.trials
        )?;
    }
    Ok(())
}

/// Decoder-only BPSK/AWGN benchmark point.
#[derive(Debug, Clone)]
pub struct LdpcBenchRow {
    pub ebn0_db: f64,
    pub ber: f64,
    pub fer: f64,
    pub frames: usize,
}

/// BER of the code over BPSK/AWGN at one Eb/N0, averaged over `frames`.
pub fn run_ldpc_awgn(code: &LdpcCode, ebn0_db: f64, frames: usize, seed: u64) -> LdpcBenchRow {
    let rate = code.message_len() as f64 / code.codeword_len() as f64;
    // Per-real-dimension noise variance for unit-energy BPSK.
    let noise_var = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
    let counts: Vec<(usize, usize)> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = derive_rng(seed, &[rng::label::TRIAL, f as u64]);
            let msg: Vec<u8> = (0..code.message_len())
                .map(|_| u8::from(rand::Rng::random::<bool>(&mut rng)))
                .collect();
            let cw = code.encode(&msg).expect("encode");
            let intr: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let x = if b == 1 { 1.0 } else { -1.0 };
                    let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                    let y = x + z * noise_var.sqrt();
                    2.0 * y / noise_var
                })
                .collect();
            let out = code.decode(&LlrFrame::new(intr, LlrKind::Intrinsic));
            let decoded = code.extract_message(&out.hard_bits);
            let errors = decoded.iter().zip(&msg).filter(|(a, b)| a != b).count();
            (errors, usize::from(errors > 0))
        })
        .collect();
    let bit_errors: usize = counts.iter().map(|c| c.0).sum();
    let frame_errors: usize = counts.iter().map(|c| c.1).sum();
    LdpcBenchRow {
        ebn0_db,
        ber: bit_errors as f64 / (frames * code.message_len()) as f64,
        fer: frame_errors as f64 / frames as f64,
        frames,
    }
}
