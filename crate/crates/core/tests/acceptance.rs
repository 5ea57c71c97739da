//! Acceptance suite: quantitative end-to-end checks of the simulator.
//!
//! Each criterion prints one `[criterion N]` line per sub-check and asserts
//! the full requirement at the end, so a failing run still reports every
//! measured number. Experiment parameters are pinned here; see the README for
//! how to rerun the same sweeps from the CLI.

use cfmimo::detection::{mmse_filter, modified_pic_detect, CancelSet, ReceiverMode, StackedModel};
use cfmimo::geometry::{NetworkConfig, OclPlacement};
use cfmimo::harness::{
    run_estimation_sweep, run_ldpc_awgn, run_sweep, ExperimentConfig, SweepRow,
};
use cfmimo::idd::IddConfig;
use cfmimo::ldpc::{boxplus, build_code};
use cfmimo::linalg::{crandn, crandn_matrix, economy_svd, frob_sq, CVec};
use cfmimo::modem::{Constellation, DetectorOutput, Modulation, SoftSymbolState};
use cfmimo::pilots::{
    estimate_ocl, ls_channel_estimate, make_pilots, received_pilot_block, residual_signal,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Gate {
    name: &'static str,
    failures: Vec<String>,
}

impl Gate {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) -> bool {
        println!(
            "[{}][{}] {} — {}",
            self.name,
            if pass { "PASS" } else { "FAIL" },
            label,
            detail
        );
        if !pass {
            self.failures.push(format!("{label}: {detail}"));
        }
        pass
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "{} failed sub-checks:\n  {}",
            self.name,
            self.failures.join("\n  ")
        );
    }
}

fn paper_network(placement: OclPlacement, ocl_power_w: f64, ocl_count: usize) -> NetworkConfig {
    NetworkConfig {
        ap_count: 32,
        antennas_per_ap: 4,
        ue_count: 8,
        ocl_count,
        ocl_placement: placement,
        ocl_power_w,
        ..NetworkConfig::default()
    }
}

/// Estimation experiment: paper-literal pilot budget, rank-1 estimator.
fn estimation_config(placement: OclPlacement, ocl_power_w: f64) -> ExperimentConfig {
    ExperimentConfig {
        network: paper_network(placement, ocl_power_w, 4),
        snr_grid_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
        trials: 1000,
        tau_p: 10,
        est_rank: Some(1),
        master_seed: 2024,
        ..ExperimentConfig::default()
    }
}

/// Interference effective power calibrated against the Fig-2-style
/// channel-NMSE floor (see the project notes); everything else paper-literal.
const CALIBRATED_OCL_POWER_W: f64 = 0.05;

fn idd_experiment_config(ocl_count: usize, modulation: Modulation) -> ExperimentConfig {
    ExperimentConfig {
        network: paper_network(OclPlacement::InSquare, CALIBRATED_OCL_POWER_W, ocl_count),
        idd: IddConfig {
            idd_iterations: 3,
            shared_covariance: true,
            variance_floor: 1.0,
            ..IddConfig::default()
        },
        modulation,
        tau_p: 10,
        est_rank: Some(1),
        master_seed: 7,
        ..ExperimentConfig::default()
    }
}

fn row<'a>(rows: &'a [SweepRow], snr_db: f64, mode: ReceiverMode, iter: usize) -> &'a SweepRow {
    rows.iter()
        .find(|r| r.snr_db == snr_db && r.mode == mode && r.idd_iter == iter)
        .expect("sweep row present")
}

#[test]
fn criterion_1_nmse_floors() {
    let mut gate = Gate::new("criterion 1");
    let ch_band = (-17.3 - 1.5, -17.3 + 1.5);
    let int_band = (-11.9 - 1.5, -11.9 + 1.5);

    let start = std::time::Instant::now();
    let default_cfg = estimation_config(OclPlacement::SurroundingRing, 1.0);
    let default_rows = run_estimation_sweep(&default_cfg).unwrap();
    let square_rows =
        run_estimation_sweep(&estimation_config(OclPlacement::InSquare, 1.0)).unwrap();
    let calibrated_rows = run_estimation_sweep(&estimation_config(
        OclPlacement::InSquare,
        CALIBRATED_OCL_POWER_W,
    ))
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    for (name, rows) in [
        ("spec-default ring/1.0W", &default_rows),
        ("in-square/1.0W", &square_rows),
        ("in-square/calibrated", &calibrated_rows),
    ] {
        let line: Vec<String> = rows
            .iter()
            .map(|r| {
                format!(
                    "{}dB ch {:.2} int {:.2}",
                    r.snr_db, r.nmse_ch_db, r.nmse_int_post_db
                )
            })
            .collect();
        println!("[criterion 1][data] {name}: {}", line.join(" | "));
    }

    let in_ch_band = |rows: &[cfmimo::harness::EstimationRow]| {
        rows.iter()
            .filter(|r| r.snr_db >= 15.0)
            .all(|r| r.nmse_ch_db >= ch_band.0 && r.nmse_ch_db <= ch_band.1)
    };
    let in_int_band = |rows: &[cfmimo::harness::EstimationRow]| {
        rows.iter()
            .filter(|r| r.snr_db == 20.0)
            .all(|r| r.nmse_int_post_db >= int_band.0 && r.nmse_int_post_db <= int_band.1)
    };

    // Primary: both floors on the paper-literal (spec-default) configuration.
    let ch_default = in_ch_band(&default_rows);
    let int_default = in_int_band(&default_rows);
    let primary = ch_default && int_default;
    gate.check(
        "primary: channel floor -17.3±1.5 dB at SNR>=15 (spec-default cfg)",
        ch_default,
        format!(
            "measured {:?}",
            default_rows
                .iter()
                .filter(|r| r.snr_db >= 15.0)
                .map(|r| r.nmse_ch_db)
                .collect::<Vec<_>>()
        ),
    );
    gate.check(
        "primary: interference floor -11.9±1.5 dB at SNR 20 (spec-default cfg)",
        int_default,
        format!(
            "measured {:.2}",
            default_rows.iter().find(|r| r.snr_db == 20.0).unwrap().nmse_int_post_db
        ),
    );
    // Reference sub-results: each floor is individually reachable, but not in
    // one configuration (see project notes).
    gate.check(
        "reference: channel floor in band on the calibrated configuration",
        in_ch_band(&calibrated_rows),
        format!(
            "measured {:?}",
            calibrated_rows
                .iter()
                .filter(|r| r.snr_db >= 15.0)
                .map(|r| r.nmse_ch_db)
                .collect::<Vec<_>>()
        ),
    );
    gate.check(
        "reference: interference floor in band on in-square/1.0W",
        in_int_band(&square_rows),
        format!(
            "measured {:.2}",
            square_rows.iter().find(|r| r.snr_db == 20.0).unwrap().nmse_int_post_db
        ),
    );

    // Fallback: monotone decrease to a floor, post below pre by 0.1..1.5 dB.
    let monotone = |vals: Vec<f64>| vals.windows(2).all(|w| w[1] <= w[0] + 0.3);
    let mono_ch = monotone(calibrated_rows.iter().map(|r| r.nmse_ch_db).collect());
    let mono_int = monotone(calibrated_rows.iter().map(|r| r.nmse_int_post_db).collect());
    gate.check(
        "fallback: both curves monotonically decreasing (calibrated cfg)",
        mono_ch && mono_int,
        format!("ch monotone {mono_ch}, int monotone {mono_int}"),
    );
    let gaps: Vec<f64> = calibrated_rows
        .iter()
        .filter(|r| r.snr_db >= 10.0)
        .map(|r| r.nmse_int_pre_db - r.nmse_int_post_db)
        .collect();
    let gap_ok = gaps.iter().all(|g| (0.1..=1.5).contains(g));
    let fallback = mono_ch && mono_int && gap_ok;
    gate.check(
        "fallback: post 0.1-1.5 dB below pre at SNR>=10",
        gap_ok,
        format!("gaps {gaps:?} (pre and post are algebraically identical under LS estimation)"),
    );

    gate.check(
        "runtime < 5 min for 1000 realizations",
        elapsed < 300.0,
        format!("{elapsed:.1}s for three configurations"),
    );
    gate.check(
        "criterion overall (primary or fallback)",
        primary || fallback,
        format!("primary {primary}, fallback {fallback}"),
    );
    gate.finish();
}

#[test]
fn criterion_2_idd_gain() {
    let mut gate = Gate::new("criterion 2");
    let mut cfg = idd_experiment_config(4, Modulation::Qpsk);
    cfg.snr_grid_db = vec![5.0, 10.0, 15.0, 20.0, 25.0];
    cfg.trials = 2000;
    let start = std::time::Instant::now();
    let sweep = run_sweep(&cfg).unwrap();
    let full_elapsed = start.elapsed().as_secs_f64();
    let mode = ReceiverMode::ModifiedPicIclOcl;

    for r in &sweep.rows {
        println!(
            "[criterion 2][data] snr {} idd {} ber {:.4e} ci [{:.4e}, {:.4e}]",
            r.snr_db, r.idd_iter, r.ber, r.ci_low, r.ci_high
        );
    }

    let ber_1 = row(&sweep.rows, 25.0, mode, 1).ber;
    let ber_3 = row(&sweep.rows, 25.0, mode, 3).ber;
    gate.check(
        "BER(IDD=1) at 25 dB within 2x of 2.7e-2",
        (1.35e-2..=5.4e-2).contains(&ber_1),
        format!("measured {ber_1:.3e}"),
    );
    gate.check(
        "BER(IDD=3) at 25 dB within 2x of 3.0e-3",
        (1.5e-3..=6.0e-3).contains(&ber_3),
        format!("measured {ber_3:.3e}"),
    );

    let mut strict = true;
    for &snr in &cfg.snr_grid_db {
        let r1 = row(&sweep.rows, snr, mode, 1);
        let r2 = row(&sweep.rows, snr, mode, 2);
        let r3 = row(&sweep.rows, snr, mode, 3);
        let ok = r3.ci_high < r2.ci_low && r2.ci_high < r1.ci_low;
        if !ok {
            strict = false;
        }
        println!(
            "[criterion 2][data] snr {snr}: ordering strictly outside CIs = {ok} \
             (ber {:.4e} / {:.4e} / {:.4e})",
            r1.ber, r2.ber, r3.ber
        );
    }
    gate.check(
        "IDD3 <= IDD2 <= IDD1 strictly outside CIs at every SNR >= 5",
        strict,
        "see per-SNR lines above".to_string(),
    );
    gate.check(
        "full-config runtime within desk scale (<= 2 h)",
        full_elapsed <= 7200.0,
        format!("{full_elapsed:.0}s"),
    );

    // Reduced configuration: monotone per-iteration ordering on paired trials.
    let mut reduced = ExperimentConfig {
        network: NetworkConfig {
            ap_count: 8,
            antennas_per_ap: 2,
            ue_count: 4,
            ocl_count: 2,
            ocl_placement: OclPlacement::InSquare,
            ..NetworkConfig::default()
        },
        idd: IddConfig {
            idd_iterations: 3,
            shared_covariance: true,
            variance_floor: 1.0,
            ..IddConfig::default()
        },
        tau_p: 10,
        master_seed: 11,
        trials: 1500,
        snr_grid_db: vec![10.0, 20.0],
        ..ExperimentConfig::default()
    };
    reduced.workers = None;
    let start = std::time::Instant::now();
    let reduced_sweep = run_sweep(&reduced).unwrap();
    let reduced_elapsed = start.elapsed().as_secs_f64();
    let mut reduced_monotone = true;
    for &snr in &reduced.snr_grid_db {
        let b: Vec<f64> = (1..=3)
            .map(|it| row(&reduced_sweep.rows, snr, mode, it).ber)
            .collect();
        let ok = b[2] <= b[1] && b[1] <= b[0];
        if !ok {
            reduced_monotone = false;
        }
        println!(
            "[criterion 2][data] reduced snr {snr}: ber {:.4e} / {:.4e} / {:.4e} monotone = {ok}",
            b[0], b[1], b[2]
        );
    }
    gate.check(
        "reduced config shows monotone IDD ordering",
        reduced_monotone,
        "per-iteration BER non-increasing on paired trials".to_string(),
    );
    gate.check(
        "reduced config runtime <= 10 min",
        reduced_elapsed <= 600.0,
        format!("{reduced_elapsed:.0}s"),
    );
    gate.finish();
}

#[test]
fn criterion_3_receiver_hierarchy() {
    let mut gate = Gate::new("criterion 3");
    let all_modes = ReceiverMode::all().to_vec();
    let make = |ocl_count: usize, modulation: Modulation| {
        let mut cfg = idd_experiment_config(ocl_count, modulation);
        cfg.receiver_modes = all_modes.clone();
        cfg.snr_grid_db = vec![10.0, 15.0, 25.0];
        cfg.trials = 1200;
        cfg
    };
    let sweep_m4 = run_sweep(&make(4, Modulation::Qpsk)).unwrap();
    let sweep_m2 = run_sweep(&make(2, Modulation::Qpsk)).unwrap();
    let sweep_qam = run_sweep(&make(2, Modulation::Qam16)).unwrap();

    let final_iter = 3;
    let summarize = |name: &str, rows: &[SweepRow]| {
        for &snr in &[10.0, 15.0, 25.0] {
            let line: Vec<String> = ReceiverMode::all()
                .iter()
                .map(|&m| format!("{} {:.4e}", m.as_str(), row(rows, snr, m, final_iter).ber))
                .collect();
            println!("[criterion 3][data] {name} snr {snr}: {}", line.join("  "));
        }
    };
    summarize("M=4 QPSK", &sweep_m4.rows);
    summarize("M=2 QPSK", &sweep_m2.rows);
    summarize("M=2 16QAM", &sweep_qam.rows);

    for (name, rows) in [
        ("M=4 QPSK", &sweep_m4.rows),
        ("M=2 QPSK", &sweep_m2.rows),
        ("M=2 16QAM", &sweep_qam.rows),
    ] {
        let mut hierarchy = true;
        let mut envelope = true;
        for &snr in &[15.0, 25.0] {
            let modified = row(rows, snr, ReceiverMode::ModifiedPicIclOcl, final_iter).ber;
            let pic = row(rows, snr, ReceiverMode::PicIcl, final_iter).ber;
            let linear = row(rows, snr, ReceiverMode::LinearIclOcl, final_iter).ber;
            let genie = row(rows, snr, ReceiverMode::LinearIclOnly, final_iter).ber;
            if !(modified < pic && pic < linear) {
                hierarchy = false;
            }
            if !(genie < modified) {
                envelope = false;
            }
        }
        gate.check(
            &format!("{name}: modified < pic < linear at SNR >= 15"),
            hierarchy,
            "soft cancellation separation".to_string(),
        );
        gate.check(
            &format!("{name}: ICL-only genie is the lower envelope"),
            envelope,
            "genie below modified PIC".to_string(),
        );
    }

    // Fewer interferers help every OCL-affected receiver pointwise.
    let mut m_ordering = true;
    for &snr in &[10.0, 15.0, 25.0] {
        for &mode in &[
            ReceiverMode::ModifiedPicIclOcl,
            ReceiverMode::PicIcl,
            ReceiverMode::LinearIclOcl,
        ] {
            let b2 = row(&sweep_m2.rows, snr, mode, final_iter).ber;
            let b4 = row(&sweep_m4.rows, snr, mode, final_iter).ber;
            if !(b2 < b4) {
                m_ordering = false;
                println!(
                    "[criterion 3][data] M ordering violated: {} snr {snr}: M2 {b2:.4e} vs M4 {b4:.4e}",
                    mode.as_str()
                );
            }
        }
    }
    gate.check(
        "M=2 BER < M=4 BER pointwise at SNR >= 10 (OCL-affected modes)",
        m_ordering,
        "paired-trial comparison".to_string(),
    );
    gate.finish();
}

#[test]
fn criterion_4_oracle_equivalences() {
    let mut gate = Gate::new("criterion 4");
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // MMSE filter vs an independently assembled dense LU solve.
    {
        let columns = crandn_matrix(8, 3, 1.0, &mut rng);
        let model = StackedModel::new(columns.clone(), 2, 0.23);
        let mut soft = SoftSymbolState::uninformative(3);
        soft.variances = vec![0.7, 0.4, 0.9];
        let mut worst: f64 = 0.0;
        for d in 0..3 {
            let w = mmse_filter(&model, d, &soft).unwrap();
            let mut cov = cfmimo::linalg::CMat::zeros(8, 8);
            for r in 0..8 {
                for c in 0..8 {
                    let mut v = if r == c {
                        Complex64::new(0.23, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    for i in 0..3 {
                        let coef = if i == d { 1.0 } else { soft.variances[i] };
                        v += columns[(r, i)] * columns[(c, i)].conj() * coef;
                    }
                    cov[(r, c)] = v;
                }
            }
            let a_d = CVec::from_column_slice(columns.column(d).as_slice());
            let oracle = cov.lu().solve(&a_d).unwrap();
            worst = worst.max((&w - &oracle).norm() / oracle.norm());
        }
        gate.check(
            "MMSE filter vs independent dense solve (rel 1e-9)",
            worst < 1e-9,
            format!("worst relative deviation {worst:.2e}"),
        );
    }

    // Residual identity Z = (G S^H + N) P_perp.
    {
        let pilots = make_pilots(10, 8, 1.0).unwrap();
        let h = crandn_matrix(16, 8, 1.0, &mut rng);
        let g = crandn_matrix(16, 3, 0.5, &mut rng);
        let s = crandn_matrix(10, 3, 1.0, &mut rng);
        let n = crandn_matrix(16, 10, 0.2, &mut rng);
        let y = received_pilot_block(&h, &g, &pilots, &s, &n).unwrap();
        let h_hat = ls_channel_estimate(&y, &pilots);
        let z = residual_signal(&y, &pilots, &h_hat);
        let rhs = (&g * s.adjoint() + &n) * pilots.complement_projector();
        let rel = (&z - &rhs).norm() / z.norm();
        gate.check(
            "pilot residual identity (rel 1e-9)",
            rel < 1e-9,
            format!("relative deviation {rel:.2e}"),
        );
    }

    // Eckart-Young: rank-r reconstruction error equals tail energy.
    {
        let pilots = make_pilots(12, 4, 1.0).unwrap();
        let z = crandn_matrix(10, 12, 1.0, &mut rng) * pilots.complement_projector();
        let despread = &z * &pilots.complement;
        let svd = economy_svd(&despread).unwrap();
        let mut worst: f64 = 0.0;
        for rank in 1..=4 {
            let (g_hat, s_hat) = estimate_ocl(&z, &pilots, rank).unwrap();
            let err = frob_sq(&(&g_hat * s_hat.adjoint() - &despread));
            let tail: f64 = svd.singular_values[rank..].iter().map(|s| s * s).sum();
            worst = worst.max((err - tail).abs() / tail.max(1e-300));
        }
        gate.check(
            "Eckart-Young tail-energy equality (rel 1e-9)",
            worst < 1e-9,
            format!("worst relative deviation {worst:.2e}"),
        );
    }

    // Box-plus closed form vs min-sum-plus-correction implementation.
    {
        let mut worst: f64 = 0.0;
        let mut x: f64 = -30.0;
        while x <= 30.0 {
            let mut y: f64 = -30.0;
            while y <= 30.0 {
                let direct = ((1.0 + (x + y).exp()) / (x.exp() + y.exp())).ln();
                worst = worst.max((boxplus(x, y) - direct).abs());
                y += 0.7;
            }
            x += 0.7;
        }
        gate.check(
            "box-plus closed form agreement (abs 1e-9)",
            worst < 1e-9,
            format!("worst absolute deviation {worst:.2e}"),
        );
    }

    // Extrinsic LLR vs brute-force constellation enumeration.
    {
        let c = Constellation::new(Modulation::Qam16);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let out = DetectorOutput {
                symbol_estimate: crandn(&mut rng),
                gain: Complex64::new(0.8, 0.1) + crandn(&mut rng) * 0.1,
                noise_var: 0.05 + rand::Rng::random::<f64>(&mut rng),
            };
            let apriori: Vec<f64> = (0..4)
                .map(|_| 4.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5))
                .collect();
            let got = c.extrinsic_llrs(&out, &apriori).unwrap();
            let prior = c.symbol_priors(&apriori);
            for l in 0..4 {
                let (mut pos, mut neg) = (0.0f64, 0.0f64);
                for (idx, s) in c.points().iter().enumerate() {
                    let f =
                        (-(out.symbol_estimate - out.gain * s).norm_sqr() / out.noise_var).exp();
                    if (idx >> (3 - l)) & 1 == 1 {
                        pos += f * prior[idx];
                    } else {
                        neg += f * prior[idx];
                    }
                }
                worst = worst.max((got[l] - ((pos / neg).ln() - apriori[l])).abs());
            }
        }
        gate.check(
            "extrinsic LLRs vs brute-force enumeration (abs 1e-9)",
            worst < 1e-9,
            format!("worst absolute deviation {worst:.2e}"),
        );
    }

    // Soft statistics vs direct enumeration.
    {
        let c = Constellation::new(Modulation::Qam16);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let llrs: Vec<f64> = (0..4)
                .map(|_| 10.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5))
                .collect();
            let (mean, var) = c.soft_symbol(&llrs);
            let probs = c.symbol_priors(&llrs);
            let mean_ref: Complex64 = c.points().iter().zip(&probs).map(|(s, &p)| s * p).sum();
            let var_ref: f64 = c
                .points()
                .iter()
                .zip(&probs)
                .map(|(s, &p)| (s - mean_ref).norm_sqr() * p)
                .sum();
            worst = worst.max((mean - mean_ref).norm().max((var - var_ref).abs()));
        }
        gate.check(
            "soft statistics vs enumeration (abs 1e-12)",
            worst < 1e-12,
            format!("worst absolute deviation {worst:.2e}"),
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    gate.check(
        "fast suite runtime < 1 min",
        elapsed < 60.0,
        format!("{elapsed:.2}s"),
    );
    gate.finish();
}

#[test]
fn criterion_5_ldpc_waterfall() {
    let mut gate = Gate::new("criterion 5");
    let code = build_code(512, 256, 1).unwrap();
    let result = run_ldpc_awgn(&code, 4.0, 10_000, 99);
    gate.check(
        "(512,256) BPSK/AWGN BER < 1e-3 at Eb/N0 = 4 dB over 1e4 frames",
        result.ber < 1e-3,
        format!("ber {:.3e}, fer {:.3e}", result.ber, result.fer),
    );
    gate.finish();
}

#[test]
fn criterion_6_perfect_prior_cancellation() {
    let mut gate = Gate::new("criterion 6");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let constellation = Constellation::new(Modulation::Qpsk);
    let (nl, k, m) = (32, 4, 2);
    let noise_var = 1e-12;
    let mut symbol_errors = 0usize;
    let mut decisions = 0usize;
    for _ in 0..100 {
        let columns = crandn_matrix(nl, k + m, 1.0, &mut rng);
        let model = StackedModel::new(columns.clone(), k, noise_var);
        let tx: Vec<Complex64> = constellation.random_symbols(k + m, &mut rng);
        let mut y = CVec::zeros(nl);
        for i in 0..k + m {
            y += CVec::from_column_slice(columns.column(i).as_slice()) * tx[i];
        }
        for e in y.iter_mut() {
            *e += crandn(&mut rng) * noise_var.sqrt();
        }
        let mut soft = SoftSymbolState::uninformative(k + m);
        for i in 0..k + m {
            soft.means[i] = tx[i];
            soft.variances[i] = 0.0;
        }
        for d in 0..k {
            let w = mmse_filter(&model, d, &soft).unwrap();
            let out = modified_pic_detect(&model, &y, d, &soft, &w, CancelSet::All);
            let equalized = out.symbol_estimate / out.gain;
            let hard = constellation
                .points()
                .iter()
                .min_by(|a, b| {
                    (equalized - *a)
                        .norm_sqr()
                        .partial_cmp(&(equalized - *b).norm_sqr())
                        .unwrap()
                })
                .unwrap();
            decisions += 1;
            if (hard - tx[d]).norm() > 1e-9 {
                symbol_errors += 1;
            }
        }
    }
    gate.check(
        "post-detection SER = 0 with perfect priors over 100 blocks",
        symbol_errors == 0,
        format!("{symbol_errors}/{decisions} symbol errors"),
    );
    gate.finish();
}
