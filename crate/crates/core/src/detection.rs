//! Soft MMSE receive filtering with parallel interference cancellation.
//!
//! The detector works on the stacked model `y = A r + n` with
//! `A = [Hhat Ghat]` collecting the serving-UE channel estimates and the
//! estimated OCL interference directions. For stream `d` the combining vector
//! is
//!
//! `w_d = rho_d [rho_d a_d a_d^H + sum_{i != d} a_i v_i a_i^H + sigma^2 I]^{-1} a_d`
//!
//! with `v_i` the a-priori residual variance of stream `i`. The PIC stage
//! subtracts soft means before combining; which streams are cancelled depends
//! on the receiver mode. The covariance always spans every modeled stream.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{solve_hpd, CMat, CVec, HpdSolver};
use crate::modem::{DetectorOutput, SoftSymbolState};
use crate::{Error, Result};

/// Receiver variants compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMode {
    /// MMSE with ICL and OCL in the covariance, no cancellation.
    LinearIclOcl,
    /// Conventional PIC: cancels the serving streams only.
    PicIcl,
    /// Modified PIC: cancels serving and estimated OCL streams.
    ModifiedPicIclOcl,
    /// Genie baseline: OCL removed from the observation and the model.
    LinearIclOnly,
}

impl ReceiverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverMode::LinearIclOcl => "linear_icl_ocl",
            ReceiverMode::PicIcl => "pic_icl",
            ReceiverMode::ModifiedPicIclOcl => "modified_pic_icl_ocl",
            ReceiverMode::LinearIclOnly => "linear_icl_only",
        }
    }

    /// All modes, in the order used by reports.
    pub fn all() -> [ReceiverMode; 4] {
        [
            ReceiverMode::LinearIclOcl,
            ReceiverMode::PicIcl,
            ReceiverMode::ModifiedPicIclOcl,
            ReceiverMode::LinearIclOnly,
        ]
    }
}

/// Which streams the PIC stage subtracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelSet {
    None,
    ServingOnly,
    All,
}

impl CancelSet {
    fn includes(self, stream: usize, serving_count: usize) -> bool {
        match self {
            CancelSet::None => false,
            CancelSet::ServingOnly => stream < serving_count,
            CancelSet::All => true,
        }
    }
}

/// Stacked detection model for one coherence block.
#[derive(Debug, Clone)]
pub struct StackedModel {
    /// `A = [Hhat Ghat]`, `NL x (K + M_est)`; serving columns first.
    pub columns: CMat,
    /// Number of serving streams `K` (leading columns).
    pub serving_count: usize,
    /// Receiver noise variance `sigma_w^2`.
    pub noise_var: f64,
    /// Per-stream transmit powers `rho`.
    pub stream_powers: Vec<f64>,
}

impl StackedModel {
    pub fn new(columns: CMat, serving_count: usize, noise_var: f64) -> Self {
        let streams = columns.ncols();
        Self {
            columns,
            serving_count,
            noise_var,
            stream_powers: vec![1.0; streams],
        }
    }

    pub fn stream_count(&self) -> usize {
        self.columns.ncols()
    }

    fn check_soft(&self, soft: &SoftSymbolState) -> Result<()> {
        if soft.len() != self.stream_count() {
            return Err(Error::Dimension(format!(
                "soft state covers {} streams, model has {}",
                soft.len(),
                self.stream_count()
            )));
        }
        Ok(())
    }
}

/// MMSE combining vector for stream `d`, assembled and solved independently.
///
/// The covariance uses the full stream power for the desired column and the
/// supplied residual variances for every other column.
pub fn mmse_filter(model: &StackedModel, d: usize, soft: &SoftSymbolState) -> Result<CVec> {
    model.check_soft(soft)?;
    let nl = model.columns.nrows();
    let mut cov = CMat::identity(nl, nl) * Complex64::new(model.noise_var, 0.0);
    for i in 0..model.stream_count() {
        let coef = if i == d {
            model.stream_powers[d]
        } else {
            soft.variances[i]
        };
        if coef > 0.0 {
            let a = model.columns.column(i);
            // cov += coef * a a^H
            cov.ger(Complex64::new(coef, 0.0), &a, &a.conjugate(), Complex64::new(1.0, 0.0));
        }
    }
    let a_d = CVec::from_column_slice(model.columns.column(d).as_slice());
    let x = solve_hpd(&cov, &a_d)?;
    Ok(x * Complex64::new(model.stream_powers[d], 0.0))
}

/// All per-stream MMSE filters from one shared covariance factorization.
///
/// Factors `C = sigma^2 I + sum_i v_i a_i a_i^H` once and produces each
/// stream's filter through a rank-one Sherman-Morrison correction that swaps
/// `v_d -> rho_d` on the desired column. Algebraically identical to calling
/// [`mmse_filter`] per stream.
pub fn mmse_filters_shared(model: &StackedModel, soft: &SoftSymbolState) -> Result<Vec<CVec>> {
    model.check_soft(soft)?;
    let nl = model.columns.nrows();
    let mut cov = CMat::identity(nl, nl) * Complex64::new(model.noise_var, 0.0);
    for i in 0..model.stream_count() {
        if soft.variances[i] > 0.0 {
            let a = model.columns.column(i);
            cov.ger(
                Complex64::new(soft.variances[i], 0.0),
                &a,
                &a.conjugate(),
                Complex64::new(1.0, 0.0),
            );
        }
    }
    let solver = HpdSolver::new(cov)?;
    let mut filters = Vec::with_capacity(model.stream_count());
    for d in 0..model.stream_count() {
        let a_d = CVec::from_column_slice(model.columns.column(d).as_slice());
        let u = solver.solve(&a_d);
        let q = a_d.dotc(&u).re; // a_d^H C^{-1} a_d, real for HPD C
        let c = model.stream_powers[d] - soft.variances[d];
        let denom = 1.0 + c * q;
        if denom <= 0.0 {
            return Err(Error::Solver(
                "rank-one covariance correction lost positive definiteness".into(),
            ));
        }
        filters.push(u * Complex64::new(model.stream_powers[d] / denom, 0.0));
    }
    Ok(filters)
}

/// One PIC + combine step for stream `d` at a single symbol slot.
///
/// Computes `r = w^H (y - sum_{i in cancel, i != d} a_i mean_i)`, the
/// bookkeeping gain `mu = w^H a_d`, and the Gaussian-approximation variance
/// `sigma_z^2 = sum_{i != d} v_i |w^H a_i|^2 + sigma_w^2 |w|^2`.
pub fn modified_pic_detect(
    model: &StackedModel,
    y: &CVec,
    d: usize,
    soft: &SoftSymbolState,
    w: &CVec,
    cancel: CancelSet,
) -> DetectorOutput {
    let mut cleaned = y.clone();
    for i in 0..model.stream_count() {
        if i != d && cancel.includes(i, model.serving_count) {
            let mean = soft.means[i];
            if mean.norm_sqr() > 0.0 {
                cleaned -= CVec::from_column_slice(model.columns.column(i).as_slice()) * mean;
            }
        }
    }
    let symbol_estimate = w.dotc(&cleaned);
    let gain = w.dotc(&CVec::from_column_slice(model.columns.column(d).as_slice()));
    let mut noise_var = model.noise_var * w.norm_squared();
    for i in 0..model.stream_count() {
        if i != d {
            let cross = w.dotc(&CVec::from_column_slice(model.columns.column(i).as_slice()));
            noise_var += soft.variances[i] * cross.norm_sqr();
        }
    }
    DetectorOutput {
        symbol_estimate,
        gain,
        noise_var,
    }
}

/// Full detection pass over every modeled stream at one symbol slot.
///
/// Returns one output per stream, serving streams first. Mode handling:
/// linear modes ignore the soft state (zero means, full-energy variances);
/// conventional PIC freezes the OCL streams at zero mean and unit variance;
/// the genie mode expects `y` to already be free of OCL energy and drops the
/// OCL columns from the model.
pub fn detect_all(
    model: &StackedModel,
    y: &CVec,
    soft: &SoftSymbolState,
    mode: ReceiverMode,
) -> Result<Vec<DetectorOutput>> {
    let (effective_model, effective_soft, cancel) = prepare_mode(model, soft, mode)?;
    let model_ref = effective_model.as_ref().unwrap_or(model);
    let mut outputs = Vec::with_capacity(model_ref.stream_count());
    for d in 0..model_ref.stream_count() {
        let w = mmse_filter(model_ref, d, &effective_soft)?;
        outputs.push(modified_pic_detect(model_ref, y, d, &effective_soft, &w, cancel));
    }
    Ok(outputs)
}

/// Mode-adjusted soft state, optional reduced model, and cancellation set.
pub fn prepare_mode(
    model: &StackedModel,
    soft: &SoftSymbolState,
    mode: ReceiverMode,
) -> Result<(Option<StackedModel>, SoftSymbolState, CancelSet)> {
    model.check_soft(soft)?;
    let k = model.serving_count;
    match mode {
        ReceiverMode::ModifiedPicIclOcl => Ok((None, soft.clone(), CancelSet::All)),
        ReceiverMode::PicIcl => {
            let mut adjusted = soft.clone();
            for i in k..model.stream_count() {
                adjusted.means[i] = Complex64::new(0.0, 0.0);
                adjusted.variances[i] = model.stream_powers[i];
            }
            Ok((None, adjusted, CancelSet::ServingOnly))
        }
        ReceiverMode::LinearIclOcl => {
            let mut adjusted = SoftSymbolState::uninformative(model.stream_count());
            for i in 0..model.stream_count() {
                adjusted.variances[i] = model.stream_powers[i];
            }
            Ok((None, adjusted, CancelSet::None))
        }
        ReceiverMode::LinearIclOnly => {
            let reduced = StackedModel {
                columns: model.columns.columns(0, k).into_owned(),
                serving_count: k,
                noise_var: model.noise_var,
                stream_powers: model.stream_powers[..k].to_vec(),
            };
            let mut adjusted = SoftSymbolState::uninformative(k);
            for i in 0..k {
                adjusted.variances[i] = model.stream_powers[i];
            }
            Ok((Some(reduced), adjusted, CancelSet::None))
        }
    }
}
