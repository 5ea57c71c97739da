//! Pilot construction, LS channel estimation and OCL interference estimation.
//!
//! Served UEs transmit mutually orthogonal pilots of length `tau_p >= K`. The
//! pilot book holds the pilot matrix `Phi` (columns orthonormal) together with
//! an orthonormal basis `Psi` of its complement, so the projector onto the
//! complement factors as `P_perp = I - Phi Phi^H = Psi Psi^H`.
//!
//! Interference from outside the cluster is only observable inside that
//! complement: after removing the pilot contribution the residual despreads to
//! `Z Psi = G Sbar^H + noise`, and a rank-constrained SVD factorization gives
//! the interference estimate (the truncated SVD is the Frobenius-optimal
//! low-rank approximation).

use num_complex::Complex64;

use crate::linalg::{economy_svd, frob_sq, CMat};
use crate::{Error, Result};

/// Floor reported by [`nmse_db`] when the error is exactly zero.
pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Orthogonal pilot matrix and its complement basis.
#[derive(Debug, Clone)]
pub struct PilotBook {
    /// `tau_p x K`, orthonormal columns, one pilot sequence per UE.
    pub pilot_matrix: CMat,
    /// `tau_p x (tau_p - K)`, orthonormal basis of the complement.
    pub complement: CMat,
    pub tau_p: usize,
    /// Per-symbol pilot transmit power `p` in W.
    pub power: f64,
}

/// Build pilots from the first `K` columns of the unitary `tau_p`-point DFT.
///
/// The remaining columns form the complement basis exactly, so the projector
/// identity holds to machine precision by construction.
pub fn make_pilots(tau_p: usize, ue_count: usize, power: f64) -> Result<PilotBook> {
    if tau_p < ue_count {
        return Err(Error::Config(format!(
            "pilot length tau_p = {tau_p} must be at least the UE count {ue_count}"
        )));
    }
    if !(power > 0.0) {
        return Err(Error::Config("pilot power must be positive".into()));
    }
    let scale = 1.0 / (tau_p as f64).sqrt();
    let dft_column = |k: usize| {
        CMat::from_fn(tau_p, 1, |t, _| {
            let phase = -2.0 * std::f64::consts::PI * (t * k) as f64 / tau_p as f64;
            Complex64::from_polar(scale, phase)
        })
    };
    let mut pilot_matrix = CMat::zeros(tau_p, ue_count);
    for k in 0..ue_count {
        pilot_matrix.set_column(k, &dft_column(k).column(0));
    }
    let mut complement = CMat::zeros(tau_p, tau_p - ue_count);
    for (j, k) in (ue_count..tau_p).enumerate() {
        complement.set_column(j, &dft_column(k).column(0));
    }
    Ok(PilotBook {
        pilot_matrix,
        complement,
        tau_p,
        power,
    })
}

impl PilotBook {
    pub fn ue_count(&self) -> usize {
        self.pilot_matrix.ncols()
    }

    /// `sqrt(p * tau_p)`, the pilot amplitude used throughout.
    pub fn amplitude(&self) -> f64 {
        (self.power * self.tau_p as f64).sqrt()
    }

    /// Projector `P_perp = I - Phi Phi^H` onto the pilot complement.
    pub fn complement_projector(&self) -> CMat {
        CMat::identity(self.tau_p, self.tau_p) - &self.pilot_matrix * self.pilot_matrix.adjoint()
    }
}

/// Which observation the interference estimator factorizes.
///
/// Both despread to the same subspace in exact arithmetic; they are kept as
/// separate compute routes for the estimation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationRoute {
    /// Project the raw pilot observation: `Y * P_perp` (channel estimate unused).
    PreChannel,
    /// Subtract the reconstructed pilot signal: `Y - sqrt(p tau_p) Hhat Phi^H`.
    PostChannel,
}

/// Stacked pilot-phase observation `Y = sqrt(p tau_p) H Phi^H + G S^H + N`.
///
/// `ocl_symbols` holds the interferers' transmissions during the pilot phase
/// (`tau_p x M`); `noise` is the stacked receiver noise (`NL x tau_p`).
pub fn received_pilot_block(
    channel_ue: &CMat,
    channel_ocl: &CMat,
    pilots: &PilotBook,
    ocl_symbols: &CMat,
    noise: &CMat,
) -> Result<CMat> {
    let nl = channel_ue.nrows();
    if pilots.pilot_matrix.ncols() != channel_ue.ncols() {
        return Err(Error::Dimension(format!(
            "pilot book has {} pilots but H has {} columns",
            pilots.pilot_matrix.ncols(),
            channel_ue.ncols()
        )));
    }
    if channel_ocl.nrows() != nl || noise.nrows() != nl {
        return Err(Error::Dimension("H, G and noise must share row count".into()));
    }
    if ocl_symbols.nrows() != pilots.tau_p || ocl_symbols.ncols() != channel_ocl.ncols() {
        return Err(Error::Dimension(format!(
            "OCL symbol matrix must be tau_p x M = {} x {}, got {} x {}",
            pilots.tau_p,
            channel_ocl.ncols(),
            ocl_symbols.nrows(),
            ocl_symbols.ncols()
        )));
    }
    if noise.ncols() != pilots.tau_p {
        return Err(Error::Dimension("noise must have tau_p columns".into()));
    }
    let mut y = channel_ue * pilots.pilot_matrix.adjoint();
    y *= Complex64::new(pilots.amplitude(), 0.0);
    y += channel_ocl * ocl_symbols.adjoint();
    y += noise;
    Ok(y)
}

/// Least-squares channel estimate `Hhat = Y Phi / sqrt(p tau_p)`.
pub fn ls_channel_estimate(y: &CMat, pilots: &PilotBook) -> CMat {
    (y * &pilots.pilot_matrix) / Complex64::new(pilots.amplitude(), 0.0)
}

/// Residual after removing the reconstructed pilot signal.
///
/// Equals `(G S^H + N) P_perp` whenever `h_hat` is the LS estimate.
pub fn residual_signal(y: &CMat, pilots: &PilotBook, h_hat: &CMat) -> CMat {
    y - (h_hat * pilots.pilot_matrix.adjoint()) * Complex64::new(pilots.amplitude(), 0.0)
}

/// Residual for the requested estimation route.
pub fn residual_for_route(y: &CMat, pilots: &PilotBook, route: EstimationRoute) -> CMat {
    match route {
        EstimationRoute::PreChannel => y * pilots.complement_projector(),
        EstimationRoute::PostChannel => {
            let h_hat = ls_channel_estimate(y, pilots);
            residual_signal(y, pilots, &h_hat)
        }
    }
}

/// Rank-constrained interference estimate from the pilot residual.
///
/// Despreads `Z` onto the complement, takes the best rank-`r` approximation
/// `U_r S_r V_r^H` of `Z Psi` and splits the singular values symmetrically:
/// `Ghat = U_r S_r^{1/2}`, `Sbar_hat = V_r S_r^{1/2}`. Only the product
/// `Ghat Sbar_hat^H` is identifiable; the factor split is a convention.
pub fn estimate_ocl(residual: &CMat, pilots: &PilotBook, rank: usize) -> Result<(CMat, CMat)> {
    let excess = pilots.complement.ncols();
    if excess == 0 {
        return Err(Error::EstimationInfeasible(
            "tau_p equals the UE count, the pilot complement is empty".into(),
        ));
    }
    let max_rank = residual.nrows().min(excess);
    if rank == 0 || rank > max_rank {
        return Err(Error::Config(format!(
            "estimation rank {rank} out of range 1..={max_rank}"
        )));
    }
    let despread = residual * &pilots.complement;
    let svd = economy_svd(&despread)?;
    let mut g_hat = CMat::zeros(despread.nrows(), rank);
    let mut s_bar_hat = CMat::zeros(excess, rank);
    for r in 0..rank {
        let scale = Complex64::new(svd.singular_values[r].sqrt(), 0.0);
        g_hat.set_column(r, &(svd.u.column(r) * scale));
        s_bar_hat.set_column(r, &(svd.v.column(r) * scale));
    }
    Ok((g_hat, s_bar_hat))
}

/// Normalized mean square error in dB: `10 log10(|e - t|_F^2 / |t|_F^2)`.
pub fn nmse_db(estimate: &CMat, truth: &CMat) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let denom = frob_sq(truth);
    if denom == 0.0 {
        return Err(Error::Domain("NMSE undefined for zero-norm truth".into()));
    }
    let ratio = frob_sq(&(estimate - truth)) / denom;
    if ratio <= 10f64.powf(NMSE_FLOOR_DB / 10.0) {
        Ok(NMSE_FLOOR_DB)
    } else {
        Ok(10.0 * ratio.log10())
    }
}

/// Channel and interference estimates plus NMSE diagnostics for one block.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub h_hat: CMat,
    /// Estimated interference directions, `NL x est_rank`.
    pub g_hat: CMat,
    /// Estimated despread interference signal, `(tau_p - K) x est_rank`.
    pub s_bar_hat: CMat,
    pub est_rank: usize,
    /// Channel-estimation NMSE, dB; NaN when no truth was supplied.
    pub nmse_channel_db: f64,
    /// Interference NMSE in product space, dB; NaN when unavailable.
    pub nmse_interference_db: f64,
}

/// Run the full estimation stage on one pilot observation.
///
/// When the simulation ground truth `(H, G, S)` is supplied, the NMSE
/// diagnostics are filled; the interference NMSE compares the reconstructed
/// product against `G (Psi^H S)^H`, which is invariant to the factor
/// ambiguity.
pub fn estimate_block(
    y: &CMat,
    pilots: &PilotBook,
    rank: usize,
    route: EstimationRoute,
    truth: Option<(&CMat, &CMat, &CMat)>,
) -> Result<EstimationResult> {
    let h_hat = ls_channel_estimate(y, pilots);
    let residual = match route {
        EstimationRoute::PreChannel => y * pilots.complement_projector(),
        EstimationRoute::PostChannel => residual_signal(y, pilots, &h_hat),
    };
    let (g_hat, s_bar_hat) = estimate_ocl(&residual, pilots, rank)?;
    let (mut nmse_channel_db, mut nmse_interference_db) = (f64::NAN, f64::NAN);
    if let Some((h, g, s)) = truth {
        nmse_channel_db = nmse_db(&h_hat, h)?;
        let product = &g_hat * s_bar_hat.adjoint();
        let truth_product = g * (pilots.complement.adjoint() * s).adjoint();
        nmse_interference_db = nmse_db(&product, &truth_product)?;
    }
    Ok(EstimationResult {
        h_hat,
        g_hat,
        s_bar_hat,
        est_rank: rank,
        nmse_channel_db,
        nmse_interference_db,
    })
}
