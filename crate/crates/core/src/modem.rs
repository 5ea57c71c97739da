//! Constellations, a-priori soft-symbol statistics and extrinsic LLRs.
//!
//! LLR convention used across the whole receiver: `L = log P(b=1)/P(b=0)`,
//! and bit value 1 maps to amplitude +1 inside a symbol label. Under that
//! convention the a-priori probability of a constellation point factors as
//! `P(s) = prod_l [1 + exp(-a_l * L_l)]^{-1}` with `a_l` the +/-1 amplitude of
//! the point's l-th label bit.
//!
//! The detector output is modeled as `r = mu * s + z` with circularly
//! symmetric Gaussian `z` of variance `sigma_z^2`, so bit LLRs are computed by
//! exact log-sum-exp over the two half-constellations and the a-priori LLR is
//! subtracted to keep the exchange extrinsic.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::CVec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }
}

/// Unit-energy constellation with Gray labeling.
///
/// Point index doubles as the bit label, MSB first: bit `l` of point `idx` is
/// `(idx >> (m - 1 - l)) & 1`.
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

/// Per-axis Gray map for 16-QAM: bit pair -> amplitude in {-3,-1,+1,+3}.
fn gray_amplitude(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        (1, 0) => 3.0,
        _ => unreachable!(),
    }
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        match modulation {
            Modulation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                // Label (b0, b1): b0 -> I sign, b1 -> Q sign, bit 1 = +.
                let points = (0..4)
                    .map(|idx| {
                        let b0 = (idx >> 1) & 1;
                        let b1 = idx & 1;
                        Complex64::new(
                            if b0 == 1 { a } else { -a },
                            if b1 == 1 { a } else { -a },
                        )
                    })
                    .collect();
                Self {
                    points,
                    bits_per_symbol: 2,
                }
            }
            Modulation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                // Label (b0, b1, b2, b3): (b0, b1) -> I axis, (b2, b3) -> Q axis.
                let points = (0..16)
                    .map(|idx: usize| {
                        let b = |l: usize| ((idx >> (3 - l)) & 1) as u8;
                        Complex64::new(
                            gray_amplitude(b(0), b(1)) * scale,
                            gray_amplitude(b(2), b(3)) * scale,
                        )
                    })
                    .collect();
                Self {
                    points,
                    bits_per_symbol: 4,
                }
            }
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Amplitude (+1/-1) of bit `l` in the label of point `idx`.
    fn bit_amplitude(&self, idx: usize, l: usize) -> f64 {
        if (idx >> (self.bits_per_symbol - 1 - l)) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Map `bits_per_symbol` bits (MSB first) to a point.
    pub fn map_bits(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.points[idx]
    }

    /// Modulate a bit vector; its length must be a multiple of the symbol size.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::Dimension(format!(
                "bit count {} is not a multiple of {}",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks_exact(self.bits_per_symbol)
            .map(|c| self.map_bits(c))
            .collect())
    }

    /// Uniform random constellation symbols (uncoded interferer streams).
    pub fn random_symbols<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Complex64> {
        (0..count)
            .map(|_| self.points[rng.random_range(0..self.points.len())])
            .collect()
    }

    /// A-priori point probabilities from per-bit LLRs, normalized to sum 1.
    pub fn symbol_priors(&self, llrs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(llrs.len(), self.bits_per_symbol);
        let mut probs: Vec<f64> = (0..self.points.len())
            .map(|idx| {
                (0..self.bits_per_symbol)
                    .map(|l| sigmoid(self.bit_amplitude(idx, l) * llrs[l]))
                    .product()
            })
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }

    /// A-priori mean and variance of one symbol from its bit LLRs.
    pub fn soft_symbol(&self, llrs: &[f64]) -> (Complex64, f64) {
        let probs = self.symbol_priors(llrs);
        let mean: Complex64 = self
            .points
            .iter()
            .zip(&probs)
            .map(|(s, &p)| s * p)
            .sum();
        let variance: f64 = self
            .points
            .iter()
            .zip(&probs)
            .map(|(s, &p)| (s - mean).norm_sqr() * p)
            .sum();
        (mean, variance)
    }

    /// Extrinsic bit LLRs for one detector output.
    ///
    /// Evaluates `log sum_{s: b_l=1} F(r|s)P(s) - log sum_{s: b_l=0} F(r|s)P(s)
    /// - L_apriori(l)` with the Gaussian likelihood
    /// `F(r|s) ∝ exp(-|r - mu s|^2 / sigma_z^2)` via log-sum-exp.
    pub fn extrinsic_llrs(&self, out: &DetectorOutput, apriori: &[f64]) -> Result<Vec<f64>> {
        if !(out.noise_var > 0.0) {
            return Err(Error::Numerical(format!(
                "detector output variance must be positive, got {}",
                out.noise_var
            )));
        }
        debug_assert_eq!(apriori.len(), self.bits_per_symbol);
        let logliks: Vec<f64> = (0..self.points.len())
            .map(|idx| {
                let d = out.symbol_estimate - out.gain * self.points[idx];
                let mut v = -d.norm_sqr() / out.noise_var;
                for (l, &la) in apriori.iter().enumerate() {
                    v += log_sigmoid(self.bit_amplitude(idx, l) * la);
                }
                v
            })
            .collect();
        Ok((0..self.bits_per_symbol)
            .map(|l| {
                let pos = log_sum_exp(
                    logliks
                        .iter()
                        .enumerate()
                        .filter(|(idx, _)| self.bit_amplitude(*idx, l) > 0.0)
                        .map(|(_, &v)| v),
                );
                let neg = log_sum_exp(
                    logliks
                        .iter()
                        .enumerate()
                        .filter(|(idx, _)| self.bit_amplitude(*idx, l) < 0.0)
                        .map(|(_, &v)| v),
                );
                pos - neg - apriori[l]
            })
            .collect())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1/(1+e^-x))`, stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x < -30.0 {
        x
    } else {
        -(-x).exp().ln_1p()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Per-stream a-priori symbol means and variances driving PIC and filtering.
#[derive(Debug, Clone)]
pub struct SoftSymbolState {
    pub means: CVec,
    pub variances: Vec<f64>,
}

impl SoftSymbolState {
    /// State without prior knowledge: zero means, unit (full-energy) variances.
    pub fn uninformative(streams: usize) -> Self {
        Self {
            means: CVec::zeros(streams),
            variances: vec![1.0; streams],
        }
    }

    /// Build from per-stream a-priori LLR blocks (one block per stream).
    pub fn from_apriori(constellation: &Constellation, llr_blocks: &[&[f64]]) -> Self {
        let mut means = CVec::zeros(llr_blocks.len());
        let mut variances = Vec::with_capacity(llr_blocks.len());
        for (j, block) in llr_blocks.iter().enumerate() {
            let (m, v) = constellation.soft_symbol(block);
            means[j] = m;
            variances.push(v);
        }
        Self { means, variances }
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }
}

/// Gaussian-approximated detector output for one stream at one symbol slot.
#[derive(Debug, Clone, Copy)]
pub struct DetectorOutput {
    /// Filtered, interference-cancelled symbol estimate.
    pub symbol_estimate: Complex64,
    /// Effective desired-symbol gain `mu = w^H a`.
    pub gain: Complex64,
    /// Residual interference-plus-noise variance `sigma_z^2`.
    pub noise_var: f64,
}
