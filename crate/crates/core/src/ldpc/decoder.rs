//! Flooding-schedule box-plus sum-product decoding.
//!
//! Check-node updates use the exact pairwise box-plus operator in its
//! numerically stable min-sum-plus-correction form; variable nodes sum their
//! incoming messages. The decoder exits early once all parity checks are
//! satisfied and always reports extrinsic output (total posterior minus
//! intrinsic input) for the detector feedback path.
//!
//! The crate-wide LLR convention is `log P(b=1)/P(b=0)`. The classical
//! box-plus parity identity is written for the opposite sign convention, so
//! the decoder negates LLRs at its boundary, runs the standard updates, and
//! negates outputs back.

use super::LdpcCode;

/// LLRs are clipped to this magnitude at module boundaries.
pub const LLR_CLIP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrKind {
    Intrinsic,
    Extrinsic,
}

/// A clipped LLR vector exchanged between detector and decoder.
#[derive(Debug, Clone)]
pub struct LlrFrame {
    pub values: Vec<f64>,
    pub kind: LlrKind,
}

impl LlrFrame {
    /// Build a frame, clipping every entry to `[-LLR_CLIP, LLR_CLIP]`.
    pub fn new(values: Vec<f64>, kind: LlrKind) -> Self {
        let values = values
            .into_iter()
            .map(|v| {
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(-LLR_CLIP, LLR_CLIP)
                }
            })
            .collect();
        Self { values, kind }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact pairwise box-plus via min-sum plus correction terms:
/// `sign(a) sign(b) min(|a|,|b|) + log(1+e^{-|a+b|}) - log(1+e^{-|a-b|})`.
pub fn boxplus(a: f64, b: f64) -> f64 {
    let sign = a.signum() * b.signum();
    let min = a.abs().min(b.abs());
    sign * min + ln1pexp_neg((a + b).abs()) - ln1pexp_neg((a - b).abs())
}

/// `ln(1 + e^{-x})` for `x >= 0`.
fn ln1pexp_neg(x: f64) -> f64 {
    (-x).exp().ln_1p()
}

/// Decoder output for one frame.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Extrinsic LLRs (total posterior minus intrinsic), clipped.
    pub extrinsic: LlrFrame,
    pub hard_bits: Vec<u8>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl LdpcCode {
    /// Box-plus SPA decode of one intrinsic LLR frame.
    pub fn decode(&self, intrinsic: &LlrFrame) -> DecodeResult {
        let n = self.codeword_len();
        assert_eq!(intrinsic.len(), n, "intrinsic length must equal n");

        // Flip into the classical convention (log P(0)/P(1)).
        let lam: Vec<f64> = intrinsic
            .values
            .iter()
            .map(|&v| -v.clamp(-LLR_CLIP, LLR_CLIP))
            .collect();

        // Flat edge arrays, grouped by check.
        let mut edge_var: Vec<u32> = Vec::new();
        let mut check_start: Vec<usize> = Vec::with_capacity(self.check_count() + 1);
        check_start.push(0);
        for adj in self.check_adjacency() {
            edge_var.extend_from_slice(adj);
            check_start.push(edge_var.len());
        }
        let num_edges = edge_var.len();
        let mut v2c: Vec<f64> = edge_var.iter().map(|&v| lam[v as usize]).collect();
        let mut c2v = vec![0.0f64; num_edges];
        let mut totals = lam.clone();
        let mut converged = false;
        let mut iterations_used = 0;

        let mut prefix: Vec<f64> = Vec::new();
        let mut suffix: Vec<f64> = Vec::new();
        for _ in 0..self.max_iters {
            iterations_used += 1;
            // Check-node update via prefix/suffix box-plus scans.
            for c in 0..self.check_count() {
                let (s, e) = (check_start[c], check_start[c + 1]);
                let deg = e - s;
                if deg == 0 {
                    continue;
                }
                prefix.clear();
                prefix.resize(deg, 0.0);
                suffix.clear();
                suffix.resize(deg, 0.0);
                prefix[0] = v2c[s];
                for i in 1..deg {
                    prefix[i] = boxplus(prefix[i - 1], v2c[s + i]);
                }
                suffix[deg - 1] = v2c[e - 1];
                for i in (0..deg - 1).rev() {
                    suffix[i] = boxplus(suffix[i + 1], v2c[s + i]);
                }
                for i in 0..deg {
                    c2v[s + i] = match (i == 0, i == deg - 1) {
                        (true, true) => 0.0, // degree-1 check carries no information
                        (true, false) => suffix[1],
                        (false, true) => prefix[deg - 2],
                        (false, false) => boxplus(prefix[i - 1], suffix[i + 1]),
                    };
                }
            }
            // Variable-node update.
            totals.copy_from_slice(&lam);
            for (e, &v) in edge_var.iter().enumerate() {
                totals[v as usize] += c2v[e];
            }
            for (e, &v) in edge_var.iter().enumerate() {
                v2c[e] = totals[v as usize] - c2v[e];
            }
            // Early exit once the hard decision satisfies every check.
            let hard_ok = (0..self.check_count()).all(|c| {
                let (s, e) = (check_start[c], check_start[c + 1]);
                edge_var[s..e]
                    .iter()
                    .fold(0u8, |acc, &v| acc ^ u8::from(totals[v as usize] < 0.0))
                    == 0
            });
            if hard_ok {
                converged = true;
                break;
            }
        }

        // Classical total < 0 means bit 1; extrinsic flips back to the crate
        // convention.
        let hard_bits: Vec<u8> = totals.iter().map(|&t| u8::from(t < 0.0)).collect();
        let extrinsic: Vec<f64> = totals.iter().zip(&lam).map(|(&t, &l)| -(t - l)).collect();
        DecodeResult {
            extrinsic: LlrFrame::new(extrinsic, LlrKind::Extrinsic),
            hard_bits,
            converged,
            iterations_used,
        }
    }
}
