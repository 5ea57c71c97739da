//! LDPC code construction, systematic encoding and box-plus SPA decoding.
//!
//! Codes are regular (3,6) Gallager-style constructions built from a seeded
//! random socket matching with parallel-edge resolution and 4-cycle reduction
//! passes. The systematic generator is derived by GF(2) Gaussian elimination;
//! message bits live on the non-pivot columns and the recorded pivot/free
//! column split doubles as the systematic permutation.

mod alist;
mod decoder;

pub use alist::{read_alist, write_alist};
pub use decoder::{boxplus, DecodeResult, LlrFrame, LlrKind, LLR_CLIP};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{self, derive_rng};
use crate::{Error, Result};

/// Target column (variable) degree of the regular construction.
const COLUMN_WEIGHT: usize = 3;
/// Construction retries before giving up on a full-rank parity matrix.
const MAX_BUILD_ATTEMPTS: u64 = 64;

/// A binary LDPC code with its decoder schedule length.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Per-check variable indices.
    check_adj: Vec<Vec<u32>>,
    /// Dense systematic generator, one bit-packed row per message bit.
    generator: Vec<Vec<u64>>,
    /// Columns carrying message bits (non-pivot columns of the RREF).
    free_cols: Vec<usize>,
    /// Pivot columns, aligned with the RREF rows.
    pivot_cols: Vec<usize>,
    pub max_iters: usize,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

fn get_bit(row: &[u64], col: usize) -> bool {
    row[col / 64] >> (col % 64) & 1 == 1
}

fn set_bit(row: &mut [u64], col: usize) {
    row[col / 64] |= 1u64 << (col % 64);
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Build a seeded regular code. Fails if no full-rank parity-check matrix is
/// found within the retry budget.
pub fn build_code(n: usize, k: usize, seed: u64) -> Result<LdpcCode> {
    if k == 0 || n <= k {
        return Err(Error::Config(format!("need n > k >= 1, got n = {n}, k = {k}")));
    }
    let m = n - k;
    for attempt in 0..MAX_BUILD_ATTEMPTS {
        let mut rng = derive_rng(seed, &[rng::label::CODE, attempt]);
        let check_adj = random_regular_graph(n, m, &mut rng);
        if let Some(code) = try_systematize(n, k, check_adj) {
            return Ok(code);
        }
    }
    Err(Error::CodeConstruction(format!(
        "no full-rank ({n},{k}) construction found in {MAX_BUILD_ATTEMPTS} attempts"
    )))
}

/// Random regular bipartite graph via socket matching, with parallel-edge
/// resolution and 4-cycle reduction passes.
fn random_regular_graph<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<u32>> {
    let edges = n * COLUMN_WEIGHT;
    // Socket e belongs to check socket_check[e]; distribute edges as evenly
    // as possible across checks (exactly regular when m divides the total).
    let base = edges / m;
    let extra = edges % m;
    let mut socket_check = Vec::with_capacity(edges);
    for c in 0..m {
        let deg = base + usize::from(c < extra);
        socket_check.extend(std::iter::repeat(c as u32).take(deg));
    }
    let mut socket_var: Vec<u32> = (0..n as u32)
        .flat_map(|v| std::iter::repeat(v).take(COLUMN_WEIGHT))
        .collect();
    socket_var.shuffle(rng);

    // Resolve parallel edges by random socket swaps.
    for _ in 0..100 {
        let mut seen = std::collections::HashSet::with_capacity(edges);
        let mut dup_positions = Vec::new();
        for e in 0..edges {
            if !seen.insert((socket_var[e], socket_check[e])) {
                dup_positions.push(e);
            }
        }
        if dup_positions.is_empty() {
            break;
        }
        for e in dup_positions {
            let j = rng.random_range(0..edges);
            socket_var.swap(e, j);
        }
    }

    // Reduce 4-cycles: two checks sharing a pair of variables.
    for _ in 0..30 {
        let mut pair_seen: std::collections::HashMap<(u32, u32), u32> =
            std::collections::HashMap::new();
        let mut offenders = Vec::new();
        let mut per_check: Vec<Vec<usize>> = vec![Vec::new(); m];
        for e in 0..edges {
            per_check[socket_check[e] as usize].push(e);
        }
        for sockets in &per_check {
            for (i, &e1) in sockets.iter().enumerate() {
                for &e2 in &sockets[i + 1..] {
                    let (a, b) = (socket_var[e1].min(socket_var[e2]), socket_var[e1].max(socket_var[e2]));
                    match pair_seen.entry((a, b)) {
                        std::collections::hash_map::Entry::Occupied(_) => offenders.push(e2),
                        std::collections::hash_map::Entry::Vacant(v) => {
                            v.insert(socket_check[e1]);
                        }
                    }
                }
            }
        }
        if offenders.is_empty() {
            break;
        }
        for e in offenders {
            let j = rng.random_range(0..edges);
            socket_var.swap(e, j);
        }
    }

    let mut check_adj: Vec<Vec<u32>> = vec![Vec::new(); m];
    for e in 0..edges {
        check_adj[socket_check[e] as usize].push(socket_var[e]);
    }
    for row in &mut check_adj {
        row.sort_unstable();
        row.dedup(); // a stray parallel edge cancels over GF(2) anyway
    }
    check_adj
}

/// GF(2)-eliminate the parity matrix; on full rank, derive the generator.
fn try_systematize(n: usize, k: usize, check_adj: Vec<Vec<u32>>) -> Option<LdpcCode> {
    let m = n - k;
    let words = words_for(n);
    let mut rows: Vec<Vec<u64>> = check_adj
        .iter()
        .map(|adj| {
            let mut row = vec![0u64; words];
            for &v in adj {
                set_bit(&mut row, v as usize);
            }
            row
        })
        .collect();

    let mut pivot_cols = Vec::with_capacity(m);
    let mut r = 0usize;
    for col in 0..n {
        let Some(pivot) = (r..m).find(|&i| get_bit(&rows[i], col)) else {
            continue;
        };
        rows.swap(r, pivot);
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && get_bit(row, col) {
                xor_into(row, &pivot_row);
            }
        }
        pivot_cols.push(col);
        r += 1;
        if r == m {
            break;
        }
    }
    if r < m {
        return None; // rank deficient, retry
    }

    let pivot_set: std::collections::HashSet<usize> = pivot_cols.iter().copied().collect();
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_set.contains(c)).collect();
    debug_assert_eq!(free_cols.len(), k);

    // Generator row j: message bit on free_cols[j], parity fills from the
    // RREF rows that contain that free column.
    let generator: Vec<Vec<u64>> = free_cols
        .iter()
        .map(|&f| {
            let mut row = vec![0u64; words];
            set_bit(&mut row, f);
            for (i, &p) in pivot_cols.iter().enumerate() {
                if get_bit(&rows[i], f) {
                    set_bit(&mut row, p);
                }
            }
            row
        })
        .collect();

    Some(LdpcCode {
        n,
        k,
        check_adj,
        generator,
        free_cols,
        pivot_cols,
        max_iters: 10,
    })
}

impl LdpcCode {
    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn check_count(&self) -> usize {
        self.n - self.k
    }

    /// Variable indices of each parity check.
    pub fn check_adjacency(&self) -> &[Vec<u32>] {
        &self.check_adj
    }

    /// Columns carrying the message bits of a systematic codeword.
    pub fn message_columns(&self) -> &[usize] {
        &self.free_cols
    }

    /// Parity (pivot) columns recorded during systematization.
    pub fn parity_columns(&self) -> &[usize] {
        &self.pivot_cols
    }

    /// Systematic encoding: message bits land on [`Self::message_columns`].
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::Dimension(format!(
                "message length {} does not match k = {}",
                message.len(),
                self.k
            )));
        }
        let mut acc = vec![0u64; words_for(self.n)];
        for (bit, row) in message.iter().zip(&self.generator) {
            if *bit & 1 == 1 {
                xor_into(&mut acc, row);
            }
        }
        Ok((0..self.n).map(|c| u8::from(get_bit(&acc, c))).collect())
    }

    /// Read the message back out of a (hard-decided) codeword.
    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.free_cols.iter().map(|&c| codeword[c] & 1).collect()
    }

    /// True when every parity check is satisfied.
    pub fn parity_ok(&self, codeword: &[u8]) -> bool {
        self.check_adj.iter().all(|adj| {
            adj.iter().fold(0u8, |acc, &v| acc ^ (codeword[v as usize] & 1)) == 0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn regular_512_256_shape() {
        let code = build_code(512, 256, 1).unwrap();
        assert_eq!(code.codeword_len(), 512);
        assert_eq!(code.message_len(), 256);
        assert_eq!(code.check_count(), 256);
        // Row weight 6 (up to the rare parallel-edge cancellation), column weight 3.
        let mut col_weight = vec![0usize; 512];
        for adj in code.check_adjacency() {
            assert!(adj.len() >= 5 && adj.len() <= 6);
            for &v in adj {
                col_weight[v as usize] += 1;
            }
        }
        let six = code.check_adjacency().iter().filter(|a| a.len() == 6).count();
        assert!(six >= 250, "only {six} checks kept weight 6");
        assert!(col_weight.iter().all(|&w| w >= 2 && w <= 3));
    }

    #[test]
    fn generator_annihilates_parity_checks() {
        let code = build_code(256, 128, 7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..128).map(|_| rng.random_range(0..2u8)).collect();
            let cw = code.encode(&msg).unwrap();
            assert!(code.parity_ok(&cw));
            assert_eq!(code.extract_message(&cw), msg);
        }
    }

    #[test]
    fn encoding_is_linear() {
        let code = build_code(128, 64, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
            let b: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
            let xor: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ca = code.encode(&a).unwrap();
            let cb = code.encode(&b).unwrap();
            let cx = code.encode(&xor).unwrap();
            for i in 0..128 {
                assert_eq!(cx[i], ca[i] ^ cb[i]);
            }
        }
    }

    #[test]
    fn all_zero_message_gives_all_zero_codeword() {
        let code = build_code(512, 256, 1).unwrap();
        let cw = code.encode(&vec![0u8; 256]).unwrap();
        assert!(cw.iter().all(|&b| b == 0));
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_code(512, 256, 9).unwrap();
        let b = build_code(512, 256, 9).unwrap();
        assert_eq!(a.check_adjacency(), b.check_adjacency());
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(build_code(8, 8, 1).is_err());
        assert!(build_code(8, 0, 1).is_err());
        let code = build_code(64, 32, 1).unwrap();
        assert!(code.encode(&vec![0u8; 31]).is_err());
    }

    #[test]
    fn few_four_cycles_remain() {
        let code = build_code(512, 256, 1).unwrap();
        let mut pairs = std::collections::HashMap::new();
        let mut cycles = 0usize;
        for adj in code.check_adjacency() {
            for (i, &a) in adj.iter().enumerate() {
                for &b in &adj[i + 1..] {
                    let key = (a.min(b), a.max(b));
                    *pairs.entry(key).or_insert(0usize) += 1;
                }
            }
        }
        for (_, c) in pairs {
            if c > 1 {
                cycles += c - 1;
            }
        }
        assert!(cycles < 20, "{cycles} four-cycles left");
    }
}
