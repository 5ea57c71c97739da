//! Textual alist serialization of parity-check matrices.
//!
//! Standard MacKay format: dimensions, maximum degrees, per-column and
//! per-row weights, then 1-based index lists. The reader tolerates the
//! zero-padded variant.

use std::path::Path;

use crate::{Error, Result};

/// Render a parity-check matrix (as per-check variable lists) to alist text.
pub fn to_alist_string(n: usize, check_adj: &[Vec<u32>]) -> String {
    let m = check_adj.len();
    let mut var_adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (c, adj) in check_adj.iter().enumerate() {
        for &v in adj {
            var_adj[v as usize].push(c as u32);
        }
    }
    let max_col = var_adj.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = check_adj.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!("{n} {m}\n{max_col} {max_row}\n"));
    out.push_str(
        &var_adj
            .iter()
            .map(|a| a.len().to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    out.push_str(
        &check_adj
            .iter()
            .map(|a| a.len().to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    for adj in &var_adj {
        let line: Vec<String> = adj.iter().map(|&c| (c + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    for adj in check_adj {
        let line: Vec<String> = adj.iter().map(|&v| (v + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parse alist text into `(n, per-check variable lists)`.
pub fn from_alist_string(text: &str) -> Result<(usize, Vec<Vec<u32>>)> {
    let mut tokens = text.split_whitespace().map(|t| {
        t.parse::<i64>()
            .map_err(|_| Error::Config(format!("bad alist token: {t}")))
    });
    let mut next = || -> Result<i64> {
        tokens
            .next()
            .ok_or_else(|| Error::Config("truncated alist".into()))?
    };
    let n = next()? as usize;
    let m = next()? as usize;
    let _max_col = next()?;
    let _max_row = next()?;
    let col_weights: Vec<usize> = (0..n).map(|_| next().map(|v| v as usize)).collect::<Result<_>>()?;
    let row_weights: Vec<usize> = (0..m).map(|_| next().map(|v| v as usize)).collect::<Result<_>>()?;
    // Per-variable lists (tolerate zero padding).
    for &w in &col_weights {
        let mut seen = 0usize;
        while seen < w {
            let v = next()?;
            if v != 0 {
                seen += 1;
            }
        }
    }
    let mut check_adj: Vec<Vec<u32>> = Vec::with_capacity(m);
    for &w in &row_weights {
        let mut adj = Vec::with_capacity(w);
        while adj.len() < w {
            let v = next()?;
            if v == 0 {
                continue;
            }
            let idx = v - 1;
            if idx < 0 || idx as usize >= n {
                return Err(Error::Config(format!("alist variable index {v} out of range")));
            }
            adj.push(idx as u32);
        }
        adj.sort_unstable();
        check_adj.push(adj);
    }
    Ok((n, check_adj))
}

pub fn write_alist(path: &Path, n: usize, check_adj: &[Vec<u32>]) -> Result<()> {
    std::fs::write(path, to_alist_string(n, check_adj))?;
    Ok(())
}

pub fn read_alist(path: &Path) -> Result<(usize, Vec<Vec<u32>>)> {
    from_alist_string(&std::fs::read_to_string(path)?)
}
