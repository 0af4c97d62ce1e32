//! Sparse SDPA (`.dat-s`) export of the relaxation.
//!
//! The relaxation `min <H, Q>` s.t. `<A_k, Q> = b_k`, `Q ⪰ 0` is written as
//! the SDPA dual form `max <F0, Y>` s.t. `<F_k, Y> = c_k` with `F0 = -H`,
//! `F_k = A_k` and `c = b`. An external solver therefore reports the negated
//! relaxation cost: `cost = -(SDPA optimum)`.
//!
//! Only the upper triangle is written, one nonzero per line, 1-based indices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::io::IoError;
use crate::sdp::{SdpProblem, SparseConstraint};

/// Parsed contents of a single-block sparse SDPA file.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaModel {
    pub block_size: usize,
    /// Right-hand sides, one per constraint.
    pub c: Vec<f64>,
    /// Upper-triangle entries of `F0`, 0-based.
    pub f0: Vec<(usize, usize, f64)>,
    /// Upper-triangle entries of each `F_k`, 0-based.
    pub f: Vec<Vec<(usize, usize, f64)>>,
}

impl SdpaModel {
    /// `H = -F0` as a dense symmetric matrix.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.block_size, self.block_size);
        for &(i, j, v) in &self.f0 {
            h[(i, j)] = -v;
            h[(j, i)] = -v;
        }
        h
    }

    pub fn constraints(&self) -> Vec<SparseConstraint> {
        self.f
            .iter()
            .zip(&self.c)
            .map(|(entries, &rhs)| SparseConstraint {
                entries: entries.clone(),
                rhs,
            })
            .collect()
    }

    /// `<H, Q>` for the original minimization.
    pub fn objective(&self, q: &DMatrix<f64>) -> f64 {
        -self
            .f0
            .iter()
            .map(|&(i, j, v)| if i == j { v * q[(i, j)] } else { 2.0 * v * q[(i, j)] })
            .sum::<f64>()
    }
}

pub fn write_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\"line fitting relaxation: N={} eps={} relaxation={:?}; cost = -(optimum)",
        p.n, p.eps, p.relaxation
    );
    let _ = writeln!(out, "{}", p.constraints.len());
    out.push_str("1\n");
    let _ = writeln!(out, "{}", p.dim);
    let rhs: Vec<String> = p.constraints.iter().map(|c| c.rhs.to_string()).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    for i in 0..p.dim {
        for j in i..p.dim {
            let v = p.h[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "0 1 {} {} {}", i + 1, j + 1, -v);
            }
        }
    }
    for (k, c) in p.constraints.iter().enumerate() {
        for &(i, j, v) in &c.entries {
            let _ = writeln!(out, "{} 1 {} {} {}", k + 1, i + 1, j + 1, v);
        }
    }
    out
}

pub fn export_sdpa(p: &SdpProblem, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, write_sdpa(p))?;
    Ok(())
}

fn err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads files produced by [`write_sdpa`] and other single-block sparse
/// SDPA files. Separators `,{}()` are treated as whitespace.
pub fn parse_sdpa(text: &str) -> Result<SdpaModel, IoError> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    let mut header_done = false;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if !header_done && (l.starts_with('"') || l.starts_with('*')) {
            continue;
        }
        header_done |= !l.is_empty();
        let cleaned: String = l
            .chars()
            .map(|ch| if ",{}()".contains(ch) { ' ' } else { ch })
            .collect();
        tokens.extend(cleaned.split_whitespace().map(|t| (i + 1, t.to_string())));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| -> Result<(usize, String), IoError> {
        it.next().ok_or_else(|| err(0, format!("unexpected end of file reading {what}")))
    };
    fn int(tok: (usize, String)) -> Result<usize, IoError> {
        tok.1
            .parse()
            .map_err(|_| err(tok.0, format!("expected integer, found {:?}", tok.1)))
    }
    fn real(tok: (usize, String)) -> Result<f64, IoError> {
        tok.1
            .parse()
            .map_err(|_| err(tok.0, format!("expected number, found {:?}", tok.1)))
    }

    let m = int(next("constraint count")?)?;
    let nb = next("block count")?;
    let nb_line = nb.0;
    if int(nb)? != 1 {
        return Err(err(nb_line, "only single-block problems are supported"));
    }
    let size_tok = next("block size")?;
    let size_line = size_tok.0;
    let block_size = real(size_tok)?;
    if block_size <= 0.0 || block_size.fract() != 0.0 {
        return Err(err(size_line, "block size must be a positive integer"));
    }
    let block_size = block_size as usize;
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        c.push(real(next("right-hand side")?)?);
    }
    let mut f0 = Vec::new();
    let mut f = vec![Vec::new(); m];
    while let Some(first) = it.next() {
        let line = first.0;
        let mat = int(first)?;
        let mut field = |what: &str| {
            it.next()
                .ok_or_else(|| err(line, format!("truncated entry, missing {what}")))
        };
        let blk = int(field("block")?)?;
        let i = int(field("row")?)?;
        let j = int(field("column")?)?;
        let v = real(field("value")?)?;
        if blk != 1 {
            return Err(err(line, format!("block {blk} out of range")));
        }
        if i == 0 || j == 0 || i > block_size || j > block_size {
            return Err(err(line, format!("index ({i}, {j}) out of range")));
        }
        let (i, j) = if i <= j { (i - 1, j - 1) } else { (j - 1, i - 1) };
        match mat {
            0 => f0.push((i, j, v)),
            k if k <= m => f[k - 1].push((i, j, v)),
            k => return Err(err(line, format!("matrix {k} out of range"))),
        }
    }
    Ok(SdpaModel {
        block_size,
        c,
        f0,
        f,
    })
}

pub fn import_sdpa(path: &Path) -> Result<SdpaModel, IoError> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}
