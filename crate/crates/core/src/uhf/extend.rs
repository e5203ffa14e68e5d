use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use serde::Serialize;

use super::embed::Embedding;
use super::schedule::{ln_epsilon_range, ln_norm};
use crate::diagram::{LevelBlock, LevelSource, LeveledDiagram};
use crate::numeric::{ln_big, LN2};
use crate::spectral::{ln_transfer, LogMatrix};
use crate::{Error, Result};

/// Absolute accuracy of the bisection for `t_k`.
pub const T_TOL: f64 = 1e-6;
/// Initial upper end of the bisection; doubled until both conditions hold.
pub const T_START: f64 = 1e4;
const T_CAP: f64 = 1e300;

/// Potential `t_k` given to the new arrows of level `k`, with the data it was fitted to.
#[derive(Clone, Debug, Serialize)]
pub struct ExtendedLevel {
    pub level: usize,
    pub t: f64,
    /// β-uniform `ln ε_k`.
    pub ln_eps: f64,
    /// `ln‖B(k)‖`.
    pub ln_extra_norm: f64,
    #[serde(skip)]
    pub block: LevelBlock,
}

/// `B(k)`: counts of new arrows, transfer orientation (rows level `k-1`).
fn extra_log_matrix(extra: &[Vec<BigUint>]) -> LogMatrix {
    LogMatrix::from_fn(extra.len(), extra[0].len(), |r, c| ln_big(&extra[r][c]))
}

/// `max_{β ∈ {1/k, k}} ln(‖A - A'‖ / ε_k)`; nonpositive when the first condition holds.
pub fn condition_one_excess(ln_extra_norm: f64, ln_eps: f64, k: usize, t: f64) -> f64 {
    let lo = 1.0 / k as f64;
    [lo, k as f64]
        .iter()
        .map(|b| ln_extra_norm - b * t - ln_eps)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max ln(A(β)_{wv} / (e^{-βt} B_{wv}) / (1/2))` over entries and the given β.
pub fn condition_two_excess(base: &[(f64, LogMatrix)], extra: &LogMatrix, t: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (beta, a) in base {
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                worst = worst.max(a.get(r, c) + beta * t - extra.get(r, c) + LN2);
            }
        }
    }
    worst
}

/// Smallest `t` (to [`T_TOL`]) meeting both conditions of the potential extension at level `k`.
///
/// Both excesses decrease in `t`, and the second is convex in β, so checking
/// `β = -k` and `β = -1/k` covers the whole range `[-k, -1/k]`.
pub fn fit_t(base: &LeveledDiagram, emb: &Embedding, k: usize, ln_eps: f64) -> Result<(f64, f64)> {
    let extra = extra_log_matrix(&emb.extra_counts(k)?);
    let ln_extra_norm = ln_norm(&extra);
    let negs: Vec<(f64, LogMatrix)> = [-(k as f64), -1.0 / k as f64]
        .iter()
        .map(|&b| ln_transfer(base, k, b).map(|m| (b, m)))
        .collect::<Result<_>>()?;
    let ok = |t: f64| {
        condition_one_excess(ln_extra_norm, ln_eps, k, t) <= 0.0
            && condition_two_excess(&negs, &extra, t) <= 0.0
    };
    if ok(0.0) {
        return Ok((T_TOL, ln_extra_norm));
    }
    let mut hi = T_START;
    while !ok(hi) {
        hi *= 2.0;
        if hi > T_CAP {
            return Err(Error::Domain(format!(
                "no potential up to {T_CAP:e} satisfies level {k}"
            )));
        }
    }
    let mut lo = 0.0;
    while hi - lo > T_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, ln_extra_norm))
}

/// Level `k` of `Br'` with the original arrows keeping `F` and the new ones carrying `t_k`.
pub fn extend_potential(base: &LeveledDiagram, emb: &Embedding, k: usize) -> Result<ExtendedLevel> {
    let mut ln_eps = f64::INFINITY;
    for i in 1..=k {
        ln_eps = ln_eps.min(ln_epsilon_range(base, i)?.0);
    }
    extend_with_eps(base, emb, k, ln_eps)
}

/// Level `k` against a given β-uniform `ln ε_k`.
fn extend_with_eps(
    base: &LeveledDiagram,
    emb: &Embedding,
    k: usize,
    ln_eps: f64,
) -> Result<ExtendedLevel> {
    let (t, ln_extra_norm) = fit_t(base, emb, k, ln_eps)?;
    let extra = emb.extra_counts(k)?;
    let mut block = base.block(k)?.as_ref().clone();
    for (r, row) in extra.into_iter().enumerate() {
        for (c, n) in row.into_iter().enumerate() {
            block.get_mut(r, c).add(t, n);
        }
    }
    Ok(ExtendedLevel {
        level: k,
        t,
        ln_eps,
        ln_extra_norm,
        block,
    })
}

#[derive(Debug)]
struct ExtendedSource {
    base: LeveledDiagram,
    emb: Embedding,
    memo: Arc<Mutex<HashMap<usize, ExtendedLevel>>>,
}

impl ExtendedSource {
    fn level(&self, k: usize) -> Result<ExtendedLevel> {
        if let Some(l) = self.memo.lock().unwrap().get(&k) {
            return Ok(l.clone());
        }
        // ε_k is a running minimum over levels, so fill in the levels above first.
        let mut prev = f64::INFINITY;
        for i in 1..=k {
            if let Some(l) = self.memo.lock().unwrap().get(&i) {
                prev = l.ln_eps;
                continue;
            }
            let ln_eps = ln_epsilon_range(&self.base, i)?.0.min(prev);
            let l = extend_with_eps(&self.base, &self.emb, i, ln_eps)?;
            prev = l.ln_eps;
            self.memo.lock().unwrap().insert(i, l);
        }
        Ok(self.memo.lock().unwrap()[&k].clone())
    }
}

impl LevelSource for ExtendedSource {
    fn level_size(&self, level: usize) -> Result<usize> {
        self.base.level_size(level)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        Ok(self.level(level)?.block)
    }

    fn depth_limit(&self) -> Option<usize> {
        self.base.depth_limit()
    }
}

/// `Br'` carrying the extended potential `F'`, built lazily level by level.
#[derive(Clone, Debug)]
pub struct ExtendedDiagram {
    pub embedding: Embedding,
    memo: Arc<Mutex<HashMap<usize, ExtendedLevel>>>,
    diagram: LeveledDiagram,
}

impl ExtendedDiagram {
    pub fn new(embedding: Embedding) -> Self {
        let memo = Arc::new(Mutex::new(HashMap::new()));
        let src = ExtendedSource {
            base: embedding.base().clone(),
            emb: embedding.clone(),
            memo: memo.clone(),
        };
        Self {
            embedding,
            memo,
            diagram: LeveledDiagram::from_source(src),
        }
    }

    pub fn diagram(&self) -> &LeveledDiagram {
        &self.diagram
    }

    pub fn level(&self, k: usize) -> Result<ExtendedLevel> {
        self.diagram.block(k)?;
        Ok(self.memo.lock().unwrap()[&k].clone())
    }

    pub fn t(&self, k: usize) -> Result<f64> {
        Ok(self.level(k)?.t)
    }
}
