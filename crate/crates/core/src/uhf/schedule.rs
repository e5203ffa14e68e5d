use serde::Serialize;

use crate::cone::GaugedSystem;
use crate::diagram::LeveledDiagram;
use crate::numeric::{log_add, LN2};
use crate::spectral::{ln_transfer, LogMatrix};
use crate::{Error, Result};

/// Samples of `[1/k, k]` used for the β-uniform schedule.
pub const RANGE_SAMPLES: usize = 17;
/// Extra factor on the β-uniform schedule, covering the gaps between samples.
pub const RANGE_SAFETY: f64 = 0.5;
/// Matrices larger than this use a norm upper bound instead of an SVD.
pub const SVD_LIMIT: usize = 32;

/// `ln(1 - 2^-53)`: keeps `ε_k` strictly below 1.
const LN_BELOW_ONE: f64 = -1.1102230246251565e-16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaChoice {
    Fixed(f64),
    /// `[1/k, k]` for level `k`.
    Range,
    /// Matrices supplied directly.
    Explicit,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSchedule {
    /// First index `N` the bound is imposed on.
    pub start: usize,
    pub choice: BetaChoice,
    /// `ln ε_k` for `k = start, start+1, ...`.
    pub ln_eps: Vec<f64>,
    /// `ln L_k` at the binding sample.
    pub ln_l: Vec<f64>,
    /// `ln Π_{j<k} (‖A^(j)‖ + 1)` at the binding sample.
    pub ln_norm_product: Vec<f64>,
}

impl EpsilonSchedule {
    pub fn ln_eps(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.start)
            .and_then(|i| self.ln_eps.get(i))
            .copied()
    }

    pub fn eps(&self, k: usize) -> Option<f64> {
        self.ln_eps(k).map(f64::exp)
    }

    pub fn depth(&self) -> usize {
        self.start + self.ln_eps.len() - 1
    }
}

/// `ln‖A‖₂`, or an upper bound `min(‖A‖_F, √(‖A‖₁‖A‖∞))` for large matrices.
pub fn ln_norm(m: &LogMatrix) -> f64 {
    if m.rows().max(m.cols()) <= SVD_LIMIT {
        return m.ln_norm2();
    }
    let lse = |xs: Vec<f64>| crate::numeric::log_sum_exp(xs);
    let frob = 0.5
        * lse((0..m.rows())
            .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
            .map(|(r, c)| 2.0 * m.get(r, c))
            .collect());
    let one = (0..m.cols())
        .map(|c| lse((0..m.rows()).map(|r| m.get(r, c)).collect()))
        .fold(f64::NEG_INFINITY, f64::max);
    let inf = (0..m.rows())
        .map(|r| lse((0..m.cols()).map(|c| m.get(r, c)).collect()))
        .fold(f64::NEG_INFINITY, f64::max);
    frob.min(0.5 * (one + inf))
}

/// `ln` of the right-hand side `2^-k (L_k Π_{j<k}(‖A^(j)‖+1))^-1`, capped below 0.
pub fn ln_epsilon_rhs(k: usize, ln_l: f64, ln_norm_product: f64) -> f64 {
    (-(k as f64) * LN2 - ln_l - ln_norm_product).min(LN_BELOW_ONE)
}

/// `ln L_k = ln √#Br_k + max_w (-ln ρ_k(w))` from the gauge of a system.
pub fn ln_l(sys: &GaugedSystem, k: usize) -> Result<f64> {
    let rho = sys.ln_rho(k);
    let worst = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if worst == f64::NEG_INFINITY {
        return Err(Error::Overflow(format!(
            "L_{k} is infinite: a vertex is unreachable"
        )));
    }
    Ok(0.5 * (rho.len() as f64).ln() - worst)
}

/// `(ln ε_k, ln L_k, ln Π)` for `k = 1..=depth` of one system.
fn per_level(mats: &[LogMatrix], beta: f64) -> Result<Vec<(f64, f64, f64)>> {
    let sys = GaugedSystem::from_log_matrices(beta, mats.to_vec())?;
    let mut out = Vec::with_capacity(mats.len());
    let mut prod = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..=mats.len() {
        let l = ln_l(&sys, k)?;
        // Running minimum: still within the bound, and never increasing in k.
        let e = ln_epsilon_rhs(k, l, prod).min(prev);
        if !e.is_finite() {
            return Err(Error::Overflow(format!("ε_{k} underflows the log domain")));
        }
        prev = e;
        out.push((e, l, prod));
        prod += log_add(ln_norm(&mats[k - 1]), 0.0);
    }
    Ok(out)
}

/// The schedule for an explicit list `ln A^(1), ln A^(2), ...`.
pub fn epsilon_schedule_from_logs(mats: &[LogMatrix], start: usize) -> Result<EpsilonSchedule> {
    if start == 0 || start > mats.len() {
        return Err(Error::Domain(format!(
            "start index {start} outside 1..={}",
            mats.len()
        )));
    }
    let rows = per_level(mats, 0.0)?;
    Ok(collect(start, BetaChoice::Explicit, rows))
}

fn collect(start: usize, choice: BetaChoice, rows: Vec<(f64, f64, f64)>) -> EpsilonSchedule {
    let rows = &rows[start - 1..];
    EpsilonSchedule {
        start,
        choice,
        ln_eps: rows.iter().map(|r| r.0).collect(),
        ln_l: rows.iter().map(|r| r.1).collect(),
        ln_norm_product: rows.iter().map(|r| r.2).collect(),
    }
}

/// Sample points of `[1/k, k]`: both ends and evenly spaced interior points.
pub fn range_samples(k: usize) -> Vec<f64> {
    let (a, b) = (1.0 / k as f64, k as f64);
    if k == 1 {
        return vec![1.0];
    }
    (0..RANGE_SAMPLES)
        .map(|i| a + (b - a) * i as f64 / (RANGE_SAMPLES - 1) as f64)
        .collect()
}

/// `(ln ε_k, ln L, ln Π)` uniform over `β ∈ [1/k, k]` for one level.
pub fn ln_epsilon_range(d: &LeveledDiagram, k: usize) -> Result<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for beta in range_samples(k) {
        let mats = (1..=k)
            .map(|j| ln_transfer(d, j, beta))
            .collect::<Result<Vec<_>>>()?;
        let row = per_level(&mats, beta)?[k - 1];
        if best.map_or(true, |b| row.0 < b.0) {
            best = Some(row);
        }
    }
    let (e, l, p) = best.expect("at least one sample");
    Ok((e + RANGE_SAFETY.ln(), l, p))
}

/// The ε-schedule of a diagram for `k = n..=depth`.
pub fn epsilon_schedule(
    d: &LeveledDiagram,
    choice: BetaChoice,
    n: usize,
    depth: usize,
) -> Result<EpsilonSchedule> {
    if n == 0 || n > depth {
        return Err(Error::Domain(format!(
            "start index {n} outside 1..={depth}"
        )));
    }
    match choice {
        BetaChoice::Fixed(beta) => {
            let mats = (1..=depth)
                .map(|j| ln_transfer(d, j, beta))
                .collect::<Result<Vec<_>>>()?;
            let rows = per_level(&mats, beta)?;
            Ok(collect(n, choice, rows))
        }
        BetaChoice::Range => {
            let mut rows = (1..=depth)
                .map(|k| ln_epsilon_range(d, k))
                .collect::<Result<Vec<_>>>()?;
            for k in 1..rows.len() {
                rows[k].0 = rows[k].0.min(rows[k - 1].0);
            }
            Ok(collect(n, choice, rows))
        }
        BetaChoice::Explicit => Err(Error::Domain(
            "explicit schedules are built from matrices".into(),
        )),
    }
}
