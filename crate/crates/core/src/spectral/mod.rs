//! β-dependent transfer matrices, the cross-ratio φ and finite-level KMS
//! bookkeeping.

mod local;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::diagram::LeveledDiagram;
use crate::numeric::LN2;
use crate::{Error, Result};

pub use local::{
    cone_from_state, kms_defect, local_basis, state_from_cone, KmsFunctionalTable,
    LocalAlgebraBasis, LocalPath, DEFAULT_PATH_CAP,
};

/// Inverse temperature, always finite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct BetaValue(f64);

impl BetaValue {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("β must be finite, got {beta}")));
        }
        Ok(Self(beta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Matrix stored entrywise as natural logarithms (`-inf` for zero).
#[derive(Clone, Debug, PartialEq)]
pub struct LogMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LogMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Largest log-entry.
    pub fn ln_max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ln ||M||_2` (largest singular value).
    pub fn ln_norm2(&self) -> f64 {
        let s = self.ln_max();
        if s == f64::NEG_INFINITY {
            return s;
        }
        let m = DMatrix::from_fn(self.rows, self.cols, |r, c| (self.get(r, c) - s).exp());
        s + m.singular_values().max().ln()
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| *x > f64::NEG_INFINITY)
    }

    /// Entrywise `e^x`; fails if an entry exceeds the `f64` range.
    pub fn exp(&self) -> Result<DMatrix<f64>> {
        let hi = 1022.0 * LN2;
        let lo = -1022.0 * LN2;
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let x = self.get(r, c);
                if x > hi {
                    return Err(Error::Overflow(format!(
                        "transfer entry e^{x:.3} at ({r}, {c})"
                    )));
                }
                m[(r, c)] = if x == f64::NEG_INFINITY {
                    0.0
                } else if x < lo {
                    f64::MIN_POSITIVE
                } else {
                    x.exp()
                };
            }
        }
        Ok(m)
    }
}

/// `A^(j)(β)` as entrywise logarithms; rows index level `j-1`, columns level `j`.
pub fn ln_transfer(d: &LeveledDiagram, level: usize, beta: f64) -> Result<LogMatrix> {
    BetaValue::new(beta)?;
    let b = d.block(level)?;
    Ok(LogMatrix::from_fn(b.rows(), b.cols(), |r, c| {
        b.get(r, c).ln_weight(beta)
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub level: usize,
    pub beta: f64,
    pub matrix: DMatrix<f64>,
}

/// `A^(j)(β)_{v,w} = Σ_a e^{-β F(a)}` over arrows `a` from `v` to `w`.
///
/// Entries below `2^-1022` are clamped up to it; entries above `2^1022`
/// produce [`Error::Overflow`].
pub fn transfer_matrix(d: &LeveledDiagram, level: usize, beta: f64) -> Result<TransferMatrix> {
    Ok(TransferMatrix {
        level,
        beta,
        matrix: ln_transfer(d, level, beta)?.exp()?,
    })
}

/// Cross-ratio `φ(B) = min B_xy B_x'y' / (B_x'y B_xy')` of a strictly positive matrix.
pub fn phi(b: &DMatrix<f64>) -> Result<f64> {
    if b.is_empty() {
        return Err(Error::Domain("φ of an empty matrix".into()));
    }
    if b.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain(
            "φ needs a strictly positive finite matrix".into(),
        ));
    }
    let (n, m) = b.shape();
    if n <= 64 && m <= 64 {
        let mut best = 1.0f64;
        for x in 0..n {
            for x2 in 0..n {
                for y in 0..m {
                    for y2 in 0..m {
                        let v = (b[(x, y)] / b[(x2, y)]) * (b[(x2, y2)] / b[(x, y2)]);
                        best = best.min(v);
                    }
                }
            }
        }
        return Ok(best);
    }
    // Minimizing over x and x' separately gives the same value in O(n m^2).
    let mut best = 1.0f64;
    for y in 0..m {
        for y2 in 0..m {
            let a = (0..n)
                .map(|x| b[(x, y)] / b[(x, y2)])
                .fold(f64::INFINITY, f64::min);
            let c = (0..n)
                .map(|x| b[(x, y2)] / b[(x, y)])
                .fold(f64::INFINITY, f64::min);
            best = best.min(a * c);
        }
    }
    Ok(best)
}

/// `ln φ` for a matrix given by log-entries; `None` if some entry is zero.
pub fn ln_phi(b: &LogMatrix) -> Option<f64> {
    if !b.is_positive() {
        return None;
    }
    let (n, m) = (b.rows(), b.cols());
    let mut best = 0.0f64;
    for y in 0..m {
        for y2 in 0..m {
            let a = (0..n)
                .map(|x| b.get(x, y) - b.get(x, y2))
                .fold(f64::INFINITY, f64::min);
            let c = (0..n)
                .map(|x| b.get(x, y2) - b.get(x, y))
                .fold(f64::INFINITY, f64::min);
            best = best.min(a + c);
        }
    }
    Some(best)
}

/// Birkhoff contraction coefficient `(1 - √φ) / (1 + √φ)`.
pub fn birkhoff_tau(phi: f64) -> f64 {
    let s = phi.sqrt();
    (1.0 - s) / (1.0 + s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationBounds {
    pub phi_b: f64,
    /// Lower bound on `φ(B + A)`.
    pub plus: f64,
    /// Lower bound on `φ(B - A)`; present when `ε < 1`.
    pub minus: Option<f64>,
}

/// Lower bounds on `φ(B ± A)` when `0 <= A <= ε B` entrywise.
pub fn phi_perturbation_bounds(
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    eps: f64,
) -> Result<PerturbationBounds> {
    if b.shape() != a.shape() {
        return Err(Error::Domain("perturbation has the wrong shape".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    for (x, y) in a.iter().zip(b.iter()) {
        if *x < 0.0 {
            return Err(Error::Domain("perturbation has a negative entry".into()));
        }
        if *x > eps * y * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "entry ratio {} exceeds ε = {eps}",
                x / y
            )));
        }
    }
    let phi_b = phi(b)?;
    Ok(PerturbationBounds {
        phi_b,
        plus: phi_b / ((1.0 + eps) * (1.0 + eps)),
        minus: (eps < 1.0).then(|| (1.0 - eps) * (1.0 - eps) * phi_b),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrivialityReport {
    pub beta: f64,
    /// `√φ(A^(j)(β))` per level; `None` where the matrix has a zero entry.
    pub terms: Vec<Option<f64>>,
    /// Partial sums `P_J = Σ_{j<=J} √φ(A^(j)(β))`, skipping flagged levels.
    pub partial_sums: Vec<f64>,
    /// Levels whose transfer matrix is not strictly positive.
    pub flagged: Vec<usize>,
}

impl TrivialityReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Partial sums of `√φ` over levels `1..=depth`; divergence of these sums
/// forces a single KMS ray.
pub fn triviality_report(d: &LeveledDiagram, beta: f64, depth: usize) -> Result<TrivialityReport> {
    let mut terms = Vec::with_capacity(depth);
    let mut partial_sums = Vec::with_capacity(depth);
    let mut flagged = Vec::new();
    let mut acc = 0.0;
    for j in 1..=depth {
        let t = ln_phi(&ln_transfer(d, j, beta)?).map(|l| (0.5 * l).exp());
        match t {
            Some(v) => acc += v,
            None => flagged.push(j),
        }
        terms.push(t);
        partial_sums.push(acc);
    }
    Ok(TrivialityReport {
        beta,
        terms,
        partial_sums,
        flagged,
    })
}
