use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::schedule::EpsilonSchedule;
use crate::spectral::LogMatrix;
use crate::{Error, Result};

/// Relative slack when checking that one system dominates another.
const DOMINATION_SLACK: f64 = 1e-12;

/// Spectral norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// A projective matrix system `A^(1), A^(2), ...` in natural units;
/// `A^(j)` maps level `j` vectors to level `j-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSystem {
    pub mats: Vec<DMatrix<f64>>,
}

impl MatrixSystem {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.is_empty() || mats[0].nrows() != 1 {
            return Err(Error::Domain(
                "a matrix system starts with a single-row matrix".into(),
            ));
        }
        for (j, w) in mats.windows(2).enumerate() {
            if w[0].ncols() != w[1].nrows() {
                return Err(Error::Domain(format!(
                    "A^({}) and A^({}) do not chain",
                    j + 1,
                    j + 2
                )));
            }
        }
        if mats
            .iter()
            .any(|m| m.iter().any(|x| !(*x >= 0.0) || !x.is_finite()))
        {
            return Err(Error::Domain(
                "matrix systems must be nonnegative and finite".into(),
            ));
        }
        Ok(Self { mats })
    }

    pub fn depth(&self) -> usize {
        self.mats.len()
    }

    pub fn get(&self, j: usize) -> &DMatrix<f64> {
        &self.mats[j - 1]
    }

    pub fn norm(&self, j: usize) -> f64 {
        op_norm(self.get(j))
    }

    pub fn log_matrices(&self) -> Vec<LogMatrix> {
        self.mats
            .iter()
            .map(|m| LogMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].ln()))
            .collect()
    }

    /// `A^(from) A^(from+1) ⋯ A^(to) x`.
    pub fn apply(&self, from: usize, to: usize, x: &DVector<f64>) -> DVector<f64> {
        let mut v = x.clone();
        for j in (from..=to).rev() {
            v = self.get(j) * v;
        }
        v
    }

    /// Levels `0..=level` of the compatible family with `ψ^level = top`.
    pub fn family(&self, level: usize, top: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![top.to_vec()];
        let mut v = DVector::from_column_slice(top);
        for j in (1..=level).rev() {
            v = self.get(j) * v;
            out.push(v.as_slice().to_vec());
        }
        out.reverse();
        out
    }

    /// Top-row products `(A^(1)⋯A^(j))_{v_0, ·}`.
    pub fn row_product(&self, j: usize) -> DVector<f64> {
        let mut row = self.get(1).row(0).transpose();
        for i in 2..=j {
            row = self.get(i).transpose() * row;
        }
        row
    }
}

/// `M = max{‖A^(j)‖, ‖B^(j)‖, 1 : j <= N}`.
pub fn m_constant(a: &MatrixSystem, b: &MatrixSystem, n: usize) -> f64 {
    (1..=n.min(a.depth()).min(b.depth()))
        .map(|j| a.norm(j).max(b.norm(j)))
        .fold(1.0, f64::max)
}

/// Checks both hypotheses of the intertwining: row products of `b` dominate
/// those of `a`, and `‖A^(j) - B^(j)‖ <= ε_j` from the schedule start on.
pub fn check_hypotheses(a: &MatrixSystem, b: &MatrixSystem, sched: &EpsilonSchedule) -> Result<()> {
    let depth = a.depth().min(b.depth());
    for j in 1..=depth {
        let (ra, rb) = (a.row_product(j), b.row_product(j));
        if ra
            .iter()
            .zip(rb.iter())
            .any(|(x, y)| *y < x * (1.0 - DOMINATION_SLACK))
        {
            return Err(Error::Domain(format!(
                "row products of B do not dominate those of A at level {j}"
            )));
        }
        if let Some(eps) = sched.eps(j) {
            let gap = op_norm(&(a.get(j) - b.get(j)));
            if gap > eps * (1.0 + DOMINATION_SLACK) {
                return Err(Error::Domain(format!(
                    "‖A^({j}) - B^({j})‖ = {gap:e} exceeds ε_{j} = {eps:e}"
                )));
            }
        }
    }
    Ok(())
}

/// One successive difference of the partial products and its bound.
#[derive(Clone, Debug, Serialize)]
pub struct CauchyStep {
    pub j: usize,
    pub k: usize,
    pub diff: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntertwinerResult {
    /// Mapped levels `0, 1, ...` as far as the tolerance allows.
    pub levels: Vec<Vec<f64>>,
    /// Bound `M^N ψ^0 2^{-j-k}` on the distance of each level to the limit.
    pub bounds: Vec<f64>,
    /// Truncation `k` used for each level.
    pub truncation: Vec<usize>,
    pub m: f64,
    pub n: usize,
    pub steps: Vec<CauchyStep>,
}

fn intertwine(
    target: &MatrixSystem,
    psi: &[Vec<f64>],
    m: f64,
    n: usize,
    tol: f64,
) -> Result<IntertwinerResult> {
    let depth = psi.len() - 1;
    let mass = psi[0][0];
    let scale = m.powi(n as i32) * mass;
    let mut out = IntertwinerResult {
        levels: Vec::new(),
        bounds: Vec::new(),
        truncation: Vec::new(),
        m,
        n,
        steps: Vec::new(),
    };
    for j in 1..=depth.min(target.depth()) {
        let max_k = depth.min(target.depth()) - j;
        let bound = |k: usize| scale * 2f64.powi(-((j + k) as i32));
        let Some(k) = (n..=max_k).find(|&k| bound(k) <= tol) else {
            if j == 1 {
                let best = if max_k >= n {
                    bound(max_k)
                } else {
                    f64::INFINITY
                };
                return Err(Error::ToleranceUnreachable {
                    requested: tol,
                    best,
                });
            }
            break;
        };
        let at = |kk: usize| target.apply(j, j + kk, &DVector::from_column_slice(&psi[j + kk]));
        let mut prev = at(n);
        for kk in n..k {
            let next = at(kk + 1);
            out.steps.push(CauchyStep {
                j,
                k: kk,
                diff: (&next - &prev).norm(),
                bound: scale * 2f64.powi(-((j + kk + 1) as i32)),
            });
            prev = next;
        }
        out.levels.push(prev.as_slice().to_vec());
        out.bounds.push(bound(k));
        out.truncation.push(k);
    }
    Ok(out)
}

/// `(Tψ)^{j-1} ≈ B^(j)⋯B^(j+k) ψ^{j+k}` for `ψ` compatible with `a`.
pub fn intertwine_t(
    psi: &[Vec<f64>],
    a: &MatrixSystem,
    b: &MatrixSystem,
    sched: &EpsilonSchedule,
    tol: f64,
) -> Result<IntertwinerResult> {
    check_hypotheses(a, b, sched)?;
    intertwine(b, psi, m_constant(a, b, sched.start), sched.start, tol)
}

/// `(Sφ)^{j-1} ≈ A^(j)⋯A^(j+k) φ^{j+k}` for `φ` compatible with `b`.
pub fn intertwine_s(
    phi: &[Vec<f64>],
    a: &MatrixSystem,
    b: &MatrixSystem,
    sched: &EpsilonSchedule,
    tol: f64,
) -> Result<IntertwinerResult> {
    check_hypotheses(a, b, sched)?;
    intertwine(a, phi, m_constant(a, b, sched.start), sched.start, tol)
}

/// `max_{j,k}` of `‖A^(j)⋯A^(j+k) B^(j+k+1)⋯B^(J) ψ^J - ψ^{j-1}‖` against
/// `M^N 2^{-j-k} ψ^0`, the round trip through `T` then `S` truncated at `J`.
pub fn roundtrip_steps(
    psi: &[Vec<f64>],
    a: &MatrixSystem,
    b: &MatrixSystem,
    n: usize,
) -> Vec<CauchyStep> {
    let depth = (psi.len() - 1).min(a.depth()).min(b.depth());
    let scale = m_constant(a, b, n).powi(n as i32) * psi[0][0];
    let top = DVector::from_column_slice(&psi[depth]);
    let mut out = Vec::new();
    for j in 1..depth {
        for k in n..depth - j {
            let t = b.apply(j + k + 1, depth, &top);
            let back = a.apply(j, j + k, &t);
            let diff = (back - DVector::from_column_slice(&psi[j - 1])).norm();
            out.push(CauchyStep {
                j,
                k,
                diff,
                bound: scale * 2f64.powi(-((j + k) as i32)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uhf::schedule::epsilon_schedule_from_logs;

    fn system(depth: usize) -> MatrixSystem {
        let mut mats = vec![DMatrix::from_row_slice(1, 2, &[0.6, 0.4])];
        for j in 1..depth {
            let s = 0.3 + 0.05 * (j % 3) as f64;
            mats.push(DMatrix::from_row_slice(2, 2, &[s, 0.2, 0.1, 0.5 - s / 2.0]));
        }
        MatrixSystem::new(mats).unwrap()
    }

    #[test]
    fn identity_when_systems_agree() {
        let a = system(14);
        let sched = epsilon_schedule_from_logs(&a.log_matrices(), 1).unwrap();
        let psi = a.family(14, &[1.0, 2.0]);
        let r = intertwine_t(&psi, &a, &a, &sched, 1e-3).unwrap();
        for (l, v) in r.levels.iter().enumerate() {
            for (x, y) in v.iter().zip(&psi[l]) {
                assert!((x - y).abs() <= 1e-14 * y.abs().max(1.0));
            }
        }
        assert!(r.bounds.iter().all(|b| *b <= 1e-3));
    }

    #[test]
    fn zero_maps_to_zero() {
        let a = system(12);
        let sched = epsilon_schedule_from_logs(&a.log_matrices(), 1).unwrap();
        let zero = a.family(12, &[0.0, 0.0]);
        let r = intertwine_s(&zero, &a, &a, &sched, 1.0).unwrap();
        assert!(r.levels.iter().flatten().all(|x| *x == 0.0));
    }
}
