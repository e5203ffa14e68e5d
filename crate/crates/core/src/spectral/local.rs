//! Matrix-unit bookkeeping for the finite-dimensional algebra at level `n`.
//!
//! A level-`n` path is a sequence of arrows from the top vertex. The matrix
//! units `e_{μ,ν}` with `r(μ) = r(ν)` span the algebra, and a KMS state is
//! diagonal on them, so a state is stored as its values on `e_{μ,μ}`.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::diagram::LeveledDiagram;
use crate::{Error, Result};

pub const DEFAULT_PATH_CAP: u64 = 1_000_000;

/// One arrow path from the top vertex down to level `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPath {
    /// `(target vertex, bundle entry, copy index)` per step.
    pub arrows: Vec<(u32, u32, u64)>,
    /// Vertex at level `n` where the path ends.
    pub range: usize,
    /// Summed potential `F(μ)`.
    pub potential: f64,
}

/// All level-`n` paths in lexicographic order, grouped by range.
#[derive(Clone, Debug)]
pub struct LocalAlgebraBasis {
    pub level: usize,
    pub paths: Vec<LocalPath>,
    /// Path indices ending at each vertex of level `n`.
    pub by_range: Vec<Vec<usize>>,
}

impl LocalAlgebraBasis {
    /// Number of matrix units `Σ_v count(v)^2`.
    pub fn matrix_unit_count(&self) -> usize {
        self.by_range.iter().map(|v| v.len() * v.len()).sum()
    }
}

/// Enumerates the level-`n` paths; fails if there are more than `cap`.
pub fn local_basis(d: &LeveledDiagram, n: usize, cap: u64) -> Result<LocalAlgebraBasis> {
    let total = d.path_counts(n)?.total();
    if total > cap.into() {
        return Err(Error::PathCap {
            level: n,
            count: total.to_string(),
            cap,
        });
    }
    let mut paths = vec![LocalPath {
        arrows: Vec::new(),
        range: 0,
        potential: 0.0,
    }];
    for j in 1..=n {
        let block = d.block(j)?;
        let mut next = Vec::new();
        for p in &paths {
            for w in 0..block.cols() {
                for (e, (f, c)) in block.get(p.range, w).entries().iter().enumerate() {
                    let copies = c.to_u64().expect("bounded by the cap");
                    for k in 0..copies {
                        let mut arrows = p.arrows.clone();
                        arrows.push((w as u32, e as u32, k));
                        next.push(LocalPath {
                            arrows,
                            range: w,
                            potential: p.potential + f,
                        });
                    }
                }
            }
        }
        paths = next;
    }
    let mut by_range = vec![Vec::new(); d.level_size(n)?];
    for (i, p) in paths.iter().enumerate() {
        by_range[p.range].push(i);
    }
    Ok(LocalAlgebraBasis {
        level: n,
        paths,
        by_range,
    })
}

/// Diagonal values `ω(e_{μ,μ})` of a functional on the level-`n` algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmsFunctionalTable {
    pub level: usize,
    pub beta: f64,
    pub diag: Vec<f64>,
}

/// The functional with `ω(e_{μ,μ}) = e^{-β F(μ)} ψ_{r(μ)}`.
pub fn state_from_cone(
    basis: &LocalAlgebraBasis,
    beta: f64,
    psi_n: &[f64],
) -> Result<KmsFunctionalTable> {
    if psi_n.len() != basis.by_range.len() {
        return Err(Error::Domain(format!(
            "ψ has {} entries, level has {}",
            psi_n.len(),
            basis.by_range.len()
        )));
    }
    let diag = basis
        .paths
        .iter()
        .map(|p| (-beta * p.potential).exp() * psi_n[p.range])
        .collect();
    Ok(KmsFunctionalTable {
        level: basis.level,
        beta,
        diag,
    })
}

/// Recovers `ψ_v = e^{β F(μ)} ω(e_{μ,μ})`, checking that every path into `v`
/// gives the same value up to relative `tol`.
pub fn cone_from_state(
    basis: &LocalAlgebraBasis,
    beta: f64,
    table: &KmsFunctionalTable,
    tol: f64,
) -> Result<Vec<f64>> {
    if table.diag.len() != basis.paths.len() {
        return Err(Error::Domain("table does not match the basis".into()));
    }
    let mut psi = Vec::with_capacity(basis.by_range.len());
    for ids in &basis.by_range {
        let g = |i: usize| (beta * basis.paths[i].potential).exp() * table.diag[i];
        let first = ids[0];
        let v = g(first);
        for &i in &ids[1..] {
            let gap = (g(i) - v).abs();
            if gap > tol * v.abs().max(g(i).abs()) {
                return Err(Error::InconsistentTable {
                    first,
                    second: i,
                    gap,
                });
            }
        }
        psi.push(v);
    }
    Ok(psi)
}

/// `max |ω(ab) - ω(b α_{iβ}(a))|` over matrix units `a, b`.
///
/// For a diagonal table only pairs `a = e_{μ,ν}`, `b = e_{ν,μ}` can be
/// nonzero, where the defect is `e^{-β F(μ)} |g(μ) - g(ν)|` with
/// `g(μ) = e^{β F(μ)} ω(e_{μ,μ})`. Taking the extreme `g` per range makes this
/// linear in the number of paths.
pub fn kms_defect(basis: &LocalAlgebraBasis, beta: f64, table: &KmsFunctionalTable) -> f64 {
    let mut worst = 0.0f64;
    for ids in &basis.by_range {
        let g: Vec<f64> = ids
            .iter()
            .map(|&i| (beta * basis.paths[i].potential).exp() * table.diag[i])
            .collect();
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (k, &i) in ids.iter().enumerate() {
            let w = (-beta * basis.paths[i].potential).exp();
            worst = worst.max(w * (g[k] - lo).abs().max((hi - g[k]).abs()));
        }
    }
    worst
}
