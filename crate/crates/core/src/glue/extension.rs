use serde::Serialize;

use super::{GluedDiagram, WeightSequences};
use crate::cone::{ConeVector, GaugedSystem};
use crate::{Error, Result};

/// Partial sums beyond this certify divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
/// Most terms summed while looking for a divergence witness.
pub const WITNESS_TERM_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug)]
pub struct ExtensionOptions {
    /// Target bound on the neglected tail, natural units.
    pub tol: f64,
    /// Most seed levels summed.
    pub max_horizon: usize,
    /// Fail when `tol` cannot be met instead of returning the best effort.
    pub strict: bool,
}

impl ExtensionOptions {
    pub fn strict(tol: f64) -> Self {
        Self {
            tol,
            max_horizon: 240,
            strict: true,
        }
    }

    pub fn best_effort(tol: f64, max_horizon: usize) -> Self {
        Self {
            tol,
            max_horizon,
            strict: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExtensionStatus {
    Converged,
    /// `witness` is a certified lower bound on the partial sums at the top
    /// vertex, per unit of the seed's mass, after `terms` terms.
    Diverged {
        witness: f64,
        terms: usize,
    },
}

#[derive(Clone, Debug)]
pub struct MinimalExtensionResult {
    pub beta: f64,
    pub seed: usize,
    pub status: ExtensionStatus,
    /// The extension on glued levels `0..=depth`; `None` when diverged.
    pub values: Option<ConeVector>,
    /// Certified bound on the truncation error of every `Br^0` value (natural units).
    pub tail: f64,
    /// Seed levels included in the sum.
    pub horizon: usize,
    /// Mass of the seed element.
    pub seed_mass: f64,
}

/// Bound on the sum of the seed-level terms `i > i_max`, per unit mass.
pub(crate) fn tail_after(w: &WeightSequences, beta: f64, i_max: usize) -> f64 {
    w.tail_t(i_max / 2, beta) + (-beta).exp() * w.tail_s((i_max + 1) / 2, beta)
}

/// Smallest seed horizon whose certified tail is below `tol` for mass `r`.
pub(crate) fn horizon_for(
    w: &WeightSequences,
    beta: f64,
    r: f64,
    tol: f64,
    cap: usize,
) -> Option<usize> {
    (0..=cap).find(|&i| r * tail_after(w, beta, i) < tol)
}

fn divergence_witness(w: &WeightSequences, beta: f64) -> (f64, usize) {
    let mut acc = 0.0f64;
    for j in 1..=WITNESS_TERM_CAP {
        let jf = j as f64;
        let t = (w.ln_t(j) - beta * jf).exp();
        let s = (w.ln_s(j) + beta * (jf - 1.0)).exp();
        acc += 0.5 * (t + s);
        if acc > DIVERGENCE_THRESHOLD {
            return (acc, j);
        }
    }
    (acc, WITNESS_TERM_CAP)
}

/// Minimal extension of a seed cone element with a strict tolerance.
pub fn minimal_extension(
    g: &GluedDiagram,
    k: usize,
    psi_k: &ConeVector,
    beta: f64,
    depth: usize,
    tol: f64,
) -> Result<MinimalExtensionResult> {
    minimal_extension_with(g, k, psi_k, beta, depth, ExtensionOptions::strict(tol))
}

/// Extends `ψ_k`, an element of seed `k`'s cone (on `g.seed(k)` at β), to the
/// smallest compatible family on the glued diagram.
///
/// The extension is the limit of pulling `ψ_k` up through the glued
/// transfer matrices from ever deeper levels. The seed's contribution at seed
/// level `i` is bounded by `R t_j e^{-βj}` (`i = 2j`) or `R s_j e^{β(j-1)}`
/// (`i = 2j - 1`), with `R = ψ_k^0`, so the neglected part has a closed-form
/// bound. When that bound is infinite the series diverges; a witness partial
/// sum is returned instead.
pub fn minimal_extension_with(
    g: &GluedDiagram,
    k: usize,
    psi_k: &ConeVector,
    beta: f64,
    depth: usize,
    opts: ExtensionOptions,
) -> Result<MinimalExtensionResult> {
    if k == 0 || k >= g.n_seeds() {
        return Err(Error::Domain(format!("seed index {k} out of range")));
    }
    let w = g.weights[k];
    let r = psi_k.mass();
    if r == 0.0 {
        let sys = GaugedSystem::new(g.diagram(), beta, depth)?;
        let zero = vec![0.0; sys.size(depth)];
        let values = ConeVector::from_level(&sys, depth, &zero)?;
        return Ok(MinimalExtensionResult {
            beta,
            seed: k,
            status: ExtensionStatus::Converged,
            values: Some(values),
            tail: 0.0,
            horizon: 0,
            seed_mass: 0.0,
        });
    }
    if !tail_after(&w, beta, 0).is_finite() {
        let (witness, terms) = divergence_witness(&w, beta);
        return Ok(MinimalExtensionResult {
            beta,
            seed: k,
            status: ExtensionStatus::Diverged { witness, terms },
            values: None,
            tail: f64::INFINITY,
            horizon: 0,
            seed_mass: r,
        });
    }
    let available = psi_k.depth();
    let cap = opts.max_horizon.min(available);
    let i_tol = match horizon_for(&w, beta, r, opts.tol, cap) {
        Some(i) => i,
        None if opts.strict => {
            return Err(Error::ToleranceUnreachable {
                requested: opts.tol,
                best: r * tail_after(&w, beta, cap),
            })
        }
        None => cap,
    };
    let i_max = i_tol.max(depth.saturating_sub(k));
    if i_max > available {
        return Err(Error::DepthExceeded {
            level: i_max,
            available,
        });
    }
    let n = k + i_max;
    let sys = GaugedSystem::new(g.diagram(), beta, n)?;
    let seg = g
        .segment(n, k)?
        .expect("seed is present below its own level");
    let mut top = vec![0.0; sys.size(n)];
    let ln_rho_g = sys.ln_rho(n);
    for u in 0..seg.len {
        let h = psi_k.hat[i_max][u];
        if h > 0.0 {
            top[seg.offset + u] =
                (h.ln() - psi_k.ln_rho[i_max][u] + ln_rho_g[seg.offset + u]).exp();
        }
    }
    let values = ConeVector::from_level(&sys, n, &top)?.truncated(depth);
    Ok(MinimalExtensionResult {
        beta,
        seed: k,
        status: ExtensionStatus::Converged,
        values: Some(values),
        tail: r * tail_after(&w, beta, i_max),
        horizon: i_max,
        seed_mass: r,
    })
}

/// Restriction of a glued cone vector to seed `k`, in the gauge of `seed_sys`.
pub(crate) fn restrict_to_seed(
    g: &GluedDiagram,
    k: usize,
    psi: &ConeVector,
    seed_sys: &GaugedSystem,
) -> Result<ConeVector> {
    let levels = psi.depth().saturating_sub(k).min(seed_sys.depth());
    let mut hat = Vec::with_capacity(levels + 1);
    for i in 0..=levels {
        let n = k + i;
        let seg = g.segment(n, k)?.expect("seed present");
        let rho_k = seed_sys.ln_rho(i);
        hat.push(
            (0..seg.len)
                .map(|u| {
                    let x = psi.hat[n][seg.offset + u];
                    if x > 0.0 {
                        (x.ln() - psi.ln_rho[n][seg.offset + u] + rho_k[u]).exp()
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    Ok(ConeVector {
        beta: psi.beta,
        hat,
        ln_rho: (0..=levels).map(|i| seed_sys.ln_rho(i).to_vec()).collect(),
    })
}

/// Splits a glued cone vector into its faces: the minimal extension of its
/// restriction to each seed whose interval contains β, and the remainder on
/// `Br^0`. Component 0 (the remainder) comes first.
///
/// Entrywise checks use the gauged values, which are fractions of the mass.
pub fn decompose(
    g: &GluedDiagram,
    psi: &ConeVector,
    beta: f64,
    depth: usize,
    tol: f64,
) -> Result<Vec<(usize, ConeVector)>> {
    if psi.depth() < depth {
        return Err(Error::DepthExceeded {
            level: depth,
            available: psi.depth(),
        });
    }
    let mut rem = psi.truncated(depth);
    let mut comps = Vec::new();
    for k in 1..g.n_seeds() {
        if k > psi.depth() {
            break;
        }
        let seed_sys = GaugedSystem::new(g.seed(k), beta, psi.depth() - k)?;
        let psi_k = restrict_to_seed(g, k, psi, &seed_sys)?;
        if !g.weights[k].converges(beta) {
            if psi_k.mass() > tol {
                return Err(Error::NotInCone(format!(
                    "mass {:e} on seed {k}, whose interval does not contain β = {beta}",
                    psi_k.mass()
                )));
            }
            continue;
        }
        let ext = minimal_extension(g, k, &psi_k, beta, depth, tol)?;
        let v = ext.values.expect("converged");
        rem = rem.axpy(-1.0, &v)?;
        comps.push((k, v));
    }
    for (j, level) in rem.hat.iter().enumerate() {
        for (v, x) in level.iter().enumerate() {
            if *x < -tol {
                return Err(Error::NegativeRemainder {
                    level: j,
                    vertex: v,
                    value: *x,
                });
            }
        }
    }
    comps.insert(0, (0, rem));
    Ok(comps)
}
