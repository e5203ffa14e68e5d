use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use super::embed::{Embedding, EmbeddingCertificate};
use super::extend::ExtendedDiagram;
use crate::cone::{extreme_rays, stable_extreme_rays, ConeApprox, ConeVector, GaugedSystem};
use crate::diagram::{DSequence, LeveledDiagram};
use crate::glue::{default_anchor, face_generators, FaceCount, GluedDiagram};
use crate::spec::UhfSpec;
use crate::{Error, Result};

/// Largest level of the realized diagram on which tensor vectors are checked directly.
pub const TENSOR_CHECK_CAP: usize = 256;

/// One tensor factor: `(G, ±F)` embedded into a UHF factor with extended potential.
#[derive(Clone, Debug)]
pub struct Factor {
    /// `+1` for the factor carrying `F`, `-1` for the one carrying `-F`.
    pub sign: f64,
    pub extended: ExtendedDiagram,
}

impl Factor {
    pub fn diagram(&self) -> &LeveledDiagram {
        self.extended.diagram()
    }

    pub fn embedding(&self) -> &Embedding {
        &self.extended.embedding
    }

    pub fn certificate(&self, depth: usize) -> Result<EmbeddingCertificate> {
        self.embedding().certificate(depth)
    }
}

/// The action diagram on `U = U⁺ ⊗ U⁻` realizing a glued diagram.
#[derive(Clone, Debug)]
pub struct Realization {
    pub glued: GluedDiagram,
    pub uhf: DSequence,
    pub plus: Factor,
    pub minus: Factor,
    diagram: LeveledDiagram,
}

impl Realization {
    /// Tensor diagram with potential `F⁺(a) - F⁻(a')`.
    pub fn diagram(&self) -> &LeveledDiagram {
        &self.diagram
    }

    /// Path count of level `j` next to the product of the UHF factors consumed so far.
    pub fn path_count_check(&self, level: usize) -> Result<(BigUint, BigUint)> {
        let count = self.diagram.path_counts(level)?.total();
        let mut expected = BigUint::one();
        for f in [&self.plus, &self.minus] {
            let end = f.embedding().window(level)?.end;
            for i in 1..=end {
                expected *= f.embedding().d().get(i).expect("consumed factor exists");
            }
        }
        Ok((count, expected))
    }
}

/// Builds `U⁺` from `d_1, d_3, ...` and `U⁻` from `d_2, d_4, ...`, embeds
/// `(G, F)` and `(G, -F)` and tensors the two extended diagrams.
pub fn realize_on_uhf(g: &GluedDiagram, u: &UhfSpec, window_cap: usize) -> Result<Realization> {
    u.validate()?;
    let (dp, dm) = u.d.split_alternating()?;
    if dp.len() == Some(0) || dm.len() == Some(0) {
        return Err(Error::Spec("both UHF halves need factors".into()));
    }
    let plus = Factor {
        sign: 1.0,
        extended: ExtendedDiagram::new(Embedding::new(g.diagram(), dp, window_cap)?),
    };
    let minus = Factor {
        sign: -1.0,
        extended: ExtendedDiagram::new(Embedding::new(&g.diagram().negated(), dm, window_cap)?),
    };
    let diagram = plus.diagram().tensor(minus.diagram());
    Ok(Realization {
        glued: g.clone(),
        uhf: u.d.clone(),
        plus,
        minus,
        diagram,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizedReport {
    pub beta: f64,
    /// Factor whose cone copies the glued one: `"plus"` for β > 0.
    pub active_factor: &'static str,
    pub anchor: usize,
    pub faces: Vec<FaceCount>,
    /// Count of the glued diagram's own cone.
    pub glued_count: usize,
    /// Count after transport into the active factor.
    pub active_count: usize,
    /// Count of the other factor's cone; 1 when it collapses.
    pub collapse_count: usize,
    pub extreme_rays: usize,
    pub stability_gap: f64,
    pub stable: bool,
    /// Largest l¹ gap between a transported column and the glued column, both normalized.
    pub transport_gap: f64,
    /// Compatibility residual of the tensor generators on the realized diagram.
    pub tensor_residual: Option<f64>,
    /// Tensor generators on the realized diagram, when checked.
    #[serde(skip)]
    pub generators: Vec<ConeVector>,
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Hat vector of `ψ` (from any system) in the gauge of `sys` at `level`.
fn regauge(v: &ConeVector, sys: &GaugedSystem, level: usize) -> Vec<f64> {
    (0..sys.size(level))
        .map(|w| {
            if v.hat[level][w] > 0.0 {
                (v.ln_natural(level, w) + sys.ln_rho(level)[w]).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Extreme rays of the realized β-KMS cone at finite depth.
pub fn realized_report(
    r: &Realization,
    beta: f64,
    depth: usize,
    theta: f64,
    delta: usize,
) -> Result<RealizedReport> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Domain(
            "the realized cone is studied for finite β != 0".into(),
        ));
    }
    let g = &r.glued;
    let anchor = default_anchor(g).min(depth - 1);
    let fg = face_generators(g, beta, anchor, depth, theta, delta)?;
    let glued = extreme_rays(&fg.approx, theta)?;

    // The plus factor sees β and the minus factor -β.
    let (act, col, name) = if beta > 0.0 {
        (&r.plus, &r.minus, "plus")
    } else {
        (&r.minus, &r.plus, "minus")
    };
    let (b_act, b_col) = (beta.abs(), -beta.abs());

    let act_sys = GaugedSystem::new(act.diagram(), b_act, depth)?;
    let mut columns = Vec::with_capacity(fg.vectors.len());
    let mut transported = Vec::with_capacity(fg.vectors.len());
    let mut transport_gap = 0.0f64;
    for v in &fg.vectors {
        let tv = ConeVector::from_level(&act_sys, depth, &regauge(v, &act_sys, depth))?;
        let here = regauge(v, &act_sys, anchor);
        let gap: f64 = normalized(&tv.hat[anchor])
            .iter()
            .zip(normalized(&here))
            .map(|(a, b)| (a - b).abs())
            .sum();
        transport_gap = transport_gap.max(gap);
        columns.push(tv.hat[anchor].clone());
        transported.push(tv);
    }
    let active = extreme_rays(
        &ConeApprox::from_columns(b_act, anchor, depth, columns)?,
        theta,
    )?;

    let col_sys = GaugedSystem::new(col.diagram(), b_col, depth + delta)?;
    let collapse = stable_extreme_rays(&col_sys, anchor, depth, theta, delta)?;
    let col_rep = ConeApprox::from_system(&col_sys, anchor, depth)?
        .generator(&col_sys, collapse.representatives[0])?;

    let stable =
        fg.stable() && !glued.ambiguous && !active.ambiguous && collapse.stable == Some(true);
    let gap = active.stability_gap().min(if collapse.count() == 1 {
        f64::INFINITY
    } else {
        collapse.stability_gap()
    });

    let mut tensor_residual = None;
    let mut generators = Vec::new();
    if r.diagram.level_size(depth)? <= TENSOR_CHECK_CAP {
        let sys = GaugedSystem::new(&r.diagram, beta, depth)?;
        let mut worst = 0.0f64;
        for &i in &active.representatives {
            let (p, m) = if beta > 0.0 {
                (&transported[i], &col_rep)
            } else {
                (&col_rep, &transported[i])
            };
            let v = tensor_vector(&sys, p, m, depth);
            worst = worst.max(v.compatibility_residual(&sys));
            generators.push(v);
        }
        tensor_residual = Some(worst);
    }

    Ok(RealizedReport {
        beta,
        active_factor: name,
        anchor,
        faces: fg.face_counts,
        glued_count: glued.count(),
        active_count: active.count(),
        collapse_count: collapse.count(),
        extreme_rays: active.count() * collapse.count(),
        stability_gap: gap,
        stable,
        transport_gap,
        tensor_residual,
        generators,
    })
}

/// `ψ⁺ ⊗ ψ⁻` in the gauge of the realized system.
fn tensor_vector(sys: &GaugedSystem, p: &ConeVector, m: &ConeVector, depth: usize) -> ConeVector {
    let mut hat = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let (np, nm) = (p.hat[j].len(), m.hat[j].len());
        let rho = sys.ln_rho(j);
        let mut level = vec![0.0; np * nm];
        for a in 0..np {
            for b in 0..nm {
                if p.hat[j][a] > 0.0 && m.hat[j][b] > 0.0 {
                    level[a * nm + b] =
                        (p.ln_natural(j, a) + m.ln_natural(j, b) + rho[a * nm + b]).exp();
                }
            }
        }
        hat.push(level);
    }
    let mass = hat[0][0];
    let v = ConeVector {
        beta: sys.beta(),
        hat,
        ln_rho: (0..=depth).map(|j| sys.ln_rho(j).to_vec()).collect(),
    };
    v.scaled(1.0 / mass)
}
