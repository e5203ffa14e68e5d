use std::fmt;

use serde::{Serialize, Serializer};

use super::extension::{horizon_for, minimal_extension_with, ExtensionOptions};
use super::GluedDiagram;
use crate::cone::{extreme_rays, stable_extreme_rays, ConeApprox, ConeVector, GaugedSystem};
use crate::{Error, Result};

/// Tail target for face generators, per unit mass.
pub const FACE_TOL: f64 = 1e-10;
/// Most seed levels summed for a face generator.
pub const FACE_HORIZON: usize = 240;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    FiniteDisjointUnion,
    OnePointCompactification,
    Unstable,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::FiniteDisjointUnion => "finite disjoint union",
            Topology::OnePointCompactification => "one-point compactification",
            Topology::Unstable => "unstable",
        })
    }
}

impl Serialize for Topology {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceCount {
    pub seed: usize,
    pub count: usize,
    pub stable: bool,
}

/// Extreme-ray representatives of every face, placed in the glued cone.
#[derive(Clone, Debug)]
pub struct FaceGenerators {
    pub beta: f64,
    pub anchor: usize,
    pub depth: usize,
    /// Columns at the anchor level, one per face representative.
    pub approx: ConeApprox,
    /// Seed of each column.
    pub faces: Vec<usize>,
    /// Each representative as a glued cone vector on levels `0..=depth`.
    pub vectors: Vec<ConeVector>,
    pub face_counts: Vec<FaceCount>,
    /// Largest certified truncation bound among the extensions.
    pub max_tail: f64,
}

impl FaceGenerators {
    pub fn stable(&self) -> bool {
        self.face_counts.iter().all(|f| f.stable)
    }
}

/// Default anchor level: the first level on which every seed has left its top vertex.
pub fn default_anchor(g: &GluedDiagram) -> usize {
    g.n_seeds()
}

fn embed_base(
    g: &GluedDiagram,
    gsys: &GaugedSystem,
    v: &ConeVector,
    depth: usize,
) -> Result<ConeVector> {
    let mut hat = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let mut level = vec![0.0; gsys.size(j)];
        for (i, x) in v.hat[j].iter().enumerate() {
            if *x > 0.0 {
                level[i] = (x.ln() - v.ln_rho[j][i] + gsys.ln_rho(j)[i]).exp();
            }
        }
        hat.push(level);
    }
    let _ = g;
    Ok(ConeVector {
        beta: v.beta,
        hat,
        ln_rho: (0..=depth).map(|j| gsys.ln_rho(j).to_vec()).collect(),
    })
}

/// Face-resolved generators of the glued β-KMS cone.
///
/// Each face is a copy of one seed's cone (the base face is `Br^0`'s own
/// cone). The seed's extreme rays are clustered in its own coordinates,
/// where convergence is fast, and the representatives are carried into the
/// glued cone by their certified minimal extensions.
pub fn face_generators(
    g: &GluedDiagram,
    beta: f64,
    anchor: usize,
    depth: usize,
    theta: f64,
    delta: usize,
) -> Result<FaceGenerators> {
    if anchor >= depth {
        return Err(Error::Domain(format!(
            "anchor {anchor} must be below depth {depth}"
        )));
    }
    let gsys = GaugedSystem::new(g.diagram(), beta, depth)?;
    let mut columns = Vec::new();
    let mut faces = Vec::new();
    let mut vectors = Vec::new();
    let mut face_counts = Vec::new();
    let mut max_tail = 0.0f64;

    let base = GaugedSystem::new(g.seed(0), beta, depth + delta)?;
    let rays = stable_extreme_rays(&base, anchor, depth, theta, delta)?;
    let approx = ConeApprox::from_system(&base, anchor, depth)?;
    for &rep in &rays.representatives {
        let v = embed_base(g, &gsys, &approx.generator(&base, rep)?, depth)?;
        columns.push(v.hat[anchor].clone());
        faces.push(0);
        vectors.push(v);
    }
    face_counts.push(FaceCount {
        seed: 0,
        count: rays.count(),
        stable: rays.stable == Some(true),
    });

    for k in 1..g.n_seeds() {
        if k >= anchor || !g.weights[k].converges(beta) {
            continue;
        }
        let a_k = anchor - k;
        let need =
            horizon_for(&g.weights[k], beta, 1.0, FACE_TOL, FACE_HORIZON).unwrap_or(FACE_HORIZON);
        let j_s = (depth - k).max(need).max(a_k + 1);
        let sys = GaugedSystem::new(g.seed(k), beta, j_s + delta)?;
        let rays = stable_extreme_rays(&sys, a_k, j_s, theta, delta)?;
        let approx = ConeApprox::from_system(&sys, a_k, j_s)?;
        for &rep in &rays.representatives {
            let seed_vec = approx.generator(&sys, rep)?;
            let ext = minimal_extension_with(
                g,
                k,
                &seed_vec,
                beta,
                depth,
                ExtensionOptions::best_effort(FACE_TOL, j_s),
            )?;
            max_tail = max_tail.max(ext.tail);
            let v = ext.values.expect("interval contains β");
            columns.push(v.hat[anchor].clone());
            faces.push(k);
            vectors.push(v);
        }
        face_counts.push(FaceCount {
            seed: k,
            count: rays.count(),
            stable: rays.stable == Some(true),
        });
    }
    let approx = ConeApprox::from_columns(beta, anchor, depth, columns)?;
    Ok(FaceGenerators {
        beta,
        anchor,
        depth,
        approx,
        faces,
        vectors,
        face_counts,
        max_tail,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryReport {
    pub beta: f64,
    /// Indices of the intervals containing β.
    pub active: Vec<usize>,
    /// Whether β lies in infinitely many intervals of the family.
    pub infinitely_many: bool,
    pub faces: Vec<FaceCount>,
    /// Extreme rays of the whole cone after clustering all face representatives.
    pub extreme_rays: usize,
    pub stability_gap: f64,
    pub topology: Topology,
    /// One glued cone vector per extreme ray.
    #[serde(skip)]
    pub generators: Vec<ConeVector>,
}

/// Active intervals, per-face extreme counts and the topology of the extreme boundary.
pub fn boundary_report(
    g: &GluedDiagram,
    beta: f64,
    depth: usize,
    theta: f64,
) -> Result<BoundaryReport> {
    boundary_report_with(
        g,
        beta,
        default_anchor(g).min(depth - 1),
        depth,
        theta,
        crate::cone::DEFAULT_DELTA,
    )
}

pub fn boundary_report_with(
    g: &GluedDiagram,
    beta: f64,
    anchor: usize,
    depth: usize,
    theta: f64,
    delta: usize,
) -> Result<BoundaryReport> {
    let fg = face_generators(g, beta, anchor, depth, theta, delta)?;
    let rays = extreme_rays(&fg.approx, theta)?;
    let active = g.active(beta);
    let infinitely_many = g.infinite_family && active.len() > 1;
    let topology = if !fg.stable() || rays.ambiguous {
        Topology::Unstable
    } else if infinitely_many {
        Topology::OnePointCompactification
    } else {
        Topology::FiniteDisjointUnion
    };
    Ok(BoundaryReport {
        beta,
        active,
        infinitely_many,
        faces: fg.face_counts,
        extreme_rays: rays.count(),
        stability_gap: rays.stability_gap(),
        topology,
        generators: rays
            .representatives
            .iter()
            .map(|&i| fg.vectors[i].clone())
            .collect(),
    })
}
