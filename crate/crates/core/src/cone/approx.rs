use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{nnls, ConeVector, GaugedSystem};
use crate::diagram::LeveledDiagram;
use crate::spectral::{birkhoff_tau, ln_phi};
use crate::{Error, Result};

pub const DEFAULT_THETA: f64 = 1e-6;
pub const DEFAULT_DELTA: usize = 5;

/// Generator columns `(A^(m+1)⋯A^(J)) e_w` at the anchor level `m`, each
/// normalized to mass 1.
///
/// Besides the columns, the differences `column_i - column_ref` are carried
/// through the products separately. Their rounding error stays relative to
/// their own size, which keeps tiny Hilbert distances meaningful.
#[derive(Clone, Debug)]
pub struct ConeApprox {
    pub beta: f64,
    pub anchor: usize,
    pub depth: usize,
    pub columns: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
    /// Level-`J` vertex of each column.
    pub provenance: Vec<usize>,
    /// Level-`J` vertices whose column vanished.
    pub dropped: Vec<usize>,
}

impl ConeApprox {
    pub fn from_system(sys: &GaugedSystem, m: usize, j: usize) -> Result<Self> {
        if m >= j {
            return Err(Error::Domain(format!(
                "anchor {m} must lie above the source depth {j}"
            )));
        }
        if j > sys.depth() {
            return Err(Error::DepthExceeded {
                level: j,
                available: sys.depth(),
            });
        }
        let n = sys.size(j);
        let live: Vec<usize> = (0..n)
            .filter(|&w| sys.ln_rho(j)[w] > f64::NEG_INFINITY)
            .collect();
        let dropped: Vec<usize> = (0..n)
            .filter(|&w| sys.ln_rho(j)[w] == f64::NEG_INFINITY)
            .collect();
        let Some(&reference) = live.first() else {
            return Err(Error::InvalidDiagram(format!(
                "no vertex of level {j} is reachable"
            )));
        };
        let mut u = DMatrix::<f64>::identity(n, n);
        let mut x = DMatrix::<f64>::identity(n, n);
        for c in 0..n {
            x[(reference, c)] -= 1.0;
        }
        for k in (m + 1..=j).rev() {
            u = sys.hat(k) * u;
            x = sys.hat(k) * x;
            let p = u.column(reference).clone_owned();
            for c in 0..n {
                let s: f64 = x.column(c).iter().sum();
                let mut col = x.column_mut(c);
                col.axpy(-s, &p, 1.0);
            }
        }
        let mut columns = Vec::new();
        let mut offsets = Vec::new();
        for &w in &live {
            let col = u.column(w);
            let s: f64 = col.iter().sum();
            columns.push(col.iter().map(|v| v / s).collect());
            offsets.push(x.column(w).iter().cloned().collect());
        }
        Ok(Self {
            beta: sys.beta(),
            anchor: m,
            depth: j,
            columns,
            offsets,
            provenance: live,
            dropped,
        })
    }

    /// Approximation from explicitly given columns (normalized here).
    pub fn from_columns(
        beta: f64,
        anchor: usize,
        depth: usize,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Domain("no generator columns".into()));
        }
        let mut normed = Vec::with_capacity(columns.len());
        for c in columns {
            let s: f64 = c.iter().sum();
            if !(s > 0.0) || c.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Domain(
                    "generator column is not a nonzero nonnegative vector".into(),
                ));
            }
            normed.push(c.iter().map(|x| x / s).collect::<Vec<f64>>());
        }
        let offsets = normed
            .iter()
            .map(|c| c.iter().zip(&normed[0]).map(|(a, b)| a - b).collect())
            .collect();
        let provenance = (0..normed.len()).collect();
        Ok(Self {
            beta,
            anchor,
            depth,
            columns: normed,
            offsets,
            provenance,
            dropped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Hilbert distance between columns `a` and `b`, using the carried differences.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let diff: Vec<f64> = self.offsets[a]
            .iter()
            .zip(&self.offsets[b])
            .map(|(x, y)| x - y)
            .collect();
        distance_with_diff(&self.columns[a], &self.columns[b], &diff)
    }

    /// Generator column `i` as a full cone vector on the system it came from.
    pub fn generator(&self, sys: &GaugedSystem, i: usize) -> Result<ConeVector> {
        let mut top = vec![0.0; sys.size(self.depth)];
        top[self.provenance[i]] = 1.0;
        ConeVector::from_level(sys, self.depth, &top)
    }
}

fn log_ratio(num: f64, den: f64, diff: f64) -> f64 {
    let r = diff / den;
    if r.abs() < 0.5 {
        r.ln_1p()
    } else {
        num.ln() - den.ln()
    }
}

fn distance_with_diff(u: &[f64], v: &[f64], diff: &[f64]) -> f64 {
    let mut up = f64::NEG_INFINITY;
    let mut down = f64::NEG_INFINITY;
    let mut any = false;
    for i in 0..u.len() {
        match (u[i] > 0.0, v[i] > 0.0) {
            (false, false) => continue,
            (true, true) => {}
            _ => return f64::INFINITY,
        }
        any = true;
        up = up.max(log_ratio(u[i], v[i], diff[i]));
        down = down.max(log_ratio(v[i], u[i], -diff[i]));
    }
    if !any {
        return 0.0;
    }
    (up + down).max(0.0)
}

/// Hilbert projective distance `ln(max u_i/v_i · max v_i/u_i)` on the common
/// support; infinite if the supports differ.
pub fn hilbert_distance(u: &[f64], v: &[f64]) -> f64 {
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    distance_with_diff(u, v, &diff)
}

/// Largest pairwise Hilbert distance among the generator columns.
pub fn hilbert_diameter(c: &ConeApprox) -> Result<f64> {
    if c.columns.iter().any(|col| col.iter().any(|x| *x == 0.0)) {
        return Err(Error::Domain(
            "a generator column has a zero coordinate; the diameter is infinite".into(),
        ));
    }
    let mut best = 0.0f64;
    for a in 0..c.len() {
        for b in a + 1..c.len() {
            best = best.max(c.distance(a, b));
        }
    }
    Ok(best)
}

/// Generators of `D` at β anchored at level `m` from source depth `j`.
pub fn generators_at(d: &LeveledDiagram, beta: f64, m: usize, j: usize) -> Result<ConeApprox> {
    ConeApprox::from_system(&GaugedSystem::new(d, beta, j)?, m, j)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionStep {
    /// Level `j + 1` whose transfer matrix drives the step.
    pub level: usize,
    pub phi: f64,
    pub tau: f64,
    pub diameter_before: f64,
    pub diameter_after: f64,
    /// `None` once the earlier diameter has collapsed to zero.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub anchor: usize,
    pub depth: usize,
    pub steps: Vec<ContractionStep>,
    /// Product of the Birkhoff factors over all steps.
    pub product: f64,
    pub final_diameter: f64,
}

/// Slack allowed on each measured diameter ratio.
pub const RATIO_SLACK: f64 = 1e-9;

/// Measures diameters of the generator cones from depths `m+1..=J` and checks
/// each step against the Birkhoff factor of the transfer matrix that produced it.
pub fn contraction_check(
    d: &LeveledDiagram,
    beta: f64,
    m: usize,
    j: usize,
) -> Result<ContractionReport> {
    let sys = GaugedSystem::new(d, beta, j)?;
    contraction_check_system(&sys, m, j)
}

pub fn contraction_check_system(
    sys: &GaugedSystem,
    m: usize,
    j: usize,
) -> Result<ContractionReport> {
    let mut phis = Vec::new();
    for k in m + 1..=j {
        let l = ln_phi(sys.ln_transfer(k)).ok_or_else(|| {
            Error::Domain(format!(
                "transfer matrix at level {k} is not strictly positive"
            ))
        })?;
        phis.push(l.exp());
    }
    let mut diam = Vec::new();
    for k in m + 1..=j {
        diam.push(hilbert_diameter(&ConeApprox::from_system(sys, m, k)?)?);
    }
    let mut steps = Vec::new();
    let mut product = 1.0;
    for k in m + 1..j {
        let i = k - m - 1;
        let phi = phis[i + 1];
        let tau = birkhoff_tau(phi);
        product *= tau;
        let (before, after) = (diam[i], diam[i + 1]);
        let ratio = (before > 1e-300).then(|| after / before);
        if let Some(r) = ratio {
            if r > tau + RATIO_SLACK {
                return Err(Error::ContractionViolated {
                    level: k + 1,
                    ratio: r,
                    bound: tau,
                });
            }
        }
        steps.push(ContractionStep {
            level: k + 1,
            phi,
            tau,
            diameter_before: before,
            diameter_after: after,
            ratio,
        });
    }
    Ok(ContractionReport {
        anchor: m,
        depth: j,
        steps,
        product,
        final_diameter: *diam.last().unwrap(),
    })
}

/// Single-linkage clusters of generator columns.
#[derive(Clone, Debug, Serialize)]
pub struct RayClusters {
    pub theta: f64,
    /// Column indices per cluster.
    pub clusters: Vec<Vec<usize>>,
    /// First column of each cluster.
    pub representatives: Vec<usize>,
    pub max_intra: f64,
    /// `+inf` when there is a single cluster.
    pub min_inter: f64,
    pub ambiguous: bool,
    /// Whether a re-run deeper produced the same count; `None` if not checked.
    pub stable: Option<bool>,
}

impl RayClusters {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    /// `min_inter - max_intra`.
    pub fn stability_gap(&self) -> f64 {
        self.min_inter - self.max_intra
    }
}

/// Clusters the columns of `c`: columns closer than `θ` are linked.
pub fn extreme_rays(c: &ConeApprox, theta: f64) -> Result<RayClusters> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("θ must be positive, got {theta}")));
    }
    cluster_by(c.len(), theta, |a, b| c.distance(a, b))
}

pub(crate) fn cluster_by(
    n: usize,
    theta: f64,
    dist: impl Fn(usize, usize) -> f64,
) -> Result<RayClusters> {
    let mut d = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let v = dist(a, b);
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for a in 0..n {
        for b in a + 1..n {
            if d[a * n + b] < theta {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for a in 0..n {
        let r = find(&mut parent, a);
        if label[r] == usize::MAX {
            label[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[label[r]].push(a);
    }
    let mut max_intra = 0.0f64;
    let mut min_inter = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            let same = label[find(&mut parent, a)] == label[find(&mut parent, b)];
            if same {
                max_intra = max_intra.max(d[a * n + b]);
            } else {
                min_inter = min_inter.min(d[a * n + b]);
            }
        }
    }
    let representatives = clusters.iter().map(|c| c[0]).collect();
    Ok(RayClusters {
        theta,
        clusters,
        representatives,
        max_intra,
        min_inter,
        ambiguous: max_intra >= theta,
        stable: None,
    })
}

/// Clusters at depth `J` and re-checks the count at depth `J + Δ`.
pub fn stable_extreme_rays(
    sys: &GaugedSystem,
    m: usize,
    j: usize,
    theta: f64,
    delta: usize,
) -> Result<RayClusters> {
    let mut rays = extreme_rays(&ConeApprox::from_system(sys, m, j)?, theta)?;
    let again = extreme_rays(&ConeApprox::from_system(sys, m, j + delta)?, theta)?;
    rays.stable = Some(again.count() == rays.count() && !rays.ambiguous && !again.ambiguous);
    Ok(rays)
}

/// Largest NNLS residual of the depth-`J+1` generators against the depth-`J` ones.
pub fn nesting_residual(sys: &GaugedSystem, m: usize, j: usize) -> Result<f64> {
    let outer = ConeApprox::from_system(sys, m, j)?;
    let inner = ConeApprox::from_system(sys, m, j + 1)?;
    let rows = sys.size(m);
    let a = DMatrix::from_fn(rows, outer.len(), |r, c| outer.columns[c][r]);
    let mut worst = 0.0f64;
    for col in &inner.columns {
        let (_, res) = nnls(&a, &DVector::from_column_slice(col));
        worst = worst.max(res);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{simplex_seed, LevelBlock};

    fn stationary(counts: &[u64], n: usize) -> LeveledDiagram {
        LeveledDiagram::stationary(
            LevelBlock::all_single_unit(1, n),
            LevelBlock::from_counts(n, n, counts, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn diameter_examples() {
        let c = ConeApprox::from_columns(0.0, 0, 1, vec![vec![1.0, 1.0], vec![2.0, 1.0]]).unwrap();
        assert!((hilbert_diameter(&c).unwrap() - 2f64.ln()).abs() < 1e-15);
        let same =
            ConeApprox::from_columns(0.0, 0, 1, vec![vec![1.0, 3.0], vec![2.0, 6.0]]).unwrap();
        assert!(hilbert_diameter(&same).unwrap() < 1e-15);
        let zero = ConeApprox::from_columns(0.0, 0, 1, vec![vec![1.0, 0.0]]).unwrap();
        assert!(hilbert_diameter(&zero).is_err());
        assert_eq!(hilbert_distance(&[1.0, 0.0], &[0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn single_path_has_one_ray() {
        let d = LeveledDiagram::single_path(0.3);
        let c = generators_at(&d, 1.0, 0, 7).unwrap();
        assert_eq!(c.columns, vec![vec![1.0]]);
        assert_eq!(extreme_rays(&c, DEFAULT_THETA).unwrap().count(), 1);
    }

    #[test]
    fn anchor_zero_gives_scalars() {
        let c = generators_at(&simplex_seed(3, 4).unwrap(), 0.5, 0, 4).unwrap();
        assert!(c.columns.iter().all(|col| col == &vec![1.0]));
    }

    #[test]
    fn simplex_seed_rays() {
        let d = simplex_seed(2, 4).unwrap();
        let c = generators_at(&d, 0.0, 1, 12).unwrap();
        assert_eq!(extreme_rays(&c, DEFAULT_THETA).unwrap().count(), 2);
        let sys = GaugedSystem::new(&simplex_seed(3, 4).unwrap(), 0.0, 20).unwrap();
        let r = stable_extreme_rays(&sys, 1, 12, DEFAULT_THETA, 5).unwrap();
        assert_eq!(r.count(), 3);
        assert_eq!(r.stable, Some(true));
    }

    #[test]
    fn contraction_of_two_by_two() {
        let d = stationary(&[2, 1, 1, 2], 2);
        let rep = contraction_check(&d, 0.0, 1, 40).unwrap();
        for s in &rep.steps {
            assert!((s.tau - 1.0 / 3.0).abs() < 1e-15);
            if let Some(r) = s.ratio {
                assert!(r <= s.tau + RATIO_SLACK, "{s:?}");
                assert!(
                    r > 0.3,
                    "ratio should stay near 1/3 while resolvable: {s:?}"
                );
            }
        }
        assert!(rep.final_diameter < 1e-15);
    }

    #[test]
    fn rank_one_collapses_immediately() {
        let d = stationary(&[1, 2, 2, 4], 2);
        let rep = contraction_check(&d, 0.0, 1, 6).unwrap();
        assert!(rep.steps.iter().all(|s| s.diameter_after < 1e-14));
    }

    #[test]
    fn nesting_holds() {
        let d = simplex_seed(3, 4).unwrap();
        let sys = GaugedSystem::new(&d, 0.7, 10).unwrap();
        assert!(nesting_residual(&sys, 2, 8).unwrap() < 1e-8);
    }
}
