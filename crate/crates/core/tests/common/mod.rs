//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use kmsforge::diagram::{simplex_seed, EdgeBundle, LevelBlock, LeveledDiagram};
use kmsforge::glue::{build_glued, Endpoint, GluedDiagram, IntervalSpec};
use kmsforge::spectral::LogMatrix;
use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_bundle(rng: &mut ChaCha8Rng, lo: f64, hi: f64, max_count: u64) -> EdgeBundle {
    let mut b = EdgeBundle::empty();
    let entries = if rng.random_bool(0.25) { 2 } else { 1 };
    for _ in 0..entries {
        b.add(
            rng.random_range(lo..=hi),
            BigUint::from(rng.random_range(1..=max_count)),
        );
    }
    b
}

/// Finite diagram with `levels` blocks, level sizes in `1..=max_size` and
/// potentials in `[lo, hi]`, free of sources and sinks, with at most
/// `max_paths` paths into any vertex.
pub fn random_diagram(
    rng: &mut ChaCha8Rng,
    levels: usize,
    max_size: usize,
    (lo, hi): (f64, f64),
    max_count: u64,
    max_paths: u64,
) -> LeveledDiagram {
    loop {
        let mut sizes = vec![1usize];
        for _ in 0..levels {
            sizes.push(rng.random_range(1..=max_size));
        }
        let mut blocks = Vec::with_capacity(levels);
        for j in 1..=levels {
            let (rows, cols) = (sizes[j - 1], sizes[j]);
            let mut b = LevelBlock::new(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    if rng.random_bool(0.5) {
                        *b.get_mut(r, c) = random_bundle(rng, lo, hi, max_count);
                    }
                }
            }
            for r in 0..rows {
                if b.row_is_empty(r) {
                    let c = rng.random_range(0..cols);
                    *b.get_mut(r, c) = random_bundle(rng, lo, hi, max_count);
                }
            }
            for c in 0..cols {
                if b.col_is_empty(c) {
                    let r = rng.random_range(0..rows);
                    *b.get_mut(r, c) = random_bundle(rng, lo, hi, max_count);
                }
            }
            blocks.push(b);
        }
        let d = LeveledDiagram::explicit(sizes, blocks).expect("shapes agree");
        let widest = (1..=levels)
            .flat_map(|j| oracle_path_counts(&d, j))
            .max()
            .unwrap_or_default();
        if widest <= BigUint::from(max_paths) {
            return d;
        }
    }
}

/// Stationary diagram with strictly positive blocks and random potentials.
pub fn random_positive_stationary(
    rng: &mut ChaCha8Rng,
    size: usize,
    max_count: u64,
    spread: f64,
) -> LeveledDiagram {
    let bundle = |rng: &mut ChaCha8Rng| {
        EdgeBundle::single(
            rng.random_range(-spread..=spread),
            BigUint::from(rng.random_range(1..=max_count)),
        )
    };
    let top = LevelBlock::from_fn(1, size, |_, _| bundle(rng));
    let block = LevelBlock::from_fn(size, size, |_, _| bundle(rng));
    LeveledDiagram::stationary(top, block).expect("square blocks")
}

/// Path counts into each vertex of `level`, by repeated BigUint products.
pub fn oracle_path_counts(d: &LeveledDiagram, level: usize) -> Vec<BigUint> {
    let mut v = vec![BigUint::from(1u32)];
    for j in 1..=level {
        let b = d.block(j).unwrap();
        let mut next = vec![BigUint::zero(); b.cols()];
        for (r, x) in v.iter().enumerate() {
            for (c, slot) in next.iter_mut().enumerate() {
                let n: BigUint = b.get(r, c).entries().iter().map(|(_, k)| k.clone()).sum();
                *slot += x * n;
            }
        }
        v = next;
    }
    v
}

/// A level-`n` path: its range and summed potential.
#[derive(Clone, Debug)]
pub struct OraclePath {
    pub range: usize,
    pub potential: f64,
}

/// Every arrow path from the top to `level`, ordered top-down by
/// (target, bundle entry, copy).
pub fn oracle_paths(d: &LeveledDiagram, level: usize) -> Vec<OraclePath> {
    let mut paths = vec![OraclePath {
        range: 0,
        potential: 0.0,
    }];
    for j in 1..=level {
        let b = d.block(j).unwrap();
        let mut next = Vec::new();
        for p in &paths {
            for w in 0..b.cols() {
                for (f, k) in b.get(p.range, w).entries() {
                    for _ in 0..k.to_u64().unwrap() {
                        next.push(OraclePath {
                            range: w,
                            potential: p.potential + f,
                        });
                    }
                }
            }
        }
        paths = next;
    }
    paths
}

/// `ω(e_{μ,μ}) = e^{-β F(μ)} ψ_{r(μ)}`.
pub fn oracle_state(paths: &[OraclePath], beta: f64, psi: &[f64]) -> Vec<f64> {
    paths
        .iter()
        .map(|p| (-beta * p.potential).exp() * psi[p.range])
        .collect()
}

/// `max |ω(ab) - ω(b α_{iβ}(a))|` over matrix units `a = e_{μ,μ'}`, `b = e_{ν,ν'}`
/// of the same block, from the product rule `e_{μ,μ'} e_{ν,ν'} = δ_{μ'ν} e_{μ,ν'}`
/// and `α_{iβ}(e_{μ,μ'}) = e^{-β(F(μ) - F(μ'))} e_{μ,μ'}`. Only `b` with
/// `ν = μ'` or `ν' = μ` can give a nonzero product, so only those are visited.
pub fn oracle_kms_defect(paths: &[OraclePath], beta: f64, diag: &[f64]) -> f64 {
    let n_ranges = paths.iter().map(|p| p.range + 1).max().unwrap_or(0);
    let mut blocks = vec![Vec::new(); n_ranges];
    for (i, p) in paths.iter().enumerate() {
        blocks[p.range].push(i);
    }
    // ω of a matrix unit: diagonal entries only.
    let omega = |x: usize, y: usize| if x == y { diag[x] } else { 0.0 };
    let mut worst = 0.0f64;
    for ids in &blocks {
        for &mu in ids {
            for &mu2 in ids {
                let twist = (-beta * (paths[mu].potential - paths[mu2].potential)).exp();
                let mut candidates: Vec<(usize, usize)> = ids.iter().map(|&x| (mu2, x)).collect();
                candidates.extend(ids.iter().map(|&x| (x, mu)));
                for (nu, nu2) in candidates {
                    let ab = if mu2 == nu { omega(mu, nu2) } else { 0.0 };
                    let ba = if nu2 == mu {
                        twist * omega(nu, mu2)
                    } else {
                        0.0
                    };
                    worst = worst.max((ab - ba).abs());
                }
            }
        }
    }
    worst
}

/// Birkhoff's cross-ratio by direct enumeration of all index quadruples.
pub fn oracle_phi(b: &DMatrix<f64>) -> f64 {
    let (n, m) = b.shape();
    let mut best = f64::INFINITY;
    for x in 0..n {
        for x2 in 0..n {
            for y in 0..m {
                for y2 in 0..m {
                    best = best.min(b[(x, y)] * b[(x2, y2)] / (b[(x2, y)] * b[(x, y2)]));
                }
            }
        }
    }
    best
}

/// `ln φ` of a matrix given by log-entries; `-inf` if an entry is zero.
pub fn oracle_ln_phi(b: &LogMatrix) -> f64 {
    let mut best = f64::INFINITY;
    for x in 0..b.rows() {
        for x2 in 0..b.rows() {
            for y in 0..b.cols() {
                for y2 in 0..b.cols() {
                    let v = b.get(x, y) + b.get(x2, y2) - b.get(x2, y) - b.get(x, y2);
                    best = best.min(if v.is_nan() { f64::NEG_INFINITY } else { v });
                }
            }
        }
    }
    best
}

/// `Σ_a e^{-β F(a)}` entrywise, straight from the arrows.
pub fn oracle_transfer(d: &LeveledDiagram, level: usize, beta: f64) -> DMatrix<f64> {
    let b = d.block(level).unwrap();
    DMatrix::from_fn(b.rows(), b.cols(), |r, c| {
        b.get(r, c)
            .entries()
            .iter()
            .map(|(f, k)| k.to_f64().unwrap() * (-beta * f).exp())
            .sum()
    })
}

pub fn rel_close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs())
}

/// Intervals `{ℝ, [1, 2], [3, +∞)}`.
pub fn demo_intervals() -> Vec<IntervalSpec> {
    vec![
        IntervalSpec::real_line(),
        IntervalSpec::closed(1.0, 2.0),
        IntervalSpec::new(Endpoint::closed(3.0), Endpoint::PosInf),
    ]
}

/// Intervals `{ℝ, [-2, -1], (-∞, -3]}`.
pub fn mirrored_intervals() -> Vec<IntervalSpec> {
    vec![
        IntervalSpec::real_line(),
        IntervalSpec::closed(-2.0, -1.0),
        IntervalSpec::new(Endpoint::NegInf, Endpoint::closed(-3.0)),
    ]
}

pub fn demo_seeds() -> Vec<LeveledDiagram> {
    vec![
        LeveledDiagram::single_path(0.0),
        simplex_seed(2, 4).unwrap(),
        simplex_seed(1, 4).unwrap(),
    ]
}

pub fn demo_glued(depth: usize) -> GluedDiagram {
    build_glued(demo_intervals(), demo_seeds(), depth).unwrap()
}

pub fn mirrored_glued(depth: usize) -> GluedDiagram {
    build_glued(mirrored_intervals(), demo_seeds(), depth).unwrap()
}

/// Membership in `[lo, hi]`, with `None` for an infinite end.
pub fn in_closed(beta: f64, lo: Option<f64>, hi: Option<f64>) -> bool {
    lo.is_none_or(|a| beta >= a) && hi.is_none_or(|b| beta <= b)
}

/// Demo spec as JSON, in the CLI's file format.
pub const DEMO_GLUE_JSON: &str = r#"{
  "intervals": [
    {"lo": "-inf", "hi": "+inf"},
    {"lo": {"value": 1.0, "closed": true}, "hi": {"value": 2.0, "closed": true}},
    {"lo": {"value": 3.0, "closed": true}, "hi": "+inf"}
  ],
  "seeds": [
    {"kind": "single_path"},
    {"kind": "simplex_seed", "d": 2, "growth": 4},
    {"kind": "simplex_seed", "d": 1, "growth": 4}
  ],
  "depth": 30
}"#;
