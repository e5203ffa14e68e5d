use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use super::{kappa, weight_sequences, IntervalSpec, WeightSequences};
use crate::diagram::{EdgeBundle, LevelBlock, LevelSource, LeveledDiagram};
use crate::numeric::{floor_exp_big, ln_big};
use crate::{Error, Result};

/// Levels a seed may absorb while searching for the next telescoped level.
pub const MAX_ABSORB: usize = 512;

/// `ln` of the margin by which every multiplicity ratio must exceed 1.
const RATIO_MARGIN: f64 = 1e-9;

/// A contiguous run of glued vertices belonging to one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub seed: usize,
    pub seed_level: usize,
    pub offset: usize,
    pub len: usize,
}

/// Telescoping and quiver data for one seed `k >= 1`.
#[derive(Debug, Default)]
struct SeedState {
    /// Original level of each telescoped level.
    schedule: Vec<usize>,
    blocks: Vec<LevelBlock>,
    /// `ln x` and `m` per telescoped level and vertex.
    ln_x: Vec<Vec<f64>>,
    mult: Vec<Vec<BigUint>>,
}

#[derive(Debug)]
struct State {
    br0: LeveledDiagram,
    seeds: Vec<LeveledDiagram>,
    weights: Vec<WeightSequences>,
    per_seed: Vec<SeedState>,
    /// `w_j` for each prepared Br^0 level.
    w: Vec<usize>,
    /// Glued levels whose blocks can be produced.
    ready: usize,
}

impl State {
    fn n_seeds(&self) -> usize {
        self.seeds.len()
    }

    fn ln_count0(&self, level: usize, v: usize) -> Result<f64> {
        Ok(ln_big(&self.br0.path_counts_shared(level)?[v]))
    }

    fn ensure_w(&mut self, level: usize) -> Result<()> {
        while self.w.len() <= level {
            let j = self.w.len();
            let c = self.br0.path_counts_shared(j)?;
            let (mut best, mut arg) = (&c[0], 0);
            for (i, x) in c.iter().enumerate() {
                if x < best {
                    best = x;
                    arg = i;
                }
            }
            self.w.push(arg);
        }
        Ok(())
    }

    /// Prepares telescoped level `i` of seed `k` (1-based seed index).
    fn ensure_seed_level(&mut self, k: usize, i: usize) -> Result<()> {
        while self.per_seed[k - 1].schedule.len() <= i {
            let cur = self.per_seed[k - 1].schedule.len();
            if cur == 0 {
                let st = &mut self.per_seed[k - 1];
                st.schedule.push(0);
                st.ln_x.push(vec![0.0]);
                st.mult.push(vec![BigUint::one()]);
                continue;
            }
            // Telescoped level `cur` sits on glued level k + cur, fed from w_{k+cur-1}.
            let n = k + cur;
            self.ensure_w(n - 1)?;
            let w = self.w[n - 1];
            let ln_c0 = self.ln_count0(n - 1, w)?;
            let wts = self.weights[k];
            let ln_weight = if cur % 2 == 0 {
                wts.ln_t(cur / 2)
            } else {
                wts.ln_s((cur + 1) / 2)
            };
            let seed = self.seeds[k].clone();
            let prev = *self.per_seed[k - 1].schedule.last().unwrap();
            let mut found = None;
            for level in prev + 1..=prev + MAX_ABSORB {
                if let Some(limit) = seed.depth_limit() {
                    if level > limit {
                        return Err(Error::DepthExceeded {
                            level,
                            available: limit,
                        });
                    }
                }
                let counts = seed.path_counts_shared(level)?;
                let ln_x: Vec<f64> = counts
                    .iter()
                    .map(|c| ln_weight + ln_big(c) - ln_c0)
                    .collect();
                if ln_x.iter().all(|x| *x >= RATIO_MARGIN) {
                    found = Some((level, ln_x));
                    break;
                }
            }
            let Some((level, ln_x)) = found else {
                return Err(Error::NotTelescopable {
                    seed: k,
                    level: cur,
                });
            };
            let mut block = seed.block(prev + 1)?.as_ref().clone();
            for l in prev + 2..=level {
                block = block.compose(seed.block(l)?.as_ref());
            }
            let st = &mut self.per_seed[k - 1];
            st.mult
                .push(ln_x.iter().map(|x| floor_exp_big(*x)).collect());
            st.ln_x.push(ln_x);
            st.schedule.push(level);
            st.blocks.push(block);
        }
        Ok(())
    }

    fn active_seeds(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        1..=n.min(self.n_seeds() - 1)
    }

    fn ensure(&mut self, n: usize) -> Result<()> {
        while self.ready < n {
            let next = self.ready + 1;
            self.ensure_w(next)?;
            for k in self.active_seeds(next) {
                self.ensure_seed_level(k, next - k)?;
            }
            self.ready = next;
        }
        Ok(())
    }

    fn layout(&self, n: usize) -> Result<Vec<Segment>> {
        let mut out = vec![Segment {
            seed: 0,
            seed_level: n,
            offset: 0,
            len: self.br0.level_size(n)?,
        }];
        let mut off = out[0].len;
        for k in self.active_seeds(n) {
            let len = self.seeds[k].level_size(self.per_seed[k - 1].schedule[n - k])?;
            out.push(Segment {
                seed: k,
                seed_level: n - k,
                offset: off,
                len,
            });
            off += len;
        }
        Ok(out)
    }

    fn block(&mut self, n: usize) -> Result<LevelBlock> {
        self.ensure(n)?;
        let (top, bottom) = (self.layout(n - 1)?, self.layout(n)?);
        let rows: usize = top.iter().map(|s| s.len).sum();
        let cols: usize = bottom.iter().map(|s| s.len).sum();
        let mut out = LevelBlock::new(rows, cols);
        let b0 = self.br0.block(n)?;
        for r in 0..b0.rows() {
            for c in 0..b0.cols() {
                *out.get_mut(r, c) = b0.get(r, c).clone();
            }
        }
        let w = self.w[n - 1];
        for seg in &bottom[1..] {
            let k = seg.seed;
            let i = seg.seed_level;
            let st = &self.per_seed[k - 1];
            if i >= 1 {
                let above = top
                    .iter()
                    .find(|s| s.seed == k)
                    .expect("seed present one level up");
                let blk = &st.blocks[i - 1];
                for r in 0..blk.rows() {
                    for c in 0..blk.cols() {
                        *out.get_mut(above.offset + r, seg.offset + c) = blk.get(r, c).clone();
                    }
                }
            }
            let kv = kappa(i) as f64;
            for (u, m) in st.mult[i].iter().enumerate() {
                *out.get_mut(w, seg.offset + u) = EdgeBundle::single(kv, m.clone());
            }
        }
        Ok(out)
    }
}

#[derive(Debug)]
struct GluedSource {
    state: Arc<Mutex<State>>,
}

impl LevelSource for GluedSource {
    fn level_size(&self, level: usize) -> Result<usize> {
        let mut st = self.state.lock().unwrap();
        st.ensure(level)?;
        Ok(st.layout(level)?.iter().map(|s| s.len).sum())
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        self.state.lock().unwrap().block(level)
    }
}

/// Seed `k` as the glued diagram sees it: telescoped by the glued schedule.
#[derive(Debug)]
struct SeedView {
    state: Arc<Mutex<State>>,
    k: usize,
}

impl LevelSource for SeedView {
    fn level_size(&self, level: usize) -> Result<usize> {
        let mut st = self.state.lock().unwrap();
        st.ensure_seed_level(self.k, level)?;
        let orig = st.per_seed[self.k - 1].schedule[level];
        st.seeds[self.k].level_size(orig)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        let mut st = self.state.lock().unwrap();
        st.ensure_seed_level(self.k, level)?;
        Ok(st.per_seed[self.k - 1].blocks[level - 1].clone())
    }
}

/// A diagram whose β-KMS cone has one face per interval containing β.
#[derive(Clone, Debug)]
pub struct GluedDiagram {
    pub intervals: Vec<IntervalSpec>,
    pub weights: Vec<WeightSequences>,
    /// Set when the interval list is a truncation of an infinite family.
    pub infinite_family: bool,
    state: Arc<Mutex<State>>,
    diagram: LeveledDiagram,
    seed_views: Vec<LeveledDiagram>,
}

/// Glues `seeds[k]` onto the interval `intervals[k]`; `intervals[0]` must be ℝ.
///
/// Blocks are built lazily; `depth` levels are prepared eagerly so that
/// construction errors surface here.
pub fn build_glued(
    intervals: Vec<IntervalSpec>,
    seeds: Vec<LeveledDiagram>,
    depth: usize,
) -> Result<GluedDiagram> {
    if intervals.is_empty() || !intervals[0].is_real_line() {
        return Err(Error::Spec(
            "the first interval must be the real line".into(),
        ));
    }
    if intervals.len() != seeds.len() {
        return Err(Error::Spec(format!(
            "{} intervals but {} seeds",
            intervals.len(),
            seeds.len()
        )));
    }
    for i in &intervals {
        i.validate()?;
    }
    for (k, s) in seeds.iter().enumerate().skip(1) {
        check_seed(k, s)?;
    }
    let weights: Vec<WeightSequences> = intervals.iter().map(weight_sequences).collect();
    let state = Arc::new(Mutex::new(State {
        br0: seeds[0].clone(),
        seeds: seeds.clone(),
        weights: weights.clone(),
        per_seed: (1..seeds.len()).map(|_| SeedState::default()).collect(),
        w: Vec::new(),
        ready: 0,
    }));
    state.lock().unwrap().ensure(depth)?;
    let diagram = LeveledDiagram::from_source(GluedSource {
        state: state.clone(),
    });
    let seed_views = std::iter::once(seeds[0].clone())
        .chain((1..seeds.len()).map(|k| {
            LeveledDiagram::from_source(SeedView {
                state: state.clone(),
                k,
            })
        }))
        .collect();
    Ok(GluedDiagram {
        intervals,
        weights,
        infinite_family: false,
        state,
        diagram,
        seed_views,
    })
}

/// Seeds other than `Br^0` must have strictly positive two-step blocks.
fn check_seed(k: usize, seed: &LeveledDiagram) -> Result<()> {
    let report = seed.validate(4.min(seed.depth_limit().unwrap_or(4)));
    if !report.passed() {
        return Err(Error::InvalidDiagram(format!(
            "seed {k}: {}",
            report.violations[0]
        )));
    }
    let last = seed.depth_limit().unwrap_or(4).min(4);
    for j in 2..last {
        let two = seed.block(j)?.compose(seed.block(j + 1)?.as_ref());
        if two.counts().iter().any(|c| c == &BigUint::default()) {
            return Err(Error::InvalidDiagram(format!(
                "seed {k}: blocks {j} and {} do not telescope to a positive block",
                j + 1
            )));
        }
    }
    Ok(())
}

impl GluedDiagram {
    pub fn diagram(&self) -> &LeveledDiagram {
        &self.diagram
    }

    /// Number of seeds including `Br^0`.
    pub fn n_seeds(&self) -> usize {
        self.seed_views.len()
    }

    /// Seed `k` in its telescoped form (seed 0 is `Br^0` itself).
    pub fn seed(&self, k: usize) -> &LeveledDiagram {
        &self.seed_views[k]
    }

    pub fn layout(&self, n: usize) -> Result<Vec<Segment>> {
        let mut st = self.state.lock().unwrap();
        st.ensure(n)?;
        st.layout(n)
    }

    /// Offset of seed `k` inside glued level `n`, if it is present there.
    pub fn segment(&self, n: usize, k: usize) -> Result<Option<Segment>> {
        Ok(self.layout(n)?.into_iter().find(|s| s.seed == k))
    }

    /// `(seed, seed level, index within the seed level)` of a glued vertex.
    pub fn membership(&self, n: usize, vertex: usize) -> Result<(usize, usize, usize)> {
        for s in self.layout(n)? {
            if vertex < s.offset + s.len {
                return Ok((s.seed, s.seed_level, vertex - s.offset));
            }
        }
        Err(Error::Domain(format!(
            "vertex {vertex} is not on glued level {n}"
        )))
    }

    /// The chosen vertex `w_j` of `Br^0_j`.
    pub fn w(&self, j: usize) -> Result<usize> {
        let mut st = self.state.lock().unwrap();
        st.ensure_w(j)?;
        Ok(st.w[j])
    }

    /// Original seed levels kept by seed `k`'s telescope, up to telescoped level `i`.
    pub fn schedule(&self, k: usize, i: usize) -> Result<Vec<usize>> {
        let mut st = self.state.lock().unwrap();
        st.ensure_seed_level(k, i)?;
        Ok(st.per_seed[k - 1].schedule[..=i].to_vec())
    }

    /// Multiplicities `m_i^k(u)` and the ratios `ln x` they were floored from.
    pub fn multiplicities(&self, k: usize, i: usize) -> Result<(Vec<BigUint>, Vec<f64>)> {
        let mut st = self.state.lock().unwrap();
        st.ensure_seed_level(k, i)?;
        Ok((
            st.per_seed[k - 1].mult[i].clone(),
            st.per_seed[k - 1].ln_x[i].clone(),
        ))
    }

    /// Indices of intervals containing β (always including 0).
    pub fn active(&self, beta: f64) -> Vec<usize> {
        (0..self.intervals.len())
            .filter(|&k| self.intervals[k].contains(beta))
            .collect()
    }

    pub(crate) fn with_infinite_family(mut self, flag: bool) -> Self {
        self.infinite_family = flag;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::simplex_seed;
    use crate::glue::Endpoint;

    fn demo() -> GluedDiagram {
        build_glued(
            vec![
                IntervalSpec::real_line(),
                IntervalSpec::closed(1.0, 2.0),
                IntervalSpec::new(Endpoint::closed(3.0), Endpoint::PosInf),
            ],
            vec![
                LeveledDiagram::single_path(0.0),
                simplex_seed(2, 4).unwrap(),
                simplex_seed(1, 4).unwrap(),
            ],
            8,
        )
        .unwrap()
    }

    #[test]
    fn trivial_glue_is_single_path() {
        let g = build_glued(
            vec![IntervalSpec::real_line()],
            vec![LeveledDiagram::single_path(0.0)],
            5,
        )
        .unwrap();
        for n in 1..=5 {
            let b = g.diagram().block(n).unwrap();
            assert_eq!((b.rows(), b.cols()), (1, 1));
            assert_eq!(b.get(0, 0).total(), BigUint::one());
        }
    }

    #[test]
    fn layout_lists_all_seeds_present() {
        let g = demo();
        let seeds: Vec<usize> = g.layout(5).unwrap().iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2]);
        let l1: Vec<(usize, usize)> = g
            .layout(1)
            .unwrap()
            .iter()
            .map(|s| (s.seed, s.seed_level))
            .collect();
        assert_eq!(l1, vec![(0, 1), (1, 0)]);
        assert_eq!(g.membership(5, 0).unwrap(), (0, 5, 0));
        assert_eq!(g.membership(5, 2).unwrap(), (1, 4, 1));
        assert!(g.diagram().validate(10).passed());
    }

    #[test]
    fn multiplicities_satisfy_floor_bounds() {
        let g = demo();
        for k in 1..=2 {
            let (m, _) = g.multiplicities(k, 0).unwrap();
            assert_eq!(m, vec![BigUint::one()]);
            for i in 1..=10 {
                let (m, lx) = g.multiplicities(k, i).unwrap();
                for (mi, x) in m.iter().zip(&lx) {
                    assert!(*x >= 0.0);
                    let lm = ln_big(mi);
                    assert!(
                        lm <= *x + 1e-12 && lm >= x - std::f64::consts::LN_2 - 1e-12,
                        "k={k} i={i}"
                    );
                }
            }
        }
    }

    #[test]
    fn quiver_potentials_follow_kappa() {
        let g = demo();
        for n in 1..=8 {
            let b = g.diagram().block(n).unwrap();
            for seg in g.layout(n).unwrap().iter().skip(1) {
                for u in 0..seg.len {
                    let e = b.get(0, seg.offset + u).entries();
                    assert_eq!(e.len(), 1);
                    assert_eq!(e[0].0, kappa(seg.seed_level) as f64);
                }
            }
        }
    }

    #[test]
    fn single_path_seed_is_rejected_when_it_cannot_grow() {
        let g = build_glued(
            vec![IntervalSpec::real_line(), IntervalSpec::closed(-1.0, 1.0)],
            vec![
                LeveledDiagram::single_path(0.0),
                LeveledDiagram::single_path(0.0),
            ],
            4,
        );
        assert!(matches!(g, Err(Error::NotTelescopable { .. })));
    }
}
