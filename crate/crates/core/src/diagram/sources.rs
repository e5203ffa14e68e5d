use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::{EdgeBundle, LevelBlock, LevelSource, LeveledDiagram};
use crate::{Error, Result};

/// Sequence of matrix sizes `d_1, d_2, ...` for a UHF diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DSequence {
    /// Finitely many factors; the diagram stops after them.
    Explicit(Vec<u64>),
    /// The listed pattern repeated forever.
    Repeat { repeat: Vec<u64> },
}

impl DSequence {
    pub fn repeat(pattern: Vec<u64>) -> Self {
        DSequence::Repeat { repeat: pattern }
    }

    /// `d_j` for `j >= 1`.
    pub fn get(&self, j: usize) -> Option<u64> {
        if j == 0 {
            return None;
        }
        match self {
            DSequence::Explicit(v) => v.get(j - 1).copied(),
            DSequence::Repeat { repeat } => repeat.get((j - 1) % repeat.len()).copied(),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            DSequence::Explicit(v) => Some(v.len()),
            DSequence::Repeat { .. } => None,
        }
    }

    fn pattern(&self) -> &[u64] {
        match self {
            DSequence::Explicit(v) => v,
            DSequence::Repeat { repeat } => repeat,
        }
    }

    /// Splits by alternating positions: factors `d_1, d_3, ...` go left,
    /// `d_2, d_4, ...` go right.
    pub fn split_alternating(&self) -> Result<(DSequence, DSequence)> {
        match self {
            DSequence::Explicit(v) => Ok((
                DSequence::Explicit(v.iter().step_by(2).copied().collect()),
                DSequence::Explicit(v.iter().skip(1).step_by(2).copied().collect()),
            )),
            DSequence::Repeat { repeat } => {
                // Unroll to an even period so both halves are periodic.
                let mut p = repeat.clone();
                if p.len() % 2 == 1 {
                    p.extend_from_slice(repeat);
                }
                Ok((
                    DSequence::repeat(p.iter().step_by(2).copied().collect()),
                    DSequence::repeat(p.iter().skip(1).step_by(2).copied().collect()),
                ))
            }
        }
    }
}

/// Levels kept by a telescope.
#[derive(Clone, Debug, PartialEq)]
pub enum Retained {
    /// Strictly increasing list starting at 0; the telescope is finite.
    Levels(Vec<usize>),
    /// Every `n`-th level.
    Every(usize),
}

impl Retained {
    fn at(&self, i: usize) -> Option<usize> {
        match self {
            Retained::Levels(v) => v.get(i).copied(),
            Retained::Every(n) => Some(i * n),
        }
    }
}

#[derive(Debug)]
pub(super) struct Explicit {
    sizes: Vec<usize>,
    blocks: Vec<LevelBlock>,
}

impl Explicit {
    pub(super) fn new(sizes: Vec<usize>, blocks: Vec<LevelBlock>) -> Result<Self> {
        if sizes.first() != Some(&1) {
            return Err(Error::InvalidDiagram(
                "level 0 must have exactly one vertex".into(),
            ));
        }
        if blocks.len() + 1 != sizes.len() {
            return Err(Error::InvalidDiagram(format!(
                "{} level sizes need {} blocks, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                blocks.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidDiagram("empty level".into()));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.rows() != sizes[j] || b.cols() != sizes[j + 1] {
                return Err(Error::InvalidDiagram(format!(
                    "block({}) is {}x{}, expected {}x{}",
                    j + 1,
                    b.rows(),
                    b.cols(),
                    sizes[j],
                    sizes[j + 1]
                )));
            }
        }
        Ok(Self { sizes, blocks })
    }
}

impl LevelSource for Explicit {
    fn level_size(&self, level: usize) -> Result<usize> {
        self.sizes.get(level).copied().ok_or(Error::DepthExceeded {
            level,
            available: self.sizes.len() - 1,
        })
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        self.blocks
            .get(level - 1)
            .cloned()
            .ok_or(Error::DepthExceeded {
                level,
                available: self.blocks.len(),
            })
    }

    fn depth_limit(&self) -> Option<usize> {
        Some(self.blocks.len())
    }
}

#[derive(Debug)]
pub(super) struct Stationary {
    top: LevelBlock,
    block: LevelBlock,
}

impl Stationary {
    pub(super) fn new(top: LevelBlock, block: LevelBlock) -> Result<Self> {
        if top.rows() != 1
            || block.rows() != block.cols()
            || top.cols() != block.rows()
            || top.cols() == 0
        {
            return Err(Error::InvalidDiagram(
                "stationary diagram needs a 1xn top and an nxn block".into(),
            ));
        }
        Ok(Self { top, block })
    }
}

impl LevelSource for Stationary {
    fn level_size(&self, level: usize) -> Result<usize> {
        Ok(if level == 0 { 1 } else { self.block.cols() })
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        Ok(if level == 1 {
            self.top.clone()
        } else {
            self.block.clone()
        })
    }
}

#[derive(Debug)]
pub(super) struct Uhf {
    d: DSequence,
}

impl Uhf {
    pub(super) fn new(d: DSequence) -> Result<Self> {
        if d.pattern().is_empty() && matches!(d, DSequence::Repeat { .. }) {
            return Err(Error::InvalidDiagram("empty repeating pattern".into()));
        }
        if d.pattern().iter().any(|&x| x < 2) {
            return Err(Error::InvalidDiagram(
                "UHF factors must be at least 2".into(),
            ));
        }
        Ok(Self { d })
    }
}

impl LevelSource for Uhf {
    fn level_size(&self, _level: usize) -> Result<usize> {
        Ok(1)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        let d = self.d.get(level).ok_or(Error::DepthExceeded {
            level,
            available: self.d.len().unwrap_or(0),
        })?;
        Ok(LevelBlock::from_counts(1, 1, &[d], 0.0))
    }

    fn depth_limit(&self) -> Option<usize> {
        self.d.len()
    }
}

#[derive(Debug)]
pub(super) struct SimplexSeed {
    d: usize,
    growth: u64,
}

impl SimplexSeed {
    pub(super) fn new(d: usize, growth: u64) -> Result<Self> {
        if d == 0 || growth < 2 {
            return Err(Error::InvalidDiagram(
                "simplex seed needs d >= 1 and growth >= 2".into(),
            ));
        }
        Ok(Self { d, growth })
    }

    fn n(&self, j: usize) -> BigUint {
        BigUint::from(self.d) * BigUint::from(self.growth).pow(j as u32)
    }
}

impl LevelSource for SimplexSeed {
    fn level_size(&self, level: usize) -> Result<usize> {
        Ok(if level == 0 { 1 } else { self.d })
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        let n = self.n(level);
        if level == 1 {
            return Ok(LevelBlock::from_fn(1, self.d, |_, _| {
                EdgeBundle::single(0.0, &n + 1u32)
            }));
        }
        Ok(LevelBlock::from_fn(self.d, self.d, |r, c| {
            EdgeBundle::single(0.0, if r == c { &n + 1u32 } else { BigUint::one() })
        }))
    }
}

#[derive(Debug)]
pub(super) struct Telescope {
    base: LeveledDiagram,
    retained: Retained,
}

impl Telescope {
    pub(super) fn new(base: LeveledDiagram, retained: Retained) -> Result<Self> {
        match &retained {
            Retained::Levels(v) => {
                if v.first() != Some(&0) || v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidDiagram(
                        "retained levels must start at 0 and increase".into(),
                    ));
                }
                if let (Some(limit), Some(&last)) = (base.depth_limit(), v.last()) {
                    if last > limit {
                        return Err(Error::DepthExceeded {
                            level: last,
                            available: limit,
                        });
                    }
                }
            }
            Retained::Every(n) if *n == 0 => {
                return Err(Error::InvalidDiagram("telescope stride 0".into()))
            }
            Retained::Every(_) => {}
        }
        Ok(Self { base, retained })
    }

    fn original(&self, level: usize) -> Result<usize> {
        self.retained.at(level).ok_or(Error::DepthExceeded {
            level,
            available: self.depth_limit().unwrap_or(0),
        })
    }
}

impl LevelSource for Telescope {
    fn level_size(&self, level: usize) -> Result<usize> {
        self.base.level_size(self.original(level)?)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        let (a, b) = (self.original(level - 1)?, self.original(level)?);
        let mut acc = self.base.block(a + 1)?.as_ref().clone();
        for i in a + 2..=b {
            acc = acc.compose(self.base.block(i)?.as_ref());
        }
        Ok(acc)
    }

    fn depth_limit(&self) -> Option<usize> {
        match &self.retained {
            Retained::Levels(v) => Some(v.len() - 1),
            Retained::Every(n) => self.base.depth_limit().map(|d| d / n),
        }
    }
}

#[derive(Debug)]
pub(super) struct Tensor {
    pub(super) left: LeveledDiagram,
    pub(super) right: LeveledDiagram,
}

impl LevelSource for Tensor {
    fn level_size(&self, level: usize) -> Result<usize> {
        Ok(self.left.level_size(level)? * self.right.level_size(level)?)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        Ok(self
            .left
            .block(level)?
            .tensor(self.right.block(level)?.as_ref()))
    }

    fn depth_limit(&self) -> Option<usize> {
        match (self.left.depth_limit(), self.right.depth_limit()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug)]
pub(super) struct Negated {
    pub(super) base: LeveledDiagram,
}

impl LevelSource for Negated {
    fn level_size(&self, level: usize) -> Result<usize> {
        self.base.level_size(level)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        Ok(self.base.block(level)?.map_values(|f| -f))
    }

    fn depth_limit(&self) -> Option<usize> {
        self.base.depth_limit()
    }
}
