//! Leveled Bratteli diagrams with integer arrow counts and potentials.
//!
//! A diagram is an infinite (or explicitly finite) sequence of
//! [`LevelBlock`]s. Level 0 is the single top vertex. Blocks are produced on
//! demand by a [`LevelSource`] and memoized by [`LeveledDiagram`], so lazily
//! constructed diagrams (telescopes, tensors, glued diagrams) only pay for the
//! levels they are asked about.

mod bundle;
mod sources;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

pub use bundle::{EdgeBundle, LevelBlock};
pub use sources::{DSequence, Retained};

use crate::{Error, Result};

/// Supplies level sizes and blocks of a diagram.
///
/// Implementations must be deterministic; memoization is done by the caller.
pub trait LevelSource: Send + Sync + fmt::Debug {
    fn level_size(&self, level: usize) -> Result<usize>;
    /// Block between levels `level - 1` and `level`, for `level >= 1`.
    fn block(&self, level: usize) -> Result<LevelBlock>;
    /// Deepest available level, if the diagram is finite.
    fn depth_limit(&self) -> Option<usize> {
        None
    }
}

#[derive(Default)]
struct Memo {
    blocks: HashMap<usize, Arc<LevelBlock>>,
    counts: Vec<Arc<Vec<BigUint>>>,
}

/// Shared handle to a diagram; clones share the memo.
#[derive(Clone)]
pub struct LeveledDiagram {
    source: Arc<dyn LevelSource>,
    memo: Arc<Mutex<Memo>>,
}

impl fmt::Debug for LeveledDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeveledDiagram")
            .field("source", &self.source)
            .finish()
    }
}

/// Arrow-path counts from the top vertex to each vertex of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCountVector {
    pub level: usize,
    pub counts: Vec<BigUint>,
}

impl PathCountVector {
    pub fn total(&self) -> BigUint {
        self.counts.iter().fold(BigUint::zero(), |a, c| a + c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Source { vertex: usize },
    Sink { vertex: usize },
    Shape { detail: String },
    Unavailable { detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub level: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Source { vertex } => {
                write!(f, "source at level {} (vertex {vertex})", self.level)
            }
            ViolationKind::Sink { vertex } => {
                write!(f, "sink at level {} (vertex {vertex})", self.level)
            }
            ViolationKind::Shape { detail } => {
                write!(f, "bad shape at level {}: {detail}", self.level)
            }
            ViolationKind::Unavailable { detail } => {
                write!(f, "level {} unavailable: {detail}", self.level)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub depth: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl LeveledDiagram {
    pub fn from_source(source: impl LevelSource + 'static) -> Self {
        Self {
            source: Arc::new(source),
            memo: Arc::new(Mutex::new(Memo::default())),
        }
    }

    pub fn level_size(&self, level: usize) -> Result<usize> {
        if level == 0 {
            return Ok(1);
        }
        self.check_depth(level)?;
        self.source.level_size(level)
    }

    pub fn depth_limit(&self) -> Option<usize> {
        self.source.depth_limit()
    }

    fn check_depth(&self, level: usize) -> Result<()> {
        match self.source.depth_limit() {
            Some(d) if level > d => Err(Error::DepthExceeded {
                level,
                available: d,
            }),
            _ => Ok(()),
        }
    }

    /// Block between levels `level - 1` and `level`.
    pub fn block(&self, level: usize) -> Result<Arc<LevelBlock>> {
        if level == 0 {
            return Err(Error::Domain("blocks are indexed from level 1".into()));
        }
        self.check_depth(level)?;
        if let Some(b) = self.memo.lock().unwrap().blocks.get(&level) {
            return Ok(b.clone());
        }
        let b = self.source.block(level)?;
        let (rows, cols) = (self.level_size(level - 1)?, self.level_size(level)?);
        if b.rows() != rows || b.cols() != cols {
            return Err(Error::InvalidDiagram(format!(
                "block({level}) is {}x{}, level sizes need {rows}x{cols}",
                b.rows(),
                b.cols()
            )));
        }
        let b = Arc::new(b);
        self.memo.lock().unwrap().blocks.insert(level, b.clone());
        Ok(b)
    }

    /// Checks shapes and the absence of sources and sinks on levels `1..=depth`.
    ///
    /// A vertex at level `j >= 1` without incoming arrows is a source; a
    /// vertex at level `j < depth` without outgoing arrows is a sink.
    pub fn validate(&self, depth: usize) -> ValidationReport {
        let mut violations = Vec::new();
        for j in 1..=depth {
            let block = match self.block(j) {
                Ok(b) => b,
                Err(e) => {
                    let kind = match e {
                        Error::InvalidDiagram(detail) => ViolationKind::Shape { detail },
                        other => ViolationKind::Unavailable {
                            detail: other.to_string(),
                        },
                    };
                    violations.push(Violation { level: j, kind });
                    break;
                }
            };
            for r in 0..block.rows() {
                if block.row_is_empty(r) {
                    violations.push(Violation {
                        level: j - 1,
                        kind: ViolationKind::Sink { vertex: r },
                    });
                }
            }
            for c in 0..block.cols() {
                if block.col_is_empty(c) {
                    violations.push(Violation {
                        level: j,
                        kind: ViolationKind::Source { vertex: c },
                    });
                }
            }
        }
        ValidationReport { depth, violations }
    }

    /// Number of arrow paths from the top vertex to each vertex of `level`.
    pub fn path_counts(&self, level: usize) -> Result<PathCountVector> {
        Ok(PathCountVector {
            level,
            counts: self.path_counts_shared(level)?.as_ref().clone(),
        })
    }

    pub(crate) fn path_counts_shared(&self, level: usize) -> Result<Arc<Vec<BigUint>>> {
        loop {
            let known = {
                let memo = self.memo.lock().unwrap();
                if let Some(c) = memo.counts.get(level) {
                    return Ok(c.clone());
                }
                memo.counts
                    .last()
                    .cloned()
                    .map(|c| (memo.counts.len() - 1, c))
            };
            let (j, prev) = match known {
                None => {
                    self.memo
                        .lock()
                        .unwrap()
                        .counts
                        .push(Arc::new(vec![BigUint::one()]));
                    continue;
                }
                Some((j, prev)) => (j + 1, prev),
            };
            let block = self.block(j)?;
            let next: Vec<BigUint> = (0..block.cols())
                .map(|c| {
                    (0..block.rows()).fold(BigUint::zero(), |acc, r| {
                        acc + &prev[r] * block.get(r, c).total()
                    })
                })
                .collect();
            let mut memo = self.memo.lock().unwrap();
            if memo.counts.len() == j {
                memo.counts.push(Arc::new(next));
            }
        }
    }

    /// Diagram built from an explicit, finite list of blocks.
    pub fn explicit(level_sizes: Vec<usize>, blocks: Vec<LevelBlock>) -> Result<Self> {
        Ok(Self::from_source(sources::Explicit::new(
            level_sizes,
            blocks,
        )?))
    }

    /// Diagram repeating `block` forever below a first block `top`.
    pub fn stationary(top: LevelBlock, block: LevelBlock) -> Result<Self> {
        Ok(Self::from_source(sources::Stationary::new(top, block)?))
    }

    /// One vertex per level, one arrow of potential `value` between levels.
    pub fn single_path(value: f64) -> Self {
        Self::from_source(
            sources::Stationary::new(
                LevelBlock::from_counts(1, 1, &[1], value),
                LevelBlock::from_counts(1, 1, &[1], value),
            )
            .expect("1x1 blocks are consistent"),
        )
    }

    /// Keep only the levels listed by `retained`, composing the blocks between them.
    pub fn telescope(&self, retained: Retained) -> Result<Self> {
        Ok(Self::from_source(sources::Telescope::new(
            self.clone(),
            retained,
        )?))
    }

    /// Product diagram with potential `F(a) - F'(a')`.
    pub fn tensor(&self, other: &LeveledDiagram) -> Self {
        Self::from_source(sources::Tensor {
            left: self.clone(),
            right: other.clone(),
        })
    }

    /// Same arrows with every potential negated.
    pub fn negated(&self) -> Self {
        Self::from_source(sources::Negated { base: self.clone() })
    }

    /// Materializes levels `1..=depth` into an explicit diagram.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(depth + 1);
        let mut blocks = Vec::with_capacity(depth);
        for j in 0..=depth {
            sizes.push(self.level_size(j)?);
            if j > 0 {
                blocks.push(self.block(j)?.as_ref().clone());
            }
        }
        Self::explicit(sizes, blocks)
    }
}

/// Diagram of the UHF algebra `⊗ M_{d_j}`: one vertex per level, `d_j`
/// zero-potential arrows into level `j`.
pub fn uhf_diagram(d: DSequence) -> Result<LeveledDiagram> {
    Ok(LeveledDiagram::from_source(sources::Uhf::new(d)?))
}

/// Diagram of a seed whose KMS cone has exactly `d` extreme rays.
///
/// There are `d` vertices on every level `j >= 1`. With `N_j = d * growth^j`,
/// the first block is a single row of `N_1 + 1` arrows and every later block
/// is `N_j I + J` (`J` the all-ones matrix). All potentials are zero.
pub fn simplex_seed(d: usize, growth: u64) -> Result<LeveledDiagram> {
    Ok(LeveledDiagram::from_source(sources::SimplexSeed::new(
        d, growth,
    )?))
}
