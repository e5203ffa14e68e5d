//! JSON specifications for diagrams, glued diagrams and the UHF pipeline.

use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::diagram::{simplex_seed, uhf_diagram, DSequence, LevelBlock, LeveledDiagram};
use crate::glue::{build_glued, Endpoint, GluedDiagram, IntervalSpec};
use crate::{Error, Result};

fn default_growth() -> u64 {
    4
}

/// One block entry `[row, col, [[value, count], ...]]`.
pub type BlockEntry = (usize, usize, Vec<(f64, u64)>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagramSpec {
    Explicit {
        level_sizes: Vec<usize>,
        /// `blocks[j-1]` lists the nonempty entries of block `j`.
        blocks: Vec<Vec<BlockEntry>>,
    },
    Stationary {
        size: usize,
        /// Arrow counts, rows index the upper level.
        matrix: Vec<Vec<u64>>,
        #[serde(default)]
        potential: f64,
        /// Counts from the top vertex; all ones if absent.
        #[serde(default)]
        top: Option<Vec<u64>>,
    },
    Uhf {
        d: DSequence,
    },
    SimplexSeed {
        d: usize,
        #[serde(default = "default_growth")]
        growth: u64,
    },
    SinglePath {
        #[serde(default)]
        potential: f64,
    },
    Glued(GlueSpec),
    Tensor {
        left: Box<DiagramSpec>,
        right: Box<DiagramSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueSpec {
    pub intervals: Vec<IntervalSpec>,
    pub seeds: Vec<DiagramSpec>,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UhfSpec {
    pub d: DSequence,
}

impl UhfSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = match &self.d {
            DSequence::Explicit(v) => v.is_empty() || v.iter().any(|&x| x < 2),
            DSequence::Repeat { repeat } => repeat.is_empty() || repeat.iter().any(|&x| x < 2),
        };
        if bad {
            return Err(Error::Spec(
                "UHF factors must be a nonempty list of integers >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub glue: GlueSpec,
    pub uhf: UhfSpec,
    pub depth: usize,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
}

/// Any file the CLI accepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnySpec {
    Pipeline(PipelineSpec),
    Glue(GlueSpec),
    Diagram(DiagramSpec),
}

impl AnySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        // Untagged errors are useless, so try the shapes in order and report
        // the error of the most specific one that matches the keys present.
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("kind").is_some() {
            return Ok(AnySpec::Diagram(serde_json::from_value(value)?));
        }
        if value.get("glue").is_some() {
            return Ok(AnySpec::Pipeline(serde_json::from_value(value)?));
        }
        Ok(AnySpec::Glue(serde_json::from_value(value)?))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl DiagramSpec {
    pub fn build(&self) -> Result<LeveledDiagram> {
        match self {
            DiagramSpec::Explicit {
                level_sizes,
                blocks,
            } => {
                if blocks.len() + 1 != level_sizes.len() {
                    return Err(Error::Spec(format!(
                        "{} level sizes need {} blocks",
                        level_sizes.len(),
                        level_sizes.len().saturating_sub(1)
                    )));
                }
                let mut out = Vec::with_capacity(blocks.len());
                for (j, entries) in blocks.iter().enumerate() {
                    let (rows, cols) = (level_sizes[j], level_sizes[j + 1]);
                    let mut b = LevelBlock::new(rows, cols);
                    for (r, c, bundle) in entries {
                        if *r >= rows || *c >= cols {
                            return Err(Error::Spec(format!(
                                "block {} entry ({r}, {c}) is out of range",
                                j + 1
                            )));
                        }
                        for (value, count) in bundle {
                            if !value.is_finite() {
                                return Err(Error::Spec(format!(
                                    "block {} has a non-finite potential",
                                    j + 1
                                )));
                            }
                            if *count > 0 {
                                b.get_mut(*r, *c).add(*value, BigUint::from(*count));
                            }
                        }
                    }
                    out.push(b);
                }
                LeveledDiagram::explicit(level_sizes.clone(), out)
            }
            DiagramSpec::Stationary {
                size,
                matrix,
                potential,
                top,
            } => {
                if matrix.len() != *size || matrix.iter().any(|r| r.len() != *size) {
                    return Err(Error::Spec(format!(
                        "stationary matrix must be {size}x{size}"
                    )));
                }
                let top = top.clone().unwrap_or_else(|| vec![1; *size]);
                if top.len() != *size {
                    return Err(Error::Spec(format!("top row must have {size} entries")));
                }
                let flat: Vec<u64> = matrix.iter().flatten().copied().collect();
                LeveledDiagram::stationary(
                    LevelBlock::from_counts(1, *size, &top, *potential),
                    LevelBlock::from_counts(*size, *size, &flat, *potential),
                )
            }
            DiagramSpec::Uhf { d } => {
                UhfSpec { d: d.clone() }.validate()?;
                uhf_diagram(d.clone())
            }
            DiagramSpec::SimplexSeed { d, growth } => simplex_seed(*d, *growth),
            DiagramSpec::SinglePath { potential } => Ok(LeveledDiagram::single_path(*potential)),
            DiagramSpec::Glued(g) => Ok(g.build()?.diagram().clone()),
            DiagramSpec::Tensor { left, right } => Ok(left.build()?.tensor(&right.build()?)),
        }
    }
}

impl GlueSpec {
    pub fn build(&self) -> Result<GluedDiagram> {
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.build())
            .collect::<Result<Vec<_>>>()?;
        build_glued(self.intervals.clone(), seeds, self.depth)
    }
}

/// Bounded intervals with endpoints on the grid `{p/q : |p| <= Q q}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RationalFamily {
    pub big_q: u32,
    pub q: u32,
    pub include_degenerate: bool,
}

impl RationalFamily {
    pub fn new(big_q: u32, q: u32) -> Result<Self> {
        if big_q == 0 || q == 0 {
            return Err(Error::Spec("Q and q must be positive".into()));
        }
        Ok(Self {
            big_q,
            q,
            include_degenerate: true,
        })
    }

    /// Sorted grid points.
    pub fn grid(&self) -> Vec<f64> {
        let (big_q, q) = (self.big_q as i64, self.q as i64);
        let mut pts: Vec<(i64, i64)> = Vec::new();
        for den in 1..=q {
            for p in -big_q * den..=big_q * den {
                pts.push((p, den));
            }
        }
        let mut vals: Vec<f64> = pts.iter().map(|&(p, d)| p as f64 / d as f64).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        vals
    }

    /// Closed intervals `[a, b]`, `a < b`, in lexicographic order, then the
    /// degenerate `[a, a]` if requested.
    pub fn intervals(&self) -> Vec<IntervalSpec> {
        let g = self.grid();
        let mut out = Vec::new();
        for (i, &a) in g.iter().enumerate() {
            for &b in &g[i + 1..] {
                out.push(IntervalSpec::closed(a, b));
            }
        }
        if self.include_degenerate {
            out.extend(
                g.iter()
                    .map(|&a| IntervalSpec::new(Endpoint::closed(a), Endpoint::closed(a))),
            );
        }
        out
    }

    /// `{ℝ} ∪ intervals` glued onto seeds with pairwise distinct extreme counts.
    pub fn glue_spec(&self, growth: u64, depth: usize) -> GlueSpec {
        let intervals = self.intervals();
        let sizes = distinct_sum_sizes(&self.grid(), &intervals);
        let mut all = vec![IntervalSpec::real_line()];
        let mut seeds = vec![DiagramSpec::SinglePath { potential: 0.0 }];
        for (i, d) in intervals.into_iter().zip(sizes) {
            all.push(i);
            seeds.push(DiagramSpec::SimplexSeed { d, growth });
        }
        GlueSpec {
            intervals: all,
            seeds,
            depth,
        }
    }

    pub fn build(&self, growth: u64, depth: usize) -> Result<GluedDiagram> {
        Ok(self
            .glue_spec(growth, depth)
            .build()?
            .with_infinite_family(true))
    }
}

/// Sample points of the open cells cut out by `grid`.
pub fn cell_points(grid: &[f64], offset: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    if let Some(&first) = grid.first() {
        out.push(first - 1.0 + offset);
    }
    for w in grid.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    if let Some(&last) = grid.last() {
        out.push(last + 1.0 - offset);
    }
    out
}

/// Seed sizes `d_I = index + 1`, bumped where needed so that the predicted
/// extreme counts `1 + Σ_{I ∋ β} d_I` differ between cells with different
/// active sets.
fn distinct_sum_sizes(grid: &[f64], intervals: &[IntervalSpec]) -> Vec<usize> {
    let cells = cell_points(grid, 0.0);
    let active: Vec<Vec<usize>> = cells
        .iter()
        .map(|&b| {
            (0..intervals.len())
                .filter(|&k| intervals[k].contains(b))
                .collect()
        })
        .collect();
    let mut sizes: Vec<usize> = (1..=intervals.len()).collect();
    loop {
        let counts: Vec<usize> = active
            .iter()
            .map(|a| 1 + a.iter().map(|&k| sizes[k]).sum::<usize>())
            .collect();
        let clash = (0..cells.len())
            .flat_map(|a| (a + 1..cells.len()).map(move |b| (a, b)))
            .find(|&(a, b)| counts[a] == counts[b] && active[a] != active[b]);
        let Some((a, b)) = clash else { return sizes };
        // Lift an interval active in exactly one of the two cells above every count.
        let k = active[a]
            .iter()
            .chain(&active[b])
            .copied()
            .filter(|k| active[a].contains(k) != active[b].contains(k))
            .max();
        sizes[k.expect("different active sets")] += counts.iter().copied().max().unwrap_or(0);
    }
}
