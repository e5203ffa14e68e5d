use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::numeric::{ln_big, log_sum_exp};
use crate::{Error, Result};

/// Arrows between one pair of vertices, grouped by potential value.
///
/// Entries are sorted by value, values are distinct and counts are positive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeBundle {
    entries: Vec<(f64, BigUint)>,
}

impl EdgeBundle {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(value: f64, count: impl Into<BigUint>) -> Self {
        let mut b = Self::empty();
        b.add(value, count.into());
        b
    }

    /// Strict constructor: rejects duplicate values, zero counts and
    /// non-finite potentials.
    pub fn from_entries<I: IntoIterator<Item = (f64, BigUint)>>(entries: I) -> Result<Self> {
        let mut v: Vec<(f64, BigUint)> = entries.into_iter().collect();
        for (f, c) in &v {
            if !f.is_finite() {
                return Err(Error::InvalidDiagram(format!("non-finite potential {f}")));
            }
            if c.is_zero() {
                return Err(Error::InvalidDiagram("zero arrow count in bundle".into()));
            }
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        if v.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDiagram(
                "duplicate potential value in bundle".into(),
            ));
        }
        Ok(Self { entries: v })
    }

    /// Adds `count` arrows of potential `value`, merging with an existing entry.
    pub fn add(&mut self, value: f64, count: BigUint) {
        if count.is_zero() {
            return;
        }
        match self.entries.binary_search_by(|e| e.0.total_cmp(&value)) {
            Ok(i) => self.entries[i].1 += count,
            Err(i) => self.entries.insert(i, (value, count)),
        }
    }

    pub fn entries(&self) -> &[(f64, BigUint)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of arrows.
    pub fn total(&self) -> BigUint {
        self.entries
            .iter()
            .fold(BigUint::zero(), |acc, e| acc + &e.1)
    }

    /// `ln Σ c e^{-β f}`, `-inf` for an empty bundle.
    pub fn ln_weight(&self, beta: f64) -> f64 {
        log_sum_exp(self.entries.iter().map(|(f, c)| ln_big(c) - beta * f))
    }

    /// Concatenated paths: potentials add, counts multiply.
    pub fn compose(&self, other: &EdgeBundle) -> EdgeBundle {
        self.combine(other, |a, b| a + b)
    }

    /// Product bundle for the tensor diagram: potential `f - f'`.
    pub fn tensor(&self, other: &EdgeBundle) -> EdgeBundle {
        self.combine(other, |a, b| a - b)
    }

    /// Sum of two bundles between the same vertices.
    pub fn merge(&mut self, other: &EdgeBundle) {
        for (f, c) in &other.entries {
            self.add(*f, c.clone());
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> EdgeBundle {
        let mut out = EdgeBundle::empty();
        for (v, c) in &self.entries {
            out.add(f(*v), c.clone());
        }
        out
    }

    fn combine(&self, other: &EdgeBundle, op: impl Fn(f64, f64) -> f64) -> EdgeBundle {
        let mut out = EdgeBundle::empty();
        for (f, c) in &self.entries {
            for (g, d) in &other.entries {
                out.add(op(*f, *g), c * d);
            }
        }
        out
    }
}

/// The arrows between consecutive levels `j-1` (rows) and `j` (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct LevelBlock {
    rows: usize,
    cols: usize,
    bundles: Vec<EdgeBundle>,
}

impl LevelBlock {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bundles: vec![EdgeBundle::empty(); rows * cols],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> EdgeBundle,
    ) -> Self {
        let mut bundles = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bundles.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            bundles,
        }
    }

    /// Block with the given arrow counts, all at potential `value`.
    pub fn from_counts(rows: usize, cols: usize, counts: &[u64], value: f64) -> Self {
        assert_eq!(counts.len(), rows * cols);
        Self::from_fn(rows, cols, |r, c| {
            EdgeBundle::single(value, BigUint::from(counts[r * cols + c]))
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &EdgeBundle {
        &self.bundles[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut EdgeBundle {
        &mut self.bundles[r * self.cols + c]
    }

    /// Row-major arrow counts.
    pub fn counts(&self) -> Vec<BigUint> {
        self.bundles.iter().map(EdgeBundle::total).collect()
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        (0..self.cols).all(|c| self.get(r, c).is_empty())
    }

    pub fn col_is_empty(&self, c: usize) -> bool {
        (0..self.rows).all(|r| self.get(r, c).is_empty())
    }

    /// Block of the two-step paths through the shared middle level.
    pub fn compose(&self, next: &LevelBlock) -> LevelBlock {
        assert_eq!(self.cols, next.rows, "inner dimensions differ");
        LevelBlock::from_fn(self.rows, next.cols, |r, c| {
            let mut acc = EdgeBundle::empty();
            for m in 0..self.cols {
                let (a, b) = (self.get(r, m), next.get(m, c));
                if !a.is_empty() && !b.is_empty() {
                    acc.merge(&a.compose(b));
                }
            }
            acc
        })
    }

    /// Kronecker block: vertex `(v, v')` is indexed `v * n' + v'`.
    pub fn tensor(&self, other: &LevelBlock) -> LevelBlock {
        let (r2, c2) = (other.rows, other.cols);
        LevelBlock::from_fn(self.rows * r2, self.cols * c2, |r, c| {
            self.get(r / r2, c / c2).tensor(other.get(r % r2, c % c2))
        })
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64 + Copy) -> LevelBlock {
        LevelBlock {
            rows: self.rows,
            cols: self.cols,
            bundles: self.bundles.iter().map(|b| b.map_values(f)).collect(),
        }
    }

    /// Total arrow count of the whole block.
    pub fn total(&self) -> BigUint {
        self.bundles
            .iter()
            .fold(BigUint::zero(), |acc, b| acc + b.total())
    }

    pub fn all_single_unit(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| EdgeBundle::single(0.0, BigUint::one()))
    }
}
