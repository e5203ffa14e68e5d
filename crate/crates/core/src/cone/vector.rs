use super::GaugedSystem;
use crate::{Error, Result};

/// Levels `0..=J` of an element of the inverse-limit cone, stored gauged.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeVector {
    pub beta: f64,
    /// `ψ̂^j = ρ_j ψ^j`.
    pub hat: Vec<Vec<f64>>,
    /// `ln ρ_j`, copied from the system the vector lives on.
    pub ln_rho: Vec<Vec<f64>>,
}

impl ConeVector {
    /// The vector whose level-`level` hat values are `top`, extended upward.
    pub fn from_level(sys: &GaugedSystem, level: usize, top: &[f64]) -> Result<Self> {
        if level > sys.depth() {
            return Err(Error::DepthExceeded {
                level,
                available: sys.depth(),
            });
        }
        if top.len() != sys.size(level) || top.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain(
                "level vector has the wrong size or a negative entry".into(),
            ));
        }
        let mut hat = vec![top.to_vec()];
        for j in (1..=level).rev() {
            let next = sys.hat(j) * nalgebra::DVector::from_column_slice(hat.last().unwrap());
            hat.push(next.as_slice().to_vec());
        }
        hat.reverse();
        Ok(Self {
            beta: sys.beta(),
            hat,
            ln_rho: (0..=level).map(|j| sys.ln_rho(j).to_vec()).collect(),
        })
    }

    /// Builds from natural values `ψ^j`.
    pub fn from_natural(sys: &GaugedSystem, levels: &[Vec<f64>]) -> Result<Self> {
        let mut hat = Vec::with_capacity(levels.len());
        for (j, v) in levels.iter().enumerate() {
            if j > sys.depth() || v.len() != sys.size(j) {
                return Err(Error::Domain(format!(
                    "level {j} does not match the system"
                )));
            }
            hat.push(
                v.iter()
                    .zip(sys.ln_rho(j))
                    .map(|(x, r)| x * r.exp())
                    .collect(),
            );
        }
        Ok(Self {
            beta: sys.beta(),
            hat,
            ln_rho: (0..levels.len()).map(|j| sys.ln_rho(j).to_vec()).collect(),
        })
    }

    pub fn depth(&self) -> usize {
        self.hat.len() - 1
    }

    /// `ψ^0`.
    pub fn mass(&self) -> f64 {
        self.hat[0][0]
    }

    /// Natural values `ψ^j`; entries may underflow to zero on deep levels.
    pub fn natural(&self, level: usize) -> Vec<f64> {
        self.hat[level]
            .iter()
            .zip(&self.ln_rho[level])
            .map(|(x, r)| if *x == 0.0 { 0.0 } else { x * (-r).exp() })
            .collect()
    }

    /// `ln ψ^j_w`.
    pub fn ln_natural(&self, level: usize, w: usize) -> f64 {
        self.hat[level][w].ln() - self.ln_rho[level][w]
    }

    /// Largest `|ψ̂^{j-1} - Â^(j) ψ̂^j|`, relative to the mass.
    pub fn compatibility_residual(&self, sys: &GaugedSystem) -> f64 {
        let mut worst = 0.0f64;
        for j in 1..=self.depth().min(sys.depth()) {
            let pred = sys.hat(j) * nalgebra::DVector::from_column_slice(&self.hat[j]);
            for (a, b) in pred.iter().zip(&self.hat[j - 1]) {
                worst = worst.max((a - b).abs());
            }
        }
        worst / self.mass().max(f64::MIN_POSITIVE)
    }

    /// Checks `ψ^j_w <= ψ^0 / ρ_j(w)`, i.e. `ψ̂^j_w <= ψ^0`.
    pub fn gauge_bound_holds(&self, rel: f64) -> bool {
        let m = self.mass();
        self.hat
            .iter()
            .all(|l| l.iter().all(|x| *x <= m * (1.0 + rel)))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.hat
            .iter_mut()
            .for_each(|l| l.iter_mut().for_each(|x| *x *= c));
        out
    }

    /// Restriction to levels `0..=depth`.
    pub fn truncated(&self, depth: usize) -> Self {
        Self {
            beta: self.beta,
            hat: self.hat[..=depth].to_vec(),
            ln_rho: self.ln_rho[..=depth].to_vec(),
        }
    }

    /// Entrywise `self + c * other` on common levels; both must share a gauge.
    pub fn axpy(&self, c: f64, other: &ConeVector) -> Result<Self> {
        let depth = self.depth().min(other.depth());
        for j in 0..=depth {
            if self.ln_rho[j].len() != other.ln_rho[j].len()
                || self.ln_rho[j]
                    .iter()
                    .zip(&other.ln_rho[j])
                    .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
            {
                return Err(Error::Domain(format!(
                    "vectors live on different systems at level {j}"
                )));
            }
        }
        let hat = (0..=depth)
            .map(|j| {
                self.hat[j]
                    .iter()
                    .zip(&other.hat[j])
                    .map(|(a, b)| a + c * b)
                    .collect()
            })
            .collect();
        Ok(Self {
            beta: self.beta,
            hat,
            ln_rho: self.ln_rho[..=depth].to_vec(),
        })
    }
}
