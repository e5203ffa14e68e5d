use nalgebra::DMatrix;

use crate::diagram::LeveledDiagram;
use crate::numeric::log_sum_exp;
use crate::spectral::{ln_transfer, LogMatrix};
use crate::{Error, Result};

/// Transfer matrices of a diagram at fixed β in the `ρ` gauge.
#[derive(Clone, Debug)]
pub struct GaugedSystem {
    beta: f64,
    ln_rho: Vec<Vec<f64>>,
    ln_a: Vec<LogMatrix>,
    hat: Vec<DMatrix<f64>>,
}

impl GaugedSystem {
    /// Builds levels `1..=depth` of `D` at inverse temperature `beta`.
    pub fn new(d: &LeveledDiagram, beta: f64, depth: usize) -> Result<Self> {
        let mats = (1..=depth)
            .map(|j| ln_transfer(d, j, beta))
            .collect::<Result<Vec<_>>>()?;
        Self::from_log_matrices(beta, mats)
    }

    /// Builds the system from `ln A^(1), ln A^(2), ...`.
    pub fn from_log_matrices(beta: f64, mats: Vec<LogMatrix>) -> Result<Self> {
        let mut sys = Self {
            beta,
            ln_rho: vec![vec![0.0]],
            ln_a: Vec::new(),
            hat: Vec::new(),
        };
        for m in mats {
            sys.push_level(m)?;
        }
        Ok(sys)
    }

    /// Appends `ln A^(depth+1)`.
    pub fn push_level(&mut self, m: LogMatrix) -> Result<()> {
        let prev = self.ln_rho.last().unwrap();
        if m.rows() != prev.len() {
            return Err(Error::InvalidDiagram(format!(
                "transfer matrix {} has {} rows, previous level has {} vertices",
                self.ln_a.len() + 1,
                m.rows(),
                prev.len()
            )));
        }
        let rho: Vec<f64> = (0..m.cols())
            .map(|w| log_sum_exp((0..m.rows()).map(|v| prev[v] + m.get(v, w))))
            .collect();
        if rho.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::Overflow(format!(
                "gauge at level {}",
                self.ln_a.len() + 1
            )));
        }
        let mut rho = rho;
        let mut hat = DMatrix::from_fn(m.rows(), m.cols(), |v, w| {
            if rho[w] == f64::NEG_INFINITY {
                0.0
            } else {
                (prev[v] + m.get(v, w) - rho[w]).exp()
            }
        });
        // Fold the rounding of the log-sum back into ρ so Â is stochastic to
        // the last bit and still an exact diagonal rescaling.
        for w in 0..m.cols() {
            let s: f64 = hat.column(w).iter().sum();
            if s > 0.0 {
                hat.column_mut(w).iter_mut().for_each(|x| *x /= s);
                rho[w] += s.ln();
            }
        }
        self.ln_rho.push(rho);
        self.ln_a.push(m);
        self.hat.push(hat);
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn depth(&self) -> usize {
        self.hat.len()
    }

    pub fn size(&self, level: usize) -> usize {
        self.ln_rho[level].len()
    }

    /// Gauged `Â^(j)`, rows level `j-1`, columns level `j`.
    pub fn hat(&self, level: usize) -> &DMatrix<f64> {
        &self.hat[level - 1]
    }

    /// `ln A^(j)(β)` in natural units.
    pub fn ln_transfer(&self, level: usize) -> &LogMatrix {
        &self.ln_a[level - 1]
    }

    /// `ln ρ_j(w)`.
    pub fn ln_rho(&self, level: usize) -> &[f64] {
        &self.ln_rho[level]
    }

    /// Hat vector at level `to` of the column that is `x` at level `from`.
    pub fn push_up(&self, from: usize, to: usize, x: &[f64]) -> Vec<f64> {
        let mut v = nalgebra::DVector::from_column_slice(x);
        for j in (to + 1..=from).rev() {
            v = self.hat(j) * v;
        }
        v.as_slice().to_vec()
    }
}
