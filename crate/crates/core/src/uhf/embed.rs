use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::diagram::{DSequence, EdgeBundle, LevelBlock, LevelSource, LeveledDiagram};
use crate::numeric::{ln_big, ser_big};
use crate::spec::UhfSpec;
use crate::spectral::{ln_phi, LogMatrix};
use crate::{Error, Result};

/// Most UHF factors one diagram level may absorb.
pub const DEFAULT_WINDOW_CAP: usize = 4096;

/// Slack on the numerical `φ >= 1/4` check.
pub const PHI_SLACK: f64 = 1e-12;

/// UHF factors `d_{start+1}, ..., d_end` grouped onto one diagram level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    pub level: usize,
    pub start: usize,
    pub end: usize,
    /// Number of vertices on the level.
    pub size: usize,
    #[serde(serialize_with = "ser_big")]
    pub product: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub s: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub r: BigUint,
    /// Vertex receiving the remainder.
    pub u: usize,
    #[serde(serialize_with = "ser_big")]
    pub max_entry: BigUint,
}

#[derive(Debug)]
struct EmbedState {
    base: LeveledDiagram,
    d: DSequence,
    cap: usize,
    windows: Vec<Window>,
}

impl EmbedState {
    fn window(&mut self, level: usize) -> Result<Window> {
        while self.windows.len() < level {
            let j = self.windows.len() + 1;
            let start = self.windows.last().map_or(0, |w| w.end);
            let block = self.base.block(j)?;
            let size = block.cols();
            let max_entry = block.counts().into_iter().max().unwrap_or_default();
            let need = (&max_entry * 2u32).max(BigUint::one());
            let n = BigUint::from(size);
            let mut product = BigUint::one();
            let mut end = start;
            loop {
                if end - start >= self.cap {
                    return Err(Error::WindowCap {
                        level: j,
                        cap: self.cap,
                    });
                }
                end += 1;
                let d = self.d.get(end).ok_or(Error::DepthExceeded {
                    level: end,
                    available: end - 1,
                })?;
                product *= d;
                if &product / &n >= need {
                    break;
                }
            }
            let (s, r) = (&product / &n, &product % &n);
            self.windows.push(Window {
                level: j,
                start,
                end,
                size,
                product,
                s,
                r,
                u: 0,
                max_entry,
            });
        }
        Ok(self.windows[level - 1].clone())
    }
}

#[derive(Debug)]
struct EmbedSource {
    state: Arc<Mutex<EmbedState>>,
}

impl LevelSource for EmbedSource {
    fn level_size(&self, level: usize) -> Result<usize> {
        self.state.lock().unwrap().base.level_size(level)
    }

    fn block(&self, level: usize) -> Result<LevelBlock> {
        let w = self.state.lock().unwrap().window(level)?;
        let rows = self.level_size(level - 1)?;
        Ok(LevelBlock::from_fn(rows, w.size, |_, c| {
            let count = if c == w.u { &w.s + &w.r } else { w.s.clone() };
            EdgeBundle::single(0.0, count)
        }))
    }
}

/// A diagram `Br'` on the vertices of `Br` whose algebra is the given UHF algebra.
#[derive(Clone, Debug)]
pub struct Embedding {
    state: Arc<Mutex<EmbedState>>,
    diagram: LeveledDiagram,
    base: LeveledDiagram,
    d: DSequence,
}

impl Embedding {
    pub fn new(base: &LeveledDiagram, d: DSequence, window_cap: usize) -> Result<Self> {
        UhfSpec { d: d.clone() }.validate()?;
        let state = Arc::new(Mutex::new(EmbedState {
            base: base.clone(),
            d: d.clone(),
            cap: window_cap,
            windows: Vec::new(),
        }));
        let diagram = LeveledDiagram::from_source(EmbedSource {
            state: state.clone(),
        });
        Ok(Self {
            state,
            diagram,
            base: base.clone(),
            d,
        })
    }

    pub fn base(&self) -> &LeveledDiagram {
        &self.base
    }

    pub fn d(&self) -> &DSequence {
        &self.d
    }

    /// `Br'` with zero potential.
    pub fn diagram(&self) -> &LeveledDiagram {
        &self.diagram
    }

    pub fn window(&self, level: usize) -> Result<Window> {
        self.state.lock().unwrap().window(level)
    }

    /// `Br'^(j) - Br^(j)` in block orientation (rows level `j-1`).
    pub fn extra_counts(&self, level: usize) -> Result<Vec<Vec<BigUint>>> {
        let w = self.window(level)?;
        let b = self.base.block(level)?;
        let mut out = Vec::with_capacity(b.rows());
        for r in 0..b.rows() {
            let mut row = Vec::with_capacity(b.cols());
            for c in 0..b.cols() {
                let total = if c == w.u { &w.s + &w.r } else { w.s.clone() };
                let have = b.get(r, c).total();
                if have >= total {
                    return Err(Error::Certificate(format!(
                        "level {level}: entry ({r}, {c}) is not exceeded"
                    )));
                }
                row.push(total - have);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Checks every level up to `depth` and records the evidence.
    pub fn certificate(&self, depth: usize) -> Result<EmbeddingCertificate> {
        let mut levels = Vec::with_capacity(depth);
        let mut uhf = BigUint::one();
        let mut consumed = 0;
        for j in 1..=depth {
            let w = self.window(j)?;
            while consumed < w.end {
                consumed += 1;
                uhf *= self.d.get(consumed).expect("window factors exist");
            }
            let extra = self.extra_counts(j)?;
            let m = LogMatrix::from_fn(extra.len(), w.size, |r, c| ln_big(&extra[r][c]));
            let ln_phi_extra = ln_phi(&m).ok_or_else(|| {
                Error::Certificate(format!("level {j}: Br' - Br has a zero entry"))
            })?;
            let path_count = self.diagram.path_counts(j)?.total();
            let cert = LevelCertificate {
                window: w,
                phi_extra: ln_phi_extra.exp(),
                path_count,
                uhf_count: uhf.clone(),
            };
            cert.verify()?;
            levels.push(cert);
        }
        Ok(EmbeddingCertificate { levels })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCertificate {
    #[serde(flatten)]
    pub window: Window,
    /// `φ(Br'^(j) - Br^(j))`.
    pub phi_extra: f64,
    /// Total path count of `Br'` at this level.
    #[serde(serialize_with = "ser_big")]
    pub path_count: BigUint,
    /// `Π_{i <= k_j} d_i`.
    #[serde(serialize_with = "ser_big")]
    pub uhf_count: BigUint,
}

impl LevelCertificate {
    pub fn verify(&self) -> Result<()> {
        let w = &self.window;
        let j = w.level;
        let n = BigUint::from(w.size);
        let fail = |what: &str| Err(Error::Certificate(format!("level {j}: {what}")));
        if w.end <= w.start {
            return fail("empty window");
        }
        if &w.s * &n + &w.r != w.product || w.r > n {
            return fail("window product does not split as S·#Br + r");
        }
        if &w.max_entry * 2u32 > w.s || w.s.is_zero() {
            return fail("max entry exceeds S/2");
        }
        if !(self.phi_extra >= 0.25 - PHI_SLACK) {
            return fail(&format!("φ(Br' - Br) = {} is below 1/4", self.phi_extra));
        }
        if self.path_count != self.uhf_count {
            return fail("path count differs from the UHF product");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingCertificate {
    pub levels: Vec<LevelCertificate>,
}

impl EmbeddingCertificate {
    pub fn verify(&self) -> Result<()> {
        for (i, l) in self.levels.iter().enumerate() {
            if l.window.level != i + 1 || (i > 0 && l.window.start != self.levels[i - 1].window.end)
            {
                return Err(Error::Certificate(format!(
                    "windows are not contiguous at level {}",
                    i + 1
                )));
            }
            l.verify()?;
        }
        Ok(())
    }
}

/// Embeds `d` into the UHF algebra of `u` and certifies levels `1..=depth`.
pub fn embed_into_uhf(
    d: &LeveledDiagram,
    u: &UhfSpec,
    depth: usize,
    window_cap: usize,
) -> Result<(Embedding, EmbeddingCertificate)> {
    let report = d.validate(depth);
    if !report.passed() {
        return Err(Error::InvalidDiagram(report.violations[0].to_string()));
    }
    let e = Embedding::new(d, u.d.clone(), window_cap)?;
    let cert = e.certificate(depth)?;
    Ok((e, cert))
}
