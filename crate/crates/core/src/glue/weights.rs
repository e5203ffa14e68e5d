use serde::Serialize;

use super::{Endpoint, IntervalSpec};
use crate::numeric::log_sum_exp;

/// Closed form of one weight sequence `w_j`, `j >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum WeightForm {
    /// `e^{-c j}`.
    Exp { c: f64 },
    /// `e^{-c j} / j^2`.
    ExpOverSquare { c: f64 },
    /// `e^{-j^2}`.
    Gaussian,
    /// `1`.
    One,
}

impl WeightForm {
    pub fn ln_term(&self, j: usize) -> f64 {
        let jf = j as f64;
        match *self {
            WeightForm::Exp { c } => -c * jf,
            WeightForm::ExpOverSquare { c } => -c * jf - 2.0 * jf.ln(),
            WeightForm::Gaussian => -jf * jf,
            WeightForm::One => 0.0,
        }
    }

    /// Upper bound on `Σ_{j>L} w_j e^{j x}`; `+inf` exactly when the series diverges.
    pub fn tail(&self, l: usize, x: f64) -> f64 {
        let lf = l as f64;
        match *self {
            WeightForm::One => geometric_tail(lf, x),
            WeightForm::Exp { c } => geometric_tail(lf, x - c),
            WeightForm::ExpOverSquare { c } => {
                let r = x - c;
                if r > 0.0 {
                    return f64::INFINITY;
                }
                let harmonic = if l == 0 {
                    std::f64::consts::PI.powi(2) / 6.0
                } else {
                    1.0 / lf
                };
                if r == 0.0 {
                    return harmonic;
                }
                let geo = ((lf + 1.0) * r - (-(r.exp_m1())).ln()).exp() / ((lf + 1.0) * (lf + 1.0));
                geo.min(harmonic)
            }
            WeightForm::Gaussian => gaussian_tail(l, x),
        }
    }
}

/// `Σ_{j>L} e^{j r}` for `r < 0`.
fn geometric_tail(l: f64, r: f64) -> f64 {
    if r >= 0.0 {
        return f64::INFINITY;
    }
    ((l + 1.0) * r - (-(r.exp_m1())).ln()).exp()
}

/// `Σ_{j>L} e^{-j^2 + j x}`: sum explicitly until the term ratio
/// `e^{x - 2j - 1}` drops below 1/2, then bound the rest geometrically.
fn gaussian_tail(l: usize, x: f64) -> f64 {
    let mut logs = Vec::new();
    let mut j = l + 1;
    loop {
        let jf = j as f64;
        let ln_ratio = x - 2.0 * jf - 1.0;
        if ln_ratio < -std::f64::consts::LN_2 {
            logs.push(-jf * jf + jf * x - (-(ln_ratio.exp_m1())).ln());
            break;
        }
        logs.push(-jf * jf + jf * x);
        j += 1;
    }
    log_sum_exp(logs).exp()
}

/// The pair `(s_j, t_j)` attached to one interval: `Σ s_j e^{jβ}` and
/// `Σ t_j e^{-jβ}` both converge exactly when β is in the interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightSequences {
    pub s: WeightForm,
    pub t: WeightForm,
}

impl WeightSequences {
    pub fn ln_s(&self, j: usize) -> f64 {
        self.s.ln_term(j)
    }

    pub fn ln_t(&self, j: usize) -> f64 {
        self.t.ln_term(j)
    }

    /// Bound on `Σ_{j>L} s_j e^{jβ}`.
    pub fn tail_s(&self, l: usize, beta: f64) -> f64 {
        self.s.tail(l, beta)
    }

    /// Bound on `Σ_{j>L} t_j e^{-jβ}`.
    pub fn tail_t(&self, l: usize, beta: f64) -> f64 {
        self.t.tail(l, -beta)
    }

    pub fn converges(&self, beta: f64) -> bool {
        self.tail_s(0, beta).is_finite() && self.tail_t(0, beta).is_finite()
    }
}

/// Weight sequences for an interval, by the endpoint case table.
pub fn weight_sequences(i: &IntervalSpec) -> WeightSequences {
    if i.empty {
        return WeightSequences {
            s: WeightForm::One,
            t: WeightForm::One,
        };
    }
    let s = match i.hi {
        Endpoint::PosInf => WeightForm::Gaussian,
        Endpoint::Finite {
            value,
            closed: false,
        } => WeightForm::Exp { c: value },
        Endpoint::Finite {
            value,
            closed: true,
        } => WeightForm::ExpOverSquare { c: value },
        Endpoint::NegInf => WeightForm::One,
    };
    let t = match i.lo {
        Endpoint::NegInf => WeightForm::Gaussian,
        Endpoint::Finite {
            value,
            closed: false,
        } => WeightForm::Exp { c: -value },
        Endpoint::Finite {
            value,
            closed: true,
        } => WeightForm::ExpOverSquare { c: -value },
        Endpoint::PosInf => WeightForm::One,
    };
    WeightSequences { s, t }
}

/// `κ(2j) = j`, `κ(2j+1) = -j`.
pub fn kappa(j: usize) -> i64 {
    if j % 2 == 0 {
        (j / 2) as i64
    } else {
        -(((j - 1) / 2) as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_tail(f: &WeightForm, l: usize, x: f64, upto: usize) -> f64 {
        (l + 1..=upto)
            .map(|j| (f.ln_term(j) + j as f64 * x).exp())
            .sum()
    }

    #[test]
    fn kappa_values() {
        let v: Vec<i64> = (0..6).map(kappa).collect();
        assert_eq!(v, vec![0, 0, 1, -1, 2, -2]);
    }

    #[test]
    fn tails_dominate_partial_sums() {
        let forms = [
            WeightForm::Exp { c: 2.0 },
            WeightForm::ExpOverSquare { c: 2.0 },
            WeightForm::ExpOverSquare { c: -1.0 },
            WeightForm::Gaussian,
        ];
        for f in &forms {
            for &x in &[-3.0, -1.0, 0.0, 1.0, 1.9, 2.0, 5.0] {
                for &l in &[0usize, 1, 3, 10] {
                    let bound = f.tail(l, x);
                    if bound.is_finite() {
                        let direct = direct_tail(f, l, x, 20_000);
                        assert!(
                            direct <= bound * (1.0 + 1e-12),
                            "{f:?} x={x} l={l}: {direct} > {bound}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn real_line_always_converges() {
        let w = weight_sequences(&IntervalSpec::real_line());
        for &b in &[-30.0, -1.0, 0.0, 2.5, 30.0] {
            assert!(w.converges(b));
        }
    }

    #[test]
    fn closed_unit_interval() {
        let w = weight_sequences(&IntervalSpec::closed(1.0, 2.0));
        assert_eq!(w.s, WeightForm::ExpOverSquare { c: 2.0 });
        assert_eq!(w.t, WeightForm::ExpOverSquare { c: -1.0 });
        for (b, inside) in [(0.9, false), (1.0, true), (2.0, true), (2.1, false)] {
            assert_eq!(w.converges(b), inside, "β = {b}");
        }
    }

    #[test]
    fn empty_interval_diverges() {
        let w = weight_sequences(&IntervalSpec::empty());
        for &b in &[-1.0, 0.0, 1.0] {
            assert!(!w.converges(b));
        }
    }
}
