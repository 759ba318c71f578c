//! Two-input Mamdani inference: min for AND and implication, max for
//! aggregation, discrete centroid defuzzification.

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};

/// Samples of the output universe used by the centroid.
pub const CENTROID_SAMPLES: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum MembershipFunction {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Self {
        MembershipFunction::Triangular { a, b, c }
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Self {
        MembershipFunction::Trapezoidal { a, b, c, d }
    }

    /// As a trapezoid (a, b, c, d); a triangle has b = c.
    pub fn corners(&self) -> [f64; 4] {
        match *self {
            MembershipFunction::Triangular { a, b, c } => [a, b, b, c],
            MembershipFunction::Trapezoidal { a, b, c, d } => [a, b, c, d],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let [a, _, _, d] = self.corners();
        (a, d)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.corners();
        if k.iter().all(|x| x.is_finite()) && k.windows(2).all(|w| w[0] <= w[1]) && k[0] < k[3] {
            Ok(())
        } else {
            Err(PvError::Config(format!("membership breakpoints not ordered: {self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x < b {
            (x - a) / (b - a)
        } else if x <= c {
            1.0
        } else if d > c {
            (d - x) / (d - c)
        } else {
            1.0
        }
    }
}

pub fn mf_eval(mf: &MembershipFunction, x: f64) -> f64 {
    mf.eval(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub mf: MembershipFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub universe: (f64, f64),
    pub terms: Vec<Term>,
}

/// Labels of the default five-term partition.
pub const FIVE_LABELS: [&str; 5] = ["NB", "NS", "ZE", "PS", "PB"];

impl LinguisticVariable {
    /// Uniformly spaced triangles with 50% overlap; the end terms are
    /// shoulders at the universe bounds.
    pub fn uniform(name: &str, lo: f64, hi: f64, labels: &[&str]) -> Self {
        let k = labels.len();
        assert!(k >= 2 && lo < hi);
        let step = (hi - lo) / (k - 1) as f64;
        let centers: Vec<f64> = (0..k)
            .map(|j| if j + 1 == k { hi } else { lo + j as f64 * step })
            .collect();
        let terms = labels
            .iter()
            .enumerate()
            .map(|(j, label)| {
                let b = centers[j];
                let a = if j == 0 { lo } else { centers[j - 1] };
                let c = if j + 1 == k { hi } else { centers[j + 1] };
                Term {
                    label: label.to_string(),
                    mf: MembershipFunction::triangular(a, b, c),
                }
            })
            .collect();
        LinguisticVariable {
            name: name.to_string(),
            universe: (lo, hi),
            terms,
        }
    }

    pub fn width(&self) -> f64 {
        self.universe.1 - self.universe.0
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.universe.0, self.universe.1)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label == label)
    }

    /// Multiplies every breakpoint and the universe by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let s = |x: f64| x * k;
        LinguisticVariable {
            name: self.name.clone(),
            universe: (s(self.universe.0), s(self.universe.1)),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    label: t.label.clone(),
                    mf: match t.mf {
                        MembershipFunction::Triangular { a, b, c } => {
                            MembershipFunction::triangular(s(a), s(b), s(c))
                        }
                        MembershipFunction::Trapezoidal { a, b, c, d } => {
                            MembershipFunction::trapezoidal(s(a), s(b), s(c), s(d))
                        }
                    },
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.universe;
        let bad = |m: String| Err(PvError::Config(format!("variable `{}`: {m}", self.name)));
        if !(lo < hi) {
            return bad("empty universe".into());
        }
        if self.terms.is_empty() {
            return bad("no terms".into());
        }
        for (j, t) in self.terms.iter().enumerate() {
            t.mf.validate()?;
            let (a, d) = t.mf.support();
            if a < lo - 1e-12 || d > hi + 1e-12 {
                return bad(format!("term `{}` leaves the universe", t.label));
            }
            if self.terms[..j].iter().any(|u| u.label == t.label) {
                return bad(format!("duplicate label `{}`", t.label));
            }
        }
        // Coverage: every point of the universe has some positive membership.
        let mut supports: Vec<(f64, f64)> = self.terms.iter().map(|t| t.mf.support()).collect();
        supports.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut reach = lo;
        for (a, d) in supports {
            if a > reach + 1e-12 {
                return bad(format!("dead zone in [{reach}, {a}]"));
            }
            reach = reach.max(d);
        }
        if reach < hi - 1e-12 {
            return bad(format!("dead zone in [{reach}, {hi}]"));
        }
        Ok(())
    }
}

/// Complete two-input rule table: `rules[i][j]` is the output label for
/// input-1 term `i` and input-2 term `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    pub inputs: [LinguisticVariable; 2],
    pub output: LinguisticVariable,
    pub rules: Vec<Vec<String>>,
    #[serde(skip)]
    resolved: Vec<Vec<usize>>,
}

impl RuleBase {
    pub fn new(
        inputs: [LinguisticVariable; 2],
        output: LinguisticVariable,
        rules: Vec<Vec<String>>,
    ) -> Result<Self> {
        let mut rb = RuleBase {
            inputs,
            output,
            rules,
            resolved: Vec::new(),
        };
        rb.resolve()?;
        Ok(rb)
    }

    fn resolve(&mut self) -> Result<()> {
        for v in self.inputs.iter().chain(std::iter::once(&self.output)) {
            v.validate()?;
        }
        let (n1, n2) = (self.inputs[0].terms.len(), self.inputs[1].terms.len());
        if self.rules.len() != n1 || self.rules.iter().any(|r| r.len() != n2) {
            return Err(PvError::Config(format!(
                "rule table must be {n1}×{n2} to cover every input combination"
            )));
        }
        self.resolved = self
            .rules
            .iter()
            .map(|row| {
                row.iter()
                    .map(|l| {
                        self.output.label_index(l).ok_or_else(|| {
                            PvError::Config(format!("unknown output label `{l}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut rb: RuleBase = serde_json::from_str(text)?;
        rb.resolve()?;
        Ok(rb)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Same table with the output universe multiplied by `k`.
    pub fn with_output_gain(&self, k: f64) -> Result<Self> {
        RuleBase::new(self.inputs.clone(), self.output.scaled(k), self.rules.clone())
    }

    /// Firing strength of every output term after max-aggregation over the
    /// rules that conclude it.
    pub fn activations(&self, x1: f64, x2: f64) -> Vec<f64> {
        let x1 = self.inputs[0].clamp(x1);
        let x2 = self.inputs[1].clamp(x2);
        let mu1: Vec<f64> = self.inputs[0].terms.iter().map(|t| t.mf.eval(x1)).collect();
        let mu2: Vec<f64> = self.inputs[1].terms.iter().map(|t| t.mf.eval(x2)).collect();
        let mut act = vec![0.0; self.output.terms.len()];
        for (i, row) in self.resolved.iter().enumerate() {
            for (j, &out) in row.iter().enumerate() {
                let w = mu1[i].min(mu2[j]);
                if w > act[out] {
                    act[out] = w;
                }
            }
        }
        act
    }

    /// Aggregated output membership at `y` for the given term activations.
    pub fn aggregate(&self, activations: &[f64], y: f64) -> f64 {
        self.output
            .terms
            .iter()
            .zip(activations)
            .map(|(t, &w)| t.mf.eval(y).min(w))
            .fold(0.0, f64::max)
    }

    pub fn infer(&self, x1: f64, x2: f64) -> f64 {
        self.infer_with_samples(x1, x2, CENTROID_SAMPLES)
    }

    pub fn infer_with_samples(&self, x1: f64, x2: f64, samples: usize) -> f64 {
        let act = self.activations(x1, x2);
        self.centroid(&act, samples)
    }

    /// Discrete centroid of the aggregated set; universe midpoint when
    /// nothing fires.
    pub fn centroid(&self, activations: &[f64], samples: usize) -> f64 {
        let (lo, hi) = self.output.universe;
        let mid = 0.5 * (lo + hi);
        if activations.iter().all(|&w| w <= 0.0) || samples < 2 {
            return mid;
        }
        let step = (hi - lo) / (samples - 1) as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..samples {
            let y = if k + 1 == samples { hi } else { lo + k as f64 * step };
            // Trapezoid weights: the shoulder terms peak at the end samples.
            let w = if k == 0 || k + 1 == samples { 0.5 } else { 1.0 };
            let mu = w * self.aggregate(activations, y);
            num += y * mu;
            den += mu;
        }
        if den > 0.0 {
            num / den
        } else {
            mid
        }
    }
}

pub fn infer(rb: &RuleBase, x1: f64, x2: f64) -> f64 {
    rb.infer(x1, x2)
}
