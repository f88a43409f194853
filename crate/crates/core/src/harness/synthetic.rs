//! Class-conditional multinomial corpus generator.
//!
//! Tokens `w0000 … w{V-1}` have Zipf base frequencies. A skew profile turns
//! the base distribution into one distribution per class; each document draws
//! its length from the length law and its tokens i.i.d. from its class.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Instance, LabeledCorpus, SplitTag};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SkewProfile {
    /// Every class uses the base distribution.
    Uniform,
    /// Token `t` occurs only in class `t mod classes`.
    Disjoint,
    /// A random `informative_fraction` of tokens is each assigned to one class
    /// (round robin) and is `skew` times more frequent there.
    Graded {
        informative_fraction: f64,
        skew: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthLaw {
    /// Uniform on `min..=max` tokens.
    Uniform { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub vocab_size: usize,
    pub classes: usize,
    pub zipf_exponent: f64,
    pub skew: SkewProfile,
    pub length: LengthLaw,
    pub n: usize,
    /// Probability that an observed label is replaced by another class.
    pub label_noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            vocab_size: 2000,
            classes: 2,
            zipf_exponent: 1.0,
            skew: SkewProfile::Graded {
                informative_fraction: 0.5,
                skew: 2.0,
            },
            length: LengthLaw::Uniform { min: 300, max: 304 },
            n: 2500,
            label_noise: 0.08,
        }
    }
}

impl SyntheticParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(format!("synthetic corpus: {m}")));
        if self.classes < 2 {
            return bad("needs at least 2 classes");
        }
        if self.n < 10 * self.classes {
            return bad("n must be at least 10 per class");
        }
        if self.vocab_size < self.classes {
            return bad("vocabulary smaller than the number of classes");
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1)");
        }
        if let SkewProfile::Graded {
            informative_fraction,
            skew,
        } = self.skew
        {
            if !(informative_fraction > 0.0 && informative_fraction <= 1.0) {
                return bad("informative_fraction must lie in (0, 1]");
            }
            if !(skew > 0.0 && skew.is_finite()) {
                return bad("skew must be finite and > 0");
            }
        }
        let LengthLaw::Uniform { min, max } = self.length;
        if min == 0 || min > max {
            return bad("length law needs 1 <= min <= max");
        }
        Ok(())
    }

    /// Per-class token weights (unnormalized), class-major.
    pub fn class_weights(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let v = self.vocab_size;
        let k = self.classes;
        let base: Vec<f64> = (0..v)
            .map(|r| 1.0 / ((r + 1) as f64).powf(self.zipf_exponent))
            .collect();
        let mut weights = vec![base.clone(); k];
        match self.skew {
            SkewProfile::Uniform => {}
            SkewProfile::Disjoint => {
                for (c, w) in weights.iter_mut().enumerate() {
                    for (t, x) in w.iter_mut().enumerate() {
                        if t % k != c {
                            *x = 0.0;
                        }
                    }
                }
            }
            SkewProfile::Graded {
                informative_fraction,
                skew,
            } => {
                let mut tokens: Vec<usize> = (0..v).collect();
                tokens.shuffle(&mut seed::rng_for(seed, "informative-tokens"));
                let n_inf = ((v as f64) * informative_fraction).round() as usize;
                for (i, &t) in tokens.iter().take(n_inf).enumerate() {
                    weights[i % k][t] *= skew;
                }
            }
        }
        Ok(weights)
    }
}

pub fn token_name(t: usize) -> String {
    format!("w{t:04}")
}

/// Deterministic corpus from `params` and `seed`; labels are balanced round robin.
pub fn generate_synthetic_corpus(params: &SyntheticParams, seed: u64) -> Result<LabeledCorpus> {
    let weights = params.class_weights(seed)?;
    let samplers: Vec<WeightedIndex<f64>> = weights
        .iter()
        .map(|w| {
            WeightedIndex::new(w).map_err(|e| Error::InvalidParam(format!("synthetic corpus: {e}")))
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = (0..params.vocab_size).map(token_name).collect();
    let LengthLaw::Uniform { min, max } = params.length;
    let k = params.classes;
    let instances = (0..params.n)
        .map(|i| {
            let id = format!("syn-{i:05}");
            let mut rng = seed::rng_for(seed, &id);
            let class = i % k;
            let len = rng.random_range(min..=max);
            let tokens = (0..len)
                .map(|_| names[samplers[class].sample(&mut rng)].clone())
                .collect();
            let label = if rng.random::<f64>() < params.label_noise {
                let r = rng.random_range(0..k - 1);
                if r >= class {
                    r + 1
                } else {
                    r
                }
            } else {
                class
            };
            Instance {
                doc: Document::new(id, tokens),
                label,
            }
        })
        .collect();
    LabeledCorpus::new(
        instances,
        (0..k).map(|c| format!("class_{c}")).collect(),
        SplitTag::Full,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let p = SyntheticParams {
            n: 200,
            ..SyntheticParams::default()
        };
        let a = generate_synthetic_corpus(&p, 5).unwrap();
        assert_eq!(a, generate_synthetic_corpus(&p, 5).unwrap());
        assert_ne!(a, generate_synthetic_corpus(&p, 6).unwrap());
        assert!(a.docs().all(|d| (300..=304).contains(&d.len())));
    }

    #[test]
    fn degenerate_params_are_rejected() {
        let ok = SyntheticParams::default();
        for p in [
            SyntheticParams { classes: 1, ..ok },
            SyntheticParams { n: 19, ..ok },
            SyntheticParams {
                label_noise: 1.0,
                ..ok
            },
            SyntheticParams {
                length: LengthLaw::Uniform { min: 5, max: 4 },
                ..ok
            },
            SyntheticParams {
                skew: SkewProfile::Graded {
                    informative_fraction: 0.0,
                    skew: 2.0,
                },
                ..ok
            },
        ] {
            assert!(generate_synthetic_corpus(&p, 0).is_err(), "{p:?}");
        }
    }

    #[test]
    fn disjoint_profile_keeps_classes_apart() {
        let p = SyntheticParams {
            n: 40,
            skew: SkewProfile::Disjoint,
            label_noise: 0.0,
            ..SyntheticParams::default()
        };
        let c = generate_synthetic_corpus(&p, 1).unwrap();
        for inst in c.instances() {
            assert!(inst
                .doc
                .tokens
                .iter()
                .all(|t| t[1..].parse::<usize>().unwrap() % 2 == inst.label));
        }
    }
}
