use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::tape::CTensor;
use crate::error::{Error, Result};

/// A trainable tensor. Real parameters keep a zero imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: CTensor,
    pub complex: bool,
}

impl Param {
    pub fn real(value: ndarray::ArrayD<f64>) -> Self {
        Self { value: value.mapv(|v| C64::new(v, 0.0)), complex: false }
    }

    pub fn complex(value: CTensor) -> Self {
        Self { value, complex: true }
    }

    /// Number of real scalars.
    pub fn scalar_count(&self) -> usize {
        self.value.len() * if self.complex { 2 } else { 1 }
    }
}

/// Named parameters in deterministic (lexicographic) order.
pub type ParamSet = BTreeMap<String, Param>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Adam with bias correction. Real and imaginary parts of complex parameters
/// are treated as independent real coordinates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: BTreeMap<String, CTensor>,
    second: BTreeMap<String, CTensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, step: 0, first: BTreeMap::new(), second: BTreeMap::new() })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Parameters without a gradient entry are left untouched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &BTreeMap<String, CTensor>) -> Result<()> {
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            if g.shape() != p.value.shape() {
                return Err(Error::shape(format!("gradient for {name} has shape {:?}", g.shape())));
            }
            if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite gradient for {name}")));
            }
            let m = self.first.entry(name.clone()).or_insert_with(|| CTensor::zeros(g.raw_dim()));
            let v = self.second.entry(name.clone()).or_insert_with(|| CTensor::zeros(g.raw_dim()));
            let complex = p.complex;
            ndarray::Zip::from(&mut p.value).and(m).and(v).and(g).for_each(|x, m, v, g| {
                let g = if complex { *g } else { C64::new(g.re, 0.0) };
                m.re = beta1 * m.re + (1.0 - beta1) * g.re;
                m.im = beta1 * m.im + (1.0 - beta1) * g.im;
                v.re = beta2 * v.re + (1.0 - beta2) * g.re * g.re;
                v.im = beta2 * v.im + (1.0 - beta2) * g.im * g.im;
                x.re -= learning_rate * (m.re / bc1) / ((v.re / bc2).sqrt() + epsilon);
                if complex {
                    x.im -= learning_rate * (m.im / bc1) / ((v.im / bc2).sqrt() + epsilon);
                }
            });
        }
        Ok(())
    }
}
