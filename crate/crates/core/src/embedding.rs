use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fixed-dimension real vector produced by a backend for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding must have at least one dimension".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("embedding component {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn cast<U: Scalar>(&self) -> Embedding<U> {
        Embedding { values: self.values.iter().map(|v| U::lit(v.to_f64().unwrap_or(0.0))).collect() }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * factor).collect() }
    }
}
