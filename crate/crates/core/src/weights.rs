//! Mode weighting schemes.
//!
//! A scheme turns the correlation matrix of a group of series (the whole
//! market, or one cluster) into the weights of that group's mode. Schemes are
//! registered by name so the manifest and CLI can select one at runtime.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{leading_eigenvector, CorrelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Eigen,
    Equal,
}

/// Per-series weights of a mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub scheme: SchemeKind,
}

impl WeightVector {
    /// Every weight is exactly `1/n`.
    pub fn equal(n: usize) -> Self {
        WeightVector { weights: vec![1.0 / n as f64; n], scheme: SchemeKind::Equal }
    }

    pub(crate) fn eigen(weights: Vec<f64>) -> Self {
        WeightVector { weights, scheme: SchemeKind::Eigen }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub trait WeightingScheme: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> SchemeKind;
    fn weights(&self, corr: &CorrelationMatrix) -> Result<WeightVector>;
}

/// Entries of the leading eigenvector of the group correlation matrix.
#[derive(Debug, Default, Clone, Copy)]
pub struct EigenWeights;

impl WeightingScheme for EigenWeights {
    fn name(&self) -> &'static str {
        "eigen"
    }

    fn kind(&self) -> SchemeKind {
        SchemeKind::Eigen
    }

    fn weights(&self, corr: &CorrelationMatrix) -> Result<WeightVector> {
        if corr.len() == 1 {
            return Ok(WeightVector::eigen(vec![1.0]));
        }
        leading_eigenvector(corr).map(|(_, v)| v)
    }
}

/// `1/n` for every member.
#[derive(Debug, Default, Clone, Copy)]
pub struct EqualWeights;

impl WeightingScheme for EqualWeights {
    fn name(&self) -> &'static str {
        "equal"
    }

    fn kind(&self) -> SchemeKind {
        SchemeKind::Equal
    }

    fn weights(&self, corr: &CorrelationMatrix) -> Result<WeightVector> {
        if corr.is_empty() {
            return Err(Error::validation("cannot weight an empty group"));
        }
        Ok(WeightVector::equal(corr.len()))
    }
}

/// Name-keyed collection of weighting schemes.
pub struct SchemeRegistry {
    schemes: Vec<Arc<dyn WeightingScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        SchemeRegistry { schemes: Vec::new() }
    }

    /// Replaces any scheme already registered under the same name.
    pub fn register(&mut self, scheme: Arc<dyn WeightingScheme>) {
        self.schemes.retain(|s| s.name() != scheme.name());
        self.schemes.push(scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn WeightingScheme>> {
        self.schemes.iter().find(|s| s.name() == name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "weighting scheme",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.iter().map(|s| s.name()).collect()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = SchemeRegistry::empty();
        r.register(Arc::new(EigenWeights));
        r.register(Arc::new(EqualWeights));
        r
    }
}
