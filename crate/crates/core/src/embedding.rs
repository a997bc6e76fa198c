use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense word vectors for one time period, keyed by token.
///
/// Vectors are stored unnormalized in a flat row-major buffer. Tokens without
/// evidence in the period are absent rather than zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    dim: usize,
    period_id: String,
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingSpace {
    pub fn new(dim: usize, period_id: impl Into<String>) -> Self {
        EmbeddingSpace {
            dim,
            period_id: period_id.into(),
            tokens: Vec::new(),
            index: BTreeMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period_id(&self) -> &str {
        &self.period_id
    }

    pub fn set_period_id(&mut self, period_id: impl Into<String>) {
        self.period_id = period_id.into();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&row| self.row(row))
    }

    pub fn get_mut(&mut self, token: &str) -> Option<&mut [f64]> {
        let row = *self.index.get(token)?;
        Some(&mut self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub(crate) fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Inserts or replaces the vector for `token`.
    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        let token = token.into();
        if let Some(dst) = self.get_mut(&token) {
            dst.copy_from_slice(vector);
            return Ok(());
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(move |(row, t)| (t.as_str(), self.row(row)))
    }
}
