//! Per-dimension input coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};

/// One dimension's share of an input point.
///
/// A coordinate carries a categorical id (users, items, grid cells), a real
/// covariate vector, or both (an id with its side-information vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Coord {
    pub fn id(id: usize) -> Self {
        Coord {
            id: Some(id),
            values: Vec::new(),
        }
    }

    pub fn real(values: Vec<f64>) -> Self {
        Coord { id: None, values }
    }

    pub fn scalar(x: f64) -> Self {
        Coord::real(vec![x])
    }

    pub fn with_side(id: usize, values: Vec<f64>) -> Self {
        Coord {
            id: Some(id),
            values,
        }
    }

    pub fn category(&self) -> Result<usize> {
        self.id
            .ok_or_else(|| TgpError::mismatch("coordinate has no categorical id"))
    }

    pub fn covariates(&self) -> Result<&[f64]> {
        if self.values.is_empty() {
            Err(TgpError::mismatch("coordinate has no covariate values"))
        } else {
            Ok(&self.values)
        }
    }
}
