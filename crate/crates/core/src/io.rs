//! JSON layout for TT tensors:
//!
//! ```json
//! { "shape": [2, 3], "ranks": [1, 2, 1],
//!   "cores": [[[re, im], ...], [[re, im], ...]],
//!   "orth": "left" }
//! ```
//!
//! Core entries are listed column-major in `(left bond, mode, right bond)`
//! order, left bond fastest. `orth` is `"none"`, `"left"`, `"right"` or
//! `{"center": k}` with `k` 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, C64};
use crate::tt::{Orth, TtCore, TtRank, TtTensor, ORTH_TOL};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TtJson {
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub cores: Vec<Vec<[f64; 2]>>,
    pub orth: Orth,
}

impl From<&TtTensor> for TtJson {
    fn from(x: &TtTensor) -> Self {
        Self {
            shape: x.shape(),
            ranks: x.ranks().as_slice().to_vec(),
            cores: x
                .cores()
                .iter()
                .map(|c| c.data().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            orth: x.orth(),
        }
    }
}

impl TryFrom<TtJson> for TtTensor {
    type Error = Error;

    fn try_from(j: TtJson) -> Result<Self> {
        let ranks = TtRank::new(j.ranks)?;
        let r = ranks.as_slice();
        if j.shape.len() + 1 != r.len() || j.cores.len() != j.shape.len() {
            return Err(Error::Serialization(format!(
                "{} modes, {} ranks and {} cores are inconsistent",
                j.shape.len(),
                r.len(),
                j.cores.len()
            )));
        }
        let cores = j
            .cores
            .into_iter()
            .enumerate()
            .map(|(k, data)| {
                let data: Vec<C64> = data.into_iter().map(|[re, im]| c64(re, im)).collect();
                TtCore::new(r[k], j.shape[k], r[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        let x = TtTensor::with_orth(cores, j.orth)?;
        if !x.satisfies_orth(ORTH_TOL) {
            return Err(Error::Serialization(format!(
                "cores do not satisfy the {:?} marker",
                j.orth
            )));
        }
        Ok(x)
    }
}

pub fn to_json(x: &TtTensor) -> Result<String> {
    serde_json::to_string_pretty(&TtJson::from(x)).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn from_json(s: &str) -> Result<TtTensor> {
    let j: TtJson = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
    TtTensor::try_from(j)
}
