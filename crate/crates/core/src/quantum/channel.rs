use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{real, Matrix, C64};

const TRACE_TOL: f64 = 1e-10;

/// A quantum channel `rho -> sum_k K_k rho K_k^†` given by its Kraus
/// operators, all `dim_out x dim_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<Matrix>,
}

impl QuantumChannel {
    /// Checks `sum_k K_k^† K_k = I` to 1e-10.
    pub fn new(kraus: Vec<Matrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| {
            Error::InvalidParameter("a channel needs at least one Kraus operator".into())
        })?;
        let (rows, cols) = first.shape();
        if kraus.iter().any(|k| k.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch(
                "Kraus operators differ in shape".into(),
            ));
        }
        let mut sum = Matrix::zeros(cols, cols);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let residual = (sum - Matrix::identity(cols, cols)).norm();
        if !(residual <= TRACE_TOL) {
            return Err(Error::NotTracePreserving(residual));
        }
        Ok(Self { kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kraus: vec![Matrix::identity(dim, dim)],
        }
    }

    /// The qutrit antisymmetric (Werner–Holevo) channel. Pure inputs map to
    /// outputs with spectrum `{1/2, 1/2, 0}`.
    pub fn antisymmetric() -> Self {
        let s = real(std::f64::consts::FRAC_1_SQRT_2);
        let mut k1 = Matrix::zeros(3, 3);
        k1[(1, 0)] = -s;
        k1[(2, 1)] = -s;
        let mut k2 = Matrix::zeros(3, 3);
        k2[(0, 0)] = s;
        k2[(2, 2)] = -s;
        let mut k3 = Matrix::zeros(3, 3);
        k3[(0, 1)] = s;
        k3[(1, 2)] = s;
        Self::new(vec![k1, k2, k3]).expect("antisymmetric channel is trace preserving")
    }

    /// Generalized amplitude damping with damping `gamma` and noise `noise`.
    pub fn gadc(gamma: f64, noise: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("noise", noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let m = |a: f64, b: f64, c: f64, d: f64| {
            Matrix::from_row_slice(2, 2, &[real(a), real(b), real(c), real(d)])
        };
        let keep = (1.0 - gamma).sqrt();
        let a1 = m(1.0, 0.0, 0.0, keep) * real((1.0 - noise).sqrt());
        let a2 = m(0.0, (gamma * (1.0 - noise)).sqrt(), 0.0, 0.0);
        let a3 = m(keep, 0.0, 0.0, 1.0) * real(noise.sqrt());
        let a4 = m(0.0, 0.0, (gamma * noise).sqrt(), 0.0);
        Self::new(vec![a1, a2, a3, a4])
    }

    pub fn kraus(&self) -> &[Matrix] {
        &self.kraus
    }

    pub fn dim_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        if rho.shape() != (self.dim_in(), self.dim_in()) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {:?}, channel input dimension is {}",
                rho.shape(),
                self.dim_in()
            )));
        }
        let mut out = Matrix::zeros(self.dim_out(), self.dim_out());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    /// The `n`-fold tensor power as a single channel on the vectorized
    /// space (first site fastest). Kraus count grows as `K^n`.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut kraus = vec![Matrix::identity(1, 1)];
        for _ in 0..n {
            kraus = kraus
                .iter()
                .flat_map(|acc| self.kraus.iter().map(move |k| k.kronecker(acc)))
                .collect();
        }
        Self { kraus }
    }
}

/// JSON description of a channel. Custom Kraus operators are row-major
/// lists of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Antisymmetric,
    Gadc { gamma: f64, noise: f64 },
    Identity { dim: usize },
    Custom { kraus: Vec<Vec<Vec<[f64; 2]>>> },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<QuantumChannel> {
        match self {
            ChannelSpec::Antisymmetric => Ok(QuantumChannel::antisymmetric()),
            ChannelSpec::Gadc { gamma, noise } => QuantumChannel::gadc(*gamma, *noise),
            ChannelSpec::Identity { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidParameter(
                        "identity channel needs a positive dimension".into(),
                    ));
                }
                Ok(QuantumChannel::identity(*dim))
            }
            ChannelSpec::Custom { kraus } => {
                let mats = kraus
                    .iter()
                    .map(|rows| parse_matrix(rows))
                    .collect::<Result<Vec<_>>>()?;
                QuantumChannel::new(mats)
            }
        }
    }
}

fn parse_matrix(rows: &[Vec<[f64; 2]>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(
            "Kraus operator rows must be non-empty and of equal length".into(),
        ));
    }
    let flat: Vec<C64> = rows
        .iter()
        .flatten()
        .map(|&[re, im]| C64::new(re, im))
        .collect();
    Ok(Matrix::from_row_slice(rows.len(), ncols, &flat))
}
