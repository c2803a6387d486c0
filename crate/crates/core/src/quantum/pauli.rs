use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix {
        let entries: [C64; 4] = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        Matrix::from_row_slice(2, 2, &entries)
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `P_1 ... P_n`, with `P_1` acting on the first (fastest) mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All `4^n` strings, first site varying fastest.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..4usize.pow(n as u32)).map(move |mut code| {
            PauliString(
                (0..n)
                    .map(|_| {
                        let p = Pauli::ALL[code % 4];
                        code /= 4;
                        p
                    })
                    .collect(),
            )
        })
    }

    /// Dense `P_n ⊗ ... ⊗ P_1`.
    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::identity(1, 1);
        for p in &self.0 {
            m = linalg::kron(&p.matrix(), &m);
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidParameter(format!(
                    "unknown Pauli label {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_matrices() {
        assert_eq!(Pauli::I.matrix(), Matrix::identity(2, 2));
        let y = Pauli::Y.matrix();
        assert_eq!(y[(0, 1)], -I);
        assert_eq!(y[(1, 0)], I);
        for p in Pauli::ALL {
            let m = p.matrix();
            assert_eq!(&m * &m, Matrix::identity(2, 2));
        }
    }

    #[test]
    fn strings_parse_and_enumerate() {
        let s: PauliString = "XZ".parse().unwrap();
        assert_eq!(s.to_string(), "XZ");
        assert_eq!(
            s.matrix(),
            linalg::kron(&Pauli::Z.matrix(), &Pauli::X.matrix())
        );
        assert!("XQ".parse::<PauliString>().is_err());
        assert_eq!(PauliString::all(3).count(), 64);
    }
}
