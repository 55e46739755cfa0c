//! Alphabets, one-hot encodings and the matrix types shared by every module.
//!
//! A sequence of length `N` over an alphabet of `M` symbols is represented as
//! an `N × M` matrix. Three flavours exist:
//!
//! - logits: any finite real matrix ([`Matrix`]),
//! - [`ProbMatrix`]: row-stochastic, the softmax relaxation (a PSSM),
//! - [`OneHotSeq`]: exactly one `1` per row, a discrete sequence.

use std::ops::Deref;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

const DNA_SYMBOLS: &str = "ACGT";
const PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Row-sum tolerance for [`ProbMatrix`].
pub const PROB_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphabetKind {
    Dna,
    Protein,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    kind: AlphabetKind,
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn dna() -> Self {
        Self {
            kind: AlphabetKind::Dna,
            symbols: DNA_SYMBOLS.chars().collect(),
        }
    }

    pub fn protein() -> Self {
        Self {
            kind: AlphabetKind::Protein,
            symbols: PROTEIN_SYMBOLS.chars().collect(),
        }
    }

    /// A user-defined alphabet. Symbols must be unique and there must be at
    /// least two of them.
    pub fn custom(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.len() < 2 {
            return Err(Error::ValidationError {
                field: "alphabet".into(),
                reason: "needs at least 2 symbols".into(),
            });
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(Error::ValidationError {
                    field: "alphabet".into(),
                    reason: format!("duplicate symbol {c:?}"),
                });
            }
        }
        Ok(Self {
            kind: AlphabetKind::Custom,
            symbols,
        })
    }

    /// Parses `"dna"`, `"protein"`, or a literal symbol string for a custom
    /// alphabet.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dna" => Ok(Self::dna()),
            "protein" => Ok(Self::protein()),
            _ => Self::custom(name),
        }
    }

    /// The inverse of [`Alphabet::from_name`].
    pub fn name(&self) -> String {
        match self.kind {
            AlphabetKind::Dna => "dna".into(),
            AlphabetKind::Protein => "protein".into(),
            AlphabetKind::Custom => self.symbols.iter().collect(),
        }
    }

    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    /// Channel count `M`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn symbol(&self, index: usize) -> char {
        self.symbols[index]
    }
}

/// A discrete sequence in one-hot form.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotSeq(Matrix);

impl OneHotSeq {
    pub fn from_indices(indices: &[usize], m: usize) -> Self {
        let mut x = Matrix::zeros((indices.len(), m));
        for (i, &j) in indices.iter().enumerate() {
            x[[i, j]] = 1.0;
        }
        Self(x)
    }

    /// Validates that `x` is binary with one hot entry per row.
    pub fn try_from_matrix(x: Matrix) -> Result<Self> {
        for (i, row) in x.rows().into_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} is not one-hot"
                )));
            }
        }
        Ok(Self(x))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.rows().into_iter().map(|r| argmax(r)).collect()
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for OneHotSeq {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// A row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    pub fn try_from_matrix(p: Matrix) -> Result<Self> {
        check_distribution_rows(&p, PROB_ROW_TOL)?;
        Ok(Self(p))
    }

    /// Skips validation; callers guarantee the rows are distributions.
    pub(crate) fn new_unchecked(p: Matrix) -> Self {
        Self(p)
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        Self(Matrix::from_elem((n, m), 1.0 / m as f64))
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for ProbMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl From<OneHotSeq> for ProbMatrix {
    fn from(x: OneHotSeq) -> Self {
        Self(x.0)
    }
}

pub(crate) fn check_distribution_rows(p: &Matrix, tol: f64) -> Result<()> {
    for (i, row) in p.rows().into_iter().enumerate() {
        check_distribution(row, tol).map_err(|e| match e {
            Error::InvalidDistribution(msg) => {
                Error::InvalidDistribution(format!("row {i}: {msg}"))
            }
            other => other,
        })?;
    }
    Ok(())
}

pub(crate) fn check_distribution(p: ArrayView1<f64>, tol: f64) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("probability row"));
    }
    if let Some(v) = p.iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidDistribution(format!("negative entry {v}")));
    }
    let sum: f64 = p.sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("row sums to {sum}")));
    }
    Ok(())
}

pub(crate) fn check_finite(x: &Matrix, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(what))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn one_hot_encode(seq: &str, alphabet: &Alphabet) -> Result<OneHotSeq> {
    let indices = seq
        .chars()
        .enumerate()
        .map(|(position, symbol)| {
            alphabet
                .index_of(symbol)
                .ok_or(Error::UnknownSymbol { position, symbol })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneHotSeq::from_indices(&indices, alphabet.len()))
}

/// Argmax-decodes any `N × M` matrix (one-hot, PSSM or logits).
pub fn decode(x: &Matrix, alphabet: &Alphabet) -> Result<String> {
    if x.ncols() != alphabet.len() {
        return Err(Error::dims(
            format!("{} columns", alphabet.len()),
            format!("{} columns", x.ncols()),
        ));
    }
    Ok(x
        .rows()
        .into_iter()
        .map(|row| alphabet.symbol(argmax(row)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn encode_identity() {
        let x = one_hot_encode("ACGT", &Alphabet::dna()).unwrap();
        assert_eq!(*x, Matrix::eye(4));
    }

    #[test]
    fn encode_repeat() {
        let x = one_hot_encode("AA", &Alphabet::dna()).unwrap();
        assert_eq!(*x, array![[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]);
    }

    #[test]
    fn encode_unknown_symbol() {
        let err = one_hot_encode("AXG", &Alphabet::dna()).unwrap_err();
        assert!(matches!(
            err,
            Error::UnknownSymbol {
                position: 1,
                symbol: 'X'
            }
        ));
    }

    #[test]
    fn decode_examples() {
        let dna = Alphabet::dna();
        assert_eq!(decode(&Matrix::eye(4), &dna).unwrap(), "ACGT");
        assert_eq!(
            decode(&Matrix::from_elem((4, 4), 0.25), &dna).unwrap(),
            "AAAA"
        );
        assert_eq!(decode(&array![[0.1, 0.6, 0.2, 0.1]], &dna).unwrap(), "C");
        assert!(matches!(
            decode(&Matrix::eye(3), &dna),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alphabets() {
        assert_eq!(Alphabet::dna().len(), 4);
        let p = Alphabet::protein();
        assert_eq!(p.len(), 20);
        let mut sorted = p.symbols().to_vec();
        sorted.sort();
        assert_eq!(sorted, p.symbols());
        assert!(Alphabet::custom("AA").is_err());
        assert!(Alphabet::custom("A").is_err());
        assert_eq!(Alphabet::from_name("01").unwrap().len(), 2);
        assert_eq!(Alphabet::from_name(&p.name()).unwrap(), p);
    }

    #[test]
    fn one_hot_validation() {
        assert!(OneHotSeq::try_from_matrix(array![[1.0, 0.0], [0.5, 0.5]]).is_err());
        assert!(OneHotSeq::try_from_matrix(array![[0.0, 1.0]]).is_ok());
    }
}
