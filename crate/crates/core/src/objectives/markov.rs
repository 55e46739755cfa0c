//! k-mer Markov likelihood model used as a differentiable sequence prior.
//!
//! The likelihood is defined on relaxed inputs by its multilinear extension:
//! for each position `i ≥ k`,
//!
//! `Σ_c (Π_t x[i−k+t, c_t]) · Σ_j x[i, j] · log10 P(j | c)`,
//!
//! which equals the ordinary log-likelihood on one-hot inputs and has an
//! exact gradient everywhere. The first `k` positions only act as context.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fasta::Record;
use crate::format::to_json_string;
use crate::oracles::io::{matrix_from_rows, matrix_to_rows, parse_json};
use crate::rng::RngState;
use crate::seq::{one_hot_encode, Alphabet, Matrix};

/// Smallest probability any transition may take.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    alphabet: Alphabet,
    /// `M^k × M`, row = context in base-`M` with the oldest symbol most
    /// significant.
    log10_probs: Matrix,
    p_ref_log10: f64,
}

impl MarkovModel {
    /// Builds a model from conditional probabilities (one row per context).
    /// Entries below [`PROB_FLOOR`] are raised to it and the added mass is
    /// taken from the row's largest entry.
    pub fn from_probabilities(order: usize, alphabet: Alphabet, probs: Matrix, p_ref_log10: f64) -> Result<Self> {
        let m = alphabet.len();
        let contexts = m.pow(order as u32);
        if probs.dim() != (contexts, m) {
            return Err(Error::ShapeError {
                expected: format!("{contexts}x{m} transition table"),
                got: format!("{}x{}", probs.nrows(), probs.ncols()),
            });
        }
        let mut probs = probs;
        crate::seq::check_distribution_rows(&probs, 1e-9)?;
        for mut row in probs.rows_mut() {
            let mut added = 0.0;
            for v in row.iter_mut() {
                if *v < PROB_FLOOR {
                    added += PROB_FLOOR - *v;
                    *v = PROB_FLOOR;
                }
            }
            let top = crate::seq::argmax(row.view());
            row[top] -= added;
        }
        Ok(Self {
            order,
            alphabet,
            log10_probs: probs.mapv(f64::log10),
            p_ref_log10,
        })
    }

    /// Counts `(k+1)`-mers with add-one smoothing and sets `p_ref` to the
    /// corpus mean log10-likelihood. Sequences not longer than `order` are
    /// skipped.
    pub fn fit(records: &[Record], order: usize, alphabet: Alphabet) -> Result<Self> {
        let m = alphabet.len();
        let contexts = m.pow(order as u32);
        let mut counts = Matrix::from_elem((contexts, m), 1.0);
        let encoded: Vec<Vec<usize>> = records
            .iter()
            .filter(|r| r.sequence.len() > order)
            .map(|r| one_hot_encode(&r.sequence, &alphabet).map(|x| x.indices()))
            .collect::<Result<_>>()?;
        if encoded.is_empty() {
            return Err(Error::DegenerateInput(format!(
                "corpus has no sequence longer than the model order {order}"
            )));
        }
        for seq in &encoded {
            for i in order..seq.len() {
                counts[[context_index(&seq[i - order..i], m), seq[i]]] += 1.0;
            }
        }
        for mut row in counts.rows_mut() {
            let total = row.sum();
            row.mapv_inplace(|c| c / total);
        }
        let mut model = Self::from_probabilities(order, alphabet, counts, 0.0)?;
        let total: f64 = encoded.iter().map(|s| model.log10_likelihood_indices(s)).sum();
        model.p_ref_log10 = total / encoded.len() as f64;
        Ok(model)
    }

    /// A chain whose transition rows are `softmax(sharpness · z)` with
    /// standard normal `z`; `p_ref` is 0 until set by fitting.
    pub fn random(order: usize, alphabet: Alphabet, sharpness: f64, rng: &mut RngState) -> Result<Self> {
        let m = alphabet.len();
        let mut probs = Matrix::zeros((m.pow(order as u32), m));
        for mut row in probs.rows_mut() {
            row.mapv_inplace(|_| (sharpness * rng.normal()).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Self::from_probabilities(order, alphabet, probs, 0.0)
    }

    /// Draws a sequence of length `len`: a uniform context, then the chain.
    pub fn sample_indices(&self, len: usize, rng: &mut RngState) -> Vec<usize> {
        let m = self.alphabet.len();
        let mut seq: Vec<usize> = (0..len.min(self.order)).map(|_| rng.index(m)).collect();
        while seq.len() < len {
            let row = self.log10_probs.row(context_index(&seq[seq.len() - self.order..], m));
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut next = m - 1;
            for (j, lp) in row.iter().enumerate() {
                acc += 10f64.powf(*lp);
                if u < acc {
                    next = j;
                    break;
                }
            }
            seq.push(next);
        }
        seq
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn p_ref_log10(&self) -> f64 {
        self.p_ref_log10
    }

    pub fn log10_probs(&self) -> &Matrix {
        &self.log10_probs
    }

    pub fn log10_likelihood_indices(&self, seq: &[usize]) -> f64 {
        let m = self.alphabet.len();
        (self.order..seq.len())
            .map(|i| self.log10_probs[[context_index(&seq[i - self.order..i], m), seq[i]]])
            .sum()
    }

    pub fn to_json(&self) -> String {
        to_json_string(&MarkovFile {
            kind: "markov".into(),
            alphabet: self.alphabet.name(),
            order: self.order,
            p_ref_log10: self.p_ref_log10,
            probs: matrix_to_rows(&self.log10_probs.mapv(|v| 10f64.powf(v))),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MarkovFile = parse_json(text)?;
        if file.kind != "markov" {
            return Err(Error::ParseError {
                location: "kind".into(),
                message: format!("expected \"markov\", got {:?}", file.kind),
            });
        }
        let alphabet = Alphabet::from_name(&file.alphabet)?;
        let probs = matrix_from_rows(&file.probs, alphabet.len(), "probs")?;
        Self::from_probabilities(file.order, alphabet, probs, file.p_ref_log10)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkovFile {
    kind: String,
    alphabet: String,
    order: usize,
    p_ref_log10: f64,
    probs: Vec<Vec<f64>>,
}

fn context_index(ctx: &[usize], m: usize) -> usize {
    ctx.iter().fold(0, |acc, &s| acc * m + s)
}

/// Log10-likelihood of `x` (one-hot or relaxed) and its gradient.
pub fn markov_log10_likelihood(model: &MarkovModel, x: &Matrix) -> Result<(f64, Matrix)> {
    let m = model.alphabet.len();
    let k = model.order;
    let (n, cols) = x.dim();
    if cols != m {
        return Err(Error::dims(format!("{m} columns"), format!("{cols} columns")));
    }
    if n <= k {
        return Err(Error::dims(format!("more than {k} positions"), n));
    }
    let contexts = m.pow(k as u32);
    let mut value = 0.0;
    let mut grad = Matrix::zeros((n, m));
    let mut ctx = vec![0usize; k];
    for i in k..n {
        for c in 0..contexts {
            // digits of c, oldest first
            let mut rest = c;
            for t in (0..k).rev() {
                ctx[t] = rest % m;
                rest /= m;
            }
            let weights: Vec<f64> = (0..k).map(|t| x[[i - k + t, ctx[t]]]).collect();
            let ctx_weight: f64 = weights.iter().product();
            let table = model.log10_probs.row(c);
            let emission: f64 = x.row(i).dot(&table);
            value += ctx_weight * emission;
            grad.row_mut(i).scaled_add(ctx_weight, &table);
            for t in 0..k {
                let others: f64 = weights
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != t)
                    .map(|(_, w)| w)
                    .product();
                grad[[i - k + t, ctx[t]]] += others * emission;
            }
        }
    }
    Ok((value, grad))
}
