//! JSON weight files for the built-in oracles.
//!
//! ```json
//! { "kind": "motif", "alphabet": "dna", "n": 20, "weights": [[1, 0, 0, 0]] }
//! ```
//!
//! `kind` selects the layout; matrices are nested row-major arrays and all
//! floats are written with `%.17g`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::to_json_string;
use crate::seq::{Alphabet, Matrix};

use super::{DenseLayer, MlpOracle, MotifOracle, Oracle, OracleEval, QuadraticOracle};

#[derive(Debug, Clone, PartialEq)]
pub enum AnyOracle {
    Motif(MotifOracle),
    Quadratic(QuadraticOracle),
    Mlp(MlpOracle),
}

impl AnyOracle {
    fn inner(&self) -> &dyn Oracle {
        match self {
            AnyOracle::Motif(o) => o,
            AnyOracle::Quadratic(o) => o,
            AnyOracle::Mlp(o) => o,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyOracle::Motif(_) => "motif",
            AnyOracle::Quadratic(_) => "quadratic",
            AnyOracle::Mlp(_) => "mlp",
        }
    }
}

impl Oracle for AnyOracle {
    fn shape(&self) -> (usize, usize) {
        self.inner().shape()
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        self.inner().evaluate(x)
    }

    fn score(&self, x: &Matrix) -> Result<f64> {
        self.inner().score(x)
    }

    fn score_indices(&self, indices: &[usize]) -> Result<f64> {
        self.inner().score_indices(indices)
    }
}

impl From<MotifOracle> for AnyOracle {
    fn from(o: MotifOracle) -> Self {
        AnyOracle::Motif(o)
    }
}

impl From<QuadraticOracle> for AnyOracle {
    fn from(o: QuadraticOracle) -> Self {
        AnyOracle::Quadratic(o)
    }
}

impl From<MlpOracle> for AnyOracle {
    fn from(o: MlpOracle) -> Self {
        AnyOracle::Mlp(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum OracleFile {
    Motif {
        alphabet: String,
        n: usize,
        weights: Vec<Vec<f64>>,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        input_gain: f64,
    },
    Quadratic {
        alphabet: String,
        n: usize,
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Mlp {
        alphabet: String,
        n: usize,
        hidden1: LayerFile,
        hidden2: LayerFile,
        output: LayerFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_std: Option<LayerFile>,
    },
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], cols: usize, field: &str) -> Result<Matrix> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::ShapeError {
                expected: format!("{field}[{i}] of length {cols}"),
                got: r.len().to_string(),
            });
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("validated row lengths"))
}

pub(crate) fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn layer_from_file(l: &LayerFile, field: &str) -> Result<DenseLayer> {
    let cols = l.weights.first().map_or(0, Vec::len);
    Ok(DenseLayer {
        weights: matrix_from_rows(&l.weights, cols, &format!("{field}.weights"))?,
        bias: Array1::from(l.bias.clone()),
    })
}

fn layer_to_file(l: &DenseLayer) -> LayerFile {
    LayerFile {
        weights: matrix_to_rows(&l.weights),
        bias: l.bias.to_vec(),
    }
}

pub(crate) fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::ParseError {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Parses an oracle weight document. Returns the oracle and its alphabet.
pub fn parse_oracle(text: &str) -> Result<(AnyOracle, Alphabet)> {
    let file: OracleFile = parse_json(text)?;
    match file {
        OracleFile::Motif {
            alphabet,
            n,
            weights,
            input_gain,
        } => {
            let alphabet = Alphabet::from_name(&alphabet)?;
            let w = matrix_from_rows(&weights, alphabet.len(), "weights")?;
            Ok((MotifOracle::with_gain(w, n, input_gain)?.into(), alphabet))
        }
        OracleFile::Quadratic { alphabet, n, w, b } => {
            let alphabet = Alphabet::from_name(&alphabet)?;
            let d = n * alphabet.len();
            if w.len() != d {
                return Err(Error::ShapeError {
                    expected: format!("w with {d} rows"),
                    got: w.len().to_string(),
                });
            }
            let w = matrix_from_rows(&w, d, "w")?;
            let o = QuadraticOracle::new(w, Array1::from(b), n, alphabet.len())?;
            Ok((o.into(), alphabet))
        }
        OracleFile::Mlp {
            alphabet,
            n,
            hidden1,
            hidden2,
            output,
            log_std,
        } => {
            let alphabet = Alphabet::from_name(&alphabet)?;
            let o = MlpOracle::new(
                n,
                alphabet.len(),
                layer_from_file(&hidden1, "hidden1")?,
                layer_from_file(&hidden2, "hidden2")?,
                layer_from_file(&output, "output")?,
                log_std.as_ref().map(|l| layer_from_file(l, "log_std")).transpose()?,
            )?;
            Ok((o.into(), alphabet))
        }
    }
}

pub fn load_oracle(path: impl AsRef<Path>) -> Result<(AnyOracle, Alphabet)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_oracle(&text)
}

pub fn write_oracle_json(oracle: &AnyOracle, alphabet: &Alphabet) -> String {
    let (n, _) = oracle.shape();
    let alphabet = alphabet.name();
    let file = match oracle {
        AnyOracle::Motif(o) => OracleFile::Motif {
            alphabet,
            n,
            weights: matrix_to_rows(o.weights()),
            input_gain: o.input_gain(),
        },
        AnyOracle::Quadratic(o) => OracleFile::Quadratic {
            alphabet,
            n,
            w: matrix_to_rows(o.w()),
            b: o.b().to_vec(),
        },
        AnyOracle::Mlp(o) => OracleFile::Mlp {
            alphabet,
            n,
            hidden1: layer_to_file(&o.hidden1),
            hidden2: layer_to_file(&o.hidden2),
            output: layer_to_file(&o.output),
            log_std: o.log_std.as_ref().map(layer_to_file),
        },
    };
    to_json_string(&file)
}

pub fn save_oracle(oracle: &AnyOracle, alphabet: &Alphabet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_oracle_json(oracle, alphabet)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::seq::{one_hot_encode, Alphabet};

    #[test]
    fn minimal_motif_file() {
        let text = r#"{"kind": "motif", "alphabet": "dna", "n": 1, "weights": [[0.7, 0.1, 0.2, 0.3]]}"#;
        let (o, a) = parse_oracle(text).unwrap();
        let x = one_hot_encode("A", &a).unwrap();
        assert!((o.score(&x).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn short_row_is_shape_error() {
        let text = r#"{"kind": "motif", "alphabet": "dna", "n": 3, "weights": [[0.7, 0.1, 0.2]]}"#;
        assert!(matches!(parse_oracle(text), Err(Error::ShapeError { .. })));
    }

    #[test]
    fn malformed_and_unknown_fields() {
        assert!(matches!(parse_oracle("{\"kind\": "), Err(Error::ParseError { .. })));
        let text = r#"{"kind": "motif", "alphabet": "dna", "n": 1, "weights": [[1,0,0,0]], "extra": 1}"#;
        assert!(matches!(parse_oracle(text), Err(Error::ParseError { .. })));
        let text = r#"{"kind": "conv", "alphabet": "dna", "n": 1}"#;
        assert!(matches!(parse_oracle(text), Err(Error::ParseError { .. })));
    }

    #[test]
    fn save_load_round_trip_all_kinds() {
        let mut rng = RngState::new(9);
        let dna = Alphabet::dna();
        let oracles: Vec<AnyOracle> = vec![
            MotifOracle::random(12, 4, 4, &mut rng).unwrap().into(),
            QuadraticOracle::random(3, 4, 0.3, &mut rng).unwrap().into(),
            MlpOracle::random(3, 4, 5, 3, true, &mut rng).unwrap().into(),
            MlpOracle::random(3, 4, 5, 3, false, &mut rng).unwrap().into(),
        ];
        for o in oracles {
            let text = write_oracle_json(&o, &dna);
            let (back, a) = parse_oracle(&text).unwrap();
            assert_eq!(back, o);
            assert_eq!(a, dna);
            assert_eq!(write_oracle_json(&back, &a), text);
        }
    }
}
