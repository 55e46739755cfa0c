use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seq::Alphabet;

use super::Oracle;

/// Largest search space [`brute_force_optimum`] will enumerate.
pub const BRUTE_FORCE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub best_score: f64,
    pub best_seq: String,
    pub evaluated: u64,
}

/// Exhaustive search over all `M^N` sequences. Ties resolve to the
/// lexicographically smallest sequence in alphabet order.
pub fn brute_force_optimum<O: Oracle + ?Sized>(oracle: &O, alphabet: &Alphabet, n: usize) -> Result<BruteForceResult> {
    let m = alphabet.len();
    if oracle.shape() != (n, m) {
        return Err(Error::dims(format!("{:?}", oracle.shape()), format!("({n}, {m})")));
    }
    let size = (m as f64).powi(n as i32);
    if size > BRUTE_FORCE_CAP as f64 {
        return Err(Error::TooLarge {
            size,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let total = (m as u64).pow(n as u32);

    let decode = |mut code: u64| -> Vec<usize> {
        // most significant digit first, so code order is lexicographic order
        let mut idx = vec![0; n];
        for slot in idx.iter_mut().rev() {
            *slot = (code % m as u64) as usize;
            code /= m as u64;
        }
        idx
    };

    let (best_score, best_code) = (0..total)
        .into_par_iter()
        .map(|code| oracle.score_indices(&decode(code)).map(|s| (s, code)))
        .try_reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
            },
        )?;

    let best_seq = decode(best_code).into_iter().map(|j| alphabet.symbol(j)).collect();
    Ok(BruteForceResult {
        best_score,
        best_seq,
        evaluated: total,
    })
}
