//! Numerical helpers shared by unit, integration and acceptance tests.

use crate::seq::Matrix;

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference<F>(x: &Matrix, step: f64, mut f: F) -> Matrix
where
    F: FnMut(&Matrix) -> f64,
{
    let mut grad = Matrix::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(&probe);
        probe[idx] = orig - step;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over two equally shaped
/// matrices. The floor keeps near-zero entries from dominating.
pub fn max_relative_error(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Seeded matrix with entries uniform in `[lo, hi)`.
pub fn random_matrix(rng: &mut crate::rng::RngState, n: usize, m: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_shape_simple_fn((n, m), || rng.uniform_range(lo, hi))
}

/// Worst relative error of one analytic gradient over a batch of seeded
/// random inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
}

const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-6;

fn check_cases<F>(name: &'static str, cases: usize, seed: u64, mut case: F) -> crate::Result<GradCheck>
where
    F: FnMut(&mut crate::rng::RngState) -> crate::Result<f64>,
{
    let master = crate::rng::RngState::new(seed);
    let mut worst: f64 = 0.0;
    for c in 0..cases {
        worst = worst.max(case(&mut master.substream(c as u64))?);
    }
    Ok(GradCheck { name, cases, worst })
}

fn rel(analytic: &Matrix, numeric: &Matrix) -> f64 {
    max_relative_error(analytic, numeric, REL_FLOOR)
}

fn scalar_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Central-difference checks of every analytic gradient in the crate:
/// softmax Jacobian, softmax straight-through, full-chain normalization
/// (instance and layer, both denominators, w.r.t. logits, `γ` and `β`),
/// the three oracles (score and uncertainty heads), entropy penalty, Markov
/// likelihood, survival objective, and both structure KL losses through the
/// toy predictor.
pub fn gradient_suite(cases: usize, seed: u64) -> crate::Result<Vec<GradCheck>> {
    use crate::normalizer::{backprop_normalize, normalize, Denominator, GradMode, NormMode, ScaleOffset};
    use crate::objectives::structure::{smooth_structure_kl_grad, structure_kl_grad};
    use crate::objectives::{entropy_penalty_raw, markov_log10_likelihood, survival_objective, MarkovModel, SurvivalConfig};
    use crate::oracles::{MlpOracle, MotifOracle, Oracle, QuadraticOracle};
    use crate::sampler::{backprop_st, softmax_jacobian_row, softmax_rows, StEstimator};
    use crate::seq::Alphabet;
    use crate::structure::ToyStructurePredictor;

    let mut out = Vec::new();

    out.push(check_cases("softmax_jacobian", cases, seed, |rng| {
        let m = 2 + rng.index(19);
        let l = random_matrix(rng, 1, m, -4.0, 4.0);
        let u = random_matrix(rng, 1, m, -1.0, 1.0);
        let p = softmax_rows(&l)?;
        let j = softmax_jacobian_row(p.row(0))?;
        let analytic = u.dot(&j);
        let numeric = finite_difference(&l, FD_STEP, |z| (softmax_rows(z).unwrap().into_inner() * &u).sum());
        Ok(rel(&analytic, &numeric))
    })?);

    out.push(check_cases("backprop_st", cases, seed + 1, |rng| {
        let (n, m) = (1 + rng.index(10), 2 + rng.index(19));
        let l = random_matrix(rng, n, m, -4.0, 4.0);
        let u = random_matrix(rng, n, m, -1.0, 1.0);
        let analytic = backprop_st(&u, &softmax_rows(&l)?, StEstimator::SoftmaxSt)?;
        let numeric = finite_difference(&l, FD_STEP, |z| (softmax_rows(z).unwrap().into_inner() * &u).sum());
        Ok(rel(&analytic, &numeric))
    })?);

    out.push(check_cases("backprop_normalize", cases, seed + 2, |rng| {
        let (n, m) = (2 + rng.index(30), 2 + rng.index(19));
        let mode = if rng.bernoulli(0.5) { NormMode::Instance } else { NormMode::Layer };
        let denom = if rng.bernoulli(0.5) { Denominator::Std } else { Denominator::Variance };
        let l = random_matrix(rng, n, m, -3.0, 3.0);
        let u = random_matrix(rng, n, m, -1.0, 1.0);
        let mut so = ScaleOffset::new(mode, m, 1.0, 0.0);
        so.gamma.mapv_inplace(|_| rng.uniform_range(0.5, 2.0));
        so.beta.mapv_inplace(|_| rng.uniform_range(-1.0, 1.0));
        let f = |l: &Matrix, so: &ScaleOffset| {
            let (y, _) = normalize(l, so, mode, denom, GradMode::FullChain).unwrap();
            (y * &u).sum()
        };
        let (_, cache) = normalize(&l, &so, mode, denom, GradMode::FullChain)?;
        let g = backprop_normalize(&u, &cache, &so)?;
        let mut worst = rel(&g.logits, &finite_difference(&l, FD_STEP, |z| f(z, &so)));
        let params = Matrix::from_shape_vec((2, so.gamma.len()), so.gamma.iter().chain(so.beta.iter()).copied().collect())
            .expect("two rows");
        let numeric = finite_difference(&params, FD_STEP, |p| {
            let probe = ScaleOffset {
                gamma: p.row(0).to_owned(),
                beta: p.row(1).to_owned(),
            };
            f(&l, &probe)
        });
        let analytic = Matrix::from_shape_vec((2, g.gamma.len()), g.gamma.iter().chain(g.beta.iter()).copied().collect())
            .expect("two rows");
        worst = worst.max(rel(&analytic, &numeric));
        Ok(worst)
    })?);

    out.push(check_cases("motif_oracle", cases, seed + 3, |rng| {
        let (n, l) = (10 + rng.index(20), 2 + rng.index(6));
        let oracle = MotifOracle::random(n, l, 4, rng)?;
        let x = random_matrix(rng, n, 4, 0.0, 1.0);
        let analytic = oracle.evaluate(&x)?.grad;
        Ok(rel(&analytic, &finite_difference(&x, FD_STEP, |z| oracle.score(z).unwrap())))
    })?);

    out.push(check_cases("quadratic_oracle", cases, seed + 4, |rng| {
        let n = 2 + rng.index(8);
        let oracle = QuadraticOracle::random(n, 4, 1.0, rng)?;
        let x = random_matrix(rng, n, 4, 0.0, 1.0);
        let analytic = oracle.evaluate(&x)?.grad;
        Ok(rel(&analytic, &finite_difference(&x, FD_STEP, |z| oracle.score(z).unwrap())))
    })?);

    out.push(check_cases("mlp_oracle", cases, seed + 5, |rng| {
        let n = 3 + rng.index(8);
        let oracle = MlpOracle::random(n, 4, 8, 6, true, rng)?;
        let x = random_matrix(rng, n, 4, 0.0, 1.0);
        let eval = oracle.evaluate(&x)?;
        let ms = eval.mean_std.as_ref().expect("uncertainty head");
        let mut worst = rel(&eval.grad, &finite_difference(&x, FD_STEP, |z| oracle.score(z).unwrap()));
        let std_of = |z: &Matrix| oracle.evaluate(z).unwrap().mean_std.expect("head").std;
        worst = worst.max(rel(&ms.grad_std, &finite_difference(&x, FD_STEP, std_of)));
        for act in &eval.activations {
            let value_of = |z: &Matrix| oracle.evaluate(z).unwrap().activation(&act.name).expect("layer").value;
            worst = worst.max(rel(&act.grad, &finite_difference(&x, FD_STEP, value_of)));
        }
        Ok(worst)
    })?);

    out.push(check_cases("entropy_penalty", cases, seed + 6, |rng| {
        let (n, m) = (1 + rng.index(10), 2 + rng.index(19));
        let p = softmax_rows(&random_matrix(rng, n, m, -2.0, 2.0))?.into_inner();
        let weight = rng.uniform_range(0.1, 2.0);
        let (_, analytic) = entropy_penalty_raw(&p, weight);
        Ok(rel(&analytic, &finite_difference(&p, FD_STEP * 0.1, |z| entropy_penalty_raw(z, weight).0)))
    })?);

    out.push(check_cases("markov_likelihood", cases, seed + 7, |rng| {
        let order = rng.index(3);
        let model = MarkovModel::random(order, Alphabet::dna(), 1.0, rng)?;
        let n = order + 1 + rng.index(10);
        let x = random_matrix(rng, n, 4, 0.0, 1.0);
        let (_, analytic) = markov_log10_likelihood(&model, &x)?;
        Ok(rel(&analytic, &finite_difference(&x, FD_STEP, |z| markov_log10_likelihood(&model, z).unwrap().0)))
    })?);

    out.push(check_cases("survival_objective", cases, seed + 8, |rng| {
        let cfg = SurvivalConfig::new(rng.uniform_range(-2.0, 2.0), 0.95)?;
        let (mean, std) = (rng.uniform_range(-3.0, 3.0), rng.uniform_range(0.3, 3.0));
        let eval = survival_objective(mean, std, &cfg)?;
        let value = |a: f64, b: f64| survival_objective(a, b, &cfg).unwrap().value;
        let d_mean = (value(mean + FD_STEP, std) - value(mean - FD_STEP, std)) / (2.0 * FD_STEP);
        let d_std = (value(mean, std + FD_STEP) - value(mean, std - FD_STEP)) / (2.0 * FD_STEP);
        Ok(scalar_rel(eval.d_mean, d_mean).max(scalar_rel(eval.d_std, d_std)))
    })?);

    for (name, smooth) in [("structure_kl", false), ("smooth_structure_kl", true)] {
        out.push(check_cases(name, cases, seed + 9 + smooth as u64, |rng| {
            let n = 2 + rng.index(3);
            let bins = [3 + rng.index(4), 3 + rng.index(4), 3 + rng.index(4), 3 + rng.index(4)];
            let predictor = ToyStructurePredictor::random(n, 4, bins, 0.5, rng);
            let other = random_matrix(rng, n, 4, 0.0, 1.0);
            let target = predictor.predict(&other)?;
            let loss = |x: &Matrix| {
                let pred = predictor.predict(x)?;
                let (v, g) = if smooth {
                    smooth_structure_kl_grad(&pred, &target)?
                } else {
                    structure_kl_grad(&pred, &target)?
                };
                Ok::<_, crate::Error>((v, g, pred))
            };
            let x = random_matrix(rng, n, 4, 0.0, 1.0);
            let (_, g, pred) = loss(&x)?;
            let analytic = predictor.backward(&x, &pred, &g)?;
            Ok(rel(&analytic, &finite_difference(&x, FD_STEP, |z| loss(z).unwrap().0)))
        })?);
    }
    Ok(out)
}
