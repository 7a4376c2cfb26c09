//! Pairwise cross-entropy objective and full-batch gradient descent.

use std::collections::HashMap;

use crate::data::FeatureVector;
use crate::error::{Error, Result};

use super::network::{backward_accumulate, forward_into, NetworkParams, Workspace};
use super::sigmoid;

/// Sigmoid outputs are clamped to this range inside logarithms so a
/// confidently wrong pair yields a large but finite loss.
const SIGMOID_CLAMP: f64 = 1e-12;

/// One independent pairwise preference harvested from clicks.
///
/// `x_i` is always the document that was ranked higher in the served list;
/// `y` is 1.0 when that document got the click of the pair and 0.0 when the
/// lower-ranked one did. `lambda_weight` is 1.0 under plain pairwise
/// training and `|delta NDCG@k|` of swapping the two documents under
/// metric-weighted training.
#[derive(Debug, Clone, PartialEq)]
pub struct PairObservation {
    pub x_i: FeatureVector,
    pub x_j: FeatureVector,
    pub y: f64,
    pub round: usize,
    pub lambda_weight: f64,
}

/// Gradient-descent settings for one round of model update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Step size.
    pub eta: f64,
    /// Number of full-batch gradient steps per round.
    pub steps: usize,
    /// L2 coefficient of the `m * lambda / 2 * |theta - theta0|^2` anchor.
    pub lambda_reg: f64,
    /// Start descent from the current parameters instead of `theta0`.
    pub warm_start: bool,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.eta
            )));
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive, got {}",
                self.lambda_reg
            )));
        }
        Ok(())
    }
}

/// Pair history compacted to unique documents, so a full-batch pass costs
/// one forward/backward per distinct document instead of per observation.
struct PairBatch {
    docs: Vec<Vec<f64>>,
    pairs: Vec<(u32, u32, f64, f64)>,
}

impl PairBatch {
    fn build(history: &[PairObservation], input_dim: usize) -> Result<Self> {
        let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut docs: Vec<Vec<f64>> = Vec::new();
        let mut pairs = Vec::with_capacity(history.len());

        fn intern(
            x: &FeatureVector,
            input_dim: usize,
            index: &mut HashMap<Vec<u64>, u32>,
            docs: &mut Vec<Vec<f64>>,
        ) -> Result<u32> {
            if x.dim() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    got: x.dim(),
                });
            }
            let key: Vec<u64> = x.values.iter().map(|v| v.to_bits()).collect();
            if let Some(&id) = index.get(&key) {
                return Ok(id);
            }
            let id = docs.len() as u32;
            docs.push(x.values.clone());
            index.insert(key, id);
            Ok(id)
        }

        for obs in history {
            let i = intern(&obs.x_i, input_dim, &mut index, &mut docs)?;
            let j = intern(&obs.x_j, input_dim, &mut index, &mut docs)?;
            pairs.push((i, j, obs.y, obs.lambda_weight));
        }
        Ok(PairBatch { docs, pairs })
    }
}

struct Scratch {
    ws: Workspace,
    scores: Vec<f64>,
    coefs: Vec<f64>,
}

impl Scratch {
    fn new(params: &NetworkParams, n_docs: usize) -> Self {
        Scratch {
            ws: Workspace::new(params.width(), params.depth()),
            scores: vec![0.0; n_docs],
            coefs: vec![0.0; n_docs],
        }
    }
}

/// One full-batch pass: returns the loss and, when `grad` is given,
/// accumulates the loss gradient into it (which must be zeroed).
fn batch_pass(
    params: &NetworkParams,
    theta0: &NetworkParams,
    batch: &PairBatch,
    lambda: f64,
    scratch: &mut Scratch,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    for (doc, score) in batch.docs.iter().zip(scratch.scores.iter_mut()) {
        *score = forward_into(params, doc, &mut scratch.ws);
    }

    scratch.coefs.fill(0.0);
    let mut loss = 0.0;
    for &(i, j, y, weight) in &batch.pairs {
        let f = scratch.scores[i as usize] - scratch.scores[j as usize];
        let s = sigmoid(f);
        let clamped = s.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP);
        loss -= weight * ((1.0 - y) * (1.0 - clamped).ln() + y * clamped.ln());
        let residual = weight * (s - y);
        scratch.coefs[i as usize] += residual;
        scratch.coefs[j as usize] -= residual;
    }

    let m_lambda = params.width() as f64 * lambda;
    let mut reg = 0.0;
    for (t, t0) in params.as_flat().iter().zip(theta0.as_flat()) {
        let diff = t - t0;
        reg += diff * diff;
    }
    loss += 0.5 * m_lambda * reg;

    if let Some(grad) = grad.as_deref_mut() {
        for (doc_idx, doc) in batch.docs.iter().enumerate() {
            let coef = scratch.coefs[doc_idx];
            if coef == 0.0 {
                continue;
            }
            forward_into(params, doc, &mut scratch.ws);
            backward_accumulate(params, doc, &mut scratch.ws, coef, grad);
        }
        for ((g, t), t0) in grad.iter_mut().zip(params.as_flat()).zip(theta0.as_flat()) {
            *g += m_lambda * (t - t0);
        }
    }
    loss
}

/// The pairwise training objective over the accumulated history:
/// weighted cross-entropy of `sigmoid(f_i - f_j)` against each pair label,
/// plus `m * lambda / 2 * |theta - theta0|^2`.
pub fn pair_loss(
    params: &NetworkParams,
    theta0: &NetworkParams,
    history: &[PairObservation],
    cfg: &TrainConfig,
) -> Result<f64> {
    let batch = PairBatch::build(history, params.input_dim())?;
    let mut scratch = Scratch::new(params, batch.docs.len());
    Ok(batch_pass(
        params,
        theta0,
        &batch,
        cfg.lambda_reg,
        &mut scratch,
        None,
    ))
}

/// Exact gradient of [`pair_loss`] with respect to the flat parameters.
pub(crate) fn pair_loss_gradient(
    params: &NetworkParams,
    theta0: &NetworkParams,
    history: &[PairObservation],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let batch = PairBatch::build(history, params.input_dim())?;
    let mut scratch = Scratch::new(params, batch.docs.len());
    let mut grad = vec![0.0; params.total_params()];
    batch_pass(
        params,
        theta0,
        &batch,
        cfg.lambda_reg,
        &mut scratch,
        Some(&mut grad),
    );
    Ok(grad)
}

/// Runs `cfg.steps` full-batch gradient-descent steps on [`pair_loss`].
///
/// Descent starts from `params` when `cfg.warm_start` is set and from
/// `theta0` otherwise. Fails with the offending step index if the loss ever
/// becomes NaN or infinite.
pub fn train(
    params: &NetworkParams,
    theta0: &NetworkParams,
    history: &[PairObservation],
    cfg: &TrainConfig,
) -> Result<NetworkParams> {
    cfg.validate()?;
    if params.total_params() != theta0.total_params() {
        return Err(Error::DimensionMismatch {
            expected: params.total_params(),
            got: theta0.total_params(),
        });
    }

    let mut theta = if cfg.warm_start {
        params.clone()
    } else {
        theta0.clone()
    };
    let batch = PairBatch::build(history, params.input_dim())?;
    let mut scratch = Scratch::new(params, batch.docs.len());
    let mut grad = vec![0.0; params.total_params()];

    for step in 0..cfg.steps {
        grad.fill(0.0);
        let loss = batch_pass(
            &theta,
            theta0,
            &batch,
            cfg.lambda_reg,
            &mut scratch,
            Some(&mut grad),
        );
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        for (t, g) in theta.as_flat_mut().iter_mut().zip(&grad) {
            *t -= cfg.eta * g;
        }
    }

    if theta.as_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss { step: cfg.steps });
    }
    Ok(theta)
}

/// `|delta NDCG@k|` of swapping the documents at two served ranks, using
/// binary click labels as gains (true grades are unavailable online).
///
/// Ranks are 0-based. Ranks at or beyond the cutoff contribute no discount;
/// the ideal DCG places all clicked documents first.
pub fn delta_ndcg_weight(clicks: &[bool], rank_a: usize, rank_b: usize, k: usize) -> f64 {
    let n_clicked = clicks.iter().filter(|&&c| c).count();
    let idcg: f64 = (0..n_clicked.min(k))
        .map(|r| 1.0 / ((r + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return 0.0;
    }
    let discount = |rank: usize| {
        if rank < k {
            1.0 / ((rank + 2) as f64).log2()
        } else {
            0.0
        }
    };
    let gain = |rank: usize| if clicks[rank] { 1.0 } else { 0.0 };
    ((gain(rank_a) - gain(rank_b)) * (discount(rank_a) - discount(rank_b))).abs() / idcg
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::network::test_support::min_abs_preactivation;
    use super::super::{forward, init_params};
    use super::*;
    use crate::metrics::ndcg_at_k;

    fn cfg(eta: f64, steps: usize, lambda: f64) -> TrainConfig {
        TrainConfig {
            eta,
            steps,
            lambda_reg: lambda,
            warm_start: true,
        }
    }

    fn augmented_unit(rng: &mut impl Rng, half_dim: usize) -> FeatureVector {
        let raw: Vec<f64> = (0..half_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        let mut values: Vec<f64> = raw
            .iter()
            .map(|v| v / (std::f64::consts::SQRT_2 * norm))
            .collect();
        values.extend_from_within(..);
        FeatureVector { values }
    }

    fn pair(x_i: FeatureVector, x_j: FeatureVector, y: f64, weight: f64) -> PairObservation {
        PairObservation {
            x_i,
            x_j,
            y,
            round: 0,
            lambda_weight: weight,
        }
    }

    #[test]
    fn empty_history_at_init_has_zero_loss() {
        let theta0 = init_params(4, 4, 2, 1).unwrap();
        let loss = pair_loss(&theta0, &theta0, &[], &cfg(0.1, 0, 1e-4)).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn undecided_pair_costs_log_two() {
        // At the symmetric init every score is ~0, so f_ij ~ 0 and the
        // cross-entropy of an undecided pair is log 2.
        let theta0 = init_params(8, 4, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let history = vec![pair(
            augmented_unit(&mut rng, 4),
            augmented_unit(&mut rng, 4),
            1.0,
            1.0,
        )];
        let loss = pair_loss(&theta0, &theta0, &history, &cfg(0.1, 0, 1e-4)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-6, "loss {loss}");
    }

    #[test]
    fn pair_contribution_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta: Vec<f64> = (0..4 * 4 + 4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let params = NetworkParams::from_flat(4, 4, 2, theta).unwrap();
        let theta0 = init_params(4, 4, 2, 9).unwrap();
        let a = augmented_unit(&mut rng, 2);
        let b = augmented_unit(&mut rng, 2);
        let c = cfg(0.1, 0, 1e-3);
        let forward_loss =
            pair_loss(&params, &theta0, &[pair(a.clone(), b.clone(), 1.0, 0.7)], &c).unwrap();
        let reversed_loss = pair_loss(&params, &theta0, &[pair(b, a, 0.0, 0.7)], &c).unwrap();
        assert!((forward_loss - reversed_loss).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x10DE);
        let c = cfg(1e-3, 0, 1e-3);
        let mut checked = 0;
        while checked < 10 {
            let theta: Vec<f64> = (0..4 * 4 + 4).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let params = NetworkParams::from_flat(4, 4, 2, theta).unwrap();
            let theta0 = init_params(4, 4, 2, 1).unwrap();
            let history: Vec<PairObservation> = (0..3)
                .map(|_| {
                    pair(
                        augmented_unit(&mut rng, 2),
                        augmented_unit(&mut rng, 2),
                        if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
                        rng.gen_range(0.1..1.0),
                    )
                })
                .collect();
            if history
                .iter()
                .flat_map(|p| [&p.x_i, &p.x_j])
                .any(|x| min_abs_preactivation(&params, x) < 1e-2)
            {
                continue;
            }

            let analytic = pair_loss_gradient(&params, &theta0, &history, &c).unwrap();
            let h = 1e-5;
            let mut numeric = vec![0.0; analytic.len()];
            for k in 0..numeric.len() {
                let mut plus = params.clone();
                plus.as_flat_mut()[k] += h;
                let mut minus = params.clone();
                minus.as_flat_mut()[k] -= h;
                numeric[k] = (pair_loss(&plus, &theta0, &history, &c).unwrap()
                    - pair_loss(&minus, &theta0, &history, &c).unwrap())
                    / (2.0 * h);
            }
            let err: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-4 * scale.max(1e-8), "rel err {}", err / scale);
            checked += 1;
        }
    }

    #[test]
    fn zero_steps_returns_params_unchanged() {
        let theta0 = init_params(4, 4, 2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let history = vec![pair(
            augmented_unit(&mut rng, 2),
            augmented_unit(&mut rng, 2),
            1.0,
            1.0,
        )];
        let out = train(&theta0, &theta0, &history, &cfg(1e-3, 0, 1e-4)).unwrap();
        assert_eq!(out, theta0);
    }

    #[test]
    fn training_decides_a_single_pair() {
        let theta0 = init_params(8, 4, 2, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x_i = augmented_unit(&mut rng, 4);
        let x_j = augmented_unit(&mut rng, 4);
        let history = vec![pair(x_i.clone(), x_j.clone(), 1.0, 1.0)];
        let trained = train(&theta0, &theta0, &history, &cfg(1e-3, 100, 1e-4)).unwrap();
        let f_ij = forward(&trained, &x_i).unwrap() - forward(&trained, &x_j).unwrap();
        assert!(sigmoid(f_ij) > 0.5, "sigma = {}", sigmoid(f_ij));
    }

    #[test]
    fn descent_is_monotone_for_small_steps() {
        // Deterministic full-batch descent means train(J = s) is the s-step
        // prefix of the same trajectory: losses along it must not increase.
        let theta0 = init_params(6, 8, 2, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let history: Vec<PairObservation> = (0..10)
            .map(|_| {
                pair(
                    augmented_unit(&mut rng, 3),
                    augmented_unit(&mut rng, 3),
                    if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
                    1.0,
                )
            })
            .collect();
        let c = TrainConfig {
            eta: 1e-3,
            steps: 0,
            lambda_reg: 1e-4,
            warm_start: false,
        };
        let mut losses = Vec::new();
        for steps in 0..=25 {
            let theta = train(&theta0, &theta0, &history, &TrainConfig { steps, ..c }).unwrap();
            losses.push(pair_loss(&theta, &theta0, &history, &c).unwrap());
        }
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {w:?}");
        }
        assert!(losses.last().unwrap() < losses.first().unwrap());
    }

    #[test]
    fn empty_history_anchors_back_to_theta0() {
        let theta0 = init_params(4, 8, 2, 13).unwrap();
        let mut start = theta0.clone();
        for v in start.as_flat_mut() {
            *v += 0.37;
        }
        let c = TrainConfig {
            eta: 1.0,
            steps: 200,
            lambda_reg: 0.1,
            warm_start: true,
        };
        let out = train(&start, &theta0, &[], &c).unwrap();
        let dist: f64 = out
            .as_flat()
            .iter()
            .zip(theta0.as_flat())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-10, "distance {dist}");
    }

    #[test]
    fn training_is_deterministic() {
        let theta0 = init_params(6, 4, 2, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let history: Vec<PairObservation> = (0..5)
            .map(|_| {
                pair(
                    augmented_unit(&mut rng, 3),
                    augmented_unit(&mut rng, 3),
                    1.0,
                    1.0,
                )
            })
            .collect();
        let c = cfg(1e-3, 30, 1e-4);
        let a = train(&theta0, &theta0, &history, &c).unwrap();
        let b = train(&theta0, &theta0, &history, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_config() {
        let theta0 = init_params(4, 4, 2, 1).unwrap();
        assert!(train(&theta0, &theta0, &[], &cfg(0.0, 1, 1e-4)).is_err());
        assert!(train(&theta0, &theta0, &[], &cfg(1e-3, 1, 0.0)).is_err());
    }

    #[test]
    fn swap_weight_is_zero_for_equal_feedback() {
        assert_eq!(delta_ndcg_weight(&[true, true, false], 0, 1, 10), 0.0);
        assert_eq!(delta_ndcg_weight(&[false, false, false], 0, 1, 10), 0.0);
    }

    #[test]
    fn swap_weight_matches_hand_value_at_top() {
        // One click at rank 1 of two served docs: idcg = 1, so the weight is
        // 1/log2(2) - 1/log2(3).
        let got = delta_ndcg_weight(&[false, true], 0, 1, 10);
        let expect = 1.0 - 1.0 / 3.0f64.log2();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn swap_weight_matches_metric_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD06);
        for _ in 0..200 {
            let v = rng.gen_range(2..8usize);
            let k = rng.gen_range(1..=v);
            let clicks: Vec<bool> = (0..v).map(|_| rng.gen_bool(0.4)).collect();
            let a = rng.gen_range(0..v);
            let mut b = rng.gen_range(0..v);
            while b == a {
                b = rng.gen_range(0..v);
            }
            // With the identity ranking, positions coincide with doc ids.
            let labels: Vec<u8> = clicks.iter().map(|&c| c as u8).collect();
            let base: Vec<usize> = (0..v).collect();
            let mut swapped = base.clone();
            swapped.swap(a, b);
            let oracle =
                (ndcg_at_k(&base, &labels, k) - ndcg_at_k(&swapped, &labels, k)).abs();
            let got = delta_ndcg_weight(&clicks, a, b, k);
            assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        }
    }
}
