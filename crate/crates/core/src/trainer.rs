//! Levenberg-Marquardt training on open-loop rows.
//!
//! One epoch is one full-batch LM step. Residuals are `e = target - f(x)`
//! and the Jacobian is `J = ∂e/∂θ`; the step solves
//! `(JᵀJ + μI) Δ = Jᵀe` and proposes `θ - Δ`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{AnnConfig, AnnNetwork};
use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::narx::{NarxNetwork, RegressorRow};

/// Lower bound on μ so repeated decreases cannot underflow to zero.
const MU_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub mu_max: f64,
    pub goal_mse: f64,
    pub val_patience: usize,
    pub split_ratios: [f64; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 1000,
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            goal_mse: 0.0,
            val_patience: 6,
            split_ratios: [0.70, 0.15, 0.15],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let r = self.split_ratios;
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("split ratios must be positive".into()));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split ratios must sum to 1".into()));
        }
        if !(self.mu_init > 0.0 && self.mu_init <= self.mu_max) {
            return Err(Error::InvalidConfig("need 0 < mu_init <= mu_max".into()));
        }
        if !(self.mu_increase > 1.0 && self.mu_decrease > 0.0 && self.mu_decrease < 1.0) {
            return Err(Error::InvalidConfig("need mu_increase > 1 and 0 < mu_decrease < 1".into()));
        }
        if !(self.goal_mse >= 0.0) {
            return Err(Error::InvalidConfig("goal_mse must be >= 0".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    Goal,
    ValPatience,
    MuOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub initial_train_mse: f64,
    /// Per epoch, after the accepted step.
    pub train_mse: Vec<f64>,
    /// Empty when there are no validation rows.
    pub val_mse: Vec<f64>,
    /// Empty when there are no test rows.
    pub test_mse: Vec<f64>,
    pub accepted_steps: usize,
    pub stop_reason: StopReason,
    /// Epoch whose weights were returned (0 = initial weights).
    pub best_epoch: usize,
    pub final_mu: f64,
    pub weights_checksum: String,
}

impl TrainReport {
    pub fn final_train_mse(&self) -> f64 {
        self.train_mse.last().copied().unwrap_or(self.initial_train_mse)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Contiguous temporal split of `n` items: `floor(r0·n)` train,
/// `floor(r1·n)` validation, the remainder test.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> SplitIndices {
    // The epsilon keeps exact products such as 0.7·100 from flooring down.
    let n_train = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let n_val = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    SplitIndices {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n,
    }
}

pub fn split_rows(rows: &[RegressorRow], config: &TrainConfig) -> Result<SplitIndices> {
    config.validate()?;
    if rows.len() < 10 {
        return Err(Error::TooFewRows(rows.len()));
    }
    Ok(split_counts(rows.len(), config.split_ratios))
}

/// Training, validation and test row sets for one network.
#[derive(Debug, Clone, Copy)]
pub struct RowSets<'a> {
    pub train: &'a [RegressorRow],
    pub val: &'a [RegressorRow],
    pub test: &'a [RegressorRow],
}

impl<'a> RowSets<'a> {
    pub fn from_split(rows: &'a [RegressorRow], split: &SplitIndices) -> Self {
        RowSets {
            train: &rows[split.train.clone()],
            val: &rows[split.val.clone()],
            test: &rows[split.test.clone()],
        }
    }
}

fn targets(rows: &[RegressorRow]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| r.target.ok_or(Error::MissingGroundTruth))
        .collect()
}

fn check_rows(mlp: &Mlp, rows: &[RegressorRow]) -> Result<()> {
    let expected = mlp.inputs();
    if let Some(r) = rows.iter().find(|r| r.values.len() != expected) {
        return Err(Error::DimensionMismatch {
            expected,
            got: r.values.len(),
        });
    }
    Ok(())
}

pub(crate) fn mse(mlp: &Mlp, rows: &[RegressorRow], targets: &[f64]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let sse: f64 = rows
        .iter()
        .zip(targets)
        .map(|(r, t)| {
            let e = t - mlp.forward(&r.values);
            e * e
        })
        .sum();
    sse / rows.len() as f64
}

/// Returns `Jᵀ` (params × rows) and the residual vector.
fn jacobian_transposed(mlp: &Mlp, rows: &[RegressorRow], targets: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let p = mlp.n_params();
    let mut data = vec![0.0; p * rows.len()];
    let mut e = DVector::zeros(rows.len());
    for (i, (row, t)) in rows.iter().zip(targets).enumerate() {
        let g = &mut data[i * p..(i + 1) * p];
        let y = mlp.forward_with_gradient(&row.values, g);
        for v in g.iter_mut() {
            *v = -*v;
        }
        e[i] = t - y;
    }
    (DMatrix::from_vec(p, rows.len(), data), e)
}

/// `∂e_i/∂θ_k` for residuals `e_i = target_i - forward(row_i)`, one row per
/// regression row, columns in the flat ordering of [`crate::mlp`].
pub fn lm_jacobian(net: &NarxNetwork, rows: &[RegressorRow]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no rows".into()));
    }
    check_rows(&net.mlp, rows)?;
    // The Jacobian does not depend on the targets.
    let (jt, _) = jacobian_transposed(&net.mlp, rows, &vec![0.0; rows.len()]);
    Ok(jt.transpose())
}

/// Solves `(H + μI) Δ = g` by Cholesky. `None` if not positive definite.
pub fn solve_damped(h: &DMatrix<f64>, g: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let mut a = h.clone();
    for k in 0..a.nrows() {
        a[(k, k)] += mu;
    }
    let chol = a.cholesky()?;
    let delta = chol.solve(g);
    delta.iter().all(|v| v.is_finite()).then_some(delta)
}

pub(crate) fn train_mlp(mut mlp: Mlp, sets: RowSets<'_>, config: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    config.validate()?;
    if sets.train.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    for rows in [sets.train, sets.val, sets.test] {
        check_rows(&mlp, rows)?;
    }
    let (t_train, t_val, t_test) = (targets(sets.train)?, targets(sets.val)?, targets(sets.test)?);
    let has_val = !sets.val.is_empty();

    let mut cur = mse(&mlp, sets.train, &t_train);
    if !cur.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let initial_train_mse = cur;
    let mut mu = config.mu_init;
    let mut params = mlp.params();
    let mut best_params = params.clone();
    let mut best_val = if has_val { mse(&mlp, sets.val, &t_val) } else { f64::INFINITY };
    let mut best_epoch = 0;
    let mut val_fails = 0usize;

    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut test_hist = Vec::new();
    let mut accepted = 0usize;
    let mut trial = mlp.clone();

    let stop_reason = 'epochs: loop {
        if cur <= config.goal_mse {
            break StopReason::Goal;
        }
        if train_hist.len() >= config.max_epochs {
            break StopReason::MaxEpochs;
        }
        let epoch = train_hist.len() + 1;
        let (jt, e) = jacobian_transposed(&mlp, sets.train, &t_train);
        let h = &jt * jt.transpose();
        let g = &jt * &e;
        let h_scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));

        // Inner damping loop: raise μ until the step lowers the training MSE.
        let new_mse = loop {
            if mu > config.mu_max {
                break 'epochs StopReason::MuOverflow;
            }
            match solve_damped(&h, &g, mu) {
                Some(delta) => {
                    let proposal: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p - d).collect();
                    trial.set_params(&proposal);
                    let m = mse(&trial, sets.train, &t_train);
                    if m.is_finite() && m < cur {
                        params = proposal;
                        mu = (mu * config.mu_decrease).max(MU_FLOOR);
                        break m;
                    }
                }
                None if mu > 1e3 * h_scale.max(1.0) => return Err(Error::SingularSystem),
                None => {}
            }
            mu *= config.mu_increase;
        };
        mlp.set_params(&params);
        cur = new_mse;
        accepted += 1;
        train_hist.push(cur);
        if !sets.test.is_empty() {
            test_hist.push(mse(&mlp, sets.test, &t_test));
        }
        if has_val {
            let v = mse(&mlp, sets.val, &t_val);
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            val_hist.push(v);
            if v < best_val {
                best_val = v;
                best_params.clone_from(&params);
                best_epoch = epoch;
                val_fails = 0;
            } else if v > best_val {
                val_fails += 1;
                if val_fails >= config.val_patience.max(1) {
                    break StopReason::ValPatience;
                }
            }
        }
    };

    if has_val {
        mlp.set_params(&best_params);
    } else {
        best_epoch = train_hist.len();
    }
    debug_assert!(mlp.is_finite());
    let report = TrainReport {
        epochs_run: train_hist.len(),
        initial_train_mse,
        train_mse: train_hist,
        val_mse: val_hist,
        test_mse: test_hist,
        accepted_steps: accepted,
        stop_reason,
        best_epoch,
        final_mu: mu,
        weights_checksum: mlp.checksum(),
    };
    Ok((mlp, report))
}

/// Trains on `rows` split by [`split_rows`].
pub fn train_narx(net: NarxNetwork, rows: &[RegressorRow], config: &TrainConfig) -> Result<(NarxNetwork, TrainReport)> {
    let split = split_rows(rows, config)?;
    train_narx_on(net, RowSets::from_split(rows, &split), config)
}

/// Trains on caller-chosen row sets.
pub fn train_narx_on(net: NarxNetwork, sets: RowSets<'_>, config: &TrainConfig) -> Result<(NarxNetwork, TrainReport)> {
    let NarxNetwork { config: narx, mlp } = net;
    let (mlp, report) = train_mlp(mlp, sets, config)?;
    Ok((NarxNetwork { config: narx, mlp }, report))
}

/// Initializes a baseline network from `config.seed` and trains it on
/// `rows` (lagged inputs only) split by [`split_rows`].
pub fn train_ann_baseline(
    rows: &[RegressorRow],
    ann: &AnnConfig,
    config: &TrainConfig,
) -> Result<(AnnNetwork, TrainReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = AnnNetwork::random(ann.clone(), &mut rng)?;
    let split = split_rows(rows, config)?;
    train_ann_on(net, RowSets::from_split(rows, &split), config)
}

pub fn train_ann_on(net: AnnNetwork, sets: RowSets<'_>, config: &TrainConfig) -> Result<(AnnNetwork, TrainReport)> {
    let AnnNetwork { config: ann, mlp } = net;
    let (mlp, report) = train_mlp(mlp, sets, config)?;
    Ok((AnnNetwork { config: ann, mlp }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::NarxConfig;

    fn dummy_rows(n: usize) -> Vec<RegressorRow> {
        (0..n)
            .map(|k| RegressorRow { values: vec![k as f64; 6], target: Some(0.0) })
            .collect()
    }

    #[test]
    fn split_examples() {
        let c = TrainConfig::default();
        let s = split_rows(&dummy_rows(100), &c).unwrap();
        assert_eq!((s.train, s.val, s.test), (0..70, 70..85, 85..100));
        let s = split_rows(&dummy_rows(10), &c).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
        assert_eq!(split_rows(&dummy_rows(9), &c), Err(Error::TooFewRows(9)));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.split_ratios = [0.7, 0.2, 0.2];
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.mu_max = 1e-4;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.split_ratios = [0.85, 0.15, 0.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_output_weights_zero_hidden_columns() {
        let mut net = NarxNetwork::zeros(NarxConfig::default()).unwrap();
        for (j, row) in net.mlp.hidden_weights.iter_mut().enumerate() {
            for (i, w) in row.iter_mut().enumerate() {
                *w = 0.1 * (j as f64 - i as f64);
            }
        }
        let rows: Vec<_> = (0..4)
            .map(|k| RegressorRow { values: vec![0.2 * k as f64; 6], target: Some(0.5) })
            .collect();
        let j = lm_jacobian(&net, &rows).unwrap();
        let n_hidden = 16 * 6 + 16;
        for c in 0..n_hidden {
            assert!(j.column(c).iter().all(|v| *v == 0.0));
        }
        assert!(j.column(j.ncols() - 1).iter().all(|v| *v == -1.0));
    }

    #[test]
    fn damped_solve_residual() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let d = solve_damped(&h, &g, 0.5).unwrap();
        let mut a = h.clone();
        a[(0, 0)] += 0.5;
        a[(1, 1)] += 0.5;
        assert!((a * d - &g).norm() <= 1e-12 * g.norm());
    }
}
