//! Training loop: epoch shuffling, mini-batch AdamW updates, best-epoch
//! selection by validation loss.

use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::model::{backward, bce_with_logits, forward, sigmoid, ModelDims, Params};
use crate::encoder::optim::AdamW;
use crate::encoder::vocab::{tokenize_pair, TokenizedPair, Vocab};
use crate::rng;
use crate::{Error, Result};

/// Sentinel for `encoder_checkpoint` meaning random initialization.
pub const SCRATCH: &str = "scratch";

/// The learning rates covered by [`lr_sweep`].
pub const LR_SWEEP: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_length: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub vocab_cap: usize,
    pub seed: u64,
    /// `"scratch"` for random initialization, or a checkpoint directory to
    /// warm-start from (the checkpoint's vocabulary and dimensions win).
    pub encoder_checkpoint: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: 1e-5,
            batch_size: 16,
            max_length: 128,
            d_model: 32,
            n_layers: 2,
            n_heads: 2,
            d_ff: 64,
            weight_decay: 0.01,
            grad_clip: 1.0,
            vocab_cap: 20_000,
            seed: 7,
            encoder_checkpoint: SCRATCH.to_string(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} invalid", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_length < 5 {
            return Err(Error::Config("max_length must be at least 5".into()));
        }
        if self.vocab_cap == 0 {
            return Err(Error::Config("vocab_cap must be at least 1".into()));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip > 0.0) {
            return Err(Error::Config("grad_clip must be positive".into()));
        }
        ModelDims {
            vocab: 1,
            max_len: self.max_length,
            d_model: self.d_model,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            n_layers: self.n_layers,
        }
        .validate()
    }
}

/// One premise/hypothesis training example with a binary entailment label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub premise: String,
    pub hypothesis: String,
    /// 1 entail, 0 contradict.
    pub label: u8,
}

impl LabeledPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>, label: u8) -> Self {
        LabeledPair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// What training produced, epoch by epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// 1-indexed epoch with the lowest validation loss (first on ties).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochStats>,
}

pub(crate) struct FitState {
    pub params: Params,
    pub vocab: Vocab,
    pub report: TrainReport,
}

/// The trainable binary entailment encoder.
pub struct Encoder {
    cfg: TrainConfig,
    pub(crate) state: Option<FitState>,
}

impl Encoder {
    pub fn new(cfg: TrainConfig) -> Result<Encoder> {
        cfg.validate()?;
        Ok(Encoder { cfg, state: None })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn is_fit(&self) -> bool {
        self.state.is_some()
    }

    pub fn report(&self) -> Result<&TrainReport> {
        Ok(&self.state()?.report)
    }

    pub(crate) fn state(&self) -> Result<&FitState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::State("encoder has not been trained".into()))
    }

    pub(crate) fn restore(cfg: TrainConfig, state: FitState) -> Encoder {
        Encoder {
            cfg,
            state: Some(state),
        }
    }

    /// Train on labeled pairs, selecting the epoch with the lowest
    /// validation loss. Both splits must be non-empty.
    pub fn fit(&mut self, train: &[LabeledPair], val: &[LabeledPair]) -> Result<&TrainReport> {
        self.cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        if val.is_empty() {
            return Err(Error::Config(
                "validation split is empty; best-epoch selection needs one".into(),
            ));
        }

        let (mut params, vocab) = if self.cfg.encoder_checkpoint == SCRATCH {
            let vocab = Vocab::build(
                train
                    .iter()
                    .flat_map(|p| [p.premise.as_str(), p.hypothesis.as_str()]),
                self.cfg.vocab_cap,
            );
            if vocab.is_empty() {
                return Err(Error::Data("training text produced no vocabulary".into()));
            }
            let dims = ModelDims {
                vocab: vocab.len(),
                max_len: self.cfg.max_length,
                d_model: self.cfg.d_model,
                n_heads: self.cfg.n_heads,
                d_ff: self.cfg.d_ff,
                n_layers: self.cfg.n_layers,
            };
            let mut rng = rng::seeded("encoder-init", self.cfg.seed, b"");
            (Params::init(dims, &mut rng)?, vocab)
        } else {
            let base = crate::encoder::checkpoint::load(std::path::Path::new(
                &self.cfg.encoder_checkpoint,
            ))?;
            let state = base.state.expect("loaded checkpoints always carry state");
            let dims = state.params.dims;
            if dims.d_model != self.cfg.d_model
                || dims.n_layers != self.cfg.n_layers
                || dims.n_heads != self.cfg.n_heads
                || dims.d_ff != self.cfg.d_ff
                || dims.max_len != self.cfg.max_length
            {
                return Err(Error::Config(format!(
                    "checkpoint {} dimensions do not match the configuration",
                    self.cfg.encoder_checkpoint
                )));
            }
            info!(
                "warm-starting from checkpoint {}",
                self.cfg.encoder_checkpoint
            );
            (state.params, state.vocab)
        };

        let tokenize_all = |pairs: &[LabeledPair]| -> Result<Vec<(TokenizedPair, f64)>> {
            pairs
                .iter()
                .map(|p| {
                    let tokens =
                        tokenize_pair(&vocab, &p.premise, &p.hypothesis, self.cfg.max_length)?;
                    Ok((tokens, p.label as f64))
                })
                .collect()
        };
        let train_tok = tokenize_all(train)?;
        let val_tok = tokenize_all(val)?;

        let mut opt = AdamW::new(
            params.flat_len(),
            self.cfg.lr,
            self.cfg.weight_decay,
            self.cfg.grad_clip,
        );
        let mut grads = Params::zeros_like(&params);

        let mut best: Option<(usize, f64, Params)> = None;
        let mut history = Vec::with_capacity(self.cfg.epochs);

        for epoch in 1..=self.cfg.epochs {
            let mut order: Vec<usize> = (0..train_tok.len()).collect();
            let mut rng = rng::seeded("encoder-epoch", self.cfg.seed, &epoch.to_le_bytes());
            order.shuffle(&mut rng);

            let mut train_loss_sum = 0.0;
            for batch in order.chunks(self.cfg.batch_size) {
                grads.fill(0.0);
                for &i in batch {
                    let (tokens, y) = &train_tok[i];
                    let cache = forward(&params, &tokens.ids)?;
                    train_loss_sum += bce_with_logits(cache.logit, *y);
                    let dlogit = sigmoid(cache.logit) - y;
                    backward(&params, &cache, dlogit, &mut grads);
                }
                opt.step(&mut params, &grads, 1.0 / batch.len() as f64);
            }
            let train_loss = train_loss_sum / train_tok.len() as f64;

            let mut val_loss_sum = 0.0;
            for (tokens, y) in &val_tok {
                let cache = forward(&params, &tokens.ids)?;
                val_loss_sum += bce_with_logits(cache.logit, *y);
            }
            let val_loss = val_loss_sum / val_tok.len() as f64;

            if !train_loss.is_finite() || !val_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch} (train {train_loss}, val {val_loss}); \
                     lower the learning rate"
                )));
            }
            debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
            history.push(EpochStats {
                epoch,
                train_loss,
                val_loss,
            });
            let improved = best.as_ref().map_or(true, |(_, b, _)| val_loss < *b);
            if improved {
                best = Some((epoch, val_loss, params.clone()));
            }
        }

        let (best_epoch, best_val_loss, best_params) =
            best.expect("at least one epoch always runs");
        info!("best epoch {best_epoch} with validation loss {best_val_loss:.6}");
        self.state = Some(FitState {
            params: best_params,
            vocab,
            report: TrainReport {
                best_epoch,
                best_val_loss,
                history,
            },
        });
        Ok(&self.state.as_ref().unwrap().report)
    }

    /// Entailment probability for one premise/hypothesis pair.
    pub fn predict_proba(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let state = self.state()?;
        let tokens = tokenize_pair(&state.vocab, premise, hypothesis, self.cfg.max_length)?;
        let cache = forward(&state.params, &tokens.ids)?;
        Ok(sigmoid(cache.logit))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSweepEntry {
    pub lr: f64,
    pub final_val_loss: f64,
    pub best_val_loss: f64,
}

/// Train once per learning rate and pick the lowest final validation loss,
/// breaking ties toward the smaller rate.
pub fn lr_sweep(
    train: &[LabeledPair],
    val: &[LabeledPair],
    base: &TrainConfig,
    rates: &[f64],
) -> Result<(f64, Vec<LrSweepEntry>)> {
    if rates.is_empty() {
        return Err(Error::InvalidArgument("no learning rates to sweep".into()));
    }
    let mut entries = Vec::with_capacity(rates.len());
    for &lr in rates {
        let mut cfg = base.clone();
        cfg.lr = lr;
        let mut encoder = Encoder::new(cfg)?;
        let report = match encoder.fit(train, val) {
            Ok(r) => r.clone(),
            Err(Error::Numeric(why)) => {
                info!("lr {lr}: diverged ({why})");
                entries.push(LrSweepEntry {
                    lr,
                    final_val_loss: f64::INFINITY,
                    best_val_loss: f64::INFINITY,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        entries.push(LrSweepEntry {
            lr,
            final_val_loss: report.history.last().expect("non-empty history").val_loss,
            best_val_loss: report.best_val_loss,
        });
    }
    let best = entries
        .iter()
        .min_by(|a, b| {
            a.final_val_loss
                .partial_cmp(&b.final_val_loss)
                .expect("losses are never NaN here")
                .then_with(|| a.lr.partial_cmp(&b.lr).expect("rates are finite"))
        })
        .expect("entries is non-empty");
    Ok((best.lr, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pairs() -> (Vec<LabeledPair>, Vec<LabeledPair>) {
        let mut train = Vec::new();
        for i in 0..24 {
            let (text, hyp, label) = if i % 2 == 0 {
                ("the system shall encrypt stored data", "about security", 1)
            } else {
                ("the page shall load fast", "about security", 0)
            };
            train.push(LabeledPair::new(format!("{text} case {i}"), hyp, label));
        }
        let val = vec![
            LabeledPair::new("the system shall encrypt backups", "about security", 1),
            LabeledPair::new("the page shall load quickly", "about security", 0),
        ];
        (train, val)
    }

    fn fast_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 3,
            lr: 1e-3,
            batch_size: 8,
            max_length: 24,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_match_the_documented_protocol() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.lr, 1e-5);
        assert_eq!(cfg.batch_size, 16);
        assert_eq!(cfg.max_length, 128);
        assert_eq!(cfg.encoder_checkpoint, SCRATCH);
        assert_eq!(LR_SWEEP.to_vec(), vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]);
    }

    #[test]
    fn predict_before_fit_is_a_state_error() {
        let enc = Encoder::new(fast_cfg(1)).unwrap();
        assert!(matches!(
            enc.predict_proba("text", "hypothesis"),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn empty_validation_split_is_a_config_error() {
        let (train, _) = toy_pairs();
        let mut enc = Encoder::new(fast_cfg(1)).unwrap();
        assert!(matches!(enc.fit(&train, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn best_epoch_is_the_first_validation_minimum() {
        // synthetic history check through the public report contract
        let report = TrainReport {
            best_epoch: 2,
            best_val_loss: 0.4,
            history: vec![
                EpochStats {
                    epoch: 1,
                    train_loss: 1.0,
                    val_loss: 0.9,
                },
                EpochStats {
                    epoch: 2,
                    train_loss: 0.8,
                    val_loss: 0.4,
                },
            ],
        };
        let argmin = report
            .history
            .iter()
            .min_by(|a, b| a.val_loss.partial_cmp(&b.val_loss).unwrap())
            .unwrap();
        assert_eq!(argmin.epoch, report.best_epoch);
    }

    #[test]
    fn fit_is_deterministic_per_seed_and_selects_a_best_epoch() {
        let (train, val) = toy_pairs();
        let mut a = Encoder::new(fast_cfg(5)).unwrap();
        let ra = a.fit(&train, &val).unwrap().clone();
        let mut b = Encoder::new(fast_cfg(5)).unwrap();
        let rb = b.fit(&train, &val).unwrap().clone();
        assert_eq!(ra, rb);
        assert!(ra.best_epoch >= 1 && ra.best_epoch <= 3);
        let pa = a.predict_proba("the system shall encrypt files", "about security");
        let pb = b.predict_proba("the system shall encrypt files", "about security");
        assert_eq!(pa.unwrap(), pb.unwrap());
    }

    #[test]
    fn training_separates_a_trivial_pattern() {
        let (train, val) = toy_pairs();
        let mut cfg = fast_cfg(3);
        cfg.epochs = 30;
        let mut enc = Encoder::new(cfg).unwrap();
        enc.fit(&train, &val).unwrap();
        let pos = enc
            .predict_proba("the system shall encrypt records", "about security")
            .unwrap();
        let neg = enc
            .predict_proba("the page shall load fast", "about security")
            .unwrap();
        assert!(
            pos > neg,
            "expected entailed pair ({pos}) above contradicted pair ({neg})"
        );
    }

    #[test]
    fn lr_sweep_prefers_lowest_final_val_loss() {
        let (train, val) = toy_pairs();
        let cfg = fast_cfg(2);
        let (best, entries) = lr_sweep(&train, &val, &cfg, &[1e-3, 1e-7]).unwrap();
        assert_eq!(entries.len(), 2);
        let by_loss: Vec<f64> = entries.iter().map(|e| e.final_val_loss).collect();
        let expect = if by_loss[0] <= by_loss[1] { 1e-3 } else { 1e-7 };
        assert_eq!(best, expect);
    }
}
