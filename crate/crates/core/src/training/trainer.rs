use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jointhdr_autograd::{Graph, Grads, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::models::{load_weights, save_weights, Bound, ModelWeights};
use crate::sim::derive_seed;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adaptive moment estimation with bias correction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Adam {
    pub t: u64,
    moments: BTreeMap<String, (Vec<f32>, Vec<f32>)>,
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    /// One update of every parameter that received a gradient.
    pub fn step(&mut self, w: &mut ModelWeights, bound: &Bound, grads: &Grads<f32>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for (name, &v) in bound.iter() {
            let Some(g) = grads.get(v) else { continue };
            let p = w.get_mut(name).expect("bound from these weights");
            let (m, s) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; g.numel()], vec![0.0; g.numel()]));
            for (((x, &gi), mi), si) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(s.iter_mut()) {
                let gi = gi as f64;
                let mn = BETA1 * *mi as f64 + (1.0 - BETA1) * gi;
                let sn = BETA2 * *si as f64 + (1.0 - BETA2) * gi * gi;
                *mi = mn as f32;
                *si = sn as f32;
                *x = (*x as f64 - lr * (mn / c1) / ((sn / c2).sqrt() + EPS)) as f32;
            }
        }
    }

    fn to_bytes(&self) -> (Vec<u8>, Vec<(String, usize)>) {
        let mut bytes = Vec::new();
        let mut index = Vec::new();
        for (name, (m, s)) in &self.moments {
            index.push((name.clone(), m.len()));
            bytes.extend(m.iter().chain(s.iter()).flat_map(|v| v.to_le_bytes()));
        }
        (bytes, index)
    }

    fn from_bytes(t: u64, bytes: &[u8], index: &[(String, usize)]) -> Option<Self> {
        let mut floats = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let mut moments = BTreeMap::new();
        for (name, n) in index {
            let m: Vec<f32> = floats.by_ref().take(*n).collect();
            let s: Vec<f32> = floats.by_ref().take(*n).collect();
            if m.len() != *n || s.len() != *n {
                return None;
            }
            moments.insert(name.clone(), (m, s));
        }
        floats.next().is_none().then_some(Self { t, moments })
    }
}

/// One optimizer step in the training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sobel: Option<f64>,
    pub wall_ms: f64,
}

impl LogRecord {
    /// Loss components without the wall-clock field.
    pub fn trace_key(&self) -> (usize, usize, u64, u64, Option<u64>, Option<u64>) {
        (
            self.step,
            self.epoch,
            self.lr.to_bits(),
            self.loss.to_bits(),
            self.recon.map(f64::to_bits),
            self.sobel.map(f64::to_bits),
        )
    }
}

/// Loss handles produced for one batch.
#[derive(Clone, Copy, Debug)]
pub struct StepLoss {
    pub total: Var,
    pub recon: Option<Var>,
    pub sobel: Option<(Var, Var)>,
}

/// Everything needed to continue training bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub weights: ModelWeights,
    pub adam: Adam,
    /// Next epoch to run.
    pub epoch: usize,
    pub step: usize,
    pub log: Vec<LogRecord>,
}

#[derive(Serialize, Deserialize)]
struct StateMeta {
    epoch: usize,
    step: usize,
    adam_t: u64,
    adam_index: Vec<(String, usize)>,
    config: TrainConfig,
}

impl TrainState {
    pub fn fresh(weights: ModelWeights) -> Self {
        Self { weights, adam: Adam::new(), epoch: 0, step: 0, log: Vec::new() }
    }

    pub fn save(&self, dir: &Path, cfg: &TrainConfig) -> Result<(), TrainError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| TrainError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        save_weights(&self.weights, &dir.join("weights"))?;
        let (bytes, adam_index) = self.adam.to_bytes();
        let p = dir.join("adam.f32");
        fs::write(&p, bytes).map_err(io(&p))?;
        let meta = StateMeta { epoch: self.epoch, step: self.step, adam_t: self.adam.t, adam_index, config: cfg.clone() };
        let p = dir.join("state.json");
        fs::write(&p, serde_json::to_vec_pretty(&meta).expect("state serializes")).map_err(io(&p))?;
        let text: String = self.log.iter().map(|r| serde_json::to_string(r).expect("record") + "\n").collect();
        let p = dir.join("log.jsonl");
        fs::write(&p, text).map_err(io(&p))
    }

    /// Loads a saved state; its recorded config must match `cfg` apart from
    /// checkpoint placement.
    pub fn load(dir: &Path, cfg: &TrainConfig) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::Data(format!("{}: {m}", dir.display()));
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|source| TrainError::Io { path: p.display().to_string(), source })
        };
        let meta: StateMeta = serde_json::from_slice(&read("state.json")?).map_err(|e| bad(e.to_string()))?;
        let strip = |c: &TrainConfig| TrainConfig { checkpoint_dir: None, checkpoint_every: 0, stop_after_epoch: None, ..c.clone() };
        let same = strip(&meta.config) == strip(cfg);
        if !same {
            return Err(TrainError::Config("resume config differs from the checkpoint's".into()));
        }
        let weights = load_weights(&dir.join("weights"))?;
        let adam = Adam::from_bytes(meta.adam_t, &read("adam.f32")?, &meta.adam_index)
            .ok_or_else(|| bad("adam.f32 does not match its index".into()))?;
        let log_text = String::from_utf8(read("log.jsonl")?).map_err(|e| bad(e.to_string()))?;
        let log = log_text
            .lines()
            .map(serde_json::from_str)
            .collect::<Result<Vec<LogRecord>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        Ok(Self { weights, adam, epoch: meta.epoch, step: meta.step, log })
    }
}

/// Final weights and the full loss trace.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    pub log: Vec<LogRecord>,
    /// False when training stopped early at `stop_after_epoch`.
    pub completed: bool,
}

/// Shared epoch/batch loop. Each epoch draws its shuffling and augmentation
/// from an RNG seeded by `(seed, epoch)`, so resuming from a checkpoint
/// replays exactly the uninterrupted run.
pub struct Trainer<'a> {
    cfg: &'a TrainConfig,
    pub state: TrainState,
    log_file: Option<PathBuf>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a TrainConfig, weights: ModelWeights) -> Result<Self, TrainError> {
        cfg.validate()?;
        Ok(Self { cfg, state: TrainState::fresh(weights), log_file: None })
    }

    /// Continues from `cfg.checkpoint_dir` when a saved state exists there.
    pub fn new_or_resume(cfg: &'a TrainConfig, weights: ModelWeights) -> Result<Self, TrainError> {
        cfg.validate()?;
        let state = match &cfg.checkpoint_dir {
            Some(dir) if dir.join("state.json").exists() => TrainState::load(dir, cfg)?,
            _ => TrainState::fresh(weights),
        };
        Ok(Self { cfg, state, log_file: None })
    }

    /// Appends each record as a JSON line to `path` (rewritten with the
    /// records already in the state first).
    pub fn log_to(&mut self, path: &Path) -> Result<(), TrainError> {
        let text: String = self.state.log.iter().map(|r| serde_json::to_string(r).expect("record") + "\n").collect();
        fs::write(path, text).map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
        self.log_file = Some(path.to_path_buf());
        Ok(())
    }

    /// Runs the remaining epochs (or up to `stop_after_epoch`).
    pub fn run<F>(&mut self, n_items: usize, mut batch_loss: F) -> Result<(), TrainError>
    where
        F: FnMut(&mut Graph<f32>, &Bound, &[usize], &mut ChaCha8Rng) -> Result<StepLoss, TrainError>,
    {
        if n_items == 0 {
            return Err(TrainError::Data("empty training set".into()));
        }
        let end = self.cfg.stop_after_epoch.unwrap_or(self.cfg.epochs).min(self.cfg.epochs);
        let start = Instant::now();
        while self.state.epoch < end {
            let epoch = self.state.epoch;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, epoch as u64));
            let mut order: Vec<usize> = (0..n_items).collect();
            order.shuffle(&mut rng);
            let lr = self.cfg.lr(epoch);
            for chunk in order.chunks(self.cfg.batch_size) {
                let mut g = Graph::new();
                let bound = self.state.weights.bind(&mut g, true);
                let l = batch_loss(&mut g, &bound, chunk, &mut rng)?;
                let loss = g.value(l.total).item() as f64;
                let item = |v: Var| g.value(v).item() as f64;
                if !loss.is_finite() {
                    let last = self.state.log.last().map(|r| r.loss);
                    return Err(TrainError::Divergence {
                        step: self.state.step,
                        epoch,
                        loss,
                        detail: format!("lr {lr:.3e}, previous loss {last:?}"),
                    });
                }
                let grads = g.backward(l.total)?;
                let bad = bound.iter().find(|(_, &v)| grads.get(v).is_some_and(|t| !t.all_finite()));
                if let Some((name, _)) = bad {
                    return Err(TrainError::Divergence {
                        step: self.state.step,
                        epoch,
                        loss,
                        detail: format!("non-finite gradient in {name}"),
                    });
                }
                self.state.adam.step(&mut self.state.weights, &bound, &grads, lr);
                let rec = LogRecord {
                    step: self.state.step,
                    epoch,
                    lr,
                    loss,
                    recon: l.recon.map(item),
                    sobel: l.sobel.map(|(x, y)| item(x) + item(y)),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                };
                if let Some(p) = &self.log_file {
                    let mut f = fs::OpenOptions::new()
                        .append(true)
                        .open(p)
                        .map_err(|source| TrainError::Io { path: p.display().to_string(), source })?;
                    writeln!(f, "{}", serde_json::to_string(&rec).expect("record"))
                        .map_err(|source| TrainError::Io { path: p.display().to_string(), source })?;
                }
                self.state.log.push(rec);
                self.state.step += 1;
            }
            self.state.epoch += 1;
            if let (Some(dir), every) = (&self.cfg.checkpoint_dir, self.cfg.checkpoint_every) {
                if every > 0 && self.state.epoch % every == 0 {
                    self.state.save(dir, self.cfg)?;
                }
            }
        }
        if let Some(dir) = &self.cfg.checkpoint_dir {
            self.state.save(dir, self.cfg)?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        let completed = self.state.epoch >= self.cfg.epochs;
        TrainOutcome { weights: self.state.weights, log: self.state.log, completed }
    }
}
