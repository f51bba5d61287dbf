//! Run settings. Every setting has one config-file key and one flag, the
//! flag being the key with `-` for `_`.

use std::collections::BTreeSet;

use ventnet_core::graph::{SkipInit, SkipPattern, VggConfig};
use ventnet_core::pruning::{PruneConfig, PruneScope};
use ventnet_core::stats::DEFAULT_ALPHA;
use ventnet_core::synth::{DatasetManifest, SplitPart};
use ventnet_core::trainer::{OptimizerKind, TrainConfig};

use crate::error::{config, Result};

pub struct Key {
    pub name: &'static str,
    pub group: &'static str,
    pub help: &'static str,
}

const fn key(group: &'static str, name: &'static str, help: &'static str) -> Key {
    Key { name, group, help }
}

/// Generator keys handed to the manifest unchanged.
const GENERATOR_KEYS: [&str; 15] = [
    "age_min",
    "age_max",
    "disorder_fraction",
    "breath_jitter",
    "ie_fraction",
    "window_vt_spread",
    "window_rr_spread",
    "stress_hr_boost",
    "stress_rsa_damping",
    "hrv_coupling",
    "hrv_reference_mv",
    "max_rsa_lag_s",
    "artifact_resp_rms",
    "artifact_heart_rms",
    "artifact_mix",
];

pub const KEYS: &[Key] = &[
    key("dataset", "subjects", "number of subjects"),
    key("dataset", "female", "female subjects (if only subjects is given: half, rounded up)"),
    key("dataset", "male", "male subjects (if omitted: subjects - female)"),
    key("dataset", "windows", "windows per subject"),
    key("dataset", "fs_hz", "sampling rate in Hz"),
    key("dataset", "window_seconds", "window length in seconds"),
    key("dataset", "data_seed", "cohort seed; also drives the subject split"),
    key("dataset", "split", "train,val,test subject fractions"),
    key("dataset", "age_min", "youngest subject age in years"),
    key("dataset", "age_max", "oldest subject age in years"),
    key("dataset", "disorder_fraction", "share of subjects with a breathing disorder"),
    key("dataset", "breath_jitter", "breath-to-breath timing jitter"),
    key("dataset", "ie_fraction", "inspiratory share of a breath"),
    key("dataset", "window_vt_spread", "log-sd of per-window tidal volume drift"),
    key("dataset", "window_rr_spread", "log-sd of per-window respiratory rate drift"),
    key("dataset", "stress_hr_boost", "heart-rate increase at full stress, bpm"),
    key("dataset", "stress_rsa_damping", "RSA reduction at full stress"),
    key("dataset", "hrv_coupling", "exponent tying RSA depth to ventilation"),
    key("dataset", "hrv_reference_mv", "ventilation at which coupling is neutral, L/min"),
    key("dataset", "max_rsa_lag_s", "largest heart-rate lag behind breathing, s"),
    key("dataset", "artifact_resp_rms", "flow artifact RMS per level 0..3, L/s"),
    key("dataset", "artifact_heart_rms", "heart artifact RMS per level 0..3, bpm"),
    key("dataset", "artifact_mix", "wander,burst,white artifact weights"),
    key("architecture", "arch", "width preset: desk or full"),
    key("architecture", "widths", "conv block widths, five values (overrides the preset)"),
    key("architecture", "hidden", "dense hidden units, two values (overrides the preset)"),
    key("architecture", "kernel", "conv kernel size (odd)"),
    key("architecture", "init_seed", "weight initialization seed"),
    key("training", "optimizer", "adam or sgd-momentum"),
    key("training", "learning_rate", "step size"),
    key("training", "momentum", "SGD momentum"),
    key("training", "batch_size", "minibatch size"),
    key("training", "max_epochs", "epoch limit for regression training"),
    key("training", "patience", "early-stopping patience in epochs"),
    key("training", "train_seed", "minibatch shuffling seed"),
    key("training", "finetune_epochs", "epochs of masked fine-tuning after pruning"),
    key("training", "pretrain_epochs", "epochs of proxy-task pretraining"),
    key("training", "proxy_windows", "windows in the proxy pretraining set"),
    key("training", "proxy_seed", "proxy set seed"),
    key("pruning", "sparsity", "fraction of prunable weights removed"),
    key("pruning", "scope", "per-layer, global or global-floor"),
    key("pruning", "skip_pattern", "block-skip, dense-skip or pairs:i-j,..."),
    key("pruning", "skip_density", "nonzero fraction of each skip projection"),
    key("pruning", "skip_init", "zero or uniform:<a>"),
    key("pruning", "prune_seed", "skip placement seed"),
    key("evaluation", "alpha", "significance level of the paired test"),
    key("evaluation", "eval_split", "partition to evaluate: train, val or test"),
];

pub fn flag_of(key: &str) -> String {
    key.replace('_', "-")
}

pub fn key_of(flag: &str) -> String {
    flag.trim_start_matches("--").replace('-', "_")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchPreset {
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: DatasetManifest,
    pub arch: ArchPreset,
    pub widths: Option<[usize; 5]>,
    pub hidden: Option<[usize; 2]>,
    pub kernel: usize,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub proxy_windows: usize,
    pub proxy_seed: u64,
    pub prune: PruneConfig,
    pub prune_seed: u64,
    pub alpha: f64,
    pub eval_split: SplitPart,
    /// Keys given in the config file or on the command line.
    pub explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: DatasetManifest::default(),
            arch: ArchPreset::Desk,
            widths: None,
            hidden: None,
            kernel: VggConfig::default().kernel,
            init_seed: 0,
            train: TrainConfig::default(),
            proxy_windows: 400,
            proxy_seed: 0,
            prune: PruneConfig::default(),
            prune_seed: 0,
            alpha: DEFAULT_ALPHA,
            eval_split: SplitPart::Test,
            explicit: BTreeSet::new(),
        }
    }
}

fn num<N: std::str::FromStr>(key: &str, v: &str) -> Result<N> {
    v.trim().parse().map_err(|_| config(format!("bad value for {key}: {v:?}")))
}

fn list<const K: usize>(key: &str, v: &str) -> Result<[usize; K]> {
    let items: Vec<usize> = v.split(',').map(|x| num(key, x)).collect::<Result<_>>()?;
    items
        .try_into()
        .map_err(|_| config(format!("{key} needs {K} comma-separated integers, got {v:?}")))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_skip_init(v: &str) -> Option<SkipInit> {
    match v.trim() {
        "zero" => Some(SkipInit::Zero),
        other => other.strip_prefix("uniform:")?.parse().ok().map(SkipInit::Uniform),
    }
}

fn skip_init_name(s: SkipInit) -> String {
    match s {
        SkipInit::Zero => "zero".into(),
        SkipInit::Uniform(a) => format!("uniform:{a}"),
    }
}

fn parse_split(v: &str) -> Option<SplitPart> {
    [SplitPart::Train, SplitPart::Val, SplitPart::Test]
        .into_iter()
        .find(|p| p.name() == v.trim())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.manifest;
        let t = &mut self.train;
        let p = &mut self.prune;
        match key {
            "subjects" => m.n_subjects = num(key, value)?,
            "female" => m.n_female = num(key, value)?,
            "male" => m.n_male = num(key, value)?,
            "windows" => m.windows_per_subject = num(key, value)?,
            "fs_hz" => m.fs_hz = num(key, value)?,
            "window_seconds" => m.window_seconds = num(key, value)?,
            "data_seed" => m.rng_seed = num(key, value)?,
            "split" => {
                let items: Vec<f64> = value.split(',').map(|x| num(key, x)).collect::<Result<_>>()?;
                m.split = items
                    .try_into()
                    .map_err(|_| config(format!("split needs 3 comma-separated fractions, got {value:?}")))?;
            }
            k if GENERATOR_KEYS.contains(&k) => {
                m.set(k, value).map_err(|e| config(e.to_string()))?;
            }
            "arch" => {
                self.arch = match value.trim() {
                    "desk" => ArchPreset::Desk,
                    "full" => ArchPreset::Full,
                    other => return Err(config(format!("arch must be desk or full, got {other:?}"))),
                }
            }
            "widths" => self.widths = Some(list(key, value)?),
            "hidden" => self.hidden = Some(list(key, value)?),
            "kernel" => self.kernel = num(key, value)?,
            "init_seed" => self.init_seed = num(key, value)?,
            "optimizer" => {
                t.optimizer = OptimizerKind::parse(value.trim())
                    .ok_or_else(|| config(format!("optimizer must be adam or sgd-momentum, got {value:?}")))?
            }
            "learning_rate" => t.learning_rate = num(key, value)?,
            "momentum" => t.momentum = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "max_epochs" => t.max_epochs = num(key, value)?,
            "patience" => t.early_stop_patience = num(key, value)?,
            "train_seed" => t.seed = num(key, value)?,
            "finetune_epochs" => t.finetune_epochs = num(key, value)?,
            "pretrain_epochs" => t.pretrain_epochs = num(key, value)?,
            "proxy_windows" => self.proxy_windows = num(key, value)?,
            "proxy_seed" => self.proxy_seed = num(key, value)?,
            "sparsity" => p.sparsity = num(key, value)?,
            "scope" => {
                p.scope = PruneScope::parse(value.trim())
                    .ok_or_else(|| config(format!("scope must be per-layer, global or global-floor, got {value:?}")))?
            }
            "skip_pattern" => p.pattern = SkipPattern::parse(value).map_err(|e| config(e.to_string()))?,
            "skip_density" => p.density = num(key, value)?,
            "skip_init" => {
                p.skip_init = parse_skip_init(value)
                    .ok_or_else(|| config(format!("skip_init must be zero or uniform:<a>, got {value:?}")))?
            }
            "prune_seed" => self.prune_seed = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "eval_split" => {
                self.eval_split = parse_split(value)
                    .ok_or_else(|| config(format!("eval_split must be train, val or test, got {value:?}")))?
            }
            other => return Err(config(format!("unknown config key {other:?}"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.manifest;
        let t = &self.train;
        let p = &self.prune;
        let vgg = self.vgg(0);
        Some(match key {
            "subjects" => m.n_subjects.to_string(),
            "female" => m.n_female.to_string(),
            "male" => m.n_male.to_string(),
            "windows" => m.windows_per_subject.to_string(),
            "fs_hz" => m.fs_hz.to_string(),
            "window_seconds" => m.window_seconds.to_string(),
            "data_seed" => m.rng_seed.to_string(),
            "split" => join(&m.split),
            k if GENERATOR_KEYS.contains(&k) => m.to_pairs().into_iter().find(|(n, _)| *n == k)?.1,
            "arch" => match self.arch {
                ArchPreset::Desk => "desk".into(),
                ArchPreset::Full => "full".into(),
            },
            "widths" => join(&vgg.widths),
            "hidden" => join(&vgg.hidden),
            "kernel" => self.kernel.to_string(),
            "init_seed" => self.init_seed.to_string(),
            "optimizer" => t.optimizer.name().into(),
            "learning_rate" => t.learning_rate.to_string(),
            "momentum" => t.momentum.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "max_epochs" => t.max_epochs.to_string(),
            "patience" => t.early_stop_patience.to_string(),
            "train_seed" => t.seed.to_string(),
            "finetune_epochs" => t.finetune_epochs.to_string(),
            "pretrain_epochs" => t.pretrain_epochs.to_string(),
            "proxy_windows" => self.proxy_windows.to_string(),
            "proxy_seed" => self.proxy_seed.to_string(),
            "sparsity" => p.sparsity.to_string(),
            "scope" => p.scope.name().into(),
            "skip_pattern" => p.pattern.name(),
            "skip_density" => p.density.to_string(),
            "skip_init" => skip_init_name(p.skip_init),
            "prune_seed" => self.prune_seed.to_string(),
            "alpha" => self.alpha.to_string(),
            "eval_split" => self.eval_split.name().into(),
            _ => return None,
        })
    }

    /// Settings from `key=value` text followed by command-line overrides,
    /// resolved and validated.
    pub fn load(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(text) = file_text {
            let pairs = ventnet_core::kv::parse(text).map_err(config)?;
            for (k, v) in pairs {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    fn resolve(&mut self) -> Result<()> {
        let m = &mut self.manifest;
        let has = |k: &str| self.explicit.contains(k);
        let n = m.n_subjects;
        match (has("female"), has("male")) {
            (false, false) if has("subjects") => {
                m.n_female = n.div_ceil(2);
                m.n_male = n - m.n_female;
            }
            (true, false) if m.n_female <= n => m.n_male = n - m.n_female,
            (false, true) if m.n_male <= n => m.n_female = n - m.n_male,
            _ => {}
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.manifest.validate().map_err(|e| config(e.to_string()))?;
        self.train.validate().map_err(|e| config(e.to_string()))?;
        self.vgg(0).layers().map_err(|e| config(e.to_string()))?;
        let p = &self.prune;
        if !(0.0..1.0).contains(&p.sparsity) {
            return Err(config(format!("sparsity must lie in [0, 1), got {}", p.sparsity)));
        }
        if !(0.0..=1.0).contains(&p.density) {
            return Err(config(format!("skip_density must lie in [0, 1], got {}", p.density)));
        }
        if let SkipInit::Uniform(a) = p.skip_init {
            if !(a.is_finite() && a >= 0.0) {
                return Err(config(format!("skip_init bound must be finite and nonnegative, got {a}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.proxy_windows < 10 {
            return Err(config(format!("proxy_windows must be at least 10, got {}", self.proxy_windows)));
        }
        Ok(())
    }

    /// Network layout for inputs of `input_len` samples.
    pub fn vgg(&self, input_len: usize) -> VggConfig {
        let base = match self.arch {
            ArchPreset::Desk => VggConfig::desk(),
            ArchPreset::Full => VggConfig::default(),
        };
        VggConfig {
            widths: self.widths.unwrap_or(base.widths),
            hidden: self.hidden.unwrap_or(base.hidden),
            kernel: self.kernel,
            input_len: if input_len == 0 { base.input_len } else { input_len },
            ..base
        }
    }

    /// Every key with its effective value, in table order.
    pub fn to_kv(&self) -> String {
        let pairs: Vec<(&str, String)> = KEYS
            .iter()
            .map(|k| (k.name, self.get(k.name).expect("every table key has a value")))
            .collect();
        ventnet_core::kv::render(&pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_reads_and_writes() {
        let cfg = RunConfig::default();
        for k in KEYS {
            let v = cfg.get(k.name).unwrap_or_else(|| panic!("no getter for {}", k.name));
            let mut copy = RunConfig::default();
            copy.set(k.name, &v).unwrap_or_else(|e| panic!("{}={v}: {e}", k.name));
            assert_eq!(copy.get(k.name).unwrap(), v, "{}", k.name);
        }
    }

    #[test]
    fn keys_are_unique_and_flags_invert() {
        let names: BTreeSet<&str> = KEYS.iter().map(|k| k.name).collect();
        assert_eq!(names.len(), KEYS.len());
        for k in KEYS {
            assert_eq!(key_of(&format!("--{}", flag_of(k.name))), k.name);
        }
    }

    #[test]
    fn dump_reloads_to_the_same_config() {
        let cfg = RunConfig::load(None, &[("subjects".into(), "7".into()), ("sparsity".into(), "0.8".into())]).unwrap();
        let again = RunConfig::load(Some(&cfg.to_kv()), &[]).unwrap();
        assert_eq!(cfg.to_kv(), again.to_kv());
        assert_eq!((&cfg.manifest, &cfg.train, &cfg.prune), (&again.manifest, &again.train, &again.prune));
        assert_eq!(cfg.vgg(100), again.vgg(100));
    }

    #[test]
    fn subject_count_splits_by_sex() {
        let cfg = RunConfig::load(None, &[("subjects".into(), "5".into())]).unwrap();
        assert_eq!((cfg.manifest.n_female, cfg.manifest.n_male), (3, 2));
        let cfg = RunConfig::load(None, &[("subjects".into(), "5".into()), ("male".into(), "4".into())]).unwrap();
        assert_eq!((cfg.manifest.n_female, cfg.manifest.n_male), (1, 4));
        let d = RunConfig::load(None, &[]).unwrap();
        assert_eq!((d.manifest.n_subjects, d.manifest.n_female, d.manifest.n_male), (103, 53, 50));
        assert!(RunConfig::load(None, &[("subjects".into(), "5".into()), ("female".into(), "6".into())]).is_err());
    }

    #[test]
    fn bad_settings_are_rejected() {
        for (k, v) in [
            ("colour", "red"),
            ("sparsity", "1.0"),
            ("sparsity", "x"),
            ("widths", "1,2"),
            ("scope", "local"),
            ("skip_init", "uniform:"),
            ("alpha", "0"),
            ("kernel", "4"),
            ("split", "0.5,0.5,0.5"),
        ] {
            assert!(RunConfig::load(None, &[(k.into(), v.into())]).is_err(), "{k}={v} accepted");
        }
        assert!(RunConfig::load(Some("subjects 4"), &[]).is_err());
    }
}
