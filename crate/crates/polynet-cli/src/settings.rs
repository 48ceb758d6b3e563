//! Effective training settings: defaults, overridden by the `--config` JSON
//! file, overridden by explicit flags. The merged result is exactly what
//! `metadata.json` records, and a metadata file round-trips as a config file
//! (unknown report-only keys are ignored), which is what makes every run
//! reproducible from its own output.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use polynet::baseline::SgdConfig;
use polynet::geco2::TrainConfig;
use polynet::geco3::TensorConfig;
use polynet::Error;

use crate::TrainArgs;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct TrainSettings {
    pub algo: String,
    pub data: Option<String>,
    pub loss: String,
    pub emit: String,
    pub seed: u64,
    pub label_col: Option<usize>,
    pub standardize: bool,
    // Greedy trainer.
    pub r: usize,
    pub k: usize,
    pub epsilon: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub refit_tol: f64,
    pub refit_max_iter: usize,
    // Tensor step.
    pub tau: f64,
    pub delta: f64,
    pub restarts: Option<usize>,
    // SGD baseline.
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub eval_every: usize,
    pub width: usize,
    pub init_scale: f64,
    pub activation: String,
    pub eval_fraction: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let x = TensorConfig::default();
        let s = SgdConfig::default();
        TrainSettings {
            algo: String::new(),
            data: None,
            loss: "squared".into(),
            emit: "csv".into(),
            seed: 0,
            label_col: None,
            standardize: false,
            r: t.r,
            k: t.k,
            epsilon: t.epsilon,
            eigen_tol: t.eigen_tol,
            eigen_max_iter: t.eigen_max_iter,
            refit_tol: t.refit_tol,
            refit_max_iter: t.refit_max_iter,
            tau: x.tau,
            delta: x.delta,
            restarts: None,
            iterations: s.iterations,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            momentum: s.momentum,
            decay: s.decay,
            eval_every: s.eval_every,
            width: 40,
            init_scale: s.init_scale,
            activation: "squared".into(),
            eval_fraction: 0.0,
        }
    }
}

impl TrainSettings {
    /// defaults <- config file <- CLI flags.
    pub(crate) fn resolve(args: &TrainArgs) -> Result<Self, Error> {
        let mut base = serde_json::to_value(TrainSettings::default())?;
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
            })?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("config is not valid JSON: {e}")))?;
            let obj = overlay
                .as_object()
                .ok_or_else(|| Error::InvalidConfig("config must be a JSON object".into()))?;
            let keys: Vec<String> = base
                .as_object()
                .unwrap()
                .keys()
                .cloned()
                .collect();
            for key in keys {
                if let Some(v) = obj.get(&key) {
                    if !v.is_null() {
                        base[&key] = v.clone();
                    }
                }
            }
        }

        fn set<T: Serialize>(base: &mut Value, key: &str, v: &Option<T>) {
            if let Some(v) = v {
                base[key] = serde_json::to_value(v).expect("flag serializes");
            }
        }
        set(
            &mut base,
            "data",
            &args.data.as_ref().map(|p| p.display().to_string()),
        );
        set(&mut base, "seed", &args.seed);
        set(&mut base, "r", &args.r);
        set(&mut base, "k", &args.k);
        set(&mut base, "epsilon", &args.epsilon);
        set(&mut base, "tau", &args.tau);
        set(&mut base, "delta", &args.delta);
        set(&mut base, "loss", &args.loss);
        set(&mut base, "label_col", &args.label_col);
        set(&mut base, "eigen_tol", &args.eigen_tol);
        set(&mut base, "eigen_max_iter", &args.eigen_max_iter);
        set(&mut base, "refit_tol", &args.refit_tol);
        set(&mut base, "refit_max_iter", &args.refit_max_iter);
        set(&mut base, "restarts", &args.restarts);
        set(&mut base, "iterations", &args.iterations);
        set(&mut base, "batch_size", &args.batch_size);
        set(&mut base, "learning_rate", &args.learning_rate);
        set(&mut base, "momentum", &args.momentum);
        set(&mut base, "decay", &args.decay);
        set(&mut base, "eval_every", &args.eval_every);
        set(&mut base, "width", &args.width);
        set(&mut base, "init_scale", &args.init_scale);
        set(&mut base, "activation", &args.activation);
        set(&mut base, "eval_fraction", &args.eval_fraction);
        if args.standardize {
            base["standardize"] = Value::Bool(true);
        }
        if let Some(emit) = &args.emit {
            base["emit"] = Value::String(
                match emit {
                    crate::Emit::Csv => "csv",
                    crate::Emit::TikzCoords => "tikz-coords",
                    crate::Emit::Json => "json",
                }
                .into(),
            );
        }
        Ok(serde_json::from_value(base)?)
    }

    pub(crate) fn train_config(&self) -> TrainConfig {
        TrainConfig {
            r: self.r,
            k: self.k,
            epsilon: self.epsilon,
            eigen_tol: self.eigen_tol,
            eigen_max_iter: self.eigen_max_iter,
            refit_tol: self.refit_tol,
            refit_max_iter: self.refit_max_iter,
            seed: self.seed,
        }
    }

    pub(crate) fn tensor_config(&self) -> TensorConfig {
        TensorConfig {
            tau: self.tau,
            delta: self.delta,
            restarts_override: self.restarts,
            seed: self.seed,
        }
    }

    pub(crate) fn sgd_config(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            decay: self.decay,
            batch_size: self.batch_size,
            momentum: self.momentum,
            iterations: self.iterations,
            eval_every: self.eval_every,
            init_scale: self.init_scale,
            seed: self.seed,
        }
    }

    /// Settings as a JSON object, the base of `metadata.json`.
    pub(crate) fn to_metadata(&self) -> Result<Value, Error> {
        let mut v = serde_json::to_value(self)?;
        v["command"] = Value::String("train".into());
        Ok(v)
    }
}
