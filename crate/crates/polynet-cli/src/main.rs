//! Command-line interface: train polynomial networks and baselines, evaluate
//! models, run the experiments, fit sigmoid approximations.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage/input error.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polynet::baseline::{
    self, evaluation_error, overspec_experiment, overspec_sweep, sgd_train, Activation, MlpNet,
    SgdConfig,
};
use polynet::data::{self, Dataset, LabelKind};
use polynet::geco2::{geco2_train, TrainTrace};
use polynet::geco3::{geco3_train, tensor_ratio_experiment};
use polynet::loss::{empirical_risk, Loss};
use polynet::{Error, PolyNet64};

use settings::TrainSettings;

#[derive(Parser)]
#[command(name = "polynet", version, about = "Greedy training of polynomial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write model/trace/metadata files.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Run a named experiment and write its report.
    Experiment(ExperimentArgs),
    /// Fit a polynomial sigmoid approximation (and optionally the depth-t
    /// size bounds).
    Approx(ApproxArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Geco2,
    Geco3,
    Sgd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    TikzCoords,
    Json,
}

#[derive(Args)]
pub(crate) struct TrainArgs {
    /// Training algorithm.
    #[arg(value_enum)]
    algo: Algo,
    /// CSV dataset (label column last unless --label-col).
    #[arg(long)]
    pub(crate) data: Option<PathBuf>,
    /// Output directory for model.json, trace files, metadata.json.
    #[arg(long)]
    out: PathBuf,
    /// JSON config file; flags override its values. A metadata.json from a
    /// previous run reproduces that run.
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    /// Greedy iterations (geco2/geco3).
    #[arg(long)]
    pub(crate) r: Option<usize>,
    /// Comparator budget for the reported theorem bound.
    #[arg(long)]
    pub(crate) k: Option<usize>,
    /// Target excess risk in the theorem bound.
    #[arg(long)]
    pub(crate) epsilon: Option<f64>,
    /// Tensor-step relative gap (geco3).
    #[arg(long)]
    pub(crate) tau: Option<f64>,
    /// Tensor-step failure probability (geco3).
    #[arg(long)]
    pub(crate) delta: Option<f64>,
    #[arg(long, value_parser = ["squared", "logistic"])]
    pub(crate) loss: Option<String>,
    #[arg(long, value_enum)]
    emit: Option<Emit>,
    /// 0-based label column index.
    #[arg(long)]
    pub(crate) label_col: Option<usize>,
    /// Standardize features with train statistics before training.
    #[arg(long)]
    pub(crate) standardize: bool,
    #[arg(long)]
    pub(crate) eigen_tol: Option<f64>,
    #[arg(long)]
    pub(crate) eigen_max_iter: Option<usize>,
    #[arg(long)]
    pub(crate) refit_tol: Option<f64>,
    #[arg(long)]
    pub(crate) refit_max_iter: Option<usize>,
    /// Tensor restart override (geco3).
    #[arg(long)]
    pub(crate) restarts: Option<usize>,
    // SGD-specific.
    #[arg(long)]
    pub(crate) iterations: Option<usize>,
    #[arg(long)]
    pub(crate) batch_size: Option<usize>,
    #[arg(long)]
    pub(crate) learning_rate: Option<f64>,
    #[arg(long)]
    pub(crate) momentum: Option<f64>,
    #[arg(long)]
    pub(crate) decay: Option<f64>,
    #[arg(long)]
    pub(crate) eval_every: Option<usize>,
    /// Hidden width of the SGD student network.
    #[arg(long)]
    pub(crate) width: Option<usize>,
    #[arg(long)]
    pub(crate) init_scale: Option<f64>,
    #[arg(long, value_parser = ["squared", "relu", "sigmoid", "identity"])]
    pub(crate) activation: Option<String>,
    /// Held-out fraction for the SGD error trace (0 traces training error).
    #[arg(long)]
    pub(crate) eval_fraction: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = ["squared", "logistic"])]
    loss: Option<String>,
    #[arg(long)]
    label_col: Option<usize>,
    /// Optional file for the JSON report (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentKind {
    Overspec,
    OverspecSweep,
    TensorRatio,
    SigmoidApprox,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    emit: Option<Emit>,
    /// Input dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Example count.
    #[arg(long)]
    m: Option<usize>,
    /// Hidden width (overspec) or teacher width (overspec-sweep).
    #[arg(long)]
    n_hidden: Option<usize>,
    #[arg(long, value_parser = ["squared", "relu", "sigmoid", "identity"])]
    activation: Option<String>,
    /// Comma-separated over-specification factors.
    #[arg(long)]
    factors: Option<String>,
    /// Seeds per factor (overspec-sweep medians).
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Oracle grid resolution in degrees (tensor-ratio).
    #[arg(long)]
    grid_deg: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Weight bound L of the sigmoid lemma.
    #[arg(long)]
    l_bound: Option<f64>,
    // SGD knobs for the sweep.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    l_bound: f64,
    #[arg(long)]
    degree_override: Option<usize>,
    /// Also evaluate the depth-t bounds (T, B_t, B_n) for this t.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Approx(args) => cmd_approx(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load_dataset(
    path: &Path,
    label_col: Option<usize>,
    standardize: bool,
) -> Result<Dataset<f64>, Error> {
    if !path.exists() {
        return Err(Error::InvalidConfig(format!(
            "dataset path {} does not exist",
            path.display()
        )));
    }
    let ds = data::load_csv::<f64>(path, label_col)?;
    Ok(if standardize { ds.standardized().0 } else { ds })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn coords_line(pairs: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (x, y) in pairs {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&format!("({x},{y})"));
    }
    out.push('\n');
    out
}

fn write_trace(dir: &Path, trace: &TrainTrace, emit: Emit) -> Result<(), Error> {
    match emit {
        Emit::Csv => write_file(&dir.join("trace.csv"), &trace.to_csv()),
        Emit::TikzCoords => {
            let line = coords_line(trace.records.iter().map(|r| (r.iteration as f64, r.risk)));
            write_file(&dir.join("trace.txt"), &line)
        }
        Emit::Json => write_file(&dir.join("trace.json"), &serde_json::to_string_pretty(trace)?),
    }
}

fn write_pairs(dir: &Path, stem: &str, pairs: &[(usize, f64)], emit: Emit) -> Result<(), Error> {
    match emit {
        Emit::Csv | Emit::Json => {
            let mut body = String::from("iteration,error\n");
            for (it, err) in pairs {
                body.push_str(&format!("{it},{err}\n"));
            }
            write_file(&dir.join(format!("{stem}.csv")), &body)
        }
        Emit::TikzCoords => {
            let line = coords_line(pairs.iter().map(|&(it, err)| (it as f64, err)));
            write_file(&dir.join(format!("{stem}.txt")), &line)
        }
    }
}

fn parse_emit(s: &str) -> Emit {
    match s {
        "tikz-coords" => Emit::TikzCoords,
        "json" => Emit::Json,
        _ => Emit::Csv,
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let mut s = TrainSettings::resolve(&args)?;
    s.algo = match args.algo {
        Algo::Geco2 => "geco2",
        Algo::Geco3 => "geco3",
        Algo::Sgd => "sgd",
    }
    .to_string();
    let data_path = s
        .data
        .clone()
        .ok_or_else(|| Error::InvalidConfig("--data is required (flag or config)".into()))?;
    let dataset = load_dataset(Path::new(&data_path), s.label_col, s.standardize)?;
    std::fs::create_dir_all(&args.out)?;

    let loss: Loss = s.loss.parse()?;
    let emit = parse_emit(&s.emit);

    let (model_json, trace, extra) = match args.algo {
        Algo::Geco2 => {
            let cfg = s.train_config();
            let (net, trace) = geco2_train(&dataset, loss, &cfg)?;
            (net.to_json()?, Some(trace), serde_json::json!({}))
        }
        Algo::Geco3 => {
            let cfg = s.train_config();
            let tcfg = s.tensor_config();
            let (net, trace) = geco3_train(&dataset, loss, &cfg, &tcfg)?;
            let extra = serde_json::json!({
                "tensor_restarts": tcfg.restarts(dataset.dim()),
                "tensor_guarantee_ratio": tcfg.guarantee_ratio(dataset.dim()),
            });
            (net.to_json()?, Some(trace), extra)
        }
        Algo::Sgd => {
            let cfg = s.sgd_config();
            let (train_set, eval_set) = if s.eval_fraction > 0.0 {
                let (tr, ev) = dataset.split(1.0 - s.eval_fraction, s.seed)?;
                (tr, Some(ev))
            } else {
                (dataset.clone(), None)
            };
            let activation: Activation = s.activation.parse()?;
            let net = MlpNet::<f64>::random(
                &[train_set.dim(), s.width, 1],
                activation,
                s.init_scale,
                s.seed,
            )?;
            let (trained, pairs) = sgd_train(&net, &train_set, eval_set.as_ref(), loss, &cfg)?;
            write_pairs(&args.out, "trace", &pairs, emit)?;
            let final_err =
                evaluation_error(&trained, eval_set.as_ref().unwrap_or(&train_set), loss)?;
            let extra = serde_json::json!({
                "final_error": final_err,
                "error_kind": match train_set.kind() {
                    LabelKind::Binary => "classification_error",
                    LabelKind::Regression => "mean_loss",
                },
            });
            (mlp_to_json(&trained)?, None, extra)
        }
    };

    write_file(&args.out.join("model.json"), &model_json)?;
    let mut meta = s.to_metadata()?;
    if let Some(trace) = &trace {
        write_trace(&args.out, trace, emit)?;
        meta["theorem_budget"] = serde_json::json!(trace.theorem_budget);
        meta["final_risk"] = serde_json::json!(trace.final_risk());
        meta["stop"] = serde_json::to_value(trace.stop)?;
        meta["iterations_run"] = serde_json::json!(trace.records.len().saturating_sub(1));
    }
    for (k, v) in extra.as_object().into_iter().flatten() {
        meta[k] = v.clone();
    }
    write_file(
        &args.out.join("metadata.json"),
        &serde_json::to_string_pretty(&meta)?,
    )?;
    if let Some(trace) = &trace {
        println!(
            "trained {} ({} iterations, final risk {:.6e})",
            s.algo,
            trace.records.len().saturating_sub(1),
            trace.final_risk().unwrap_or(f64::NAN)
        );
    } else {
        println!("trained {}", s.algo);
    }
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MlpLayerDoc {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    activation: Activation,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MlpModelDoc {
    layers: Vec<MlpLayerDoc>,
}

fn mlp_to_json(net: &MlpNet<f64>) -> Result<String, Error> {
    let doc = MlpModelDoc {
        layers: net
            .layers()
            .iter()
            .map(|l| MlpLayerDoc {
                weights: (0..l.weights.rows())
                    .map(|i| l.weights.row(i).to_vec())
                    .collect(),
                biases: l.biases.clone(),
                activation: l.activation,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn mlp_from_json(text: &str) -> Result<MlpNet<f64>, Error> {
    let doc: MlpModelDoc = serde_json::from_str(text)?;
    let layers = doc
        .layers
        .into_iter()
        .map(|l| {
            Ok(baseline::DenseLayer {
                weights: polynet::linalg::dense::Mat::from_rows(l.weights)?,
                biases: l.biases,
                activation: l.activation,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    MlpNet::from_layers(layers)
}

fn classification_error_polynet(net: &PolyNet64, data: &Dataset<f64>) -> Result<f64, Error> {
    let preds = net.predict(data)?;
    let wrong = preds
        .iter()
        .zip(data.labels())
        .filter(|(&p, &y)| (if p >= 0.0 { 1.0 } else { -1.0 }) != y)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let dataset = load_dataset(&args.data, args.label_col, false)?;
    let loss: Loss = args.loss.as_deref().unwrap_or("squared").parse()?;
    let text = std::fs::read_to_string(&args.model)?;
    let report = if let Ok(net) = PolyNet64::from_json(&text) {
        let risk = empirical_risk(&net, &dataset, loss)?;
        let mut rep = serde_json::json!({
            "model": "polynet",
            "risk": risk,
            "loss": loss.to_string(),
            "examples": dataset.len(),
        });
        if dataset.kind() == LabelKind::Binary {
            rep["classification_error"] =
                serde_json::json!(classification_error_polynet(&net, &dataset)?);
        }
        rep
    } else {
        let net = mlp_from_json(&text)?;
        let err = evaluation_error(&net, &dataset, loss)?;
        serde_json::json!({
            "model": "mlp",
            "error": err,
            "loss": loss.to_string(),
            "examples": dataset.len(),
        })
    };
    let rendered = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => write_file(path, &rendered)?,
        None => println!("{rendered}"),
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out)?;
    let seed = args.seed.unwrap_or(0);
    let emit = args.emit.unwrap_or(Emit::Csv);
    match args.kind {
        ExperimentKind::Overspec => {
            let activation: Activation =
                args.activation.as_deref().unwrap_or("sigmoid").parse()?;
            let report = overspec_experiment(
                args.d.unwrap_or(10),
                args.m.unwrap_or(30),
                args.n_hidden.unwrap_or(30),
                activation,
                seed,
            )?;
            write_file(
                &args.out.join("report.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
            println!(
                "overspec: rank {} of {}, convex-solve risk {:.3e}",
                report.rank, report.m, report.risk
            );
        }
        ExperimentKind::OverspecSweep => {
            let d = args.d.unwrap_or(30);
            let teacher_width = args.n_hidden.unwrap_or(12);
            let m = args.m.unwrap_or(600);
            let factors: Vec<usize> = args
                .factors
                .as_deref()
                .unwrap_or("1,2,4,8")
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidConfig(format!("bad factor '{tok}'")))
                })
                .collect::<Result<_, _>>()?;
            let n_seeds = args.n_seeds.unwrap_or(5);
            let cfg = SgdConfig {
                learning_rate: args.learning_rate.unwrap_or(0.05),
                batch_size: args.batch_size.unwrap_or(32),
                momentum: args.momentum.unwrap_or(0.9),
                iterations: args.iterations.unwrap_or(4000),
                eval_every: args.eval_every.unwrap_or(50),
                ..SgdConfig::default()
            };
            let mut summary = Vec::new();
            for s in 0..n_seeds {
                let (data, teacher) = data::gen_teacher_mlp::<f64>(
                    d,
                    teacher_width,
                    Activation::Relu,
                    m,
                    polynet::rng::derive_seed(seed, s as u64),
                    false,
                )?;
                let run_cfg = SgdConfig {
                    seed: polynet::rng::derive_seed(seed, 1000 + s as u64),
                    ..cfg.clone()
                };
                let traces = overspec_sweep(&teacher, &data, &factors, Loss::Squared, &run_cfg)?;
                for t in &traces {
                    write_pairs(
                        &args.out,
                        &format!("sweep_factor{}_seed{}", t.factor, s),
                        &t.trace,
                        emit,
                    )?;
                }
                summary.push(traces);
            }
            let report = serde_json::json!({
                "d": d,
                "teacher_width": teacher_width,
                "m": m,
                "factors": factors,
                "n_seeds": n_seeds,
                "runs": summary,
            });
            write_file(
                &args.out.join("summary.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
            println!("overspec sweep complete: factors {factors:?}, {n_seeds} seeds");
        }
        ExperimentKind::TensorRatio => {
            let report = tensor_ratio_experiment(
                args.d.unwrap_or(2),
                args.m.unwrap_or(50),
                args.tau.unwrap_or(0.5),
                args.delta.unwrap_or(0.1),
                args.trials.unwrap_or(200),
                args.grid_deg.unwrap_or(1.0),
                seed,
            )?;
            write_file(
                &args.out.join("report.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
            let mut csv = String::from("trial,score,oracle,success\n");
            for t in &report.detail {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    t.trial, t.score, t.oracle, t.success
                ));
            }
            write_file(&args.out.join("trials.csv"), &csv)?;
            println!(
                "tensor ratio: success fraction {:.3} over {} trials (bound {:.4})",
                report.success_fraction, report.trials, report.bound
            );
        }
        ExperimentKind::SigmoidApprox => {
            let epsilon = args.epsilon.unwrap_or(0.1);
            let l_bound = args.l_bound.unwrap_or(3.0);
            let approx = polynet::approx::fit_sigmoid_poly(epsilon, l_bound, None)?;
            let sup = approx.grid_sup_error();
            write_file(&args.out.join("approx.json"), &approx.to_json()?)?;
            let mut report = serde_json::to_value(&approx)?;
            report["grid_sup_error"] = serde_json::json!(sup);
            report["passed"] = serde_json::json!(sup <= epsilon);
            write_file(
                &args.out.join("report.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
            println!(
                "sigmoid approximation: degree {}, grid sup-error {:.4e} (target {})",
                approx.degree, sup, epsilon
            );
        }
    }
    Ok(())
}

fn cmd_approx(args: ApproxArgs) -> Result<(), Error> {
    let approx =
        polynet::approx::fit_sigmoid_poly(args.epsilon, args.l_bound, args.degree_override)?;
    let sup = approx.grid_sup_error();
    println!(
        "degree {} polynomial, grid sup-error {:.4e} (target {})",
        approx.degree, sup, args.epsilon
    );
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        write_file(&dir.join("sigmoid_approx.json"), &approx.to_json()?)?;
    }
    if let Some(t) = args.t {
        let bounds = polynet::approx::theorem4_bounds(t, args.l_bound, args.epsilon)?;
        println!(
            "depth-{t} bounds: T = {}, B_t = {}, B_n = {}",
            bounds.degree, bounds.b_t, bounds.b_n
        );
        if let Some(dir) = &args.out {
            write_file(
                &dir.join("bounds.json"),
                &serde_json::to_string_pretty(&bounds)?,
            )?;
        }
    }
    Ok(())
}
