use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ava::aggregation::ConsensusMethod;
use ava::attribution::write_attribution_csv;
use ava::config::RunConfig;
use ava::data::{load_csv, split_table, Preprocessing, PreprocessSpec};
use ava::error::Result;
use ava::evaluation::{self, gold_set, k_sweep, run_benchmark, train_model, MethodKind};
use ava::influence::{select_neighborhood, write_influence_csv};
use ava::models::{accuracy, argmax, Checkpoint, Model, Predictor, CHECKPOINT_VERSION};

#[derive(Parser)]
#[command(
    name = "ava",
    version,
    about = "Influence-weighted consensus feature attributions for tabular classifiers"
)]
struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the benchmark grid (1 keeps logs deterministic).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Shap,
    Ig,
    #[value(alias = "ava_shap")]
    AvaShap,
    #[value(alias = "ava_ig")]
    AvaIg,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> MethodKind {
        match m {
            MethodArg::Shap => MethodKind::Shap,
            MethodArg::Ig => MethodKind::Ig,
            MethodArg::AvaShap => MethodKind::AvaShap,
            MethodArg::AvaIg => MethodKind::AvaIg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV and write a checkpoint.
    Train {
        /// Input CSV with a label column.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain held-out predictions of a trained model.
    Explain {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint produced by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Test points to explain: an index ("3"), a range ("0..5"), or "all".
        #[arg(long, default_value = "0")]
        points: String,
        #[arg(long, value_enum, default_value = "ava-shap")]
        method: MethodArg,
        /// Directory for per-point JSON and CSV dumps; stdout JSON when
        /// omitted. The AVA_OUT_DIR environment variable overrides this.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score attribution methods against decision-tree gold sets.
    Benchmark {
        #[arg(long)]
        data: PathBuf,
        /// Directory for report.csv, report.json, and summary.tsv. The
        /// AVA_OUT_DIR environment variable overrides this.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sweep the neighborhood size k and report recall per k.
    SweepK {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "ava-shap")]
        method: MethodArg,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse a point selector: "all", a single index, or "a..b" (half-open).
fn parse_points(selector: &str, n: usize) -> Result<Vec<usize>> {
    let invalid = || {
        ava::AvaError::InvalidArgument(format!(
            "bad point selector {selector:?}; expected an index, a..b, or \"all\""
        ))
    };
    let points: Vec<usize> = if selector == "all" {
        (0..n).collect()
    } else if let Some((a, b)) = selector.split_once("..") {
        let a: usize = a.parse().map_err(|_| invalid())?;
        let b: usize = b.parse().map_err(|_| invalid())?;
        if a >= b {
            return Err(invalid());
        }
        (a..b).collect()
    } else {
        vec![selector.parse().map_err(|_| invalid())?]
    };
    if let Some(&bad) = points.iter().find(|&&p| p >= n) {
        return Err(ava::AvaError::InvalidArgument(format!(
            "test index {bad} out of range (held-out split has {n} points)"
        )));
    }
    Ok(points)
}

fn out_dir_override(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os("AVA_OUT_DIR").map(PathBuf::from).or(flag)
}

fn load_splits(
    data: &Path,
    config: &RunConfig,
) -> Result<(ava::data::Dataset, ava::data::Dataset, Preprocessing)> {
    let table = load_csv(data, &config.label_column, config.header)?;
    let split = split_table(&table, config.test_fraction, config.seed)?;
    let spec = PreprocessSpec {
        categorical_columns: config.categorical_columns.clone(),
    };
    let prep = Preprocessing::fit(&split.train, &spec)?;
    for w in &prep.warnings {
        eprintln!("warning: {w}");
    }
    Ok((prep.transform(&split.train)?, prep.transform(&split.test)?, prep))
}

fn explain_point(
    model: &Model,
    train: &ava::data::Dataset,
    test: &ava::data::Dataset,
    index: usize,
    method: MethodKind,
    config: &RunConfig,
    out_dir: Option<&Path>,
) -> Result<serde_json::Value> {
    let x = test.point(index);
    let y = test.label(index);
    let output_index = argmax(&model.predict(&x)?);
    let attribution = match method {
        MethodKind::AvaShap | MethodKind::AvaIg => {
            let consensus = if method == MethodKind::AvaShap {
                ava::ava_shap(model, train, &x, y, None, &config.ava)?
            } else {
                ava::ava_ig(model, train, &x, y, None, &config.ava)?
            };
            if let Some(dir) = out_dir {
                let nb = select_neighborhood(&consensus.influence, config.ava.k, config.ava.uniform_fallback)?;
                write_influence_csv(
                    std::fs::File::create(dir.join(format!("influence_{index}.csv")))?,
                    index,
                    &consensus.influence,
                    &nb,
                )?;
            }
            serde_json::to_value(&consensus)?
        }
        MethodKind::Shap => {
            let attr =
                ava::attribution::shapley_exact(model, &x, &train.mean_point(), output_index)?;
            if let Some(dir) = out_dir {
                write_attribution_csv(
                    std::fs::File::create(dir.join(format!("attribution_{index}.csv")))?,
                    index,
                    train.feature_names(),
                    &attr,
                )?;
            }
            serde_json::to_value(&attr)?
        }
        MethodKind::Ig => {
            let attr = ava::attribution::integrated_gradients(
                model,
                &x,
                &train.mean_point(),
                output_index,
                config.ava.ig_steps,
            )?;
            if let Some(dir) = out_dir {
                write_attribution_csv(
                    std::fs::File::create(dir.join(format!("attribution_{index}.csv")))?,
                    index,
                    train.feature_names(),
                    &attr,
                )?;
            }
            serde_json::to_value(&attr)?
        }
    };
    Ok(serde_json::json!({
        "test_index": index,
        "predicted_class": train.class_names()[output_index],
        "true_class": train.class_names()[y],
        "feature_names": train.feature_names(),
        "attribution": attribution,
        "config": serde_json::to_value(config)?,
    }))
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| ava::AvaError::InvalidArgument(e.to_string()))?;

    match cli.command {
        Command::Train { data, out } => {
            let (train, test, prep) = load_splits(&data, &config)?;
            let model = train_model(&train, &config.model, config.seed)?;
            let train_acc = accuracy(&model, &train)?;
            let test_acc = accuracy(&model, &test)?;
            Checkpoint {
                version: CHECKPOINT_VERSION,
                model,
                preprocessing: Some(prep),
                config: serde_json::to_value(&config)?,
            }
            .save(&out)?;
            println!(
                "trained {} on {} points ({} features): train accuracy {train_acc:.4}, test accuracy {test_acc:.4}",
                config.model.name(),
                train.n_points(),
                train.n_features()
            );
            println!("checkpoint written to {}", out.display());
        }
        Command::Explain {
            data,
            model,
            points,
            method,
            out_dir,
        } => {
            let checkpoint = Checkpoint::load(&model)?;
            let table = load_csv(&data, &config.label_column, config.header)?;
            let split = split_table(&table, config.test_fraction, config.seed)?;
            let prep = checkpoint
                .preprocessing
                .ok_or_else(|| ava::AvaError::Config("checkpoint has no preprocessing".into()))?;
            let train = prep.transform(&split.train)?;
            let test = prep.transform(&split.test)?;
            let model: Model = checkpoint.model;
            let indices = parse_points(&points, test.n_points())?;
            let out_dir = out_dir_override(out_dir);
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)?;
            }
            let mut outputs = Vec::new();
            let mut failures = 0usize;
            for &index in &indices {
                match explain_point(
                    &model,
                    &train,
                    &test,
                    index,
                    MethodKind::from(method),
                    &config,
                    out_dir.as_deref(),
                ) {
                    Ok(value) => {
                        if let Some(dir) = &out_dir {
                            let path = dir.join(format!("explanation_{index}.json"));
                            std::fs::write(&path, serde_json::to_string_pretty(&value)?)?;
                        }
                        outputs.push(value);
                    }
                    Err(e) => {
                        eprintln!("point {index}: {e}");
                        failures += 1;
                    }
                }
            }
            match &out_dir {
                Some(dir) => println!(
                    "{} explanation(s) written to {}",
                    outputs.len(),
                    dir.display()
                ),
                None => println!("{}", serde_json::to_string_pretty(&outputs)?),
            }
            if failures > 0 {
                return Err(ava::AvaError::InvalidArgument(format!(
                    "{failures} of {} points failed",
                    indices.len()
                )));
            }
        }
        Command::Benchmark { data, out_dir } => {
            let table = load_csv(&data, &config.label_column, config.header)?;
            let spec = PreprocessSpec {
                categorical_columns: config.categorical_columns.clone(),
            };
            let dataset = ava::data::preprocess(&table, &spec)?;
            let report = run_benchmark(&dataset, &config.benchmark_config())?;
            let out_dir = out_dir_override(Some(out_dir)).unwrap();
            std::fs::create_dir_all(&out_dir)?;
            report.write_csv(std::fs::File::create(out_dir.join("report.csv"))?)?;
            report.write_json(std::fs::File::create(out_dir.join("report.json"))?)?;
            std::fs::write(out_dir.join("summary.tsv"), report.summary_tsv())?;
            print!("{}", report.summary_tsv());
            println!("reports written to {}", out_dir.display());
            let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                return Err(ava::AvaError::InvalidArgument(format!(
                    "{failed} of {} benchmark cells failed; see report.csv",
                    report.cells.len()
                )));
            }
        }
        Command::SweepK { data, method, out } => {
            let (train, test, _) = load_splits(&data, &config)?;
            let model = train_model(&train, &config.model, config.seed)?;
            let m = match config.m {
                Some(m) => m,
                None => evaluation::select_m(&train, &config.m_candidates, 5, config.seed)?,
            };
            let gold = gold_set(&train, m)?;
            let consensus = match MethodKind::from(method) {
                MethodKind::AvaIg | MethodKind::Ig => ConsensusMethod::Ig,
                _ => ConsensusMethod::Shap,
            };
            let sweep = k_sweep(
                &model,
                &train,
                &test,
                config.n_test_points,
                &gold,
                &config.ks,
                consensus,
                &config.ava,
            )?;
            let mut csv = String::from("k,recall,mfi\n");
            for p in &sweep {
                csv.push_str(&format!("{},{},{}\n", p.k, p.recall, p.mfi));
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)?;
                    println!("sweep written to {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_points;

    #[test]
    fn point_selectors() {
        assert_eq!(parse_points("all", 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_points("2", 3).unwrap(), vec![2]);
        assert_eq!(parse_points("1..3", 5).unwrap(), vec![1, 2]);
        assert!(parse_points("5", 3).is_err());
        assert!(parse_points("3..2", 9).is_err());
        assert!(parse_points("x", 3).is_err());
    }
}
