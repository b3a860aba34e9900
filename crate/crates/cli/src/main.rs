use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hiergrasp::cnn::{Network, WeightManifest};
use hiergrasp::control::PotentialConfig;
use hiergrasp::eval::{
    cross_validate, emit_overlay, errors, evaluate_clutter, preshape_from_prediction, train_all, ErrorTable,
};
use hiergrasp::grasp::{
    predict_grasp, read_dataset, write_dataset, GraspModel, GraspRecord, ModelParams, Perception, Strategy,
};
use hiergrasp::scene::{desk_network, generate_dataset, CameraModel, DatasetConfig};
use hiergrasp::{Error, ErrorCategory};

#[derive(Parser)]
#[command(name = "hiergrasp", version, about = "Grasp point learning from hierarchical CNN features")]
struct Cli {
    /// Seed for dataset generation.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Feature counts as n5,n4,n3,N.
    #[arg(long, global = true, default_value = "5,5,5,15")]
    params: String,
    /// Weight manifest; the built-in bank when omitted.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArg {
    /// Dataset directory written by gen-dataset.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct RecordArgs {
    #[command(flatten)]
    data: DataArg,
    /// Model file written by train.
    #[arg(long)]
    model: PathBuf,
    /// Record id from the dataset manifest.
    #[arg(long)]
    record: String,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset into --out.
    GenDataset {
        #[arg(long, default_value_t = 6)]
        instances: usize,
        #[arg(long, default_value_t = 10)]
        records: usize,
        #[arg(long, default_value_t = 24)]
        clutter: usize,
        #[arg(long, default_value_t = 0.02)]
        dropout: f64,
    },
    /// Learn one model per object type and write them into --out.
    Train {
        #[command(flatten)]
        data: DataArg,
        /// A strategy name or "all".
        #[arg(long, default_value = "hier-feat")]
        strategy: String,
    },
    /// Leave-one-instance-out error table.
    CrossValidate {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "hier-feat")]
        strategy: String,
    },
    /// Apply trained models to the cluttered records.
    EvalClutter {
        #[command(flatten)]
        data: DataArg,
        /// Directory holding *.model files.
        #[arg(long)]
        models: PathBuf,
    },
    /// Cross-validation and cluttered evaluation for every strategy.
    Compare {
        #[command(flatten)]
        data: DataArg,
        /// Only the cluttered evaluation.
        #[arg(long)]
        skip_cv: bool,
    },
    /// Draw candidates and grasp points on a record's image.
    Overlay {
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Predict on a record and simulate the two-stage pre-shape.
    RunPreshape {
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long, default_value_t = 0.5)]
        gain: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
}

fn strategies(s: &str) -> Result<Vec<Strategy>> {
    if s == "all" {
        Ok(Strategy::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

fn perception(weights: Option<&Path>) -> Result<Perception> {
    let net = match weights {
        Some(p) => {
            let m = WeightManifest::load(p)?;
            Network::new(m.network, m.weights)?
        }
        None => desk_network()?,
    };
    Ok(Perception::new(net))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn find_record(records: Vec<GraspRecord>, id: &str) -> Result<GraspRecord> {
    match records.into_iter().find(|r| r.id == id) {
        Some(r) => Ok(r),
        None => Err(Error::Config(format!("no record {id:?} in the dataset")).into()),
    }
}

fn single(records: &[GraspRecord]) -> Vec<GraspRecord> {
    records.iter().filter(|r| !r.clutter).cloned().collect()
}

fn clutter(records: &[GraspRecord]) -> Result<Vec<GraspRecord>> {
    let c: Vec<GraspRecord> = records.iter().filter(|r| r.clutter).cloned().collect();
    if c.is_empty() {
        return Err(Error::Config("the dataset has no cluttered records".into()).into());
    }
    Ok(c)
}

fn report_cv(out: &Path, table: &ErrorTable) -> Result<()> {
    let name = table.strategy.name();
    write(&out.join(format!("cv-{name}.csv")), &table.to_csv())?;
    let text = table.to_text_table();
    write(&out.join(format!("cv-{name}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

fn load_models(dir: &Path) -> Result<Vec<GraspModel>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!(Error::Config(format!("no .model files in {}", dir.display())));
    }
    paths.iter().map(|p| GraspModel::load(p).map_err(Into::into)).collect()
}

fn run(cli: Cli) -> Result<()> {
    let params = ModelParams::parse_counts(&cli.params)?;
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cam = CameraModel::default();
    match cli.command {
        Command::GenDataset {
            instances,
            records,
            clutter,
            dropout,
        } => {
            let cfg = DatasetConfig {
                instances_per_type: instances,
                records_per_instance: records,
                clutter_scenes: clutter,
                dropout,
                seed: cli.seed,
                ..DatasetConfig::default()
            };
            let ds = generate_dataset(&cfg, &cam)?;
            let all: Vec<GraspRecord> = ds.records.into_iter().chain(ds.clutter).collect();
            write_dataset(out, &all)?;
            println!("wrote {} records to {}", all.len(), out.display());
        }
        Command::Train { data, strategy } => {
            let records = single(&read_dataset(&data.data)?);
            let p = perception(cli.weights.as_deref())?;
            for m in train_all(&records, &p, &params, &strategies(&strategy)?)? {
                let path = out.join(format!("{}-{}.model", m.object_type, m.strategy));
                m.save(&path)?;
                println!("{}", path.display());
            }
        }
        Command::CrossValidate { data, strategy } => {
            let records = single(&read_dataset(&data.data)?);
            let p = perception(cli.weights.as_deref())?;
            for s in strategies(&strategy)? {
                report_cv(out, &cross_validate(&records, &p, &params, s)?)?;
            }
        }
        Command::EvalClutter { data, models } => {
            let test = clutter(&read_dataset(&data.data)?)?;
            let models = load_models(&models)?;
            let res = evaluate_clutter(&test, &models, &perception(cli.weights.as_deref())?)?;
            write(&out.join("clutter.csv"), &res.to_csv())?;
            let text = res.to_text_table();
            write(&out.join("clutter.txt"), &text)?;
            print!("{text}");
        }
        Command::Compare { data, skip_cv } => {
            let records = read_dataset(&data.data)?;
            let train = single(&records);
            let test = clutter(&records)?;
            let p = perception(cli.weights.as_deref())?;
            if !skip_cv {
                for s in Strategy::ALL {
                    report_cv(out, &cross_validate(&train, &p, &params, s)?)?;
                }
            }
            let models = train_all(&train, &p, &params, &Strategy::ALL)?;
            let res = evaluate_clutter(&test, &models, &p)?;
            write(&out.join("clutter.csv"), &res.to_csv())?;
            let text = res.to_text_table();
            write(&out.join("clutter.txt"), &text)?;
            print!("{text}");
        }
        Command::Overlay { record } => {
            let r = find_record(read_dataset(&record.data.data)?, &record.record)?;
            let model = GraspModel::load(&record.model)?;
            let pred = predict_grasp(&model, &perception(cli.weights.as_deref())?, &r.image, &r.cloud)?;
            let path = out.join(format!("{}-overlay.ppm", r.id));
            emit_overlay(&path, &r.image, &pred, &cam)?;
            println!("{}", path.display());
        }
        Command::RunPreshape {
            record,
            gain,
            epsilon,
            max_iter,
        } => {
            let r = find_record(read_dataset(&record.data.data)?, &record.record)?;
            let model = GraspModel::load(&record.model)?;
            let pred = predict_grasp(&model, &perception(cli.weights.as_deref())?, &r.image, &r.cloud)?;
            let cfg = PotentialConfig {
                gain,
                epsilon,
                max_iter,
            };
            let run = preshape_from_prediction(&pred, &cfg)?;
            write(&out.join(format!("{}-preshape.csv", r.id)), &run.log.to_csv())?;
            let final_pos = hiergrasp::grasp::PerEffector {
                hand_frame: run.state.hand(),
                thumb_tip: run.state.thumb(),
                index_tip: run.state.index(),
            };
            let err = errors(&final_pos, &r.effectors);
            let hand = run.hand.map_or("skipped".to_string(), |h| format!("{h:?}"));
            println!("arm {:?}, hand {hand}, {} iterations", run.arm, run.log.iterations());
            println!(
                "final error (m): hand frame {:.4}, thumb tip {:.4}, index tip {:.4}",
                err.hand_frame, err.thumb_tip, err.index_tip
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::category) {
        Some(ErrorCategory::Config) => 2,
        Some(ErrorCategory::Data) => 3,
        Some(ErrorCategory::Prediction) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already carry their cause in the message
            if e.downcast_ref::<Error>().is_some() {
                eprintln!("error: {e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
