use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ganae::channel::ImddOracle;
use ganae::e2e::{
    conditioning_dataset, pretrain_transceiver, Experiment, ExperimentConfig, ExperimentState, PRETRAIN_STREAM,
};
use ganae::gan::train_gan;
use ganae::nn::Rng;
use ganae::report::{
    config_schema, constellation, dataset_checkpoint, dataset_from_checkpoint, load_checkpoint, model_checkpoint,
    parse_config, read_metrics, render_figures, render_report, save_checkpoint, transceiver_from_checkpoint,
    MetricsLine, MetricsWriter, METRICS_JSONL,
};
use ganae::transceiver::ConfusionMatrix;
use ganae::{Error, Result};

const DEFAULT_CONFIG: &str = "ganae.cfg";
const CHECKPOINT_DIR: &str = "checkpoints";
const CONFUSION_K0_JSON: &str = "confusion_k0.json";
const CONFUSION_FINAL_JSON: &str = "confusion_final.json";
const SUMMARY_JSON: &str = "summary.json";
const DATASET_K0: &str = "dataset_k0.ckpt";

/// Learn an IM/DD transceiver on measured data through a conditional GAN
/// model of the channel.
#[derive(Debug, Parser)]
#[command(name = "ganae", version)]
struct Cli {
    /// Configuration file (default: ./ganae.cfg).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the experiment seed (and the channel noise seed derived from it).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full experiment: pretraining, K iterations, receiver-only baseline, report.
    Run,
    /// Offline transceiver pretraining only.
    Pretrain,
    /// Trains a GAN on a dumped dataset.
    TrainGan {
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
    },
    /// Receiver-only fine-tuning from a checkpoint (default: the k = 0 checkpoint of --out).
    BaselineRx {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// BER of a checkpoint over the simulated channel.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Transmission round; selects the messages and channel noise streams.
        #[arg(long, default_value_t = 0)]
        round: usize,
    },
    /// Re-renders metrics and figures from the files of a finished run in --out.
    Report,
    /// Prints every configuration key with its default.
    ConfigSchema,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG));
    if !path.exists() {
        return Err(Error::Config {
            line: None,
            message: format!(
                "config file {} not found (pass --config, or run `ganae config-schema > {DEFAULT_CONFIG}`)",
                path.display()
            ),
        });
    }
    let mut config = parse_config(&path)?;
    if let Some(seed) = cli.seed {
        config.reseed(seed);
    }
    Ok(config)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Usage(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn checkpoint_name(k: usize) -> String {
    format!("k{k:02}.ckpt")
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let out = &cli.out;
    create_dir(&out.join(CHECKPOINT_DIR))?;
    write_json(&out.join("config.json"), &config)?;
    let oracle = ImddOracle::new(config.channel.clone())?;
    let experiment = Experiment::new(config.clone(), &oracle)?;
    let started = Instant::now();
    let mut metrics = MetricsWriter::create(out)?;
    let mut lines = Vec::new();

    let mut on_state = |state: &ExperimentState| -> Result<()> {
        let record = state.history.last().expect("k = 0 record");
        let line = MetricsLine::from_record(record, started.elapsed().as_secs_f64(), config.seed);
        metrics.append(&line)?;
        lines.push(line);
        save_checkpoint(
            &out.join(CHECKPOINT_DIR).join(checkpoint_name(record.k)),
            &model_checkpoint(&state.transceiver, state.gan.as_ref()),
        )?;
        if record.k == 0 {
            write_json(&out.join(CONFUSION_K0_JSON), &state.confusion_initial)?;
            let dataset = conditioning_dataset(&state.measurement, config.gan.memory, config.effective_q())?;
            save_checkpoint(&out.join(DATASET_K0), &dataset_checkpoint(&dataset))?;
        }
        eprintln!(
            "k = {:2}  BER {:.3e}  SER {:.3e}  [{:.0} s]",
            record.k,
            record.ber,
            record.ser,
            started.elapsed().as_secs_f64()
        );
        Ok(())
    };
    let mut state = experiment.initialize()?;
    let outcome = experiment.run_from(&mut state, &mut on_state)?;

    write_json(&out.join(CONFUSION_FINAL_JSON), &outcome.state.confusion_latest)?;
    let first = &outcome.state.history[0];
    let last = outcome.state.history.last().expect("records");
    write_json(
        &out.join(SUMMARY_JSON),
        &serde_json::json!({
            "seed": config.seed,
            "initial": first,
            "final": last,
            "receiver_only": outcome.baseline.record,
            "receiver_only_steps": outcome.baseline.steps,
            "q2_delta_db": outcome.q2_delta_db,
            "bit_mapping": outcome.state.mapping.labels(),
        }),
    )?;
    let points = constellation(&outcome.state.transceiver.transmitter)?;
    render_figures(
        &lines,
        &outcome.state.confusion_initial,
        &outcome.state.confusion_latest,
        points.view(),
        out,
    )?;
    println!(
        "BER {:.3e} -> {:.3e}; receiver-only {:.3e}; Q2 gain over receiver-only {}",
        first.ber,
        last.ber,
        outcome.baseline.record.ber,
        outcome
            .q2_delta_db
            .map(|d| format!("{d:+.2} dB"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn pretrain(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    create_dir(&cli.out)?;
    let mut rng = Rng::derive(config.seed, PRETRAIN_STREAM);
    let (pair, report) = pretrain_transceiver(&config, &mut rng)?;
    let path = cli.out.join("pretrained.ckpt");
    save_checkpoint(&path, &model_checkpoint(&pair, None))?;
    let losses: String = report
        .losses
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{i},{l}\n"))
        .collect();
    let loss_path = cli.out.join("pretrain_losses.csv");
    std::fs::write(&loss_path, format!("step,loss\n{losses}")).map_err(io_err(&loss_path))?;
    println!("smooth-model SER {:.4}; saved {}", report.ser, path.display());
    Ok(())
}

fn train_gan_cmd(cli: &Cli, dataset: &Path) -> Result<()> {
    let config = load_config(cli)?;
    let data = dataset_from_checkpoint(&load_checkpoint(dataset)?).map_err(|kind| Error::Checkpoint {
        path: dataset.to_path_buf(),
        kind,
    })?;
    create_dir(&cli.out)?;
    let mut rng = Rng::new(config.seed);
    let (pair, history) = train_gan(&data, &config.gan, &mut rng, None)?;
    let path = cli.out.join("gan.ckpt");
    let mut ckpt = ganae::report::Checkpoint::new();
    ckpt.insert_gan(ganae::report::GAN, &pair);
    save_checkpoint(&path, &ckpt)?;
    let csv: String = history
        .iter()
        .map(|h| format!("{},{},{}\n", h.step, h.discriminator, h.generator))
        .collect();
    let loss_path = cli.out.join("gan_losses.csv");
    std::fs::write(&loss_path, format!("step,d_loss,g_loss\n{csv}")).map_err(io_err(&loss_path))?;
    if let Some(last) = history.last() {
        println!(
            "final losses: D {:.4}, G {:.4}; saved {}",
            last.discriminator,
            last.generator,
            path.display()
        );
    }
    Ok(())
}

fn transceiver_at(path: &Path) -> Result<ganae::e2e::Transceiver> {
    transceiver_from_checkpoint(&load_checkpoint(path)?).map_err(|kind| Error::Checkpoint {
        path: path.to_path_buf(),
        kind,
    })
}

fn baseline_rx(cli: &Cli, checkpoint: Option<&Path>) -> Result<()> {
    let config = load_config(cli)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join(CHECKPOINT_DIR).join(checkpoint_name(0)));
    let pair = transceiver_at(&path)?;
    let oracle = ImddOracle::new(config.channel.clone())?;
    let experiment = Experiment::new(config, &oracle)?;
    let (measurement, _) = experiment.evaluate_round(&pair, 0)?;
    let result = experiment.receiver_only_baseline(&pair, &measurement)?;
    println!(
        "{}",
        serde_json::to_string(&result.record).map_err(|e| Error::Usage(e.to_string()))?
    );
    Ok(())
}

fn evaluate_cmd(cli: &Cli, checkpoint: &Path, round: usize) -> Result<()> {
    let config = load_config(cli)?;
    let pair = transceiver_at(checkpoint)?;
    let oracle = ImddOracle::new(config.channel.clone())?;
    let experiment = Experiment::new(config, &oracle)?;
    let (_, eval) = experiment.evaluate_round(&pair, round)?;
    println!(
        "{}",
        serde_json::to_string(&eval.record).map_err(|e| Error::Usage(e.to_string()))?
    );
    Ok(())
}

fn report(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    let lines = read_metrics(&out.join(METRICS_JSONL))?;
    let last = lines
        .last()
        .ok_or_else(|| Error::Usage(format!("{} holds no records", out.join(METRICS_JSONL).display())))?;
    let k0: ConfusionMatrix = read_json(&out.join(CONFUSION_K0_JSON))?;
    let final_path = out.join(CONFUSION_FINAL_JSON);
    let latest: ConfusionMatrix = if final_path.exists() {
        read_json(&final_path)?
    } else {
        k0.clone()
    };
    let pair = transceiver_at(&out.join(CHECKPOINT_DIR).join(checkpoint_name(last.k)))?;
    let points = constellation(&pair.transmitter)?;
    render_report(&lines, &k0, &latest, points.view(), out)?;
    println!("report written to {}", out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => run(cli),
        Command::Pretrain => pretrain(cli),
        Command::TrainGan { dataset } => train_gan_cmd(cli, dataset),
        Command::BaselineRx { checkpoint } => baseline_rx(cli, checkpoint.as_deref()),
        Command::Evaluate { checkpoint, round } => evaluate_cmd(cli, checkpoint, *round),
        Command::Report => report(cli),
        Command::ConfigSchema => {
            print!("{}", config_schema());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
