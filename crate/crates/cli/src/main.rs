use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use bb_core::ingest::{
    parse_ngsim_csv, parse_predictions, read_dataset_dir, read_requests, resample, split_dataset, write_dataset_dir,
    write_prediction_requests, write_predictions, Frame, PredictionMeta, RequestMeta, Split,
};
use bb_core::pipeline::{digest_dir, evaluate, sha256_hex, write_report, InputDigest, RunManifest, Scenario};
use bb_core::synth::{constant_velocity_predict, generate_dataset, write_labels, SynthParams};
use bb_core::{AnalysisConfig, SiteProfile};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "bb", version, about = "Behavioral benchmark for highway trajectory prediction")]
struct Cli {
    /// Worker threads (default: all cores). BB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an NGSIM CSV into a dataset directory.
    Ingest {
        #[arg(long)]
        ngsim: PathBuf,
        /// Preset name (US101, I80, synth) or site profile TOML.
        #[arg(long)]
        site: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.5)]
        resample_hz: f64,
        /// Train, validation and test shares, e.g. 70,10,20.
        #[arg(long)]
        split: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write prediction requests for merge events and highway anchors.
    Requests {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "all")]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute every metric for recorded data and each prediction file.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, num_args = 0..)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constant-velocity predictions for a request file.
    PredictCv {
        #[arg(long)]
        requests: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "cv")]
        name: String,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<AnalysisConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(AnalysisConfig::from_toml_str(&text)?)
        }
        None => Ok(AnalysisConfig::default()),
    }
}

fn parse_ratios(s: &str) -> anyhow::Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --split {s:?}"))?;
    let [a, b, c] = v[..] else {
        bail!(bb_core::Error::InvalidParameter(format!("--split needs three values, got {s:?}")));
    };
    let sum = a + b + c;
    Ok(if (sum - 100.0).abs() < 1e-6 {
        [a / 100.0, b / 100.0, c / 100.0]
    } else {
        [a, b, c]
    })
}

fn file_digest(path: &Path) -> anyhow::Result<InputDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest {
            ngsim,
            site,
            out,
            resample_hz,
            split,
            seed,
        } => {
            let site = SiteProfile::load(&site)?;
            let raw = parse_ngsim_csv(&ngsim, &site)?;
            let dataset = if (raw.sample_hz - resample_hz).abs() > 1e-9 {
                resample(&raw, resample_hz)?
            } else {
                raw
            };
            let bad = dataset.validate();
            if !bad.is_empty() {
                log::warn!("{} invariant violations, first: {:?}", bad.len(), bad[0]);
            }
            write_dataset_dir(&dataset, &out)?;
            if let Some(s) = split {
                let assignment = split_dataset(&dataset, parse_ratios(&s)?, seed)?;
                for part in Split::ALL {
                    write_dataset_dir(&assignment.subset(&dataset, part), &out.join(part.name()))?;
                }
                std::fs::write(out.join("split.json"), serde_json::to_string_pretty(&assignment)? + "\n")?;
            }
            let manifest = RunManifest::new("ingest", &AnalysisConfig::default(), vec![file_digest(&ngsim)?], Some(seed));
            write_manifest(&out, &manifest)?;
            log::info!("{} tracks, {} samples", dataset.tracks.len(), dataset.sample_count());
        }
        Command::Requests {
            dataset,
            scenario,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let d = read_dataset_dir(&dataset)?;
            let ex = bb_core::pipeline::extract(&d, &cfg);
            let anchors = ex.request_anchors(scenario);
            if anchors.is_empty() {
                log::warn!("no {scenario} events found; writing an empty request file");
            }
            let meta = RequestMeta {
                config_digest: Some(cfg.digest()),
                scenario: Some(scenario.to_string()),
            };
            let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let summary = write_prediction_requests(&d, &anchors, cfg.neighbor_radius, &meta, file)?;
            if summary.skipped > 0 {
                log::warn!("{} anchors skipped for lack of history", summary.skipped);
            }
            log::info!("{} requests written", summary.written);
        }
        Command::Evaluate {
            dataset,
            predictions,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let d = read_dataset_dir(&dataset)?;
            let mut inputs = digest_dir(&dataset)?;
            for i in &mut inputs {
                i.name = format!("dataset/{}", i.name);
            }
            let mut files = Vec::new();
            for p in &predictions {
                inputs.push(file_digest(p)?);
                files.push(parse_predictions(p, &d).with_context(|| format!("reading {}", p.display()))?);
            }
            for f in &files {
                if f.renormalized > 0 {
                    log::warn!("{}: {} instances renormalized", f.meta.source, f.renormalized);
                }
            }
            let manifest = RunManifest::new("evaluate", &cfg, inputs, None);
            let report = evaluate(&d, &cfg, files, &manifest.digest)?;
            let digest = write_report(&report, &manifest, &out)?;
            println!("report_digest={digest}");
        }
        Command::Synth { params, out } => {
            let p = match &params {
                Some(path) => SynthParams::from_toml_str(
                    &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
                )?,
                None => SynthParams::default(),
            };
            let (d, labels) = generate_dataset(&p)?;
            write_dataset_dir(&d, &out)?;
            write_labels(&labels, std::fs::File::create(out.join("labels.csv"))?)?;
            std::fs::write(out.join("params.toml"), p.to_toml_string())?;
            let inputs = params.as_deref().map(file_digest).transpose()?.into_iter().collect();
            write_manifest(&out, &RunManifest::new("synth", &AnalysisConfig::default(), inputs, Some(p.seed)))?;
            let digest = sha256_hex(&std::fs::read(out.join(bb_core::ingest::TRACKS_FILE))?);
            println!("tracks_digest={digest}");
        }
        Command::PredictCv { requests, out, name } => {
            let rf = read_requests(&requests)?;
            let mut preds = Vec::with_capacity(rf.requests.len());
            for r in &rf.requests {
                preds.push((r.request_id, constant_velocity_predict(r.ego_id, &r.ego)?));
            }
            let entries: Vec<(u64, &_)> = preds.iter().map(|(id, p)| (*id, p)).collect();
            let meta = PredictionMeta {
                source: name,
                frame: Frame::Local,
                config_digest: rf.meta.config_digest.clone(),
            };
            let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_predictions(&meta, &entries, file)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<bb_core::Error>() {
            return if e.is_data_error() { EXIT_DATA } else { EXIT_USAGE };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
        std::process::exit(EXIT_INTERNAL as i32);
    }));

    let threads = std::env::var("BB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
