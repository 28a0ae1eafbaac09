use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spikeflow::aer::{encode_spike, write_words};
use spikeflow::corenet::{
    compile_flow_network, read_spike_log, simulate, validate, write_spike_log, NetworkSpec, PopulationFilter, SimOptions, SpikeLog,
};
use spikeflow::decode::{decode_flow, extract_bursts, read_flow_csv, write_flow_csv};
use spikeflow::eval::evaluate;
use spikeflow::events::{quantize_to_ticks, read_events, write_events, Format};
use spikeflow::pipeline::{generate_events, run_pipeline, write_artifacts, PipelineConfig};
use spikeflow::render::{render_flow, render_frames};
use spikeflow::stimulus::{PipeModel, SpiralModel, Stimulus};

#[derive(Parser)]
#[command(name = "spikeflow", version, about = "Spiking optical flow for event cameras")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML pipeline configuration.
    #[arg(long, env = "SPIKEFLOW_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    stimulus: Option<StimulusKind>,
    /// Stimulus duration in seconds.
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Sensor width in pixels.
    #[arg(long, global = true)]
    width: Option<u32>,
    #[arg(long, global = true)]
    height: Option<u32>,
    /// Pixels per flow core along x.
    #[arg(long, global = true)]
    tile_x: Option<u32>,
    #[arg(long, global = true)]
    tile_y: Option<u32>,
    /// Refractory period in ticks.
    #[arg(long, global = true)]
    tau_r: Option<u32>,
    /// Delay in ticks.
    #[arg(long, global = true)]
    tau_d: Option<u32>,
    /// Milliseconds per fabric tick.
    #[arg(long, global = true)]
    tick_ms: Option<f64>,
    /// Background events per pixel per second.
    #[arg(long, alias = "noise-rate", global = true)]
    noise_hz: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Step cores on all threads.
    #[arg(long, global = true)]
    parallel: bool,
    /// Decode every axis as t+ − t−, without resolving saturated bursts.
    #[arg(long, global = true)]
    plain_decode: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StimulusKind {
    Pipe,
    Spiral,
}

#[derive(Clone, Copy, ValueEnum)]
enum EventFormat {
    Binary,
    Text,
}

impl From<EventFormat> for Format {
    fn from(f: EventFormat) -> Self {
        match f {
            EventFormat::Binary => Format::Binary,
            EventFormat::Text => Format::Text,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the stimulus event stream.
    Generate {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: EventFormat,
    },
    /// Build the network, validate it and write the placement file.
    Compile {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Simulate an event stream and write the spike log.
    Run {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: EventFormat,
        /// Placement file; compiled from the configuration when absent.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Ticks to simulate; defaults to the stimulus duration.
        #[arg(long)]
        horizon: Option<u32>,
        /// Populations to record: relay, input, delay, ds, all.
        #[arg(long, default_value = "input,delay,ds")]
        populations: PopulationFilter,
        /// Also write the AER spike words fed to the fabric.
        #[arg(long)]
        dump_aer: Option<PathBuf>,
    },
    /// Turn a spike log into flow estimates.
    Decode {
        #[arg(long)]
        spikes: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score flow estimates against the stimulus ground truth.
    Eval {
        #[arg(long)]
        flow: PathBuf,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        error_map: Option<PathBuf>,
        /// Edge-passage count of the stimulus; regenerated when absent.
        #[arg(long)]
        census: Option<usize>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Render flow estimates as PPM images.
    Render {
        #[arg(long)]
        flow: PathBuf,
        /// Output image, or directory for `--window-ms` frames.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        window_ms: Option<f64>,
    },
    /// Run every stage and write all artifacts.
    Pipeline {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// AER word dump, written inside the output directory.
        #[arg(long)]
        dump_aer: Option<String>,
        #[arg(long)]
        frame_window_ms: Option<f64>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
}

#[derive(Args)]
struct Thresholds {
    /// Fail (exit 1) above this mean angular error in degrees.
    #[arg(long)]
    max_aae: Option<f64>,
    /// Fail (exit 1) above this relative endpoint error (fraction).
    #[arg(long)]
    max_aee: Option<f64>,
}

enum Outcome {
    Ok,
    ThresholdFail,
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            PipelineConfig::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    match (args.stimulus, &cfg.stimulus) {
        (Some(StimulusKind::Pipe), Stimulus::Spiral(_)) => cfg.stimulus = Stimulus::Pipe(PipeModel::default()),
        (Some(StimulusKind::Spiral), Stimulus::Pipe(_)) => cfg.stimulus = Stimulus::Spiral(SpiralModel::default()),
        _ => {}
    }
    if let Some(d) = args.duration {
        cfg.set_duration(d);
    }
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { cfg.$field = v; } )* };
    }
    apply!(width, height, tile_x, tile_y, tau_r, tau_d, tick_ms, noise_hz, seed);
    cfg.parallel |= args.parallel;
    if args.plain_decode {
        cfg.resolve_saturated = false;
    }
    cfg.check()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn check_thresholds(report: &spikeflow::Report, t: &Thresholds) -> Outcome {
    if report.passes(t.max_aae, t.max_aee) {
        return Outcome::Ok;
    }
    eprintln!(
        "threshold exceeded: angular error {:.3} deg (max {:?}), relative AEE {:.4} (max {:?})",
        report.mean_abs_angular_error_deg, t.max_aae, report.relative_aee, t.max_aee
    );
    Outcome::ThresholdFail
}

fn network_for(cfg: &PipelineConfig, path: Option<&Path>) -> Result<NetworkSpec<i32>> {
    let spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            NetworkSpec::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => compile_flow_network(cfg.geometry()?, cfg.tiling(), cfg.tau_r, cfg.tau_d)?,
    };
    Ok(spec)
}

fn execute(cli: Cli) -> Result<Outcome> {
    let cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Generate { out, format } => {
            let (events, census) = generate_events(&cfg)?;
            write_events(&events, format.into(), create(&out)?)?;
            println!("{} events ({census} edge passages) -> {}", events.len(), out.display());
        }
        Command::Compile { out } => {
            let spec = network_for(&cfg, None)?;
            let report = validate(&spec);
            let s = &report.summary;
            println!(
                "{} flow cores + {} relay cores = {} cores; {} neurons per flow core",
                s.flow_cores,
                s.relay_cores,
                s.total_cores,
                s.neurons_per_flow_core.map_or("mixed".to_string(), |n| n.to_string())
            );
            println!("neurons: {} instantiated ({} at the flow-core size)", s.total_neurons, s.nominal_neurons);
            println!("max axons per core {}; axons within neurons: {}", s.max_axons_per_core, s.axons_within_neurons);
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            if let Some(out) = out {
                let mut w = create(&out)?;
                w.write_all(spec.to_json()?.as_bytes())?;
                w.flush()?;
            }
            if !report.is_valid() {
                bail!("{} violations", report.violations.len());
            }
        }
        Command::Run { events, format, network, out, horizon, populations, dump_aer } => {
            let spec = network_for(&cfg, network.as_deref())?;
            let events = read_events(open(&events)?, format.into())?;
            let horizon = horizon.unwrap_or_else(|| cfg.horizon());
            let ticks: Vec<_> = quantize_to_ticks(&events, cfg.tick_ms).into_iter().filter(|e| e.tick < horizon).collect();
            if let Some(path) = dump_aer {
                let words = ticks.iter().map(|e| encode_spike(e.tick, (e.x, e.y), &spec.relay)).collect::<Result<Vec<_>, _>>()?;
                let mut w = create(&path)?;
                write_words(&words, &mut w)?;
                w.flush()?;
            }
            let spikes = simulate(&spec, &ticks, horizon, SimOptions { parallel: cfg.parallel, filter: populations })?;
            write_spike_log(&SpikeLog { horizon, spikes }, create(&out)?)?;
        }
        Command::Decode { spikes, out } => {
            let log = read_spike_log(open(&spikes)?)?;
            let bursts = extract_bursts(&log.spikes, log.horizon);
            let flow = decode_flow(&bursts, &cfg.decode_options());
            write_flow_csv(&flow, create(&out)?)?;
            println!("{} bursts -> {} estimates", bursts.len(), flow.len());
        }
        Command::Eval { flow, report, error_map, census, thresholds } => {
            let flow = read_flow_csv(open(&flow)?, cfg.tick_ms)?;
            let census = match census {
                Some(c) => c,
                None => generate_events(&cfg)?.1,
            };
            let r = evaluate(&flow, &cfg.stimulus, census, &cfg.eval_config());
            match report {
                Some(path) => std::fs::write(&path, r.to_toml()).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", r.to_toml()),
            }
            if let Some(path) = error_map {
                r.write_error_map(create(&path)?)?;
            }
            return Ok(check_thresholds(&r, &thresholds));
        }
        Command::Render { flow, out, window_ms } => {
            let flow = read_flow_csv(open(&flow)?, cfg.tick_ms)?;
            let geometry = cfg.geometry()?;
            match window_ms {
                Some(w) if w > 0.0 => {
                    std::fs::create_dir_all(&out)?;
                    for (k, img) in render_frames(&flow, geometry, w).iter().enumerate() {
                        img.write_ppm(create(&out.join(format!("frame_{k:04}.ppm")))?)?;
                    }
                }
                Some(w) => bail!("window must be positive, got {w}"),
                None => render_flow(&flow, geometry).write_ppm(create(&out)?)?,
            }
        }
        Command::Pipeline { out_dir, dump_aer, frame_window_ms, thresholds } => {
            let mut cfg = cfg;
            if let Some(dir) = out_dir {
                cfg.output.dir = dir;
            }
            if dump_aer.is_some() {
                cfg.output.aer_dump = dump_aer;
            }
            if frame_window_ms.is_some() {
                cfg.output.frame_window_ms = frame_window_ms;
            }
            let thresholds = Thresholds {
                max_aae: thresholds.max_aae.or(cfg.max_aae_deg),
                max_aee: thresholds.max_aee.or(cfg.max_rel_aee),
            };
            let run = run_pipeline(&cfg)?;
            write_artifacts(&run, &cfg)?;
            print!("{}", run.report.to_toml());
            return Ok(check_thresholds(&run.report, &thresholds));
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ThresholdFail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
