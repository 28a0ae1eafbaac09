//! End-to-end driver: generate → compile → simulate → decode → evaluate →
//! render, with every intermediate product written in its file format.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aer::{encode_spike, write_words};
use crate::corenet::{
    compile_flow_network, simulate, validate, write_spike_log, NetworkSpec, PopulationFilter, SimOptions, SpikeLog, Tiling,
};
use crate::decode::{decode_flow, extract_bursts, write_flow_csv, DecodeOptions, FlowEstimate};
use crate::eval::{evaluate, EvalConfig, EvalReport};
use crate::events::{quantize_to_ticks, write_events, Event, Format, SensorGeometry};
use crate::render::{render_flow, render_frames};
use crate::stimulus::{inject_noise, PipeModel, SpiralModel, Stimulus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub events: String,
    pub spikes: String,
    pub flow: String,
    pub report: String,
    pub error_map: String,
    pub image: String,
    /// Writes the AER word stream when set.
    pub aer_dump: Option<String>,
    /// Writes one image per window as `frame_NNNN.ppm` when set.
    pub frame_window_ms: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            events: "events.bin".into(),
            spikes: "spikes.csv".into(),
            flow: "flow.csv".into(),
            report: "report.toml".into(),
            error_map: "error_map.csv".into(),
            image: "flow.ppm".into(),
            aer_dump: None,
            frame_window_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stimulus: Stimulus<f64>,
    pub width: u32,
    pub height: u32,
    pub tile_x: u32,
    pub tile_y: u32,
    pub tau_r: u32,
    pub tau_d: u32,
    pub tick_ms: f64,
    /// Background events per pixel per second.
    pub noise_hz: f64,
    pub seed: u64,
    pub match_radius: f64,
    pub time_tolerance: u32,
    pub parallel: bool,
    /// Treat self-inhibited bursts facing a shorter opposite burst as
    /// uninformative (see [`crate::decode`]).
    pub resolve_saturated: bool,
    pub max_aae_deg: Option<f64>,
    pub max_rel_aee: Option<f64>,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stimulus: Stimulus::Pipe(PipeModel::default()),
            width: SensorGeometry::QVGA.width,
            height: SensorGeometry::QVGA.height,
            tile_x: 6,
            tile_y: 6,
            tau_r: 60,
            tau_d: 50,
            tick_ms: 1.0,
            noise_hz: 0.0,
            seed: 0,
            match_radius: 1.5,
            time_tolerance: 2,
            parallel: false,
            resolve_saturated: true,
            max_aae_deg: None,
            max_rel_aee: None,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError { stage, source: Box::new(e) }
}

fn invalid(stage: &'static str, msg: String) -> PipelineError {
    PipelineError { stage, source: msg.into() }
}

impl PipelineConfig {
    pub fn spiral() -> Self {
        PipelineConfig { stimulus: Stimulus::Spiral(SpiralModel::default()), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn geometry(&self) -> Result<SensorGeometry, PipelineError> {
        SensorGeometry::new(self.width, self.height).map_err(at("config"))
    }

    pub fn tiling(&self) -> Tiling {
        Tiling { dx: self.tile_x, dy: self.tile_y }
    }

    /// Simulated ticks covering the stimulus duration.
    pub fn horizon(&self) -> u32 {
        (self.stimulus.duration() * 1000.0 / self.tick_ms).round() as u32
    }

    pub fn eval_config(&self) -> EvalConfig<f64> {
        EvalConfig { match_radius: self.match_radius, time_tolerance: self.time_tolerance, tick_ms: self.tick_ms, ..EvalConfig::default() }
    }

    pub fn decode_options(&self) -> DecodeOptions<f64> {
        if self.resolve_saturated {
            DecodeOptions::for_delay(self.tau_d, self.tick_ms)
        } else {
            DecodeOptions::plain(self.tick_ms)
        }
    }

    pub fn set_duration(&mut self, seconds: f64) {
        match &mut self.stimulus {
            Stimulus::Pipe(m) => m.duration = seconds,
            Stimulus::Spiral(m) => m.duration = seconds,
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        if !(self.tick_ms > 0.0) {
            return Err(invalid("config", format!("tick_ms must be positive, got {}", self.tick_ms)));
        }
        if self.tau_r <= self.tau_d {
            return Err(invalid("config", format!("tau_r ({}) must exceed tau_d ({})", self.tau_r, self.tau_d)));
        }
        if !(self.match_radius > 0.0) {
            return Err(invalid("config", "match_radius must be positive".into()));
        }
        if !(self.noise_hz >= 0.0) {
            return Err(invalid("config", "noise_hz must be non-negative".into()));
        }
        Ok(())
    }
}

/// In-memory products of a pipeline run.
pub struct PipelineRun {
    pub events: Vec<Event>,
    /// Edge passages produced by the stimulus, before noise.
    pub census: usize,
    pub network: NetworkSpec<i32>,
    pub spikes: SpikeLog,
    pub flow: Vec<FlowEstimate<f64>>,
    pub report: EvalReport<f64>,
}

pub fn generate_events(config: &PipelineConfig) -> Result<(Vec<Event>, usize), PipelineError> {
    let geometry = config.geometry()?;
    let clean = config.stimulus.generate(geometry).map_err(at("generate"))?;
    let census = clean.len();
    let events = if config.noise_hz > 0.0 {
        inject_noise(&clean, geometry, config.noise_hz, config.stimulus.duration(), config.seed)
    } else {
        clean
    };
    Ok((events, census))
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    config.check()?;
    let geometry = config.geometry()?;
    let (events, census) = generate_events(config)?;
    log::info!("{} events ({} from the stimulus)", events.len(), census);

    let network = compile_flow_network::<i32>(geometry, config.tiling(), config.tau_r, config.tau_d).map_err(at("compile"))?;
    let report = validate(&network);
    if !report.is_valid() {
        return Err(invalid("compile", format!("{} violations, first: {}", report.violations.len(), report.violations[0])));
    }

    let horizon = config.horizon();
    let ticks: Vec<_> = quantize_to_ticks(&events, config.tick_ms).into_iter().filter(|e| e.tick < horizon).collect();
    let options = SimOptions { parallel: config.parallel, filter: PopulationFilter::default() };
    let spikes = simulate(&network, &ticks, horizon, options).map_err(at("simulate"))?;
    log::info!("{} spikes over {horizon} ticks", spikes.len());

    let bursts = extract_bursts(&spikes, horizon);
    let flow = decode_flow(&bursts, &config.decode_options());
    let report = evaluate(&flow, &config.stimulus, census, &config.eval_config());
    Ok(PipelineRun { events, census, network, spikes: SpikeLog { horizon, spikes }, flow, report })
}

fn create(path: &Path, stage: &'static str) -> Result<BufWriter<File>, PipelineError> {
    File::create(path).map(BufWriter::new).map_err(at(stage))
}

/// Writes every artifact of `run` under `config.output.dir`.
pub fn write_artifacts(run: &PipelineRun, config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let out = &config.output;
    std::fs::create_dir_all(&out.dir).map_err(at("write"))?;
    let path = |name: &str| out.dir.join(name);
    let mut written = Vec::new();

    let p = path(&out.events);
    write_events(&run.events, Format::Binary, create(&p, "write events")?).map_err(at("write events"))?;
    written.push(p);

    let p = path(&out.spikes);
    write_spike_log(&run.spikes, create(&p, "write spikes")?).map_err(at("write spikes"))?;
    written.push(p);

    let p = path(&out.flow);
    write_flow_csv(&run.flow, create(&p, "write flow")?).map_err(at("write flow"))?;
    written.push(p);

    let p = path(&out.report);
    std::fs::write(&p, run.report.to_toml()).map_err(at("write report"))?;
    written.push(p);

    let p = path(&out.error_map);
    run.report.write_error_map(create(&p, "write error map")?).map_err(at("write error map"))?;
    written.push(p);

    let geometry = config.geometry()?;
    let p = path(&out.image);
    render_flow(&run.flow, geometry).write_ppm(create(&p, "render")?).map_err(at("render"))?;
    written.push(p);

    if let Some(window) = out.frame_window_ms {
        if !(window > 0.0) {
            return Err(invalid("render", "frame window must be positive".into()));
        }
        for (k, img) in render_frames(&run.flow, geometry, window).iter().enumerate() {
            let p = path(&format!("frame_{k:04}.ppm"));
            img.write_ppm(create(&p, "render")?).map_err(at("render"))?;
            written.push(p);
        }
    }

    if let Some(name) = &out.aer_dump {
        let horizon = run.spikes.horizon;
        let words = quantize_to_ticks(&run.events, config.tick_ms)
            .into_iter()
            .filter(|e| e.tick < horizon)
            .map(|e| encode_spike(e.tick, (e.x, e.y), &run.network.relay))
            .collect::<Result<Vec<_>, _>>()
            .map_err(at("aer dump"))?;
        let p = path(name);
        write_words(&words, create(&p, "aer dump")?).map_err(at("aer dump"))?;
        written.push(p);
    }
    Ok(written)
}
