use sha2::{Digest, Sha256};

use spikeflow::pipeline::{run_pipeline, write_artifacts, PipelineConfig};
use spikeflow::render::render_flow;
use spikeflow::stimulus::Stimulus;
use spikeflow::{Pipe, SensorGeometry};

/// Verified by eye: hue rotates with polar angle around the spiral center.
const SPIRAL_RENDER_SHA256: &str = "1c5a8ffc36853a4093fda8c645c294dd3ad760afbc134c2b4fe9b046763131ef";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn spiral_render_hash_is_pinned() {
    let run = run_pipeline(&PipelineConfig::spiral()).unwrap();
    let image = render_flow(&run.flow, SensorGeometry::QVGA);
    assert_eq!(hex(&Sha256::digest(image.to_ppm())), SPIRAL_RENDER_SHA256);
}

fn short_pipe(dir: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { stimulus: Stimulus::Pipe(Pipe { duration: 0.2, ..Pipe::default() }), ..PipelineConfig::default() };
    cfg.output.dir = dir.to_path_buf();
    cfg.output.aer_dump = Some("aer.bin".into());
    cfg.output.frame_window_ms = Some(50.0);
    cfg
}

#[test]
fn artifacts_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = write_artifacts(&run_pipeline(&short_pipe(a.path())).unwrap(), &short_pipe(a.path())).unwrap();
    let files_b = write_artifacts(&run_pipeline(&short_pipe(b.path())).unwrap(), &short_pipe(b.path())).unwrap();
    assert_eq!(files_a.len(), 11);
    for (fa, fb) in files_a.iter().zip(&files_b) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
    }
    assert!(files_a.iter().any(|p| p.ends_with("frame_0003.ppm")));
}

#[test]
fn noise_is_seeded() {
    let cfg = |seed| PipelineConfig {
        stimulus: Stimulus::Pipe(Pipe { duration: 0.1, ..Pipe::default() }),
        noise_hz: 2.0,
        seed,
        ..PipelineConfig::default()
    };
    let a = run_pipeline(&cfg(3)).unwrap();
    let b = run_pipeline(&cfg(3)).unwrap();
    let c = run_pipeline(&cfg(4)).unwrap();
    assert_eq!(a.events, b.events);
    assert_ne!(a.events, c.events);
    assert!(a.events.len() > a.census);
    assert_eq!(a.report, b.report);
}
