//! Colour-coded flow images. Direction maps to hue (0 rad = red, linear),
//! speed to value with 1 px/ms at full brightness.

use std::io::Write;

use crate::decode::FlowEstimate;
use crate::events::SensorGeometry;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn black(width: u32, height: u32) -> Self {
        Image { width, height, pixels: vec![[0; 3]; (width * height) as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn write_ppm<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        write!(sink, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        sink.write_all(&bytes)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_ppm(&mut buf).expect("writing to memory");
        buf
    }
}

/// `h` in degrees, `s` and `v` in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |u: f64| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Draws the estimates with `t_ms` in `[t0, t1)`; later estimates overwrite
/// earlier ones at the same pixel.
pub fn render_window<F: Real>(estimates: &[FlowEstimate<F>], geometry: SensorGeometry, t0: f64, t1: f64) -> Image {
    let mut img = Image::black(geometry.width, geometry.height);
    let mut order: Vec<&FlowEstimate<F>> = estimates
        .iter()
        .filter(|e| {
            let t = e.t_ms.to_f64_lossy();
            t >= t0 && t < t1 && e.x < geometry.width && e.y < geometry.height
        })
        .collect();
    order.sort_by_key(|e| (e.tick, e.y, e.x));
    for e in order {
        let hue = e.direction().to_f64_lossy().to_degrees();
        let value = e.speed().to_f64_lossy().min(1.0);
        img.pixels[(e.y * geometry.width + e.x) as usize] = hsv_to_rgb(hue, 1.0, value);
    }
    img
}

/// Single image over all estimates.
pub fn render_flow<F: Real>(estimates: &[FlowEstimate<F>], geometry: SensorGeometry) -> Image {
    render_window(estimates, geometry, f64::NEG_INFINITY, f64::INFINITY)
}

/// One image per `window_ms` slice, from 0 to the last estimate.
pub fn render_frames<F: Real>(estimates: &[FlowEstimate<F>], geometry: SensorGeometry, window_ms: f64) -> Vec<Image> {
    assert!(window_ms > 0.0, "window must be positive");
    let end = estimates.iter().map(|e| e.t_ms.to_f64_lossy()).fold(0.0, f64::max);
    let frames = (end / window_ms).floor() as usize + 1;
    (0..frames)
        .map(|k| render_window(estimates, geometry, k as f64 * window_ms, (k + 1) as f64 * window_ms))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv_to_rgb(240.0, 1.0, 1.0), [0, 0, 255]);
        assert_eq!(hsv_to_rgb(360.0, 1.0, 0.5), [128, 0, 0]);
    }

    #[test]
    fn empty_is_black() {
        let g = SensorGeometry::new(4, 3).unwrap();
        let img = render_flow::<f64>(&[], g);
        assert!(img.pixels.iter().all(|p| *p == [0, 0, 0]));
        assert_eq!(&img.to_ppm()[..11], b"P6\n4 3\n255\n");
        assert_eq!(img.to_ppm().len(), 11 + 36);
    }

    #[test]
    fn uniform_flow_has_one_hue() {
        let g = SensorGeometry::new(5, 5).unwrap();
        let est: Vec<FlowEstimate<f64>> = (0..25)
            .map(|i| FlowEstimate { x: i % 5, y: i / 5, tick: 1, t_ms: 1.0, vx: 0.5, vy: 0.0 })
            .collect();
        let img = render_flow(&est, g);
        assert!(img.pixels.iter().all(|p| *p == [128, 0, 0]));
    }
}
