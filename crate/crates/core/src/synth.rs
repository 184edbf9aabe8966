//! Synthetic traffic-sign-like images laid out like the GTSRB training tree
//! (`<root>/<class:05>/<index:05>.ppm`), for smoke runs and tests when the
//! real dataset is unavailable.
//!
//! Four base templates (red-ring disc, yellow diamond, red-bordered
//! triangle, blue disc) are combined with a 3×3 glyph pattern, so any class
//! count up to 44 yields distinct classes. Each image gets random size,
//! scale, offset, rotation, brightness, a cluttered background and noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};

use crate::data::encode_ppm;
use crate::error::{Error, IoContext, Result};
use crate::rng::{derive_seed, SeededRng};

pub const MAX_SYNTH_CLASSES: usize = 44;

/// Glyph bitmaps (row-major 3×3, bit 8 = top-left) for glyph ids ≥ 1.
const GLYPHS: [u16; 10] = [
    0b111_000_111,
    0b100_010_001,
    0b001_010_100,
    0b111_101_111,
    0b010_101_010,
    0b110_110_000,
    0b000_111_000,
    0b101_000_101,
    0b011_011_011,
    0b100_100_111,
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub min_side: usize,
    pub max_side: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_classes: 4, per_class: 130, min_side: 48, max_side: 128, seed: 0 }
    }
}

type Rgb = [f64; 3];

const RED: Rgb = [200.0, 30.0, 35.0];
const WHITE: Rgb = [235.0, 235.0, 230.0];
const DARK: Rgb = [25.0, 25.0, 30.0];
const YELLOW: Rgb = [240.0, 195.0, 25.0];
const BLUE: Rgb = [25.0, 70.0, 175.0];

fn glyph_pattern(class: usize) -> u16 {
    let (template, variant) = (class % 4, class / 4);
    if variant > 0 {
        return GLYPHS[variant - 1];
    }
    match template {
        0 => 0b101_101_101,
        1 => 0,
        2 => 0b010_010_000,
        _ => 0b010_111_010,
    }
}

fn glyph_hit(pattern: u16, u: f64, v: f64) -> bool {
    if pattern == 0 || u.abs() >= 0.42 || v.abs() >= 0.42 {
        return false;
    }
    let col = ((u + 0.42) / 0.28) as usize;
    let row = ((v + 0.42) / 0.28) as usize;
    let bit = 8 - (row.min(2) * 3 + col.min(2));
    pattern >> bit & 1 == 1
}

/// Sign colour at normalized coordinates (`v` grows downward), or `None`
/// outside the sign.
fn sign_color(class: usize, u: f64, v: f64) -> Option<Rgb> {
    let pattern = glyph_pattern(class);
    let d = (u * u + v * v).sqrt();
    match class % 4 {
        0 => (d < 1.0).then(|| {
            if d > 0.74 {
                RED
            } else if glyph_hit(pattern, u, v) {
                DARK
            } else {
                WHITE
            }
        }),
        1 => {
            let m = u.abs() + v.abs();
            (m < 1.0).then(|| if m > 0.82 { WHITE } else if glyph_hit(pattern, u * 1.3, v * 1.3) { DARK } else { YELLOW })
        }
        2 => {
            // upward triangle with apex (0,-1) and base at v = 0.8
            let inside = |s: f64| {
                let (u, v) = (u / s, (v - 0.25) / s + 0.25);
                v < 0.8 && v > -1.0 + 1.8 * u.abs() / 1.0392
            };
            inside(1.0).then(|| {
                if !inside(0.62) {
                    RED
                } else if glyph_hit(pattern, u * 1.6, (v - 0.3) * 1.6) {
                    DARK
                } else {
                    WHITE
                }
            })
        }
        _ => (d < 1.0).then(|| if glyph_hit(pattern, u * 0.9, v * 0.9) { WHITE } else { BLUE }),
    }
}

struct Scene {
    class: usize,
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    radius: f64,
    cos: f64,
    sin: f64,
    brightness: f64,
    /// Blend factor toward the background mean (low contrast, haze).
    haze: f64,
    blur: bool,
    bg: [Rgb; 2],
    clutter: Vec<([f64; 4], Rgb)>,
}

impl Scene {
    fn random(class: usize, rng: &mut SeededRng, cfg: &SynthConfig) -> Self {
        let span = cfg.max_side - cfg.min_side + 1;
        let w = cfg.min_side + rng.below(span);
        let h = (w as i64 + rng.below(9) as i64 - 4).max(cfg.min_side as i64) as usize;
        let side = w.min(h) as f64;
        let radius = side * (0.26 + 0.18 * rng.unit_f64());
        let jitter = |r: &mut SeededRng| (r.unit_f64() - 0.5) * 0.16 * side;
        let cx = w as f64 / 2.0 + jitter(rng);
        let cy = h as f64 / 2.0 + jitter(rng);
        let angle = (rng.unit_f64() - 0.5) * 0.5;
        let color = |r: &mut SeededRng| -> Rgb {
            let base = 40.0 + 150.0 * r.unit_f64();
            [base * (0.7 + 0.5 * r.unit_f64()), base * (0.8 + 0.4 * r.unit_f64()), base * (0.7 + 0.5 * r.unit_f64())]
        };
        let bg = [color(rng), color(rng)];
        let clutter = (0..rng.below(4))
            .map(|_| {
                let x0 = rng.unit_f64() * w as f64;
                let y0 = rng.unit_f64() * h as f64;
                let rect = [x0, y0, x0 + rng.unit_f64() * side * 0.4, y0 + rng.unit_f64() * side * 0.4];
                (rect, color(rng))
            })
            .collect();
        Scene {
            class,
            w,
            h,
            cx,
            cy,
            radius,
            cos: angle.cos(),
            sin: angle.sin(),
            brightness: 0.4 + 0.75 * rng.unit_f64(),
            haze: 0.45 * rng.unit_f64(),
            blur: rng.unit_f64() < 0.5,
            bg,
            clutter,
        }
    }

    fn background(&self, x: f64, y: f64) -> Rgb {
        for (r, c) in &self.clutter {
            if x >= r[0] && x < r[2] && y >= r[1] && y < r[3] {
                return *c;
            }
        }
        let t = (x / self.w as f64 + y / self.h as f64) / 2.0;
        [0, 1, 2].map(|i| self.bg[0][i] * (1.0 - t) + self.bg[1][i] * t)
    }

    /// 2×2 supersampled colour of pixel `(px, py)`.
    fn pixel(&self, px: usize, py: usize) -> Rgb {
        let mut acc = [0.0; 3];
        for (ox, oy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
            let (x, y) = (px as f64 + ox, py as f64 + oy);
            let (dx, dy) = ((x - self.cx) / self.radius, (y - self.cy) / self.radius);
            let (u, v) = (self.cos * dx + self.sin * dy, -self.sin * dx + self.cos * dy);
            let c = match sign_color(self.class, u, v) {
                Some(c) => {
                    let mean = [0, 1, 2].map(|i| (self.bg[0][i] + self.bg[1][i]) / 2.0);
                    [0, 1, 2].map(|i| (c[i] * (1.0 - self.haze) + mean[i] * self.haze) * self.brightness)
                }
                None => self.background(x, y),
            };
            for i in 0..3 {
                acc[i] += c[i] / 4.0;
            }
        }
        acc
    }
}

/// RGB bytes (`h·w·3`) of one synthetic sample.
pub fn render_sample(class: usize, seed: u64, cfg: &SynthConfig) -> (usize, usize, Vec<u8>) {
    let mut rng = SeededRng::new(seed);
    let scene = Scene::random(class, &mut rng, cfg);
    let noise = Normal::new(0.0, 12.0).expect("valid sigma");
    let (w, h) = (scene.w, scene.h);
    let mut img: Vec<Rgb> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| scene.pixel(x, y)).collect();
    if scene.blur {
        img = box_blur(&img, w, h);
    }
    let mut out = Vec::with_capacity(w * h * 3);
    for px in img {
        for c in px {
            let v = c + noise.sample(rng.inner());
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    (w, h, out)
}

/// 3×3 box blur with edge clamping.
fn box_blur(img: &[Rgb], w: usize, h: usize) -> Vec<Rgb> {
    let mut out = vec![[0.0; 3]; img.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    for i in 0..3 {
                        acc[i] += img[yy * w + xx][i] / 9.0;
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Writes the dataset tree under `root` and returns the written paths.
pub fn generate_dataset(root: &Path, cfg: &SynthConfig) -> Result<Vec<PathBuf>> {
    if cfg.n_classes == 0 || cfg.n_classes > MAX_SYNTH_CLASSES {
        return Err(Error::Config(format!("synthetic class count must be 1..={MAX_SYNTH_CLASSES}")));
    }
    if cfg.per_class == 0 || cfg.min_side < 8 || cfg.max_side < cfg.min_side {
        return Err(Error::Config(format!("invalid synthetic dataset settings {cfg:?}")));
    }
    let mut written = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for class in 0..cfg.n_classes {
        let dir = root.join(format!("{class:05}"));
        fs::create_dir_all(&dir).at(&dir)?;
        for i in 0..cfg.per_class {
            let seed = derive_seed(derive_seed(cfg.seed, class as u64), i as u64);
            let (w, h, rgb) = render_sample(class, seed, cfg);
            let path = dir.join(format!("{i:05}.ppm"));
            fs::write(&path, encode_ppm(w, h, 3, &rgb)?).at(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{decode_ppm, scan_dataset_dir};

    #[test]
    fn deterministic_tree() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { n_classes: 3, per_class: 4, seed: 5, ..Default::default() };
        let pa = generate_dataset(a.path(), &cfg).unwrap();
        let pb = generate_dataset(b.path(), &cfg).unwrap();
        assert_eq!(pa.len(), 12);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let m = scan_dataset_dir(a.path()).unwrap();
        assert_eq!(m.n_classes, 3);
        let img = decode_ppm(&fs::read(&pa[0]).unwrap()).unwrap();
        assert_eq!(img.channels, 3);
        assert!(img.height >= 48 && img.width >= 48);
    }

    #[test]
    fn templates_differ() {
        for (a, b) in [(0, 1), (0, 2), (1, 3), (2, 3), (0, 4)] {
            let mut diff = 0;
            for i in 0..40 {
                for j in 0..40 {
                    let (u, v) = (i as f64 / 20.0 - 1.0, j as f64 / 20.0 - 1.0);
                    if sign_color(a, u, v) != sign_color(b, u, v) {
                        diff += 1;
                    }
                }
            }
            assert!(diff > 100, "classes {a} and {b}: {diff}");
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let d = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { n_classes: 0, ..Default::default() };
        assert!(generate_dataset(d.path(), &cfg).is_err());
        let cfg = SynthConfig { min_side: 90, max_side: 60, ..Default::default() };
        assert!(generate_dataset(d.path(), &cfg).is_err());
    }
}
