//! Procedural apple images for exercising the pipeline without field data.
//!
//! Each image is a shaded green-yellow fruit on green foliage with, depending
//! on the class, small rough scab spots, large ringed rot lesions with a red
//! halo, or lobed streaky blotches. The ground-truth lesion mask is returned
//! alongside the image.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imageio::{Mask, RasterImage};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthClass {
    Blotch,
    Rot,
    Scab,
    Normal,
}

impl SynthClass {
    /// In directory (and therefore label) order.
    pub const ALL: [SynthClass; 4] = [SynthClass::Blotch, SynthClass::Rot, SynthClass::Scab, SynthClass::Normal];

    pub fn dir_name(self) -> &'static str {
        match self {
            SynthClass::Blotch => "apple_blotch",
            SynthClass::Rot => "apple_rot",
            SynthClass::Scab => "apple_scab",
            SynthClass::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub per_class: usize,
    pub size: usize,
    /// Standard deviation of additive Gaussian noise, in 8-bit units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { per_class: 80, size: 128, noise: 6.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class: SynthClass,
    pub seed: u64,
}

type Rgb = [f64; 3];

enum Lesion {
    Scab { cx: f64, cy: f64, r: f64, phase: f64, shade: f64 },
    Rot { cx: f64, cy: f64, r: f64, halo: f64, period: f64 },
    Blotch { cx: f64, cy: f64, r: f64, lobes: f64, phase: [f64; 2], streak: [f64; 2] },
}

const SCAB: Rgb = [105.0, 45.0, 30.0];
const ROT_LIGHT: Rgb = [120.0, 55.0, 30.0];
const ROT_DARK: Rgb = [60.0, 25.0, 15.0];
const ROT_HALO: Rgb = [185.0, 45.0, 35.0];
const BLOTCH: Rgb = [95.0, 35.0, 35.0];

fn scale(c: Rgb, f: f64) -> Rgb {
    [c[0] * f, c[1] * f, c[2] * f]
}

impl Lesion {
    fn color(&self, x: f64, y: f64, rng: &mut ChaCha8Rng) -> Option<Rgb> {
        match *self {
            Lesion::Scab { cx, cy, r, phase, shade } => {
                let (dx, dy) = (x - cx, y - cy);
                let theta = dy.atan2(dx);
                let edge = r * (1.0 + 0.25 * (5.0 * theta + phase).sin());
                (dx.hypot(dy) <= edge).then(|| scale(SCAB, shade * rng.random_range(0.6..1.2)))
            }
            Lesion::Rot { cx, cy, r, halo, period } => {
                let d = (x - cx).hypot(y - cy);
                if d <= r {
                    let ring = (d / period).floor() as i64;
                    Some(if ring % 2 == 0 { ROT_LIGHT } else { ROT_DARK })
                } else if d <= r + halo {
                    Some(ROT_HALO)
                } else {
                    None
                }
            }
            Lesion::Blotch { cx, cy, r, lobes, phase, streak } => {
                let (dx, dy) = (x - cx, y - cy);
                let theta = dy.atan2(dx);
                let edge = r * (1.0 + 0.3 * (lobes * theta + phase[0]).sin() + 0.15 * (2.0 * lobes * theta + phase[1]).sin());
                (dx.hypot(dy) <= edge).then(|| {
                    let s = (0.8 * (dx * streak[0] + dy * streak[1])).sin();
                    scale(BLOTCH, 1.0 + 0.15 * s)
                })
            }
        }
    }
}

/// A point uniformly inside the disk of radius `r` around `(cx, cy)`.
fn point_in_disk(rng: &mut ChaCha8Rng, cx: f64, cy: f64, r: f64) -> (f64, f64) {
    let rho = r * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..TAU);
    (cx + rho * theta.cos(), cy + rho * theta.sin())
}

/// Renders one image of `class` and its lesion mask (empty for `Normal`).
pub fn render(class: SynthClass, size: usize, noise: f64, seed: u64) -> Result<(RasterImage, Mask)> {
    if size < 16 {
        return Err(Error::invalid("synthetic images need size >= 16"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let unit = s / 128.0;
    let jitter = |rng: &mut ChaCha8Rng, c: Rgb, amount: f64| c.map(|v| v + rng.random_range(-amount..amount));

    let background = jitter(&mut rng, [60.0, 100.0, 20.0], 6.0);
    let fruit = jitter(&mut rng, [120.0, 170.0, 55.0], 10.0);
    let radius = s * rng.random_range(0.40..0.45);
    let cx = s / 2.0 + s * rng.random_range(-0.05..0.05);
    let cy = s / 2.0 + s * rng.random_range(-0.05..0.05);
    let light = (rng.random_range(-0.5..0.5) * radius, rng.random_range(-0.5..0.0) * radius);

    let lenticels: Vec<(f64, f64)> =
        (0..rng.random_range(3..8)).map(|_| point_in_disk(&mut rng, cx, cy, radius * 0.85)).collect();

    let mut lesions = Vec::new();
    match class {
        SynthClass::Scab => {
            for _ in 0..rng.random_range(6..=12) {
                let (x, y) = point_in_disk(&mut rng, cx, cy, radius * 0.8);
                lesions.push(Lesion::Scab {
                    cx: x,
                    cy: y,
                    r: unit * rng.random_range(3.0..6.0),
                    phase: rng.random_range(0.0..TAU),
                    shade: rng.random_range(0.85..1.15),
                });
            }
        }
        SynthClass::Rot => {
            for _ in 0..rng.random_range(1..=2) {
                let (x, y) = point_in_disk(&mut rng, cx, cy, radius * 0.5);
                lesions.push(Lesion::Rot {
                    cx: x,
                    cy: y,
                    r: unit * rng.random_range(13.0..20.0),
                    halo: unit * rng.random_range(3.0..5.0),
                    period: unit * rng.random_range(3.5..4.5),
                });
            }
        }
        SynthClass::Blotch => {
            for _ in 0..rng.random_range(2..=4) {
                let (x, y) = point_in_disk(&mut rng, cx, cy, radius * 0.65);
                let angle = rng.random_range(0.0..TAU);
                lesions.push(Lesion::Blotch {
                    cx: x,
                    cy: y,
                    r: s * rng.random_range(0.06..0.10),
                    lobes: f64::from(rng.random_range(3..=6)),
                    phase: [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)],
                    streak: [angle.cos(), angle.sin()],
                });
            }
        }
        SynthClass::Normal => {}
    }

    let gauss = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut mask_bits = vec![false; size * size];
    let mut data = Vec::with_capacity(size * size * 3);
    for row in 0..size {
        for col in 0..size {
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let d = (x - cx).hypot(y - cy);
            let mut rgb = if d <= radius {
                let falloff = 1.0 - 0.25 * (d / radius).powi(2);
                let glint = 0.12 * (-((x - cx - light.0).powi(2) + (y - cy - light.1).powi(2)) / (0.1 * radius * radius)).exp();
                let mut c = scale(fruit, falloff + glint);
                if lenticels.iter().any(|&(lx, ly)| (x - lx).hypot(y - ly) <= 1.2 * unit) {
                    c = scale(c, 1.25);
                }
                // Lesions stay on the fruit.
                if let Some(lesion) = lesions.iter().find_map(|l| l.color(x, y, &mut rng)) {
                    mask_bits[row * size + col] = true;
                    c = lesion;
                }
                c
            } else {
                background
            };
            if noise > 0.0 {
                for v in &mut rgb {
                    *v += gauss.sample(&mut rng);
                }
            }
            data.extend(rgb.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    Ok((RasterImage::from_rgb8(size, size, data)?, Mask::new(size, size, mask_bits)?))
}

/// Writes `root/<class>/<nnnn>.png` for every class plus `root/manifest.csv`
/// (`path,class,seed`). Image `i` (counted across classes) uses the seed
/// derived from `cfg.seed` under label `gen`.
pub fn generate_dataset(root: impl AsRef<Path>, cfg: &SynthConfig) -> Result<Vec<ManifestEntry>> {
    let root = root.as_ref();
    if cfg.per_class == 0 {
        return Err(Error::invalid("per_class must be >= 1"));
    }
    let mut jobs = Vec::new();
    for class in SynthClass::ALL {
        std::fs::create_dir_all(root.join(class.dir_name()))?;
        for i in 0..cfg.per_class {
            let index = jobs.len() as u64;
            let path = root.join(class.dir_name()).join(format!("{i:04}.png"));
            jobs.push(ManifestEntry { path, class, seed: seed::derive(cfg.seed, "gen", index) });
        }
    }
    use rayon::prelude::*;
    jobs.par_iter().try_for_each(|job| -> Result<()> {
        let (img, _) = render(job.class, cfg.size, cfg.noise, job.seed)?;
        img.save_png(&job.path)
    })?;

    let mut w = csv::Writer::from_path(root.join("manifest.csv"))?;
    w.write_record(["path", "class", "seed"])?;
    for job in &jobs {
        let rel = job.path.strip_prefix(root).unwrap_or(&job.path);
        w.write_record([rel.to_string_lossy().as_ref(), job.class.dir_name(), &job.seed.to_string()])?;
    }
    w.flush()?;
    Ok(jobs)
}
