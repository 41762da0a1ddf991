use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CorpusConfig, ObjectShape, VideoCorpus, VideoSequence};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::image::Image;
use crate::rng::{gaussian, stream};

/// Lattice spacing of the low-frequency background noise, pixels.
const BACKGROUND_CELL: usize = 16;
/// Per-frame sensor noise added on top of the static scene.
const FRAME_NOISE: f64 = 3.0;

fn validate(config: &CorpusConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    if config.n_videos < 2 {
        return bad(format!("n_videos must be >= 2, got {}", config.n_videos));
    }
    if config.frames_per_video < 2 {
        return bad(format!("frames_per_video must be >= 2, got {}", config.frames_per_video));
    }
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) {
        return bad(format!("holdout_fraction must lie in (0,1), got {}", config.holdout_fraction));
    }
    if config.shapes.is_empty() {
        return bad("at least one object shape is required".into());
    }
    let [lo, hi] = config.object_size;
    if !(lo > 0.0 && lo <= hi) {
        return bad(format!("object_size range {:?} is invalid", config.object_size));
    }
    if hi >= config.frame_width.min(config.frame_height) as f64 {
        return bad(format!(
            "object larger than frame: size {hi} vs frame {}x{}",
            config.frame_width, config.frame_height
        ));
    }
    let [alo, ahi] = config.aspect_range;
    if !(alo > 0.0 && alo <= ahi) {
        return bad(format!("aspect_range {:?} is invalid", config.aspect_range));
    }
    if !(0.0..=255.0).contains(&config.stripe_contrast) {
        return bad(format!("stripe_contrast must lie in [0, 255], got {}", config.stripe_contrast));
    }
    if !(0.0..=127.5).contains(&config.background_amplitude) {
        return bad(format!("background_amplitude must lie in [0, 127.5], got {}", config.background_amplitude));
    }
    let [slo, shi] = config.speed_range;
    if !(slo >= 0.0 && slo <= shi) {
        return bad(format!("speed_range {:?} is invalid", config.speed_range));
    }
    Ok(())
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<VideoCorpus> {
    validate(config)?;
    let videos = (0..config.n_videos).into_par_iter().map(|id| generate_video(config, id)).collect();
    Ok(VideoCorpus { config: config.clone(), videos })
}

struct Background {
    width: usize,
    pixels: Vec<[f64; 3]>,
}

impl Background {
    fn new(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> Self {
        let (w, h) = (config.frame_width, config.frame_height);
        let lw = w / BACKGROUND_CELL + 2;
        let lh = h / BACKGROUND_CELL + 2;
        let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(70.0..180.0));
        let amp = config.background_amplitude;
        let lattice: Vec<[f64; 3]> =
            (0..lw * lh).map(|_| std::array::from_fn(|c| base[c] + amp * (2.0 * rng.gen::<f64>() - 1.0))).collect();
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let gx = x as f64 / BACKGROUND_CELL as f64;
                let gy = y as f64 / BACKGROUND_CELL as f64;
                let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
                let (fx, fy) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
                let at = |i: usize, j: usize| lattice[j * lw + i];
                let noise = config.texture_noise * 0.5 * gaussian(rng);
                pixels.push(std::array::from_fn(|c| {
                    let top = at(ix, iy)[c] * (1.0 - fx) + at(ix + 1, iy)[c] * fx;
                    let bottom = at(ix, iy + 1)[c] * (1.0 - fx) + at(ix + 1, iy + 1)[c] * fx;
                    top * (1.0 - fy) + bottom * fy + noise
                }));
            }
        }
        Background { width: w, pixels }
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Two-colour stripe texture in object-local coordinates.
struct ObjectLook {
    shape: ObjectShape,
    colors: [[f64; 3]; 2],
    period: f64,
    direction: (f64, f64),
}

impl ObjectLook {
    fn new(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> Self {
        let shape = *config.shapes.choose(rng).expect("validated nonempty");
        let first: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..255.0));
        let second: [f64; 3] = std::array::from_fn(|c| {
            let k = config.stripe_contrast;
            let far = if first[c] > 127.5 { first[c] - k } else { first[c] + k };
            (far + 0.2 * k * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, 255.0)
        });
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        ObjectLook {
            shape,
            colors: [first, second],
            period: rng.gen_range(4.0..9.0),
            direction: (angle.cos(), angle.sin()),
        }
    }

    fn contains(&self, b: &BBox, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - b.cx, y - b.cy);
        let (hw, hh) = (b.w / 2.0, b.h / 2.0);
        match self.shape {
            ObjectShape::Rectangle => dx.abs() <= hw && dy.abs() <= hh,
            ObjectShape::Ellipse => (dx / hw).powi(2) + (dy / hh).powi(2) <= 1.0,
            ObjectShape::Triangle => dy.abs() <= hh && dx.abs() <= hw * (dy + hh) / b.h,
        }
    }

    fn color(&self, b: &BBox, x: f64, y: f64) -> [f64; 3] {
        let t = ((x - b.cx) * self.direction.0 + (y - b.cy) * self.direction.1) / self.period;
        self.colors[(t.floor() as i64).rem_euclid(2) as usize]
    }
}

fn generate_video(config: &CorpusConfig, id: usize) -> VideoSequence {
    let mut rng = stream(config.seed, "corpus/video", id as u64);
    let (fw, fh) = (config.frame_width as f64, config.frame_height as f64);
    let background = Background::new(config, &mut rng);
    let look = ObjectLook::new(config, &mut rng);

    let size = rng.gen_range(config.object_size[0]..=config.object_size[1]);
    let aspect = rng.gen_range(config.aspect_range[0]..=config.aspect_range[1]);
    let (mut w, mut h) = if aspect >= 1.0 { (size, size / aspect) } else { (size * aspect, size) };
    let drift = if config.scale_drift > 0.0 { rng.gen_range(-config.scale_drift..=config.scale_drift) } else { 0.0 };
    let speed = rng.gen_range(config.speed_range[0]..=config.speed_range[1]);
    let heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (mut vx, mut vy) = (speed * heading.cos(), speed * heading.sin());
    let mut cx = rng.gen_range(w / 2.0 + 4.0..fw - w / 2.0 - 4.0);
    let mut cy = rng.gen_range(h / 2.0 + 4.0..fh - h / 2.0 - 4.0);

    let mut frames = Vec::with_capacity(config.frames_per_video);
    let mut gt = Vec::with_capacity(config.frames_per_video);
    for t in 0..config.frames_per_video {
        if t > 0 {
            if rng.gen::<f64>() < config.direction_change_prob {
                let turn: f64 = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                let (s, c) = turn.sin_cos();
                (vx, vy) = (vx * c - vy * s, vx * s + vy * c);
            }
            let (jx, jy) = (config.jitter * gaussian(&mut rng), config.jitter * gaussian(&mut rng));
            if drift != 0.0 {
                let longer = w.max(h) * drift.exp();
                if longer >= config.object_size[0] && longer <= config.object_size[1] {
                    w *= drift.exp();
                    h *= drift.exp();
                }
            }
            cx += vx + jx;
            cy += vy + jy;
            (cx, vx) = reflect(cx, vx, w / 2.0, fw - w / 2.0);
            (cy, vy) = reflect(cy, vy, h / 2.0, fh - h / 2.0);
        }
        let b = BBox::new(cx, cy, w, h);
        frames.push(render(config, &background, &look, &b, &mut rng));
        gt.push(b);
    }
    VideoSequence { id, split: config.split_of(id), frames, gt }
}

fn reflect(mut p: f64, mut v: f64, lo: f64, hi: f64) -> (f64, f64) {
    if p < lo {
        p = (2.0 * lo - p).min(hi);
        v = v.abs();
    } else if p > hi {
        p = (2.0 * hi - p).max(lo);
        v = -v.abs();
    }
    (p, v)
}

fn render(config: &CorpusConfig, bg: &Background, look: &ObjectLook, b: &BBox, rng: &mut ChaCha8Rng) -> Image {
    let (w, h) = (config.frame_width, config.frame_height);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = px >= b.x0() && px <= b.x1() && py >= b.y0() && py <= b.y1() && look.contains(b, px, py);
            let (base, sigma) = if inside {
                (look.color(b, px, py), config.texture_noise)
            } else {
                (bg.pixels[y * bg.width + x], FRAME_NOISE)
            };
            let noise = if sigma > 0.0 { sigma * gaussian(rng) } else { 0.0 };
            for c in base {
                data.push((c + noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image { width: w, height: h, data }
}
