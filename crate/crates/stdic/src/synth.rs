//! Synthetic ground-truth experiments: speckle patterns, exact Fourier
//! subpixel shifting, parametric displacement histories and seeded noise.
//!
//! Reproducibility: every random stream comes from ChaCha8 seeded with the
//! experiment's 64-bit seed; the speckle generator uses stream 0 and the
//! noise of frame `t` uses stream `t + 1`. Gaussian deviates are produced
//! by the Box-Muller transform from 53-bit uniforms, so identical seeds
//! give identical sequences on any platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{GrayImage, ImageSequence};

/// Uniform deviate in (0, 1] with 53-bit resolution.
#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviate via Box-Muller.
#[inline]
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Additive Gaussian noise description. `level` is the noise standard
/// deviation as a fraction of the 255 grayscale range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none(seed: u64) -> NoiseSpec {
        NoiseSpec { level: 0.0, seed }
    }
}

/// Parametric displacement history applied to a reference image.
///
/// Time `t` is `frame_index * frame_interval`; frame 0 is always the
/// undeformed reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionKind {
    /// `u(t) = t / 20` pixels per frame index, `v = 0`.
    Translation,
    /// Damped vibration `u(t) = 10 e^{-2t} sin 10t`,
    /// `v(t) = 10 e^{-3t} sin 5t`, with `t` in seconds.
    Vibration,
    /// Constant velocity in pixels per frame.
    ConstantVelocity { u_rate: f64, v_rate: f64 },
    /// Uniform biaxial strain about the image center, linear in the frame
    /// index (strain per frame).
    UniformStrain { ex_rate: f64, ey_rate: f64 },
}

/// A motion program: the law plus the sampling of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProgram {
    pub kind: MotionKind,
    /// Number of deformed frames following the reference frame.
    pub frame_count: usize,
    /// Physical seconds per frame step.
    pub frame_interval: f64,
}

impl MotionProgram {
    /// The 20-frame subpixel translation protocol (0.05 px per frame).
    pub fn translation() -> MotionProgram {
        MotionProgram {
            kind: MotionKind::Translation,
            frame_count: 20,
            frame_interval: 1.0,
        }
    }

    /// The 200-frame damped-vibration protocol, 0.01 s per frame.
    pub fn vibration() -> MotionProgram {
        MotionProgram {
            kind: MotionKind::Vibration,
            frame_count: 199,
            frame_interval: 0.01,
        }
    }

    /// Total number of frames in the rendered sequence (reference + deformed).
    pub fn sequence_len(&self) -> usize {
        self.frame_count + 1
    }

    /// Rigid translation of frame `index`, if the motion is a pure
    /// translation law.
    fn translation_at(&self, index: usize) -> Option<(f64, f64)> {
        let t = index as f64 * self.frame_interval;
        match self.kind {
            MotionKind::Translation => Some((index as f64 / 20.0, 0.0)),
            MotionKind::Vibration => Some((
                10.0 * (-2.0 * t).exp() * (10.0 * t).sin(),
                10.0 * (-3.0 * t).exp() * (5.0 * t).sin(),
            )),
            MotionKind::ConstantVelocity { u_rate, v_rate } => {
                Some((u_rate * index as f64, v_rate * index as f64))
            }
            MotionKind::UniformStrain { .. } => None,
        }
    }

    fn strain_at(&self, index: usize) -> Option<(f64, f64)> {
        match self.kind {
            MotionKind::UniformStrain { ex_rate, ey_rate } => {
                Some((ex_rate * index as f64, ey_rate * index as f64))
            }
            _ => None,
        }
    }

    /// Largest displacement magnitude over all frames and (for strain
    /// fields) over the image extent.
    pub fn max_displacement(&self, width: usize, height: usize) -> f64 {
        (0..self.sequence_len())
            .map(|i| match self.kind {
                MotionKind::UniformStrain { .. } => {
                    let (ex, ey) = self.strain_at(i).unwrap();
                    let rx = width as f64 / 2.0;
                    let ry = height as f64 / 2.0;
                    (ex.abs() * rx).max(ey.abs() * ry)
                }
                _ => {
                    let (u, v) = self.translation_at(i).unwrap();
                    u.abs().max(v.abs())
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Exact per-frame displacement field of a rendered sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    /// Rigid translation per frame.
    Translation { shifts: Vec<(f64, f64)> },
    /// Uniform strain per frame about `center` (reference coordinates).
    UniformStrain {
        strains: Vec<(f64, f64)>,
        center: (f64, f64),
    },
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        match self {
            GroundTruth::Translation { shifts } => shifts.len(),
            GroundTruth::UniformStrain { strains, .. } => strains.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Displacement of the material point at reference position `(x, y)`
    /// between frame 0 and `frame`.
    pub fn displacement(&self, frame: usize, x: f64, y: f64) -> (f64, f64) {
        match self {
            GroundTruth::Translation { shifts } => shifts[frame],
            GroundTruth::UniformStrain { strains, center } => {
                let (ex, ey) = strains[frame];
                (ex * (x - center.0), ey * (y - center.1))
            }
        }
    }

    /// Uniform strain components of a frame, when the motion is a strain
    /// field.
    pub fn strain(&self, frame: usize) -> Option<(f64, f64)> {
        match self {
            GroundTruth::UniformStrain { strains, .. } => Some(strains[frame]),
            GroundTruth::Translation { .. } => None,
        }
    }
}

/// Generates a speckle pattern: Gaussian blobs at uniform random positions,
/// wrapped periodically, normalized to mean 128 and clamped smoothly into
/// `[10, 245]`. Deterministic per seed.
///
/// `speckle_radius` is the Gaussian sigma of a blob in pixels and `density`
/// the expected number of blobs per pixel.
pub fn make_speckle(
    width: usize,
    height: usize,
    seed: u64,
    speckle_radius: f64,
    density: f64,
) -> GrayImage {
    assert!(width >= 64 && height >= 64, "speckle needs at least 64x64");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);

    let mut field = vec![0.0f64; width * height];
    let blob_count = (density * (width * height) as f64).round() as usize;
    let support = (4.0 * speckle_radius).ceil() as i64;
    let inv_two_sigma_sq = 1.0 / (2.0 * speckle_radius * speckle_radius);

    for _ in 0..blob_count {
        let bx = uniform(&mut rng) * width as f64;
        let by = uniform(&mut rng) * height as f64;
        let amplitude = 0.5 + uniform(&mut rng);
        let ix = bx.floor() as i64;
        let iy = by.floor() as i64;
        for dy in -support..=support {
            let y = (iy + dy).rem_euclid(height as i64) as usize;
            let fy = (iy + dy) as f64 - by;
            for dx in -support..=support {
                let x = (ix + dx).rem_euclid(width as i64) as usize;
                let fx = (ix + dx) as f64 - bx;
                field[y * width + x] +=
                    amplitude * (-(fx * fx + fy * fy) * inv_two_sigma_sq).exp();
            }
        }
    }

    // Normalize to a fixed mean and spread, then soft-clip so every value
    // stays strictly inside [10, 245] without introducing kinks.
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let sdev = (field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let scale = if sdev > 0.0 { 48.0 / sdev } else { 0.0 };
    let headroom = 107.0;
    let mut pixels: Vec<f64> = field
        .iter()
        .map(|v| 128.0 + headroom * ((v - mean) * scale / headroom).tanh())
        .collect();
    // The soft clip spreads a little energy up to the Nyquist frequency;
    // remove it so Fourier-shifted copies of the pattern are exact
    // band-limited translations.
    spectral_lowpass(&mut pixels, width, height);
    GrayImage::from_pixels(width, height, pixels).expect("dimensions checked above")
}

/// Radial supergaussian low-pass at 0.35 cycles/px. Passes the speckle
/// band nearly untouched and crushes the Nyquist bins to below 1e-15.
fn spectral_lowpass(pixels: &mut [f64], width: usize, height: usize) {
    let mut data: Vec<Complex<f64>> = pixels.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    fft_2d(&mut planner, width, height, &mut data, false);
    for y in 0..height {
        let ky = if y <= height / 2 { y as f64 } else { y as f64 - height as f64 };
        let fy = ky / height as f64;
        for x in 0..width {
            let kx = if x <= width / 2 { x as f64 } else { x as f64 - width as f64 };
            let fx = kx / width as f64;
            let r2 = (fx * fx + fy * fy) / (0.35 * 0.35);
            data[y * width + x] *= (-r2.powi(5)).exp();
        }
    }
    fft_2d(&mut planner, width, height, &mut data, true);
    let norm = 1.0 / (width * height) as f64;
    for (p, c) in pixels.iter_mut().zip(&data) {
        *p = c.re * norm;
    }
}

fn fft_2d(
    planner: &mut FftPlanner<f64>,
    width: usize,
    height: usize,
    data: &mut [Complex<f64>],
    inverse: bool,
) {
    let dir = if inverse {
        rustfft::FftDirection::Inverse
    } else {
        rustfft::FftDirection::Forward
    };
    let row_fft = planner.plan_fft(width, dir);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(height, dir);
    let mut column = vec![Complex::default(); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Phase factors for a 1D shift, conjugate-symmetric: the Nyquist bin of an
/// even-length axis keeps only the real part of its phase so the shifted
/// image stays exactly real.
fn phase_ramp(n: usize, shift: f64) -> Vec<Complex<f64>> {
    (0..n)
        .map(|k| {
            let freq = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
            let angle = -std::f64::consts::TAU * freq as f64 * shift / n as f64;
            if n % 2 == 0 && k == n / 2 {
                Complex::new(angle.cos(), 0.0)
            } else {
                Complex::from_polar(1.0, angle)
            }
        })
        .collect()
}

/// Translates an image by `(dx, dy)` pixels with an exact band-limited
/// (periodic) Fourier shift. Content wraps around the borders.
pub fn fourier_shift(image: &GrayImage, dx: f64, dy: f64) -> GrayImage {
    let width = image.width();
    let height = image.height();
    let mut data: Vec<Complex<f64>> = image
        .pixels()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    fft_2d(&mut planner, width, height, &mut data, false);

    let px = phase_ramp(width, dx);
    let py = phase_ramp(height, dy);
    for y in 0..height {
        for x in 0..width {
            data[y * width + x] *= px[x] * py[y];
        }
    }

    fft_2d(&mut planner, width, height, &mut data, true);
    let norm = 1.0 / (width * height) as f64;
    let pixels = data.iter().map(|c| c.re * norm).collect();
    GrayImage::from_pixels(width, height, pixels).expect("same dimensions as input")
}

/// Dense backward warp for a uniform-strain frame: the deformed image reads
/// the base through the inverse of `x = X + e (X - c)`. Source points that
/// fall outside the interpolable interior (a ring of border pixels at most)
/// are clamped to it.
fn strain_warp(base: &GrayImage, ex: f64, ey: f64) -> GrayImage {
    let width = base.width();
    let height = base.height();
    let cx = (width - 1) as f64 / 2.0;
    let cy = (height - 1) as f64 / 2.0;
    let (x0, x1, y0, y1) = base.domain();
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let sy = (cy + (y as f64 - cy) / (1.0 + ey)).clamp(y0, y1);
        for x in 0..width {
            let sx = (cx + (x as f64 - cx) / (1.0 + ex)).clamp(x0, x1);
            pixels.push(base.sample(sx, sy).expect("clamped into domain"));
        }
    }
    GrayImage::from_pixels(width, height, pixels).expect("same dimensions as base")
}

fn add_noise(pixels: &mut [f64], level: f64, seed: u64, frame: usize) {
    if level == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64 + 1);
    let sigma = level * 255.0;
    for p in pixels.iter_mut() {
        *p += sigma * standard_normal(&mut rng);
    }
}

/// Adds the seeded per-frame noise streams to a clean sequence. Rendering
/// at noise 0 and applying this afterwards is bit-identical to rendering
/// with the noise directly, so one clean render can serve several noise
/// levels.
pub fn with_noise(clean: &ImageSequence, noise: &NoiseSpec) -> Result<ImageSequence> {
    if noise.level == 0.0 {
        return Ok(clean.clone());
    }
    let mut frames = Vec::with_capacity(clean.len());
    for (index, frame) in clean.frames().iter().enumerate() {
        let mut pixels = frame.pixels().to_vec();
        add_noise(&mut pixels, noise.level, noise.seed, index);
        frames.push(GrayImage::from_pixels(frame.width(), frame.height(), pixels)?);
    }
    ImageSequence::new(frames, clean.frame_interval())
}

/// Renders a deformed image sequence plus its exact ground truth.
///
/// Frame 0 is the reference; translations are applied with
/// [`fourier_shift`], strain fields with a dense backward warp through the
/// base interpolant. Noise (including on frame 0) is unquantized and
/// unclipped; pass the result through an 8-bit quantizer explicitly if a
/// quantized study is wanted.
pub fn render_sequence(
    base: &GrayImage,
    motion: &MotionProgram,
    noise: &NoiseSpec,
) -> Result<(ImageSequence, GroundTruth)> {
    let width = base.width();
    let height = base.height();
    let max_disp = motion.max_displacement(width, height);
    if 2.0 * (max_disp + 16.0) >= width.min(height) as f64 {
        return Err(Error::MotionTooLarge {
            max_displacement: max_disp,
            width,
            height,
        });
    }

    let mut frames = Vec::with_capacity(motion.sequence_len());
    let truth = match motion.kind {
        MotionKind::UniformStrain { .. } => {
            let mut strains = Vec::with_capacity(motion.sequence_len());
            for index in 0..motion.sequence_len() {
                let (ex, ey) = motion.strain_at(index).unwrap();
                strains.push((ex, ey));
                let clean = if ex == 0.0 && ey == 0.0 {
                    base.clone()
                } else {
                    strain_warp(base, ex, ey)
                };
                let mut pixels = clean.pixels().to_vec();
                add_noise(&mut pixels, noise.level, noise.seed, index);
                frames.push(GrayImage::from_pixels(width, height, pixels)?);
            }
            GroundTruth::UniformStrain {
                strains,
                center: ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0),
            }
        }
        _ => {
            let mut shifts = Vec::with_capacity(motion.sequence_len());
            for index in 0..motion.sequence_len() {
                let (u, v) = motion.translation_at(index).unwrap();
                shifts.push((u, v));
                let clean = if u == 0.0 && v == 0.0 {
                    base.clone()
                } else {
                    fourier_shift(base, u, v)
                };
                let mut pixels = clean.pixels().to_vec();
                add_noise(&mut pixels, noise.level, noise.seed, index);
                frames.push(GrayImage::from_pixels(width, height, pixels)?);
            }
            GroundTruth::Translation { shifts }
        }
    };

    let sequence = ImageSequence::new(frames, motion.frame_interval)?;
    Ok((sequence, truth))
}
