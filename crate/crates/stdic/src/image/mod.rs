//! Grayscale images and sequences with subpixel evaluation.
//!
//! A [`GrayImage`] stores double-precision intensities together with a
//! precomputed bicubic B-spline coefficient grid, so `sample` and
//! `gradient` are smooth functions defined on the valid interior domain
//! (the pixel grid shrunk by [`MARGIN`] on every border). Outside that
//! domain both operations fail hard; nothing is ever extrapolated.

mod io;
mod spline;

pub use io::{load_image, read_f64_raw, read_pgm, write_f64_raw, write_pgm8, write_pgm16};
pub use spline::MARGIN;

use crate::error::{Error, Result};

/// Immutable grayscale image with a subpixel interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    coeffs: Vec<f64>,
}

impl GrayImage {
    /// Builds the image and its interpolant from a row-major intensity
    /// grid. Intensities are nominally in 0..=255 but any finite values
    /// are accepted; they are stored as-is, never re-quantized.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<GrayImage> {
        if width < 5 || height < 5 {
            return Err(Error::DimensionTooSmall { width, height });
        }
        assert_eq!(
            pixels.len(),
            width * height,
            "pixel buffer length {} does not match {}x{}",
            pixels.len(),
            width,
            height
        );
        let coeffs = spline::prefilter_grid(width, height, &pixels);
        Ok(GrayImage {
            width,
            height,
            pixels,
            coeffs,
        })
    }

    /// Constant-valued image, mostly useful in tests.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<GrayImage> {
        GrayImage::from_pixels(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Stored intensity at an integer pixel.
    #[inline]
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Inclusive bounds of the valid interior domain.
    pub fn domain(&self) -> (f64, f64, f64, f64) {
        (
            MARGIN as f64,
            (self.width - 1 - MARGIN) as f64,
            MARGIN as f64,
            (self.height - 1 - MARGIN) as f64,
        )
    }

    /// Whether `(x, y)` lies in the valid interior domain.
    #[inline]
    pub fn in_domain(&self, x: f64, y: f64) -> bool {
        let (x0, x1, y0, y1) = self.domain();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    #[inline]
    fn tap_base(&self, x: f64, y: f64) -> Result<(usize, f64, f64)> {
        if !self.in_domain(x, y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let ix = x.floor() as usize;
        let iy = y.floor() as usize;
        let tx = x - ix as f64;
        let ty = y - iy as f64;
        // Coefficient indices are shifted by one; the 4x4 tap block for
        // floor index i starts at coefficient column i.
        Ok((iy * (self.width + 2) + ix, tx, ty))
    }

    /// Subpixel intensity from the spline interpolant.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Result<f64> {
        let (base, tx, ty) = self.tap_base(x, y)?;
        let wx = spline::weights(tx);
        let wy = spline::weights(ty);
        let stride = self.width + 2;
        let mut value = 0.0;
        for (j, wyj) in wy.iter().enumerate() {
            let row = &self.coeffs[base + j * stride..base + j * stride + 4];
            let acc = row[0] * wx[0] + row[1] * wx[1] + row[2] * wx[2] + row[3] * wx[3];
            value += wyj * acc;
        }
        Ok(value)
    }

    /// Analytic spatial gradient of the interpolant, `(dI/dx, dI/dy)`.
    #[inline]
    pub fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (_, gx, gy) = self.sample_with_gradient(x, y)?;
        Ok((gx, gy))
    }

    /// Value and gradient in one coefficient pass.
    #[inline]
    pub fn sample_with_gradient(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let (base, tx, ty) = self.tap_base(x, y)?;
        let wx = spline::weights(tx);
        let wy = spline::weights(ty);
        let dx = spline::dweights(tx);
        let dy = spline::dweights(ty);
        let stride = self.width + 2;
        let mut value = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for j in 0..4 {
            let row = &self.coeffs[base + j * stride..base + j * stride + 4];
            let acc_w = row[0] * wx[0] + row[1] * wx[1] + row[2] * wx[2] + row[3] * wx[3];
            let acc_d = row[0] * dx[0] + row[1] * dx[1] + row[2] * dx[2] + row[3] * dx[3];
            value += wy[j] * acc_w;
            gx += wy[j] * acc_d;
            gy += dy[j] * acc_w;
        }
        Ok((value, gx, gy))
    }

    /// Mean stored intensity.
    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Population standard deviation of the stored intensities.
    pub fn sdev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .pixels
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.pixels.len() as f64;
        var.sqrt()
    }
}

/// Ordered list of same-sized frames with a fixed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    frames: Vec<GrayImage>,
    frame_interval: f64,
}

impl ImageSequence {
    /// `frame_interval` is the physical time per frame step (seconds); use
    /// 1.0 when frames are the natural time unit.
    pub fn new(frames: Vec<GrayImage>, frame_interval: f64) -> Result<ImageSequence> {
        let first = frames.first().ok_or(Error::DimensionTooSmall {
            width: 0,
            height: 0,
        })?;
        let (w, h) = (first.width(), first.height());
        for f in &frames {
            if f.width() != w || f.height() != h {
                return Err(Error::LengthMismatch {
                    left: w * h,
                    right: f.width() * f.height(),
                });
            }
        }
        Ok(ImageSequence {
            frames,
            frame_interval,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> &GrayImage {
        &self.frames[index]
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Physical time of a frame index.
    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 * self.frame_interval
    }
}

/// Square measurement subset centered on an integer reference pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetRegion {
    center: (i64, i64),
    half_width: usize,
}

impl SubsetRegion {
    /// `half_width >= 2`, giving an odd subset size `n = 2 * half + 1 >= 5`.
    pub fn new(cx: i64, cy: i64, half_width: usize) -> Result<SubsetRegion> {
        if half_width < 2 {
            return Err(Error::InvalidPlan {
                reason: format!("subset half-width {half_width} gives n < 5"),
            });
        }
        Ok(SubsetRegion {
            center: (cx, cy),
            half_width,
        })
    }

    pub fn center(&self) -> (i64, i64) {
        self.center
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Subset size `n` (odd).
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Number of pixels `n^2`.
    pub fn pixel_count(&self) -> usize {
        self.size() * self.size()
    }

    /// Checks that the subset plus the interpolation margin fits inside
    /// the image.
    pub fn validate_in(&self, image: &GrayImage) -> Result<()> {
        let (x0, x1, y0, y1) = image.domain();
        let h = self.half_width as i64;
        let (cx, cy) = self.center;
        let fits = (cx - h) as f64 >= x0
            && (cx + h) as f64 <= x1
            && (cy - h) as f64 >= y0
            && (cy + h) as f64 <= y1;
        if fits {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                x: cx as f64,
                y: cy as f64,
            })
        }
    }

    /// Local offsets in row-major order.
    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let h = self.half_width as i64;
        (-h..=h).flat_map(move |dy| (-h..=h).map(move |dx| (dx, dy)))
    }
}
