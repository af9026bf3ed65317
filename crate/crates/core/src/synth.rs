//! Synthetic degradations and procedurally textured reference images.
//!
//! Used to build desk-scale datasets with a known severity ordering when the
//! real subjective dataset is not available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::map::GrayImage;
use crate::regression::Artifact;

pub const DEFAULT_BLUR_SIGMAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
pub const DEFAULT_NOISE_SIGMAS: [f64; 5] = [2.0, 5.0, 10.0, 20.0, 40.0];

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(())
}

/// Normalized 1D Gaussian taps with radius `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let taps = gaussian_kernel(sigma)?;
    let r = (taps.len() / 2) as isize;
    let (w, h) = img.dims();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img.get(clamp(x as isize + k as isize - r, w), y))
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    GrayImage::new(w, h, out)
}

/// Adds zero-mean Gaussian noise from a ChaCha8 stream seeded with `seed`,
/// then clips to `[0, 255]`.
pub fn add_white_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    check_sigma(sigma)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .as_slice()
        .iter()
        .map(|&v| (v + normal.sample(&mut rng)).clamp(0.0, 255.0))
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Mean squared difference between two images of equal size.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::invalid("images differ in size"));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.pixel_count() as f64)
}

/// Severity proxy standing in for a subjective score: `10 * log10(1 + MSE)`
/// against the reference. Zero for the reference itself, increasing with distortion.
pub fn proxy_dmos(reference: &GrayImage, distorted: &GrayImage) -> Result<f64> {
    Ok(10.0 * (1.0 + mse(reference, distorted)?).log10())
}

/// Knobs of the procedural reference generator.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureRecipe {
    /// Amplitude of the one-pixel value-noise octave.
    pub fine_amplitude: f64,
    /// Amplitude ratio between an octave and the next finer one.
    pub octave_gain: f64,
    /// Amplitude ceiling for coarse octaves.
    pub max_amplitude: f64,
    pub shapes: usize,
    /// Fraction of the underlying texture kept inside shapes.
    pub shape_texture: f64,
    pub gratings: usize,
}

impl Default for TextureRecipe {
    fn default() -> Self {
        Self {
            fine_amplitude: 7.0,
            octave_gain: 1.0 / 0.6,
            max_amplitude: 90.0,
            shapes: 10,
            shape_texture: 0.4,
            gratings: 2,
        }
    }
}

/// Procedural reference image built from [`TextureRecipe::default`].
pub fn textured_reference(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    textured_reference_with(width, height, seed, &TextureRecipe::default())
}

/// Procedural reference image: multi-octave value noise for texture,
/// hard-edged flat shapes, and patches of oriented gratings. Output is
/// quantized to 8 bits.
pub fn textured_reference_with(
    width: usize,
    height: usize,
    seed: u64,
    recipe: &TextureRecipe,
) -> Result<GrayImage> {
    if width < GrayImage::MIN_SIDE || height < GrayImage::MIN_SIDE {
        return Err(Error::invalid(format!("reference size {width}x{height} too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; width * height];

    // octaves at cell sizes 1, 2, 4, ... up to a quarter of the longer side
    let coarsest = (width.max(height) / 4).max(1);
    let mut cell = 1usize;
    let mut amp = recipe.fine_amplitude;
    while cell <= coarsest {
        let size = cell as f64;
        let gw = width / cell + 2;
        let gh = height / cell + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = amp.min(recipe.max_amplitude);
        for y in 0..height {
            let fy = y as f64 / size;
            let (y0, ty) = (fy.floor() as usize, fy.fract());
            for x in 0..width {
                let fx = x as f64 / size;
                let (x0, tx) = (fx.floor() as usize, fx.fract());
                let g = |i: usize, j: usize| grid[j * gw + i];
                let top = g(x0, y0) * (1.0 - tx) + g(x0 + 1, y0) * tx;
                let bottom = g(x0, y0 + 1) * (1.0 - tx) + g(x0 + 1, y0 + 1) * tx;
                acc[y * width + x] += a * (top * (1.0 - ty) + bottom * ty);
            }
        }
        cell *= 2;
        amp *= recipe.octave_gain;
    }

    for _ in 0..recipe.shapes {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let rx = rng.random_range(width as f64 / 16.0..width as f64 / 4.0);
        let ry = rng.random_range(height as f64 / 16.0..height as f64 / 4.0);
        let disc = rng.random_bool(0.5);
        let level: f64 = rng.random_range(-60.0..60.0);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if disc {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    acc[y * width + x] = recipe.shape_texture * acc[y * width + x] + level;
                }
            }
        }
    }

    for _ in 0..recipe.gratings {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let period: f64 = rng.random_range(4.0..14.0);
        let a: f64 = rng.random_range(6.0..16.0);
        let (s, c) = theta.sin_cos();
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let x1 = (x0 + width / 3).min(width);
        let y1 = (y0 + height / 3).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                let t = (x as f64 * c + y as f64 * s) * std::f64::consts::TAU / period;
                acc[y * width + x] += a * t.sin();
            }
        }
    }

    let data = acc.into_iter().map(|v| (128.0 + v).clamp(0.0, 255.0)).collect();
    Ok(GrayImage::new(width, height, data)?.quantized())
}

/// One image of a synthetic suite.
#[derive(Clone, Debug)]
pub struct SynthRecord {
    pub ref_id: String,
    /// `None` for the undistorted reference.
    pub artifact: Option<Artifact>,
    pub level: f64,
    pub dmos: f64,
    pub image: GrayImage,
}

impl SynthRecord {
    /// File stem used when the suite is written to disk.
    pub fn stem(&self) -> String {
        match self.artifact {
            None => format!("{}_ref", self.ref_id),
            Some(a) => format!("{}_{}_{}", self.ref_id, a, self.level),
        }
    }
}

/// Degradation ladders applied to every reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Ladder {
    pub blur_sigmas: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
}

impl Default for Ladder {
    fn default() -> Self {
        Self {
            blur_sigmas: DEFAULT_BLUR_SIGMAS.to_vec(),
            noise_sigmas: DEFAULT_NOISE_SIGMAS.to_vec(),
        }
    }
}

/// Seed for the noise realization of reference `image_index`, ladder step `level_index`.
pub fn noise_seed(seed: u64, image_index: usize, level_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((image_index as u64) << 16)
        .wrapping_add(level_index as u64)
}

/// Degrades each reference along both ladders. Outputs are quantized to
/// 8 bits, exactly as they would be after a PNG round trip.
pub fn degrade_suite(
    references: &[(String, GrayImage)],
    ladder: &Ladder,
    seed: u64,
    include_references: bool,
) -> Result<Vec<SynthRecord>> {
    let mut out = Vec::new();
    for (i, (ref_id, reference)) in references.iter().enumerate() {
        let reference = reference.quantized();
        if include_references {
            out.push(SynthRecord {
                ref_id: ref_id.clone(),
                artifact: None,
                level: 0.0,
                dmos: 0.0,
                image: reference.clone(),
            });
        }
        for &sigma in &ladder.blur_sigmas {
            let image = gaussian_blur(&reference, sigma)?.quantized();
            out.push(SynthRecord {
                ref_id: ref_id.clone(),
                artifact: Some(Artifact::Blur),
                level: sigma,
                dmos: proxy_dmos(&reference, &image)?,
                image,
            });
        }
        for (j, &sigma) in ladder.noise_sigmas.iter().enumerate() {
            let image = add_white_noise(&reference, sigma, noise_seed(seed, i, j))?.quantized();
            out.push(SynthRecord {
                ref_id: ref_id.clone(),
                artifact: Some(Artifact::Noise),
                level: sigma,
                dmos: proxy_dmos(&reference, &image)?,
                image,
            });
        }
    }
    Ok(out)
}

/// `count` procedural references named `ref00`, `ref01`, ...
pub fn generated_references(
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<(String, GrayImage)>> {
    (0..count)
        .map(|i| {
            let img = textured_reference(width, height, seed.wrapping_add(i as u64 * 7919))?;
            Ok((format!("ref{i:02}"), img))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_sized() {
        let k = gaussian_kernel(1.5).unwrap();
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn blur_keeps_constants_and_mass() {
        let flat = GrayImage::constant(9, 7, 42.0).unwrap();
        let b = gaussian_blur(&flat, 2.0).unwrap();
        assert!(b.as_slice().iter().all(|v| (v - 42.0).abs() < 1e-12));

        let mut data = vec![0.0; 15 * 15];
        data[7 * 15 + 7] = 255.0;
        let impulse = GrayImage::new(15, 15, data).unwrap();
        let b = gaussian_blur(&impulse, 0.1).unwrap();
        assert!((b.as_slice().iter().sum::<f64>() - 255.0).abs() < 1e-9);
        assert!((b.get(7, 7) - 255.0).abs() < 1e-9);
        assert!(gaussian_blur(&impulse, 0.0).is_err());
    }

    #[test]
    fn blur_semigroup_on_interior() {
        let img = textured_reference(64, 64, 3).unwrap();
        let twice = gaussian_blur(&gaussian_blur(&img, 1.2).unwrap(), 1.6).unwrap();
        let once = gaussian_blur(&img, (1.2f64.powi(2) + 1.6f64.powi(2)).sqrt()).unwrap();
        let mut worst = 0.0f64;
        for y in 16..48 {
            for x in 16..48 {
                worst = worst.max((twice.get(x, y) - once.get(x, y)).abs());
            }
        }
        // relative to the 0-255 full scale
        assert!(worst / 255.0 < 1e-3, "worst interior difference {worst}");
    }

    #[test]
    fn noise_is_seeded_and_calibrated() {
        let gray = GrayImage::constant(256, 256, 128.0).unwrap();
        let a = add_white_noise(&gray, 10.0, 5).unwrap();
        assert_eq!(a, add_white_noise(&gray, 10.0, 5).unwrap());
        assert_ne!(a, add_white_noise(&gray, 10.0, 6).unwrap());
        let n = a.pixel_count() as f64;
        let m = a.as_slice().iter().sum::<f64>() / n;
        let sd = (a.as_slice().iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 10.0).abs() < 0.3, "{sd}");

        let tiny = add_white_noise(&gray, 1e-6, 1).unwrap();
        assert!(tiny.as_slice().iter().all(|v| (v - 128.0).abs() < 1e-3));
        assert!(add_white_noise(&gray, 0.0, 1).is_err());
    }

    #[test]
    fn references_are_deterministic_8bit() {
        let a = textured_reference(48, 32, 9).unwrap();
        assert_eq!(a, textured_reference(48, 32, 9).unwrap());
        assert_eq!(a, a.quantized());
        assert_ne!(a, textured_reference(48, 32, 10).unwrap());
    }

    #[test]
    fn suite_layout_and_proxy_ordering() {
        let refs = generated_references(2, 48, 48, 1).unwrap();
        let suite = degrade_suite(&refs, &Ladder::default(), 7, true).unwrap();
        assert_eq!(suite.len(), 2 * 11);
        assert_eq!(suite[0].dmos, 0.0);
        let blur: Vec<f64> = suite[1..6].iter().map(|r| r.dmos).collect();
        assert!(blur.windows(2).all(|w| w[0] < w[1]), "{blur:?}");
    }
}
