//! Directional second-derivative maps and their log-compressed dispersion.
//!
//! Horizontal curvature uses the row kernel `[1, -2, 1]`, vertical curvature
//! its transpose. Borders replicate the edge pixel, so output maps have the
//! input's dimensions and transposing the image exactly swaps the two maps.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::map::{GrayImage, RealMap};

/// Taps of the 1D second-difference kernel.
pub const KERNEL: [f64; 3] = [1.0, -2.0, 1.0];

thread_local! {
    static ANALYSES: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`analyze`] calls made so far on the current thread.
pub fn analyses_on_this_thread() -> u64 {
    ANALYSES.with(Cell::get)
}

/// Everything the mask stage needs from one image.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureBundle {
    pub c_h: RealMap,
    pub c_v: RealMap,
    pub l_h: RealMap,
    pub l_v: RealMap,
    pub sigma_h: f64,
    pub sigma_v: f64,
}

impl CurvatureBundle {
    pub fn dims(&self) -> (usize, usize) {
        self.c_h.dims()
    }

    pub fn pixel_count(&self) -> usize {
        self.c_h.len()
    }

    /// Checks that all maps share dimensions and the stored statistics match
    /// a recomputation from the raw curvature.
    pub fn validate(&self) -> Result<()> {
        let dims = self.c_h.dims();
        for (name, m) in [("c_v", &self.c_v), ("l_h", &self.l_h), ("l_v", &self.l_v)] {
            if m.dims() != dims {
                return Err(Error::invalid(format!(
                    "bundle map {name} is {:?}, expected {dims:?}",
                    m.dims()
                )));
            }
        }
        if log_normalize(&self.c_h)? != self.l_h || log_normalize(&self.c_v)? != self.l_v {
            return Err(Error::invalid("normalized maps do not match ln(1 + |c|)"));
        }
        if dispersion(&self.l_h)? != self.sigma_h || dispersion(&self.l_v)? != self.sigma_v {
            return Err(Error::invalid("stored dispersions do not match the normalized maps"));
        }
        Ok(())
    }

    /// The bundle of the transposed image.
    pub fn transpose(&self) -> Self {
        CurvatureBundle {
            c_h: self.c_v.transpose(),
            c_v: self.c_h.transpose(),
            l_h: self.l_v.transpose(),
            l_v: self.l_h.transpose(),
            sigma_h: self.sigma_v,
            sigma_v: self.sigma_h,
        }
    }
}

/// Returns `(c_h, c_v)`: second differences along rows and along columns.
pub fn compute_curvature(img: &GrayImage) -> Result<(RealMap, RealMap)> {
    let (w, h) = img.dims();
    if w < GrayImage::MIN_SIDE || h < GrayImage::MIN_SIDE {
        return Err(Error::invalid(format!("image {w}x{h} is smaller than 3x3")));
    }
    let [k0, k1, k2] = KERNEL;
    let c_h = RealMap::from_fn(w, h, |x, y| {
        let left = img.get(x.saturating_sub(1), y);
        let right = img.get((x + 1).min(w - 1), y);
        k0 * left + k1 * img.get(x, y) + k2 * right
    });
    let c_v = RealMap::from_fn(w, h, |x, y| {
        let up = img.get(x, y.saturating_sub(1));
        let down = img.get(x, (y + 1).min(h - 1));
        k0 * up + k1 * img.get(x, y) + k2 * down
    });
    Ok((c_h, c_v))
}

/// Pointwise `ln(1 + |c|)`.
pub fn log_normalize(c: &RealMap) -> Result<RealMap> {
    if let Some(i) = c.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite curvature at index {i}")));
    }
    Ok(c.map(|v| v.abs().ln_1p()))
}

/// Population standard deviation over all samples of the map.
///
/// Samples are accumulated in ascending order, which makes the result
/// independent of pixel order: a map and its transpose give bit-identical values.
pub fn dispersion(l: &RealMap) -> Result<f64> {
    if l.is_empty() {
        return Err(Error::invalid("dispersion of an empty map"));
    }
    let mut sorted = l.as_slice().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((ss / n).sqrt())
}

pub fn analyze(img: &GrayImage) -> Result<CurvatureBundle> {
    ANALYSES.with(|n| n.set(n.get() + 1));
    let (c_h, c_v) = compute_curvature(img)?;
    let l_h = log_normalize(&c_h)?;
    let l_v = log_normalize(&c_v)?;
    let sigma_h = dispersion(&l_h)?;
    let sigma_v = dispersion(&l_v)?;
    Ok(CurvatureBundle {
        c_h,
        c_v,
        l_h,
        l_v,
        sigma_h,
        sigma_v,
    })
}
