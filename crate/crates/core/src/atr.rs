//! Dual-threshold orientation masks and the Anisotropic Texture Richness score.
//!
//! A pixel joins the horizontal-edge mask when its vertical log-curvature
//! reaches `beta * sigma_v` while its horizontal log-curvature stays below
//! `alpha * sigma_h`; the vertical-edge mask is the mirror condition. The
//! score is the fraction of pixels in either mask.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::map::{BoolMap, GrayImage};

/// Threshold multipliers: `alpha` is the orthogonal tolerance, `beta` the activation level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    alpha: f64,
    beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `alpha > beta`: permissive purity, dense masks.
    Texture,
    /// `beta > alpha`: strict purity, sparse masks.
    Saliency,
    /// `alpha == beta`; handled like [`Mode::Texture`] by the pipeline.
    Boundary,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Texture => "texture",
            Mode::Saliency => "saliency",
            Mode::Boundary => "boundary",
        })
    }
}

impl FilterParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!(
                "alpha and beta must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Compile-time constructor for known-good constants.
    pub(crate) const fn const_new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta > 0.0);
        Self { alpha, beta }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> Mode {
        classify_mode(*self)
    }
}

impl fmt::Display for FilterParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, beta={})", self.alpha, self.beta)
    }
}

pub fn classify_mode(params: FilterParams) -> Mode {
    if params.beta > params.alpha {
        Mode::Saliency
    } else if params.alpha > params.beta {
        Mode::Texture
    } else {
        Mode::Boundary
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    pub m_horz: BoolMap,
    pub m_vert: BoolMap,
    pub horz_count: usize,
    pub vert_count: usize,
    pub union_count: usize,
}

impl MaskPair {
    /// Builds a pair from two maps of equal size, filling in the counts.
    pub fn from_maps(m_horz: BoolMap, m_vert: BoolMap) -> Result<Self> {
        if m_horz.dims() != m_vert.dims() {
            return Err(Error::invalid(format!(
                "mask dimensions differ: {:?} vs {:?}",
                m_horz.dims(),
                m_vert.dims()
            )));
        }
        let union_count = m_horz
            .as_slice()
            .iter()
            .zip(m_vert.as_slice())
            .filter(|(&h, &v)| h || v)
            .count();
        Ok(Self {
            horz_count: m_horz.count(),
            vert_count: m_vert.count(),
            union_count,
            m_horz,
            m_vert,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.m_horz.dims()
    }

    pub fn union(&self) -> BoolMap {
        let (w, h) = self.dims();
        BoolMap::from_fn(w, h, |x, y| self.m_horz.get(x, y) || self.m_vert.get(x, y))
    }

    pub fn intersection_count(&self) -> usize {
        self.horz_count + self.vert_count - self.union_count
    }
}

pub fn compute_masks(bundle: &CurvatureBundle, params: FilterParams) -> Result<MaskPair> {
    let dims = bundle.l_h.dims();
    if bundle.l_v.dims() != dims {
        return Err(Error::invalid(format!(
            "normalized maps differ in size: {:?} vs {:?}",
            dims,
            bundle.l_v.dims()
        )));
    }
    let act_h = params.beta * bundle.sigma_h;
    let act_v = params.beta * bundle.sigma_v;
    let tol_h = params.alpha * bundle.sigma_h;
    let tol_v = params.alpha * bundle.sigma_v;
    let (w, h) = dims;
    let m_horz = BoolMap::from_fn(w, h, |x, y| {
        bundle.l_v.get(x, y) >= act_v && bundle.l_h.get(x, y) < tol_h
    });
    let m_vert = BoolMap::from_fn(w, h, |x, y| {
        bundle.l_h.get(x, y) >= act_h && bundle.l_v.get(x, y) < tol_v
    });
    MaskPair::from_maps(m_horz, m_vert)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtrScore {
    /// Fraction of pixels active in either mask, in `[0, 1]`.
    pub value: f64,
    /// Number of pixels active in either mask.
    pub raw_count: usize,
    /// Total pixel count of the analyzed image.
    pub pixels: usize,
    pub params: FilterParams,
}

impl AtrScore {
    /// True when no pixel is active and `ln(ATR)` is undefined.
    pub fn is_degenerate(&self) -> bool {
        self.raw_count == 0
    }

    /// The fraction, raised to one pixel's worth (`1 / pixels`) when zero.
    pub fn clamped_value(&self) -> f64 {
        self.value.max(1.0 / self.pixels as f64)
    }

    /// The count, raised to one pixel when zero.
    pub fn clamped_count(&self) -> f64 {
        self.raw_count.max(1) as f64
    }
}

pub fn atr_score(
    mask: &MaskPair,
    width: usize,
    height: usize,
    params: FilterParams,
) -> Result<AtrScore> {
    if mask.dims() != (width, height) || mask.m_vert.dims() != (width, height) {
        return Err(Error::invalid(format!(
            "mask is {:?}, expected {width}x{height}",
            mask.dims()
        )));
    }
    let pixels = width * height;
    if pixels == 0 {
        return Err(Error::invalid("ATR of an empty image"));
    }
    Ok(AtrScore {
        value: mask.union_count as f64 / pixels as f64,
        raw_count: mask.union_count,
        pixels,
        params,
    })
}

/// Masks and score in one call.
pub fn score_bundle(bundle: &CurvatureBundle, params: FilterParams) -> Result<(MaskPair, AtrScore)> {
    let masks = compute_masks(bundle, params)?;
    let (w, h) = bundle.dims();
    let score = atr_score(&masks, w, h, params)?;
    Ok((masks, score))
}

/// Highlight colors used on overlays.
pub const HORZ_COLOR: [u8; 3] = [255, 0, 0];
pub const VERT_COLOR: [u8; 3] = [0, 255, 0];
pub const BOTH_COLOR: [u8; 3] = [255, 255, 0];

/// Renderable views of a mask pair.
#[derive(Clone, Debug)]
pub struct SaliencyArtifacts {
    pub horz: image::GrayImage,
    pub vert: image::GrayImage,
    pub union: image::GrayImage,
    /// Source image in gray with mask pixels painted in the highlight colors.
    pub overlay: image::RgbImage,
}

pub fn saliency_artifacts(img: &GrayImage, mask: &MaskPair) -> Result<SaliencyArtifacts> {
    if img.dims() != mask.dims() {
        return Err(Error::invalid(format!(
            "image is {:?} but masks are {:?}",
            img.dims(),
            mask.dims()
        )));
    }
    let (w, h) = img.dims();
    let render = |m: &BoolMap| {
        image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([if m.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    };
    let union = mask.union();
    let source = img.to_luma8();
    let overlay = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (xi, yi) = (x as usize, y as usize);
        match (mask.m_horz.get(xi, yi), mask.m_vert.get(xi, yi)) {
            (true, true) => image::Rgb(BOTH_COLOR),
            (true, false) => image::Rgb(HORZ_COLOR),
            (false, true) => image::Rgb(VERT_COLOR),
            (false, false) => {
                let g = source.get_pixel(x, y).0[0];
                image::Rgb([g, g, g])
            }
        }
    });
    Ok(SaliencyArtifacts {
        horz: render(&mask.m_horz),
        vert: render(&mask.m_vert),
        union: render(&union),
        overlay,
    })
}
