//! Region covariance descriptors.
//!
//! Derivatives are central differences with clamped borders:
//! `I_x = (I[x+1] − I[x−1]) / 2`, `I_xx = I[x+1] − 2I[x] + I[x−1]`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// Planar image with samples nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    planes: Vec<Vec<f64>>,
}

impl RasterImage {
    /// `planes` holds one row-major plane per channel (1 = gray, 3 = RGB).
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        if planes.len() != 1 && planes.len() != 3 {
            return Err(Error::Image(format!(
                "{} channels, expected 1 or 3",
                planes.len()
            )));
        }
        if let Some(p) = planes.iter().find(|p| p.len() != width * height) {
            return Err(Error::Image(format!(
                "plane has {} samples, expected {}",
                p.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let planes = (0..channels)
            .map(|c| {
                (0..width * height)
                    .map(|i| f(c, i % width, i / width))
                    .collect()
            })
            .collect();
        Self::new(width, height, planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }

    /// Area-averaging resample to `new_w × new_h`.
    pub fn downsample_box(&self, new_w: usize, new_h: usize) -> Result<Self> {
        if new_w == 0 || new_h == 0 || new_w > self.width || new_h > self.height {
            return Err(Error::InvalidParameter(format!(
                "cannot box-resample {}x{} to {new_w}x{new_h}",
                self.width, self.height
            )));
        }
        let wx = box_weights(self.width, new_w);
        let wy = box_weights(self.height, new_h);
        let planes = self
            .planes
            .iter()
            .map(|p| {
                let mut out = vec![0.0; new_w * new_h];
                for (oy, row_w) in wy.iter().enumerate() {
                    for (ox, col_w) in wx.iter().enumerate() {
                        let mut acc = 0.0;
                        for &(sy, fy) in row_w {
                            for &(sx, fx) in col_w {
                                acc += fy * fx * p[sy * self.width + sx];
                            }
                        }
                        out[oy * new_w + ox] = acc;
                    }
                }
                out
            })
            .collect();
        Self::new(new_w, new_h, planes)
    }
}

/// For each output cell, the overlapping source cells and their normalized
/// overlap fractions.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut cells = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src {
                let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    cells.push((s, overlap / scale));
                }
                s += 1;
            }
            cells
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    /// `(I, |I_x|, |I_y|, |I_xx|, |I_yy|)` on a gray image.
    Gray5,
    /// `(x, y, R, G, B, |R_x|, |G_x|, |B_x|, |R_y|, |G_y|, |B_y|,
    /// |R_xx|, |G_xx|, |B_xx|, |R_yy|, |G_yy|, |B_yy|)` on an RGB image.
    Color17,
}

impl FeatureVariant {
    pub fn dim(self) -> usize {
        match self {
            FeatureVariant::Gray5 => 5,
            FeatureVariant::Color17 => 17,
        }
    }

    pub fn channels(self) -> usize {
        match self {
            FeatureVariant::Gray5 => 1,
            FeatureVariant::Color17 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureVariant::Gray5 => "gray5",
            FeatureVariant::Color17 => "color17",
        }
    }
}

impl std::str::FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray5" => Ok(Self::Gray5),
            "color17" => Ok(Self::Color17),
            other => Err(Error::InvalidParameter(format!(
                "unknown feature variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureSpec {
    pub variant: FeatureVariant,
    pub reg_epsilon: f64,
}

impl FeatureSpec {
    pub fn new(variant: FeatureVariant) -> Self {
        Self {
            variant,
            reg_epsilon: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionSpec {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

/// Per-pixel feature vectors, pixel-major, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureField {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * dim {
            return Err(Error::DimensionMismatch {
                expected: width * height * dim,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            dim,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.dim;
        &self.data[start..start + self.dim]
    }
}

struct Derivatives {
    dx: f64,
    dy: f64,
    dxx: f64,
    dyy: f64,
}

fn derivatives(img: &RasterImage, c: usize, x: usize, y: usize) -> Derivatives {
    let xl = x.saturating_sub(1);
    let xr = (x + 1).min(img.width - 1);
    let yu = y.saturating_sub(1);
    let yd = (y + 1).min(img.height - 1);
    let center = img.get(c, x, y);
    let (l, r) = (img.get(c, xl, y), img.get(c, xr, y));
    let (u, d) = (img.get(c, x, yu), img.get(c, x, yd));
    Derivatives {
        dx: 0.5 * (r - l),
        dy: 0.5 * (d - u),
        dxx: r - 2.0 * center + l,
        dyy: d - 2.0 * center + u,
    }
}

pub fn feature_stack(img: &RasterImage, spec: &FeatureSpec) -> Result<FeatureField> {
    let variant = spec.variant;
    if img.channels() != variant.channels() {
        return Err(Error::SpecChannelMismatch {
            variant: variant.name(),
            expected: variant.channels(),
            found: img.channels(),
        });
    }
    let dim = variant.dim();
    let mut data = Vec::with_capacity(img.width * img.height * dim);
    for y in 0..img.height {
        for x in 0..img.width {
            match variant {
                FeatureVariant::Gray5 => {
                    let d = derivatives(img, 0, x, y);
                    data.extend_from_slice(&[
                        img.get(0, x, y),
                        d.dx.abs(),
                        d.dy.abs(),
                        d.dxx.abs(),
                        d.dyy.abs(),
                    ]);
                }
                FeatureVariant::Color17 => {
                    let d: Vec<Derivatives> = (0..3).map(|c| derivatives(img, c, x, y)).collect();
                    data.extend_from_slice(&[x as f64, y as f64]);
                    data.extend((0..3).map(|c| img.get(c, x, y)));
                    data.extend(d.iter().map(|d| d.dx.abs()));
                    data.extend(d.iter().map(|d| d.dy.abs()));
                    data.extend(d.iter().map(|d| d.dxx.abs()));
                    data.extend(d.iter().map(|d| d.dyy.abs()));
                }
            }
        }
    }
    FeatureField::new(img.width, img.height, dim, data)
}

/// Sample covariance of the features inside `region`, regularized by
/// `reg_epsilon · (trace(C₀)/F + 1) · I`.
pub fn region_covariance(
    field: &FeatureField,
    region: &RegionSpec,
    reg_epsilon: f64,
) -> Result<SpdMatrix> {
    let RegionSpec { x0, y0, w, h } = *region;
    if w * h < 2 || x0 + w > field.width || y0 + h > field.height {
        return Err(Error::RegionOutOfBounds {
            x0,
            y0,
            w,
            h,
            width: field.width,
            height: field.height,
        });
    }
    let f = field.dim;
    let m = w * h;
    let mut samples = DMatrix::zeros(f, m);
    for (k, (x, y)) in (y0..y0 + h)
        .flat_map(|y| (x0..x0 + w).map(move |x| (x, y)))
        .enumerate()
    {
        samples.column_mut(k).copy_from_slice(field.at(x, y));
    }
    let mean: DVector<f64> = samples.column_sum() / m as f64;
    for mut col in samples.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &samples * samples.transpose() / (m - 1) as f64;
    let shift = reg_epsilon * (cov.trace() / f as f64 + 1.0);
    for i in 0..f {
        cov[(i, i)] += shift;
    }
    SpdMatrix::new(cov)
}

/// Row-major non-overlapping tiles covering the image.
pub fn tile(img: &RasterImage, tile_w: usize, tile_h: usize) -> Result<Vec<RegionSpec>> {
    if tile_w == 0
        || tile_h == 0
        || !img.width.is_multiple_of(tile_w)
        || !img.height.is_multiple_of(tile_h)
    {
        return Err(Error::NotDivisible {
            width: img.width,
            height: img.height,
            tile_w,
            tile_h,
        });
    }
    Ok((0..img.height / tile_h)
        .flat_map(|ty| {
            (0..img.width / tile_w).map(move |tx| RegionSpec {
                x0: tx * tile_w,
                y0: ty * tile_h,
                w: tile_w,
                h: tile_h,
            })
        })
        .collect())
}

/// One covariance descriptor per tile.
pub fn extract_descriptors(
    img: &RasterImage,
    spec: &FeatureSpec,
    tile_w: usize,
    tile_h: usize,
) -> Result<Vec<SpdMatrix>> {
    let field = feature_stack(img, spec)?;
    tile(img, tile_w, tile_h)?
        .iter()
        .map(|r| region_covariance(&field, r, spec.reg_epsilon))
        .collect()
}
