//! Frontal depth maps synthesized from a wheel mask and a rim template,
//! plus the depth-centroid statistics used as a consistency check.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::raster::{Raster16, Raster8, RasterError};
use crate::wheel::{RimTemplate, TemplateError, WheelLayout};

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("mask has no solid pixels")]
    EmptyMask,
    #[error("no depth maps given")]
    EmptyList,
    #[error("mask must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("bad scale sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel depth in mm (larger is farther), row-major from the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub mm_per_pixel: f64,
}

impl DepthMap {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid depth range `(min, max)`, or `None` for an empty map.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
            })
    }

    /// 16-bit encoding: 0 marks invalid pixels, valid depths are min-max
    /// scaled onto `1..=65535`.
    pub fn encode(&self) -> (Raster16, DepthScale) {
        let (min_mm, max_mm) = self.range().unwrap_or((0.0, 0.0));
        let span = max_mm - min_mm;
        let data = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| {
                if !ok {
                    0
                } else if span > 0.0 {
                    1 + ((v - min_mm) / span * 65534.0).round() as u16
                } else {
                    1
                }
            })
            .collect();
        (
            Raster16 { width: self.width, height: self.height, data },
            DepthScale { min_mm, max_mm, mm_per_pixel: self.mm_per_pixel },
        )
    }

    pub fn decode(raster: &Raster16, scale: &DepthScale) -> Self {
        let span = scale.max_mm - scale.min_mm;
        let values = raster
            .data
            .iter()
            .map(|&p| if p == 0 { 0.0 } else { scale.min_mm + (p - 1) as f64 / 65534.0 * span })
            .collect();
        Self {
            width: raster.width,
            height: raster.height,
            values,
            valid: raster.data.iter().map(|&p| p != 0).collect(),
            mm_per_pixel: scale.mm_per_pixel,
        }
    }
}

/// Scale sidecar written next to a depth PNG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthScale {
    pub min_mm: f64,
    pub max_mm: f64,
    pub mm_per_pixel: f64,
}

impl DepthScale {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "min_mm={}", self.min_mm)?;
        writeln!(w, "max_mm={}", self.max_mm)?;
        writeln!(w, "mm_per_pixel={}", self.mm_per_pixel)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, DepthError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut kv = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| DepthError::Sidecar(format!("no '=' in {line:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| DepthError::Sidecar(format!("bad number in {line:?}")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| DepthError::Sidecar(format!("missing {k}")));
        Ok(Self { min_mm: get("min_mm")?, max_mm: get("max_mm")?, mm_per_pixel: get("mm_per_pixel")? })
    }
}

/// Saves `<stem>.png` and `<stem>.txt`.
pub fn save_depth(map: &DepthMap, png_path: &std::path::Path) -> Result<(), DepthError> {
    let (raster, scale) = map.encode();
    raster.write_png(std::io::BufWriter::new(std::fs::File::create(png_path)?))?;
    scale.write(std::fs::File::create(png_path.with_extension("txt"))?)?;
    Ok(())
}

pub fn load_depth(png_path: &std::path::Path) -> Result<DepthMap, DepthError> {
    let raster = Raster16::read_png(std::io::BufReader::new(std::fs::File::open(png_path)?))?;
    let scale = DepthScale::read(std::fs::File::open(png_path.with_extension("txt"))?)?;
    Ok(DepthMap::decode(&raster, &scale))
}

/// Renders the frontal depth of the wheel described by `mask` (solid where
/// the value is at least 128).
///
/// Background, bore, bolt holes and void spoke pixels are invalid. The rim
/// barrel face sits at the template's rim depth; every other solid pixel
/// follows the spoke depth profile.
pub fn synthesize_depth(mask: &Raster8, template: &RimTemplate) -> Result<DepthMap, DepthError> {
    if !mask.is_square() {
        return Err(DepthError::NotSquare(mask.width, mask.height));
    }
    template.validate()?;
    let n = mask.width;
    let layout = WheelLayout::for_template(template, n);
    let (rim_r, barrel_r, bore_r) = (template.rim_radius(), template.barrel_inner_radius(), template.bore_radius());
    let mut values = vec![0.0; n * n];
    let mut valid = vec![false; n * n];
    for py in 0..n {
        for px in 0..n {
            if mask.get(px, py) < 128 {
                continue;
            }
            let (x, y) = layout.pixel_to_mm(px, py);
            let r = (x * x + y * y).sqrt();
            if r > rim_r || r < bore_r || template.in_bolt_hole(x, y) {
                continue;
            }
            let i = py * n + px;
            valid[i] = true;
            values[i] = if r >= barrel_r { template.rim_face_depth() } else { template.spoke_depth(r) };
        }
    }
    if !valid.iter().any(|&v| v) {
        return Err(DepthError::EmptyMask);
    }
    Ok(DepthMap { width: n, height: n, values, valid, mm_per_pixel: layout.mm_per_pixel })
}

/// Mean pixel coordinate `(column, row)` of the valid pixels.
pub fn depth_centroid(d: &DepthMap) -> Result<(f64, f64), DepthError> {
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
    for y in 0..d.height {
        for x in 0..d.width {
            if d.valid[y * d.width + x] {
                sx += x as f64;
                sy += y as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(DepthError::EmptyMask);
    }
    Ok((sx / count as f64, sy / count as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidStats {
    pub mean: (f64, f64),
    /// Population standard deviation per axis.
    pub stddev: (f64, f64),
}

pub fn centroid_statistics(maps: &[DepthMap]) -> Result<CentroidStats, DepthError> {
    let centroids = maps.iter().map(depth_centroid).collect::<Result<Vec<_>, _>>()?;
    centroid_statistics_of(&centroids)
}

pub fn centroid_statistics_of(centroids: &[(f64, f64)]) -> Result<CentroidStats, DepthError> {
    if centroids.is_empty() {
        return Err(DepthError::EmptyList);
    }
    let n = centroids.len() as f64;
    let mx = centroids.iter().map(|c| c.0).sum::<f64>() / n;
    let my = centroids.iter().map(|c| c.1).sum::<f64>() / n;
    let vx = centroids.iter().map(|c| (c.0 - mx).powi(2)).sum::<f64>() / n;
    let vy = centroids.iter().map(|c| (c.1 - my).powi(2)).sum::<f64>() / n;
    Ok(CentroidStats { mean: (mx, my), stddev: (vx.sqrt(), vy.sqrt()) })
}
