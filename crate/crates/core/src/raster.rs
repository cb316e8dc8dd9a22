//! Square grayscale rasters and their PNG encoding.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
}

/// 8-bit grayscale raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Raster8 {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// Rotates a square raster by 90 degrees counter-clockwise (exact).
    pub fn rotated90(&self) -> Self {
        let n = self.width;
        assert!(self.is_square());
        let mut out = Self::new(n, n);
        for y in 0..n {
            for x in 0..n {
                // (x, y) with y down; CCW rotation sends the top-right corner to the top-left
                out.set(y, n - 1 - x, self.get(x, y));
            }
        }
        out
    }

    /// Nearest-neighbour rotation about the raster centre by `angle` radians
    /// (counter-clockwise as displayed). Pixels sampled from outside become 0.
    pub fn rotated(&self, angle: f64) -> Self {
        let (w, h) = (self.width as f64, self.height as f64);
        let (s, c) = angle.sin_cos();
        let mut out = Self::new(self.width, self.height);
        for py in 0..self.height {
            for px in 0..self.width {
                let x = px as f64 + 0.5 - w / 2.0;
                let y = h / 2.0 - py as f64 - 0.5;
                // inverse rotation
                let sx = c * x + s * y;
                let sy = -s * x + c * y;
                let qx = (sx + w / 2.0 - 0.5).round();
                let qy = (h / 2.0 - sy - 0.5).round();
                if qx >= 0.0 && qy >= 0.0 && qx < w && qy < h {
                    out.set(px, py, self.get(qx as usize, qy as usize));
                }
            }
        }
        out
    }

    pub fn write_png<W: Write>(&self, w: W) -> Result<(), RasterError> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.data)?;
        writer.finish()?;
        Ok(())
    }

    pub fn read_png<R: Read>(r: R) -> Result<Self, RasterError> {
        let (info, buf) = decode(r)?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(RasterError::Unsupported(format!("{:?} {:?}", info.color_type, info.bit_depth)));
        }
        let (width, height) = (info.width as usize, info.height as usize);
        let mut data = Vec::with_capacity(width * height);
        for row in buf.chunks(info.line_size).take(height) {
            data.extend_from_slice(&row[..width]);
        }
        Ok(Self { width, height, data })
    }
}

/// 16-bit grayscale raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster16 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl Raster16 {
    pub fn write_png<W: Write>(&self, w: W) -> Result<(), RasterError> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header()?;
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&bytes)?;
        writer.finish()?;
        Ok(())
    }

    pub fn read_png<R: Read>(r: R) -> Result<Self, RasterError> {
        let (info, buf) = decode(r)?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
            return Err(RasterError::Unsupported(format!("{:?} {:?}", info.color_type, info.bit_depth)));
        }
        let (width, height) = (info.width as usize, info.height as usize);
        let mut data = Vec::with_capacity(width * height);
        for row in buf.chunks(info.line_size).take(height) {
            data.extend(row[..2 * width].chunks(2).map(|b| u16::from_be_bytes([b[0], b[1]])));
        }
        Ok(Self { width, height, data })
    }
}

fn decode<R: Read>(r: R) -> Result<(png::OutputInfo, Vec<u8>), RasterError> {
    let mut reader = png::Decoder::new(r).read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    Ok((info, buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_8_and_16_bit() {
        let mut r = Raster8::new(5, 3);
        r.set(4, 2, 200);
        r.set(0, 1, 7);
        let mut bytes = Vec::new();
        r.write_png(&mut bytes).unwrap();
        assert_eq!(Raster8::read_png(bytes.as_slice()).unwrap(), r);

        let r16 = Raster16 { width: 3, height: 2, data: vec![0, 1, 65535, 300, 9, 40000] };
        let mut bytes = Vec::new();
        r16.write_png(&mut bytes).unwrap();
        assert_eq!(Raster16::read_png(bytes.as_slice()).unwrap(), r16);
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let mut r = Raster8::new(4, 4);
        for (i, v) in r.data.iter_mut().enumerate() {
            *v = i as u8;
        }
        assert_eq!(r.rotated90().rotated90().rotated90().rotated90(), r);
        // top-right pixel moves to top-left under a CCW turn
        assert_eq!(r.rotated90().get(0, 0), r.get(3, 0));
        assert_eq!(r.rotated(0.0), r);
    }
}
