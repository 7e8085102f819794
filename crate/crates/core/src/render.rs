//! Raster images of depth-`m` approximations of planar systems.
//!
//! Every depth-`m` cell is painted as the pixel rectangle
//! `[⌊a·W/s⌋, ⌈(a+1)·W/s⌉)` per axis (outward rounding: cells own their
//! closed boxes), with row 0 at the top of the image.

use alloc::vec;
use alloc::vec::Vec;

use crate::ifs::{GridIfs, IfsError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error("rasterization needs a planar system, got dimension {got}")]
    DimensionNotTwo { got: usize },
    #[error("raster dimensions must be positive")]
    EmptyRaster,
}

/// Binary occupancy grid, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Raster {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize) {
        self.bits[y * self.width + x] = true;
    }

    pub fn occupied(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Binary PPM (P6, 8-bit), black occupied on white.
    pub fn ppm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.bits.len() * 3);
        out.extend_from_slice(b"P6\n");
        push_decimal(&mut out, self.width);
        out.push(b' ');
        push_decimal(&mut out, self.height);
        out.extend_from_slice(b"\n255\n");
        for &b in &self.bits {
            let v = if b { 0u8 } else { 255u8 };
            out.extend_from_slice(&[v, v, v]);
        }
        out
    }
}

fn push_decimal(out: &mut Vec<u8>, mut v: usize) {
    let mut digits = [0u8; 20];
    let mut i = digits.len();
    loop {
        i -= 1;
        digits[i] = b'0' + (v % 10) as u8;
        v /= 10;
        if v == 0 {
            break;
        }
    }
    out.extend_from_slice(&digits[i..]);
}

/// Rasterizes the depth-`m` approximation of a planar system.
pub fn raster_2d(
    ifs: &GridIfs,
    m: usize,
    width: usize,
    height: usize,
) -> Result<Raster, RenderError> {
    if ifs.dim() != 2 {
        return Err(RenderError::DimensionNotTwo { got: ifs.dim() });
    }
    if width == 0 || height == 0 {
        return Err(RenderError::EmptyRaster);
    }
    let scale = ifs.cell_scale(m).map_err(RenderError::from)?;
    let (sx, sy) = (scale[0], scale[1]);
    let mut raster = Raster::new(width, height);
    for cell in ifs.approximation_cells(1, m)? {
        let (ax, ay) = (cell.corner[0], cell.corner[1]);
        let x0 = (ax * width as i64).div_euclid(sx) as usize;
        let x1 = div_ceil((ax + 1) * width as i64, sx) as usize;
        let y0 = (ay * height as i64).div_euclid(sy) as usize;
        let y1 = div_ceil((ay + 1) * height as i64, sy) as usize;
        for y in y0..y1.min(height) {
            let row = height - 1 - y; // mathematical y points up
            for x in x0..x1.min(width) {
                raster.set(x, row);
            }
        }
    }
    Ok(raster)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}
