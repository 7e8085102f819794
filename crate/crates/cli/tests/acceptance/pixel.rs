//! Independent per-pixel render oracle: a pixel is set iff its half-open
//! pixel box meets some cell's painted rectangle, decided by cross-multiplied
//! integer comparisons. The implementation paints cell rectangles; this
//! decides pixels — two routes to the same image.

use fractal_nerve_core::ifs::GridIfs;

/// `⌊a·W/s⌋ <= px < ⌈(a+1)·W/s⌉`, in pure integers.
fn pixel_covered(a: i64, s: i64, px: usize, extent: usize) -> bool {
    let (px, extent) = (px as i64, extent as i64);
    a * extent < (px + 1) * s && px * s < (a + 1) * extent
}

pub fn oracle_ppm(ifs: &GridIfs, m: usize, width: usize, height: usize) -> Vec<u8> {
    let cells = ifs.approximation_cells(1, m).unwrap();
    let scale = ifs.cell_scale(m).unwrap();
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            let set = cells.iter().any(|c| {
                pixel_covered(c.corner[0], scale[0], x, width)
                    && pixel_covered(c.corner[1], scale[1], y, height)
            });
            let v = if set { 0u8 } else { 255u8 };
            out.extend_from_slice(&[v, v, v]);
        }
    }
    out
}
