//! Binary greymap (P5) heatmaps, one pixel per cell.
//!
//! Values are min-max scaled per image to `0..=255`; a map with zero range
//! renders as all zeros. Each marked cell inverts a 3x3 `x` (the cell and
//! its four diagonal neighbours), clipped to the image.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use dreammap::GridMap;

use crate::error::CliError;

/// 8-bit pixels of `map`, row-major, before marks are applied.
pub fn scale_pixels(map: &GridMap) -> Vec<u8> {
    let (lo, hi) = (map.min(), map.max());
    let span = hi - lo;
    map.values()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect()
}

/// Pixels covered by the marks, each inverted once even where marks overlap.
fn marked_pixels(height: usize, width: usize, marks: &[usize]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &m in marks {
        let (r, c) = ((m / width) as isize, (m % width) as isize);
        for (dr, dc) in [(0, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let (y, x) = (r + dr, c + dc);
            if y >= 0 && x >= 0 && (y as usize) < height && (x as usize) < width {
                out.insert(y as usize * width + x as usize);
            }
        }
    }
    out
}

pub fn render(map: &GridMap, marks: &[usize]) -> Vec<u8> {
    let (h, w) = map.shape();
    let mut pixels = scale_pixels(map);
    for p in marked_pixels(h, w, marks) {
        pixels[p] = 255 - pixels[p];
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

pub fn export_heatmap(map: &GridMap, marks: &[usize], path: &Path) -> Result<(), CliError> {
    fs::write(path, render(map, marks)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dreammap::UnitTag;

    fn body(bytes: &[u8]) -> &[u8] {
        // Header is three newline-terminated lines.
        let mut seen = 0;
        let start = bytes.iter().position(|&b| {
            seen += usize::from(b == b'\n');
            seen == 3
        });
        &bytes[start.unwrap() + 1..]
    }

    #[test]
    fn constant_map_is_black() {
        let m = GridMap::filled(3, 4, -50.0, UnitTag::Dbm).unwrap();
        assert_eq!(scale_pixels(&m), vec![0; 12]);
        assert!(render(&m, &[]).starts_with(b"P5\n4 3\n255\n"));
    }

    #[test]
    fn checkerboard_scales_to_extremes() {
        let m = GridMap::new(2, 2, vec![0.0, 1.0, 1.0, 0.0], UnitTag::Normalized).unwrap();
        assert_eq!(body(&render(&m, &[])), &[0, 255, 255, 0]);
    }

    #[test]
    fn corner_mark_is_clipped() {
        let m = GridMap::zeros(3, 3, UnitTag::Dbm).unwrap();
        let img = render(&m, &[0]);
        assert_eq!(img.len(), "P5\n3 3\n255\n".len() + 9);
        assert_eq!(body(&img), &[255, 0, 0, 0, 255, 0, 0, 0, 0]);
        // Center mark covers the x; overlapping marks invert once.
        assert_eq!(body(&render(&m, &[4, 4])), &[255, 0, 255, 0, 255, 0, 255, 0, 255]);
    }

    #[test]
    fn intermediate_values_round() {
        let m = GridMap::new(1, 3, vec![0.0, 0.5, 1.0], UnitTag::Normalized).unwrap();
        assert_eq!(scale_pixels(&m), vec![0, 128, 255]);
    }
}
