//! Grayscale slice rendering for visual inspection of reconstructions.

use crate::denoise::Plane;
use crate::error::{Error, Result};
use crate::volume::Volume;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// Writes one slice of the volume as an 8-bit grayscale PNG, linearly
/// windowed to `(lo, hi)` and clamped. `index` selects the slice along the
/// axis orthogonal to `plane` (z for xy, y for xz, x for yz).
pub fn render_slice(
    v: &Volume,
    plane: Plane,
    index: usize,
    window: (f64, f64),
    path: &Path,
) -> Result<()> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::config(format!(
            "render window must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    let (nx, ny, nz) = v.dims();
    let (width, height, count) = match plane {
        Plane::Xy => (nx, ny, nz),
        Plane::Xz => (nx, nz, ny),
        Plane::Yz => (ny, nz, nx),
    };
    if index >= count {
        return Err(Error::config(format!(
            "slice index {index} out of range for {count} slices along {plane:?}"
        )));
    }

    let mut pixels = vec![0u8; width * height];
    for b in 0..height {
        for a in 0..width {
            let val = match plane {
                Plane::Xy => v.get(a, b, index),
                Plane::Xz => v.get(a, index, b),
                Plane::Yz => v.get(index, a, b),
            };
            let t = ((val - lo) / (hi - lo)).clamp(0.0, 1.0);
            // Row 0 of the image is the top; flip the second volume axis so
            // +y (or +z) points up in the rendering.
            let row = height - 1 - b;
            pixels[a + width * row] = (t * 255.0).round() as u8;
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    writer
        .write_image_data(&pixels)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    Ok(())
}
