use std::path::Path;

use super::DataError;
use crate::cae::Image;

/// Writes an 8-bit binary PGM (`P5`).
pub fn write_pgm(path: &Path, image: &Image) -> Result<(), DataError> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend(
        image
            .pixels
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads a binary PGM (`P5`), 8- or 16-bit, normalising pixels by `maxval`.
pub fn read_pgm(path: &Path) -> Result<Image, DataError> {
    let bytes = std::fs::read(path)?;
    let bad = |msg: &str| DataError::BadImage {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("bad dimensions or maxval"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() < w * h * depth {
        return Err(bad("truncated raster"));
    }
    let pixels = (0..w * h)
        .map(|i| {
            let v = if depth == 1 {
                raster[i] as usize
            } else {
                ((raster[2 * i] as usize) << 8) | raster[2 * i + 1] as usize
            };
            (v as f64 / maxval as f64).min(1.0)
        })
        .collect();
    Ok(Image::new(w, h, pixels)?)
}

/// Center-crops to a square and resamples bilinearly to `side × side`.
pub fn resize_to_square(image: &Image, side: usize) -> Image {
    let crop = image.width.min(image.height);
    let x0 = (image.width - crop) / 2;
    let y0 = (image.height - crop) / 2;
    if crop == side {
        let pixels = (0..side * side)
            .map(|i| image.get(x0 + i % side, y0 + i / side))
            .collect();
        return Image {
            width: side,
            height: side,
            pixels,
        };
    }
    let scale = crop as f64 / side as f64;
    let sample = |u: f64, v: f64| {
        let fx = u.clamp(0.0, (crop - 1) as f64);
        let fy = v.clamp(0.0, (crop - 1) as f64);
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (jx, jy) = ((ix + 1).min(crop - 1), (iy + 1).min(crop - 1));
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let p = |x: usize, y: usize| image.get(x0 + x, y0 + y);
        (1.0 - ty) * ((1.0 - tx) * p(ix, iy) + tx * p(jx, iy))
            + ty * ((1.0 - tx) * p(ix, jy) + tx * p(jx, jy))
    };
    let pixels = (0..side * side)
        .map(|i| {
            let u = ((i % side) as f64 + 0.5) * scale - 0.5;
            let v = ((i / side) as f64 + 0.5) * scale - 0.5;
            sample(u, v).clamp(0.0, 1.0)
        })
        .collect();
    Image {
        width: side,
        height: side,
        pixels,
    }
}
