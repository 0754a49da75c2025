//! Image I/O: PFM for lossless float round-trips, PNG for quick previews.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::math::Vec3;
use crate::render::ImageBuffer;

/// Write a color PFM (little-endian, scanlines bottom-to-top per the format).
pub fn write_pfm(path: &Path, image: &ImageBuffer) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "PF\n{} {}\n-1.0\n", image.width, image.height)?;
    for py in (0..image.height).rev() {
        for px in 0..image.width {
            let p = image.pixel(px, py);
            for c in [p.x, p.y, p.z] {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()
}

fn read_token(r: &mut impl Read) -> io::Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    String::from_utf8(tok).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn read_pfm(path: &Path) -> io::Result<ImageBuffer> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_token(&mut r)?;
    if magic != "PF" {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("not a color PFM file (magic {magic:?})"),
        ));
    }
    let parse = |t: String| {
        t.parse::<f64>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    };
    let width = parse(read_token(&mut r)?)? as u32;
    let height = parse(read_token(&mut r)?)? as u32;
    let scale = parse(read_token(&mut r)?)?;
    if width == 0 || height == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "empty PFM"));
    }
    let little_endian = scale < 0.0;
    let mut buf = vec![0u8; (width * height * 3) as usize * 4];
    r.read_exact(&mut buf)?;
    let mut image = ImageBuffer::new(width, height);
    let mut i = 0;
    for py in (0..height).rev() {
        for px in 0..width {
            let mut rgb = [0.0f64; 3];
            for c in &mut rgb {
                let b: [u8; 4] = buf[i..i + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
                *c = v as f64;
                i += 4;
            }
            image.set_pixel(px, py, Vec3::new(rgb[0], rgb[1], rgb[2]));
        }
    }
    Ok(image)
}

/// Gamma-2.2 tonemapped 8-bit preview.
pub fn write_png_preview(path: &Path, image: &ImageBuffer) -> io::Result<()> {
    let mut out = image::RgbImage::new(image.width, image.height);
    for py in 0..image.height {
        for px in 0..image.width {
            let p = image.pixel(px, py);
            let enc = |v: f64| (v.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0).round() as u8;
            out.put_pixel(px, py, image::Rgb([enc(p.x), enc(p.y), enc(p.z)]));
        }
    }
    out.save(path)
        .map_err(|e| io::Error::new(io::ErrorKind::Other, e))
}

/// Signed-data preview: positive values in red, negative in blue, scaled by
/// the largest magnitude in the image.
pub fn write_signed_png_preview(path: &Path, image: &ImageBuffer) -> io::Result<()> {
    let max_mag = image
        .data
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-30);
    let mut out = image::RgbImage::new(image.width, image.height);
    for py in 0..image.height {
        for px in 0..image.width {
            // collapse channels: mean signed value
            let p = image.pixel(px, py);
            let v = (p.x + p.y + p.z) / 3.0 / max_mag;
            let enc = |v: f64| (v.clamp(0.0, 1.0).sqrt() * 255.0).round() as u8;
            let (r, b) = if v >= 0.0 { (enc(v), 0) } else { (0, enc(-v)) };
            out.put_pixel(px, py, image::Rgb([r, 0, b]));
        }
    }
    out.save(path)
        .map_err(|e| io::Error::new(io::ErrorKind::Other, e))
}
