//! Image and table files: binary PGM/PPM, PNG, and latent CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::neural::ImageTensor;
use crate::{Error, Result};

/// Binary PNM bytes: P5 for one channel, P6 for three, maxval 255.
pub fn encode_pnm(img: &ImageTensor) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_bytes());
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

/// Parses binary P5/P6 with maxval ≤ 255; comments in the header are skipped.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<ImageTensor> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let mut pos = 0;
    let channels = match next_token(bytes, &mut pos) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("not a binary PGM/PPM (expected P5 or P6)")),
    };
    let mut num = |what: &str| -> Result<usize> {
        next_token(bytes, &mut pos)
            .and_then(|t| std::str::from_utf8(t).ok()?.parse().ok())
            .ok_or_else(|| bad(&format!("missing or malformed {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * channels;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != need {
        return Err(bad(&format!("expected {need} raster bytes, found {}", raster.len())));
    }
    let data = raster.iter().map(|&b| b as f64 / maxval as f64).collect();
    ImageTensor::new(height, width, channels, data)
}

pub fn write_pnm(img: &ImageTensor, path: &Path) -> Result<()> {
    fs::write(path, encode_pnm(img))?;
    Ok(())
}

pub fn read_pnm(path: &Path) -> Result<ImageTensor> {
    decode_pnm(&fs::read(path)?, path)
}

pub fn encode_png(img: &ImageTensor) -> Result<Vec<u8>> {
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut out),
        &img.to_bytes(),
        img.width() as u32,
        img.height() as u32,
        color,
    )?;
    Ok(out)
}

pub fn write_png(img: &ImageTensor, path: &Path) -> Result<()> {
    fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<ImageTensor> {
    let dynamic = image::open(path)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    match dynamic.color().channel_count() {
        1 | 2 => ImageTensor::from_bytes(h, w, 1, dynamic.to_luma8().as_raw()),
        _ => ImageTensor::from_bytes(h, w, 3, dynamic.to_rgb8().as_raw()),
    }
}

/// Reads `.pgm`, `.ppm` or `.png` by extension.
pub fn read_image(path: &Path) -> Result<ImageTensor> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm" | "ppm" | "pnm") => read_pnm(path),
        Some("png") => read_png(path),
        _ => Err(Error::format(path, "unsupported image extension")),
    }
}

/// Writes by extension: `.png`, or PNM for anything else.
pub fn write_image(img: &ImageTensor, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => write_png(img, path),
        _ => write_pnm(img, path),
    }
}

/// `id,z0,z1,...` with one row per item.
pub fn write_matrix_csv(path: &Path, prefix: &str, ids: &[String], values: &Array2<f64>) -> Result<()> {
    if ids.len() != values.nrows() {
        return Err(Error::shape(format!("{} ids", values.nrows()), ids.len()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..values.ncols()).map(|j| format!("{prefix}{j}")));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(values.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != cols + 1 {
            return Err(Error::format(path, format!("row {} has {} fields", ids.len() + 1, rec.len())));
        }
        ids.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("bad number '{field}'")))?;
            data.push(v);
        }
    }
    let n = ids.len();
    let m = Array2::from_shape_vec((n, cols), data).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((ids, m))
}

/// Writes JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::format(path, e.to_string()))
}
