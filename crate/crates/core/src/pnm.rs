//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::RasterImage;

fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates maxval from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Image("missing whitespace after header".into()));
    }
    Ok((tokens, pos + 1))
}

pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let (tokens, offset) = header_tokens(bytes, 4)?;
    let channels = match tokens[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(Error::Image(format!(
                "unsupported magic '{other}', expected P5 or P6"
            )))
        }
    };
    let dim = |t: &str, what: &str| -> Result<usize> {
        t.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Image(format!("bad {what} '{t}'")))
    };
    let width = dim(&tokens[1], "width")?;
    let height = dim(&tokens[2], "height")?;
    if tokens[3] != "255" {
        return Err(Error::Image(format!(
            "max value must be 255, found {}",
            tokens[3]
        )));
    }
    let n = width * height;
    let raster = &bytes[offset..];
    if raster.len() < n * channels {
        return Err(Error::Image(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            n * channels
        )));
    }
    let planes = (0..channels)
        .map(|c| (0..n).map(|i| raster[i * channels + c] as f64).collect())
        .collect();
    RasterImage::new(width, height, planes)
}

pub fn read(path: impl AsRef<Path>) -> Result<RasterImage> {
    decode(&std::fs::read(path)?)
}

/// Encodes with samples rounded and clamped to `0..=255`.
pub fn encode(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let n = img.width() * img.height();
    for i in 0..n {
        for c in 0..img.channels() {
            out.push(img.plane(c)[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn write(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_gray_with_comment() {
        let mut bytes = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3, 4, 255]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (3, 2, 1));
        assert_eq!(img.get(0, 2, 1), 255.0);
        assert_eq!(img.get(0, 1, 0), 1.0);
    }

    #[test]
    fn decodes_interleaved_rgb() {
        let mut bytes = b"P6 2 1 255 ".to_vec();
        bytes.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.get(0, 1, 0), 40.0);
        assert_eq!(img.get(2, 0, 0), 30.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\0").is_err());
        assert!(decode(b"P5\n0 2\n255\n").is_err());
        assert!(decode(b"P5\n2").is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let img = RasterImage::new(2, 2, vec![vec![1.0, 2.0, 3.0, 4.0]; 3]).unwrap();
        assert_eq!(decode(&encode(&img)).unwrap(), img);
    }
}
