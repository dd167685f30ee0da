//! Binary PGM (P5, 8-bit) for single-channel images in `[0, 1]`.

use std::path::Path;

use kdloc_core::Tensor;

use crate::error::{self, Error, Result};

/// Encodes a `1×H×W` tensor, quantizing `v ↦ round(255·v)`.
pub fn encode(image: &Tensor) -> std::result::Result<Vec<u8>, String> {
    let (h, w) = match *image.shape() {
        [1, h, w] => (h, w),
        ref s => return Err(format!("PGM needs a 1×H×W image, got {s:?}")),
    };
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
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
            return Err("truncated PGM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PGM header")?);
    }
    if fields[0] != "P5" {
        return Err(format!("expected P5 magic, found {:?}", fields[0]));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PGM header field {s:?}"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(format!("only 8-bit PGM is supported (maxval {maxval})"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).ok_or("missing PGM raster")?;
    if data.len() != w * h {
        return Err(format!("expected {} raster bytes for {w}x{h}, found {}", w * h, data.len()));
    }
    let values = data.iter().map(|&b| b as f64 / maxval as f64).collect();
    Tensor::new(vec![1, h, w], values).map_err(|e| e.to_string())
}

pub fn save(image: &Tensor, path: &Path) -> Result<()> {
    error::write(path, &encode(image).map_err(Error::invalid)?)
}

pub fn load(path: &Path) -> Result<Tensor> {
    decode(&error::read(path)?).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_of_quantized_values() {
        let img = Tensor::new(vec![1, 2, 3], vec![0.0, 1.0, 51.0 / 255.0, 0.5, 0.2, 1.0]).unwrap();
        let bytes = encode(&img).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[11..], &[0, 255, 51, 128, 51, 255]);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        assert_eq!(decode(bytes).unwrap().data(), &[0.0, 1.0]);
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
    }
}
