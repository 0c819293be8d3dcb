//! 16-bit PGM depth images (millimeters, 0 = invalid) with a plain-text
//! intrinsics sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage};

const META_HEADER: &str = "# dynmap-depth-meta v1";

/// Sidecar path for a PGM file: `frame.pgm` -> `frame.meta`.
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("meta")
}

pub fn encode_pgm(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 2);
    for &d in img.data() {
        let mm = (f64::from(d) * 1000.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
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
    if start == *pos {
        return Err(Error::format("pgm", "truncated header"));
    }
    Ok(&bytes[start..*pos])
}

fn parse_num(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("pgm", "bad header number"))
}

/// Decodes raw millimeter samples; returns `(width, height, samples)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::format("pgm", "expected P5 magic"));
    }
    let w = parse_num(next_token(bytes, &mut pos)?)?;
    let h = parse_num(next_token(bytes, &mut pos)?)?;
    let maxval = parse_num(next_token(bytes, &mut pos)?)?;
    if maxval != 65535 {
        return Err(Error::format("pgm", format!("expected maxval 65535, got {maxval}")));
    }
    pos += 1; // single whitespace before the raster
    let raster = bytes
        .get(pos..pos + w * h * 2)
        .ok_or_else(|| Error::format("pgm", "truncated raster"))?;
    let samples = raster
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((w, h, samples))
}

pub fn encode_meta(intr: &CameraIntrinsics) -> String {
    format!(
        "{META_HEADER}\nfx {}\nfy {}\ncx {}\ncy {}\nwidth {}\nheight {}\ndepth_min {}\ndepth_max {}\n",
        intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height, intr.depth_min, intr.depth_max
    )
}

pub fn decode_meta(text: &str) -> Result<CameraIntrinsics> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(META_HEADER) {
        return Err(Error::format("depth meta", "missing version header"));
    }
    let mut vals = std::collections::HashMap::new();
    for line in lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format("depth meta", format!("bad line `{line}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::format("depth meta", format!("bad value for {k}")))?;
        vals.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        vals.get(k)
            .copied()
            .ok_or_else(|| Error::format("depth meta", format!("missing key {k}")))
    };
    CameraIntrinsics::new(
        get("fx")?,
        get("fy")?,
        get("cx")?,
        get("cy")?,
        get("width")? as usize,
        get("height")? as usize,
        get("depth_min")?,
        get("depth_max")?,
    )
}

pub fn write_depth_image(img: &DepthImage, pgm: &Path) -> Result<()> {
    fs::write(pgm, encode_pgm(img)).map_err(|e| Error::io(pgm, e))?;
    let meta = sidecar_path(pgm);
    fs::write(&meta, encode_meta(img.intrinsics())).map_err(|e| Error::io(meta, e))
}

/// Reads a PGM and its sidecar. Samples outside the sidecar's depth range
/// are treated as invalid.
pub fn read_depth_image(pgm: &Path) -> Result<DepthImage> {
    let bytes = fs::read(pgm).map_err(|e| Error::io(pgm, e))?;
    let meta_path = sidecar_path(pgm);
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(meta_path, e))?;
    let intr = decode_meta(&meta)?;
    let (w, h, mm) = decode_pgm(&bytes)?;
    if (w, h) != (intr.width, intr.height) {
        return Err(Error::format(
            "pgm",
            format!("image is {w}x{h} but metadata says {}x{}", intr.width, intr.height),
        ));
    }
    let mut img = DepthImage::empty(intr);
    for (i, &m) in mm.iter().enumerate() {
        if m > 0 {
            img.set_depth(i % w, i / w, m as f32 / 1000.0);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DepthImage {
        let intr = CameraIntrinsics::new(100.0, 100.0, 1.5, 1.0, 4, 3, 0.2, 10.0).unwrap();
        let data = vec![0.0, 1.234, 2.5, 9.999, 0.3, 0.0, 4.0, 5.0, 6.0, 7.0, 8.0, 0.2];
        DepthImage::new(intr, data).unwrap()
    }

    #[test]
    fn pgm_header_layout() {
        let bytes = encode_pgm(&sample());
        assert!(bytes.starts_with(b"P5\n4 3\n65535\n"));
        assert_eq!(bytes.len(), 13 + 4 * 3 * 2);
        // 1.234 m -> 1234 mm, big-endian
        assert_eq!(&bytes[15..17], &1234u16.to_be_bytes());
    }

    #[test]
    fn file_round_trip_quantizes_to_millimeters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let img = sample();
        write_depth_image(&img, &path).unwrap();
        let back = read_depth_image(&path).unwrap();
        assert_eq!(back.intrinsics(), img.intrinsics());
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.0005 + 1e-6, "{a} vs {b}");
            assert_eq!(*a == 0.0, *b == 0.0);
        }
    }

    #[test]
    fn rejects_wrong_maxval_and_truncation() {
        assert!(decode_pgm(b"P5\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n65535\n\x00\x01").is_err());
        assert!(decode_pgm(b"P2\n1 1\n65535\n0").is_err());
        assert!(decode_meta("fx 1\n").is_err());
    }
}
