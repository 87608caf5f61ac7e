// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use super::FeatureError;

/// Single-channel image, row-major, intensities on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, FeatureError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(FeatureError::Shape(format!("{width}x{height} image with {} values", data.len())));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel with coordinates clamped into the image.
    pub fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, FeatureError> {
        GrayImage::new(width, height, bytes.iter().map(|&b| b as f64).collect())
    }
}

/// Parses binary (P5) or plain (P2) PGM. 16-bit samples are rescaled to 0..=255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, FeatureError> {
    let bad = |m: &str| FeatureError::Image(format!("pgm: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String, FeatureError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |t: String| t.parse::<usize>().map_err(|_| bad(&format!("bad number '{t}'")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    let scale = 255.0 / maxval as f64;
    let n = width * height;
    let data: Vec<f64> = match magic.as_str() {
        "P5" => {
            let body = &bytes[(pos + 1).min(bytes.len())..];
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if body.len() < need {
                return Err(bad("truncated raster"));
            }
            if wide {
                body[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale).collect()
            } else {
                body[..n].iter().map(|&b| b as f64 * scale).collect()
            }
        }
        "P2" => {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(num(token()?)? as f64 * scale);
            }
            v
        }
        other => return Err(bad(&format!("unsupported magic {other}"))),
    };
    GrayImage::new(width, height, data)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, FeatureError> {
    parse_pgm(&std::fs::read(path)?)
}

/// Reads a raw 8-bit plane. Dimensions come from a sidecar file next to it,
/// `<path>.dims`, holding `width height`.
pub fn read_raw(path: impl AsRef<Path>) -> Result<GrayImage, FeatureError> {
    let path = path.as_ref();
    let mut side = path.as_os_str().to_owned();
    side.push(".dims");
    let dims = std::fs::read_to_string(&side)?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(w)), Some(Ok(h))) = (it.next(), it.next()) else {
        return Err(FeatureError::Image(format!("bad sidecar {}", Path::new(&side).display())));
    };
    GrayImage::from_u8(w, h, &std::fs::read(path)?)
}

/// Area-averaging resize: each output pixel is the mean of the input area it
/// covers, with fractional pixel overlaps weighted.
pub fn resize_area(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let wx = area_weights(w, out_w);
    let wy = area_weights(h, out_h);
    let mut rows = vec![0.0; h * out_w];
    for y in 0..h {
        for (ox, ws) in wx.iter().enumerate() {
            rows[y * out_w + ox] = ws.iter().map(|&(x, k)| k * src[y * w + x]).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for (oy, ws) in wy.iter().enumerate() {
        for ox in 0..out_w {
            out[oy * out_w + ox] = ws.iter().map(|&(y, k)| k * rows[y * out_w + ox]).sum();
        }
    }
    out
}

/// For each output cell, the (input index, weight) pairs; weights sum to 1.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let step = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * step;
            let hi = lo + step;
            let mut v = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    v.push((i, overlap / step));
                }
                i += 1;
            }
            v
        })
        .collect()
}
