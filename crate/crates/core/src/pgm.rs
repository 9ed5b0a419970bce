//! Netpbm grayscale images (PGM): `P2`/`P5` in, 8-bit `P5` out.

use crate::deformation::DiffeoPair;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::interp::Interpolation;

/// A grayscale raster with values normalized to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

fn tokens(data: &[u8]) -> impl Iterator<Item = (usize, &[u8])> + '_ {
    // whitespace-separated header tokens with `#` comments skipped; yields
    // (offset after token, token)
    let mut pos = 0;
    std::iter::from_fn(move || {
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        if pos >= data.len() {
            return None;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Some((pos, &data[start..pos]))
    })
}

fn parse_num(tok: Option<(usize, &[u8])>, what: &str) -> Result<(usize, usize)> {
    let (end, t) = tok.ok_or_else(|| Error::Format(format!("PGM: missing {what}")))?;
    let s = std::str::from_utf8(t).map_err(|_| Error::Format(format!("PGM: bad {what}")))?;
    let v = s.parse::<usize>().map_err(|_| Error::Format(format!("PGM: bad {what} `{s}`")))?;
    Ok((end, v))
}

impl GrayImage {
    pub fn from_field(field: &ScalarField) -> Result<Self> {
        let g = field.grid();
        if g.dim() != 2 {
            return Err(Error::InvalidConfig("only 2-D fields map to images".into()));
        }
        Ok(Self { width: g.n(), height: g.n(), pixels: field.values().to_vec() })
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut it = tokens(data);
        let (_, magic) = it.next().ok_or_else(|| Error::Format("PGM: empty input".into()))?;
        let binary = match magic {
            b"P5" => true,
            b"P2" => false,
            _ => return Err(Error::Format("PGM: expected P2 or P5 magic".into())),
        };
        let (_, width) = parse_num(it.next(), "width")?;
        let (_, height) = parse_num(it.next(), "height")?;
        let (end, maxval) = parse_num(it.next(), "maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::Format("PGM: zero dimension".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Format(format!("PGM: maxval {maxval} out of range")));
        }
        let count = width * height;
        let scale = 1.0 / maxval as f64;
        let mut pixels = Vec::with_capacity(count);
        if binary {
            let body = data.get(end + 1..).ok_or_else(|| Error::Format("PGM: missing raster".into()))?;
            let bytes = if maxval < 256 { 1 } else { 2 };
            if body.len() < count * bytes {
                return Err(Error::Format("PGM: truncated raster".into()));
            }
            for i in 0..count {
                let v = if bytes == 1 {
                    body[i] as usize
                } else {
                    ((body[2 * i] as usize) << 8) | body[2 * i + 1] as usize
                };
                if v > maxval {
                    return Err(Error::Format("PGM: sample exceeds maxval".into()));
                }
                pixels.push(v as f64 * scale);
            }
        } else {
            for _ in 0..count {
                let (_, v) = parse_num(it.next(), "sample")?;
                if v > maxval {
                    return Err(Error::Format("PGM: sample exceeds maxval".into()));
                }
                pixels.push(v as f64 * scale);
            }
        }
        Ok(Self { width, height, pixels })
    }

    /// 8-bit binary PGM; values are clamped to `[0, 1]`.
    pub fn encode_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    /// Resamples onto an `n x n` unit torus grid by periodic bilinear
    /// interpolation; image rows run along axis 0.
    pub fn to_field(&self, n: usize) -> Result<ScalarField> {
        let grid = TorusGrid::square(n)?;
        if self.width == n && self.height == n {
            return ScalarField::new(grid, self.pixels.clone());
        }
        let (w, h) = (self.width, self.height);
        let at = |r: usize, c: usize| self.pixels[(r % h) * w + (c % w)];
        let values = (0..grid.len())
            .map(|idx| {
                let [i0, i1] = grid.multi_index(idx);
                let y = i0 as f64 * h as f64 / n as f64;
                let x = i1 as f64 * w as f64 / n as f64;
                let (r, c) = (y.floor() as usize, x.floor() as usize);
                let (v, u) = (y - r as f64, x - c as f64);
                (1.0 - v) * ((1.0 - u) * at(r, c) + u * at(r, c + 1))
                    + v * ((1.0 - u) * at(r + 1, c) + u * at(r + 1, c + 1))
            })
            .collect();
        ScalarField::new(grid, values)
    }
}

/// Raster of the deformed coordinate grid: a pixel at `x` is dark when
/// `psi(x)` lies on an original grid line (every `spacing_cells` cells).
pub fn deformation_raster(pair: &DiffeoPair, spacing_cells: usize, upscale: usize) -> Result<GrayImage> {
    let grid = pair.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidConfig("deformation raster needs a 2-D grid".into()));
    }
    let size = grid.n() * upscale;
    let l = grid.side();
    let px = l / size as f64;
    let mut pts = vec![Vec::with_capacity(size * size), Vec::with_capacity(size * size)];
    for r in 0..size {
        for c in 0..size {
            pts[0].push(r as f64 * px);
            pts[1].push(c as f64 * px);
        }
    }
    let scheme = Interpolation::Linear;
    let d: Vec<Vec<f64>> =
        (0..2).map(|a| scheme.sample(&pair.psi_displacement().component_field(a), &pts)).collect();
    let period = spacing_cells as f64 * grid.spacing();
    let half_width = 0.75 * px;
    let pixels = (0..size * size)
        .map(|k| {
            let on_line = (0..2).any(|a| {
                let y = (pts[a][k] + d[a][k]).rem_euclid(period);
                y.min(period - y) <= half_width
            });
            if on_line {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    Ok(GrayImage { width: size, height: size, pixels })
}
