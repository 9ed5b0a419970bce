//! Synthetic template/target pairs.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::interp::Interpolation;
use crate::random::FieldRng;

/// Unit-height Gaussian of width `width` centred at `center`, made periodic
/// by summing the 5^dim nearest images.
pub fn periodic_gaussian(grid: &TorusGrid, center: &[f64], width: f64) -> Result<ScalarField> {
    if center.len() != grid.dim() {
        return Err(Error::InvalidConfig("center has wrong dimension".into()));
    }
    let l = grid.side();
    let inv = 1.0 / (2.0 * width * width);
    ScalarField::from_fn(*grid, |x| {
        let axis = |a: usize| -> f64 {
            (-2..=2)
                .map(|k| {
                    let d = x[a] - center[a] + k as f64 * l;
                    (-d * d * inv).exp()
                })
                .sum()
        };
        (0..grid.dim()).map(axis).product()
    })
}

/// Which synthetic pair to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    /// A bump and the same bump shifted by `0.1 L` along the last axis.
    TranslateBump,
    /// A bump and its composition with a smooth random warp of size
    /// `amplitude * L`.
    WarpBump { amplitude: f64 },
    /// Two bumps at seeded positions, each moved by up to `0.1 L`.
    TwoBlobs,
}

impl SynthKind {
    pub fn parse(name: &str, amplitude: f64) -> Result<Self> {
        match name {
            "translate-bump" => Ok(SynthKind::TranslateBump),
            "warp-bump" => Ok(SynthKind::WarpBump { amplitude }),
            "two-blobs" => Ok(SynthKind::TwoBlobs),
            other => Err(Error::InvalidConfig(format!(
                "unknown synth kind `{other}` (expected translate-bump, warp-bump or two-blobs)"
            ))),
        }
    }
}

pub const BUMP_WIDTH: f64 = 0.1;
pub const SHIFT: f64 = 0.1;

/// Builds `(template, target)` deterministically from `seed`.
pub fn synth_pair(grid: &TorusGrid, kind: SynthKind, seed: u64) -> Result<(ScalarField, ScalarField)> {
    let l = grid.side();
    let w = BUMP_WIDTH * l;
    let mid = vec![0.5 * l; grid.dim()];
    let mut rng = FieldRng::new(seed);
    match kind {
        SynthKind::TranslateBump => {
            let template = periodic_gaussian(grid, &mid, w)?;
            let mut shifted = mid.clone();
            *shifted.last_mut().unwrap() += SHIFT * l;
            Ok((template, periodic_gaussian(grid, &shifted, w)?))
        }
        SynthKind::WarpBump { amplitude } => {
            let template = periodic_gaussian(grid, &mid, w)?;
            let warp = rng.band_limited_vector(grid, 2);
            let pts: Vec<Vec<f64>> = grid
                .node_coords()
                .into_iter()
                .zip(warp.components())
                .map(|(x, d)| x.iter().zip(d).map(|(a, b)| a + amplitude * l * b).collect())
                .collect();
            let target = Interpolation::QuinticBSpline.sample(&template, &pts);
            let target = if amplitude == 0.0 { template.clone() } else { ScalarField::new(*grid, target)? };
            Ok((template, target))
        }
        SynthKind::TwoBlobs => {
            let mut template = vec![0.0f64; grid.len()];
            let mut target = vec![0.0f64; grid.len()];
            for _ in 0..2 {
                let c: Vec<f64> = (0..grid.dim()).map(|_| rng.uniform(0.2, 0.8) * l).collect();
                let moved: Vec<f64> = c.iter().map(|v| v + rng.uniform(-SHIFT, SHIFT) * l).collect();
                let a = periodic_gaussian(grid, &c, w)?;
                let b = periodic_gaussian(grid, &moved, w)?;
                for (t, v) in template.iter_mut().zip(a.values()) {
                    *t = t.max(*v);
                }
                for (t, v) in target.iter_mut().zip(b.values()) {
                    *t = t.max(*v);
                }
            }
            Ok((ScalarField::new(*grid, template)?, ScalarField::new(*grid, target)?))
        }
    }
}
