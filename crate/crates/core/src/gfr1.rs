//! The `GFR1` binary field dump.
//!
//! Layout: magic `GFR1`, then little-endian `u32` dim, `u32` points per axis,
//! `u32` component count, then every component as `N^dim` little-endian
//! `f64` values in row-major order, component after component.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, VectorField};
use crate::grid::TorusGrid;

const MAGIC: &[u8; 4] = b"GFR1";

/// A decoded dump: shape plus raw component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub dim: u32,
    pub n: u32,
    pub components: Vec<Vec<f64>>,
}

impl FieldDump {
    pub fn from_components(grid: &TorusGrid, components: &[Vec<f64>]) -> Self {
        Self { dim: grid.dim() as u32, n: grid.n() as u32, components: components.to_vec() }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let len = (self.n as usize).pow(self.dim);
        if self.components.iter().any(|c| c.len() != len) {
            return Err(Error::Format("component length does not match N^dim".into()));
        }
        w.write_all(MAGIC)?;
        w.write_all(&self.dim.to_le_bytes())?;
        w.write_all(&self.n.to_le_bytes())?;
        w.write_all(&(self.components.len() as u32).to_le_bytes())?;
        for c in &self.components {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut read_u32 = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let dim = read_u32()?;
        let n = read_u32()?;
        let count = read_u32()?;
        if dim == 0 || n == 0 {
            return Err(Error::Format(format!("degenerate shape dim={dim} n={n}")));
        }
        let len = (n as usize).checked_pow(dim).ok_or_else(|| Error::Format("shape overflows".into()))?;
        let mut components = Vec::with_capacity(count as usize);
        let mut b = [0u8; 8];
        for _ in 0..count {
            let mut c = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut b).map_err(|_| Error::Format("truncated payload".into()))?;
                c.push(f64::from_le_bytes(b));
            }
            components.push(c);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        Ok(Self { dim, n, components })
    }

    /// Grid with the dump's shape and the given side length.
    pub fn grid(&self, side: f64) -> Result<TorusGrid> {
        TorusGrid::new(self.dim as usize, self.n as usize, side)
    }
}

impl From<&ScalarField> for FieldDump {
    fn from(f: &ScalarField) -> Self {
        FieldDump::from_components(f.grid(), &[f.values().to_vec()])
    }
}

impl From<&VectorField> for FieldDump {
    fn from(v: &VectorField) -> Self {
        FieldDump::from_components(v.grid(), v.components())
    }
}

impl From<&MetricField> for FieldDump {
    fn from(m: &MetricField) -> Self {
        FieldDump::from_components(m.grid(), m.components())
    }
}
