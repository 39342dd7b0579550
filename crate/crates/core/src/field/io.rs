//! Flat binary and CSV grid I/O.
//!
//! Binary layout, little endian: `u32 dim`, `u32 n`, `u8 domain tag`, then `2^{dn}` `f64`
//! values with axis 0 varying fastest.

use std::io::{Read, Write};

use super::{Domain, FieldError, ScalarGrid};
use crate::Real;

impl<F: Real> ScalarGrid<F> {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), FieldError> {
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&self.n().to_le_bytes())?;
        w.write_all(&[self.domain().tag()])?;
        for v in self.values() {
            w.write_all(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, FieldError> {
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let dim = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let n = u32::from_le_bytes(u);
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let domain = Domain::from_tag(tag[0])
            .ok_or_else(|| FieldError::Format(format!("domain tag {}", tag[0])))?;
        if !(2..=3).contains(&dim) || n > 14 {
            return Err(FieldError::Format(format!(
                "unsupported header dim={dim} n={n}"
            )));
        }
        let len = 1usize << (dim as u32 * n);
        let mut values = Vec::with_capacity(len);
        let mut b = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut b)?;
            values.push(F::lit(f64::from_le_bytes(b)));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(FieldError::Format(format!("{} trailing bytes", rest.len())));
        }
        Self::new(dim, n, domain, values)
    }

    /// One row per cell: the cell-centre coordinates followed by the value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FieldError> {
        let names = ["x", "y", "z"];
        writeln!(w, "{},value", names[..self.dim()].join(","))?;
        for flat in 0..self.len() {
            let c = self.cell_center(flat);
            for x in c {
                write!(w, "{x},")?;
            }
            writeln!(w, "{}", self.values()[flat])?;
        }
        Ok(())
    }
}
