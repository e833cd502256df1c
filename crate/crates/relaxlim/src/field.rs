//! Grid-sampled fields with any number of components.
//!
//! Values are stored row-major over grid points with the component index
//! fastest, matching the on-disk RLXF1 layout. A field may carry the exact
//! spectrum it was synthesized from (see [`crate::spectral::mollify`]); the
//! invariant is `values == fft_inverse(spectrum)` as computed by this crate,
//! which is what makes repeated sharp cutoffs reproduce identical bits.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft_forward, fft_inverse, SpectralGrid};

#[derive(Debug, Clone)]
pub struct Field {
    grid: SpectralGrid,
    components: usize,
    values: Vec<f64>,
    /// Per-component spectra, concatenated; set only by operations that
    /// synthesized `values` from exactly this spectrum.
    pub(crate) spectrum: Option<Vec<Complex64>>,
}

impl Field {
    pub fn zeros(grid: &SpectralGrid, components: usize) -> Self {
        Self {
            values: vec![0.0; grid.n_total() * components],
            grid: grid.clone(),
            components,
            spectrum: None,
        }
    }

    pub fn from_values(grid: &SpectralGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_total() * components {
            return Err(Error::BadFieldSize {
                expected: grid.n_total() * components,
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            values,
            spectrum: None,
        })
    }

    /// Sample `f(coords, component)` at every grid point.
    pub fn from_fn(
        grid: &SpectralGrid,
        components: usize,
        f: impl Fn(&[f64], usize) -> f64,
    ) -> Self {
        let n = grid.n_total();
        let mut values = vec![0.0; n * components];
        for p in 0..n {
            let x = grid.coords(p);
            for c in 0..components {
                values[p * components + c] = f(&x, c);
            }
        }
        Self {
            grid: grid.clone(),
            components,
            values,
            spectrum: None,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = None;
        &mut self.values
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_total()
    }

    #[inline]
    pub fn at(&self, point: usize, comp: usize) -> f64 {
        self.values[point * self.components + comp]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }

    /// Extract one component as a contiguous slice-backed vector.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.n_points()).map(|p| self.at(p, c)).collect()
    }

    /// Forward spectra of all components, concatenated component-major.
    pub(crate) fn spectra(&self) -> Vec<Complex64> {
        let n = self.n_points();
        let mut out = Vec::with_capacity(n * self.components);
        for c in 0..self.components {
            out.extend(fft_forward(&self.grid, &self.component(c)));
        }
        out
    }

    /// Rebuild a field from concatenated per-component spectra, keeping the
    /// spectra attached.
    pub(crate) fn from_spectra(
        grid: &SpectralGrid,
        components: usize,
        spectra: Vec<Complex64>,
    ) -> Self {
        let n = grid.n_total();
        let mut values = vec![0.0; n * components];
        for c in 0..components {
            let vals = fft_inverse(grid, &spectra[c * n..(c + 1) * n]);
            for (p, v) in vals.into_iter().enumerate() {
                values[p * components + c] = v;
            }
        }
        Self {
            grid: grid.clone(),
            components,
            values,
            spectrum: Some(spectra),
        }
    }

    // ---- pointwise arithmetic -------------------------------------------

    pub fn scale(&self, s: f64) -> Field {
        let values = self.values.iter().map(|v| v * s).collect();
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values,
            spectrum: None,
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip(other, |a, b| a + s * b)
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other) && self.components == other.components);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values,
            spectrum: None,
        }
    }

    /// Pointwise dot product of two fields with equal component counts;
    /// returns a one-component field.
    pub fn dot(&self, other: &Field) -> Field {
        debug_assert!(self.same_grid(other) && self.components == other.components);
        let n = self.n_points();
        let mut values = vec![0.0; n];
        for (p, v) in values.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..self.components {
                s += self.at(p, c) * other.at(p, c);
            }
            *v = s;
        }
        Field {
            grid: self.grid.clone(),
            components: 1,
            values,
            spectrum: None,
        }
    }

    /// Pointwise squared Euclidean norm over components (Frobenius for
    /// tensor-valued fields); returns a one-component field.
    pub fn squared_norm(&self) -> Field {
        self.dot(self)
    }

    /// Multiply a vector-valued field by a one-component weight field.
    pub fn weighted_by(&self, weight: &Field) -> Field {
        debug_assert!(self.same_grid(weight) && weight.components == 1);
        let n = self.n_points();
        let mut values = self.values.clone();
        for p in 0..n {
            let w = weight.at(p, 0);
            for c in 0..self.components {
                values[p * self.components + c] *= w;
            }
        }
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values,
            spectrum: None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    // ---- RLXF1 file format ----------------------------------------------

    /// Write in the RLXF1 format: one ASCII header line
    /// `RLXF1 <dim> <nx> [ny] [nz] <components> <len_x> [len_y] [len_z]`,
    /// then the raw little-endian f64 samples, row-major, component-fastest.
    pub fn write_rlxf<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = format!("RLXF1 {}", self.grid.dim());
        for n in self.grid.shape() {
            header.push_str(&format!(" {n}"));
        }
        header.push_str(&format!(" {}", self.components));
        for l in self.grid.lengths() {
            header.push_str(&format!(" {l:.17e}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_rlxf_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        self.write_rlxf(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_rlxf<R: Read>(r: R) -> Result<Field> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.is_empty() || toks[0] != "RLXF1" {
            return Err(Error::BadFieldFile("missing RLXF1 magic".into()));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::BadFieldFile(format!("bad number {s:?}")))
        };
        let dim = parse(toks.get(1).ok_or_else(|| Error::BadFieldFile("truncated header".into()))?)?
            as usize;
        if !(1..=3).contains(&dim) || toks.len() != 3 + 2 * dim {
            return Err(Error::BadFieldFile(format!(
                "header has {} tokens for dim {dim}",
                toks.len()
            )));
        }
        let mut shape = Vec::with_capacity(dim);
        for i in 0..dim {
            shape.push(parse(toks[2 + i])? as usize);
        }
        let components = parse(toks[2 + dim])? as usize;
        let mut lengths = Vec::with_capacity(dim);
        for i in 0..dim {
            lengths.push(parse(toks[3 + dim + i])?);
        }
        let grid = SpectralGrid::new(&shape, &lengths)?;
        let count = grid.n_total() * components;
        let mut values = vec![0.0; count];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            reader.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Field::from_values(&grid, components, values)
    }

    pub fn read_rlxf_path(path: &Path) -> Result<Field> {
        Field::read_rlxf(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rlxf_roundtrip() {
        let grid = SpectralGrid::new(&[8, 10], &[1.5, 2.5]).unwrap();
        let f = Field::from_fn(&grid, 3, |x, c| (x[0] + 2.0 * x[1]).sin() + c as f64);
        let mut buf = Vec::new();
        f.write_rlxf(&mut buf).unwrap();
        let g = Field::read_rlxf(&buf[..]).unwrap();
        assert_eq!(g.components(), 3);
        assert!(g.same_grid(&f));
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn rlxf_rejects_garbage() {
        assert!(Field::read_rlxf(&b"WRONG 1 8 1 6.28\n"[..]).is_err());
        assert!(Field::read_rlxf(&b"RLXF1 1 8 1\n"[..]).is_err());
    }

    #[test]
    fn dot_and_weighting() {
        let grid = SpectralGrid::unit_torus(&[8]).unwrap();
        let v = Field::from_fn(&grid, 3, |_, c| (c + 1) as f64);
        let sq = v.squared_norm();
        assert!(sq.values().iter().all(|&x| (x - 14.0).abs() < 1e-15));
        let w = v.weighted_by(&sq.scale(0.5));
        assert!((w.at(0, 2) - 21.0).abs() < 1e-15);
    }
}
