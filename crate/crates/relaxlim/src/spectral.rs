//! Spectral derivatives, Sobolev norms, the sharp Fourier cutoff and the
//! 2/3 dealiasing filter.
//!
//! Norm convention: |f|_{H^k} is the *sum* over derivative orders g <= k of
//! the L2 norms of the full iterated-gradient tensors; the homogeneous
//! variant sums 1 <= g <= k. L2 itself is the uniform-cell quadrature,
//! which Parseval makes identical to the spectral-side sum for any grid
//! function.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{fft_forward, fft_inverse};

/// Largest derivative order accepted by `sobolev_norm`.
pub const MAX_SOBOLEV_ORDER: usize = 7;

/// Spectral gradient. Output has `dim * components` components, laid out
/// with the derivative axis fastest: output component `c*dim + axis` is
/// the `axis` derivative of input component `c`. Exact for band-limited
/// fields; the Nyquist mode's first-derivative weight is zero.
pub fn gradient(f: &Field) -> Field {
    let grid = f.grid().clone();
    let dim = grid.dim();
    let n = grid.n_total();
    let out_comps = f.components() * dim;
    let mut values = vec![0.0; n * out_comps];
    let axis_tables: Vec<Vec<f64>> = (0..dim).map(|a| grid.axis_deriv_table(a)).collect();
    for c in 0..f.components() {
        let spec = fft_forward(&grid, &f.component(c));
        for (axis, table) in axis_tables.iter().enumerate() {
            let dspec: Vec<Complex64> = spec
                .iter()
                .zip(table)
                .map(|(z, &k)| Complex64::new(0.0, k) * z)
                .collect();
            let dvals = fft_inverse(&grid, &dspec);
            let oc = c * dim + axis;
            for (p, v) in dvals.into_iter().enumerate() {
                values[p * out_comps + oc] = v;
            }
        }
    }
    Field::from_values(&grid, out_comps, values).expect("sized by construction")
}

/// Spectral Laplacian: multiply each mode by -|k|^2 (full Nyquist weight).
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid().clone();
    let n = grid.n_total();
    let ksq = grid.ksq_table();
    let comps = f.components();
    let mut values = vec![0.0; n * comps];
    for c in 0..comps {
        let spec = fft_forward(&grid, &f.component(c));
        let lspec: Vec<Complex64> = spec.iter().zip(&ksq).map(|(z, &k2)| -k2 * z).collect();
        let lvals = fft_inverse(&grid, &lspec);
        for (p, v) in lvals.into_iter().enumerate() {
            values[p * comps + c] = v;
        }
    }
    Field::from_values(&grid, comps, values).expect("sized by construction")
}

/// L2 norm by the grid quadrature rule: sqrt(cell volume * sum of squares).
pub fn l2_norm(f: &Field) -> f64 {
    let s: f64 = f.values().iter().map(|v| v * v).sum();
    (f.grid().cell_volume() * s).sqrt()
}

/// |f|_{H^k} (inhomogeneous) or |f|_{H^k with orders 1..k} (homogeneous).
pub fn sobolev_norm(f: &Field, k: usize, homogeneous: bool) -> Result<f64> {
    let lo = if homogeneous { 1 } else { 0 };
    sobolev_norm_range(f, lo, k)
}

/// Sum over derivative orders `lo..=hi` of |grad^g f|_{L2}, evaluated on the
/// spectral side; equals the materialized-gradient quadrature value by
/// Parseval. `|grad f|_{H^k}` is the range `1..=k+1`.
pub fn sobolev_norm_range(f: &Field, lo: usize, hi: usize) -> Result<f64> {
    if hi > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder {
            k: hi,
            max: MAX_SOBOLEV_ORDER,
        });
    }
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "empty derivative range {lo}..={hi}"
        )));
    }
    let grid = f.grid();
    let ksq = grid.deriv_ksq_table();
    // per-mode power summed over components
    let n = grid.n_total();
    let mut power = vec![0.0; n];
    for c in 0..f.components() {
        let spec = fft_forward(grid, &f.component(c));
        for (p, z) in power.iter_mut().zip(&spec) {
            *p += z.norm_sqr();
        }
    }
    let quad = grid.cell_volume() / n as f64;
    let mut total = 0.0;
    for order in lo..=hi {
        let mut e = 0.0;
        for (p, &q) in power.iter().zip(&ksq) {
            e += p * q.powi(order as i32);
        }
        total += (quad * e).sqrt();
    }
    Ok(total)
}

/// Sharp Fourier cutoff: keep modes with |k| <= 1/eta, zero the rest.
///
/// The returned field carries the masked spectrum it was synthesized from,
/// so applying the same cutoff again masks an already-masked spectrum
/// (a bitwise no-op) and regenerates identical samples: the cutoff is an
/// exact projection at the bit level. A cutoff at or above the band limit
/// returns the input unchanged.
pub fn mollify(f: &Field, eta: f64) -> Field {
    assert!(eta > 0.0 && eta.is_finite(), "mollifier width must be positive");
    let grid = f.grid().clone();
    let cutoff = 1.0 / eta;
    if cutoff >= grid.max_wavenumber() {
        return f.clone();
    }
    let ksq = grid.ksq_table();
    let cut2 = cutoff * cutoff;
    let n = grid.n_total();
    let mut spectra = match &f.spectrum {
        Some(s) => s.clone(),
        None => f.spectra(),
    };
    for c in 0..f.components() {
        for (m, &k2) in ksq.iter().enumerate() {
            if k2 > cut2 {
                spectra[c * n + m] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Field::from_spectra(&grid, f.components(), spectra)
}

/// 2/3-rule truncation of nonlinear products: zero every mode whose signed
/// index exceeds n/3 in magnitude on any axis.
pub fn dealias_two_thirds(f: &Field) -> Field {
    let grid = f.grid().clone();
    let mask = grid.dealias_mask();
    let n = grid.n_total();
    let mut spectra = f.spectra();
    for c in 0..f.components() {
        for (m, keep) in mask.iter().enumerate() {
            if !keep {
                spectra[c * n + m] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Field::from_spectra(&grid, f.components(), spectra)
}

/// Apply the 2/3 mask directly to a concatenated spectrum (used inside the
/// time steppers, where products are already in spectral form).
pub(crate) fn dealias_spectra_in_place(mask: &[bool], components: usize, spectra: &mut [Complex64]) {
    let n = mask.len();
    for c in 0..components {
        for (m, keep) in mask.iter().enumerate() {
            if !keep {
                spectra[c * n + m] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use proptest::prelude::*;

    fn sin_x(grid: &SpectralGrid) -> Field {
        Field::from_fn(grid, 1, |x, _| x[0].sin())
    }

    #[test]
    fn gradient_of_sin_is_cos() {
        let grid = SpectralGrid::unit_torus(&[32]).unwrap();
        let g = gradient(&sin_x(&grid));
        let cos = Field::from_fn(&grid, 1, |x, _| x[0].cos());
        assert!(g.max_abs_diff(&cos) <= 1e-12);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let grid = SpectralGrid::unit_torus(&[16, 16]).unwrap();
        let c = Field::from_fn(&grid, 1, |_, _| 3.25);
        assert!(gradient(&c).sup_norm() <= 1e-13);
    }

    #[test]
    fn gradient_2d_analytic() {
        // f = sin(3x) cos(2y) -> (3 cos(3x) cos(2y), -2 sin(3x) sin(2y))
        let grid = SpectralGrid::unit_torus(&[32, 32]).unwrap();
        let f = Field::from_fn(&grid, 1, |x, _| (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let g = gradient(&f);
        let expect = Field::from_fn(&grid, 2, |x, c| match c {
            0 => 3.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos(),
            _ => -2.0 * (3.0 * x[0]).sin() * (2.0 * x[1]).sin(),
        });
        assert!(g.max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn laplacian_eigenfunctions() {
        let grid = SpectralGrid::unit_torus(&[32]).unwrap();
        let f = sin_x(&grid);
        assert!(laplacian(&f).max_abs_diff(&f.scale(-1.0)) <= 1e-12);
        let f2 = Field::from_fn(&grid, 1, |x, _| (2.0 * x[0]).sin());
        assert!(laplacian(&f2).max_abs_diff(&f2.scale(-4.0)) <= 1e-12);
        let c = Field::from_fn(&grid, 1, |_, _| 7.0);
        assert!(laplacian(&c).sup_norm() <= 1e-12);
    }

    #[test]
    fn derivatives_commute() {
        let grid = SpectralGrid::unit_torus(&[32, 32]).unwrap();
        let f = Field::from_fn(&grid, 1, |x, _| {
            (2.0 * x[0]).sin() * x[1].cos() + 0.3 * (x[0] + 3.0 * x[1]).cos()
        });
        let a = laplacian(&gradient(&f));
        let b = gradient(&laplacian(&f));
        let scale = a.sup_norm().max(1.0);
        assert!(a.max_abs_diff(&b) / scale <= 1e-12);
    }

    #[test]
    fn sobolev_examples() {
        let grid = SpectralGrid::unit_torus(&[64]).unwrap();
        let zero = Field::zeros(&grid, 1);
        for k in 0..=MAX_SOBOLEV_ORDER {
            assert_eq!(sobolev_norm(&zero, k, false).unwrap(), 0.0);
        }
        // |sin|_{L2} = |cos|_{L2} = sqrt(pi) on [0, 2pi)
        let f = sin_x(&grid);
        let h1 = sobolev_norm(&f, 1, false).unwrap();
        assert!((h1 - 3.5449077018110320).abs() <= 1e-12);
        // constants: |c|_{H^k} = |c| sqrt(2 pi), homogeneous 0
        let c = Field::from_fn(&grid, 1, |_, _| -2.0);
        let full = sobolev_norm(&c, 5, false).unwrap();
        assert!((full - 2.0 * 2.5066282746310005).abs() <= 1e-12);
        assert!(sobolev_norm(&c, 5, true).unwrap() <= 1e-13);
        // order cap
        assert!(sobolev_norm(&f, 8, false).is_err());
    }

    #[test]
    fn sobolev_matches_materialized_gradients() {
        let grid = SpectralGrid::unit_torus(&[24, 24]).unwrap();
        let f = Field::from_fn(&grid, 3, |x, c| {
            ((c + 1) as f64 * x[0]).sin() * (x[1] + 0.5 * c as f64).cos()
        });
        let g1 = gradient(&f);
        let g2 = gradient(&g1);
        let direct = l2_norm(&f) + l2_norm(&g1) + l2_norm(&g2);
        let spectral = sobolev_norm(&f, 2, false).unwrap();
        assert!((direct - spectral).abs() / direct <= 1e-12);
    }

    #[test]
    fn parseval_identity() {
        let grid = SpectralGrid::unit_torus(&[48]).unwrap();
        let f = Field::from_fn(&grid, 1, |x, _| {
            x[0].sin() + 0.4 * (5.0 * x[0]).cos() + 0.1 * (11.0 * x[0]).sin()
        });
        let phys = l2_norm(&f);
        let spec = sobolev_norm_range(&f, 0, 0).unwrap();
        assert!((phys - spec).abs() / phys <= 1e-12);
    }

    #[test]
    fn mollify_spec_cases() {
        let grid = SpectralGrid::unit_torus(&[64]).unwrap();
        let f = Field::from_fn(&grid, 1, |x, _| x[0].sin() + (5.0 * x[0]).sin());
        // cutoff above the band limit: unchanged
        let eta_small = 1.0 / (grid.max_wavenumber() + 1.0);
        assert_eq!(mollify(&f, eta_small).values(), f.values());
        // 1/eta = 2 keeps only the k=1 mode
        let low = mollify(&f, 0.5);
        let expect = sin_x(&grid);
        assert!(low.max_abs_diff(&expect) <= 1e-13);
    }

    #[test]
    fn mollify_is_bitwise_idempotent() {
        let grid = SpectralGrid::unit_torus(&[64]).unwrap();
        let f = Field::from_fn(&grid, 3, |x, c| {
            (x[0] * (c + 1) as f64).sin() + 0.3 * (9.0 * x[0]).cos()
        });
        for eta in [0.5, 0.13, 0.031] {
            let once = mollify(&f, eta);
            let twice = mollify(&once, eta);
            assert_eq!(once.values(), twice.values());
        }
    }

    proptest! {
        #[test]
        fn mollify_never_increases_sobolev_norms(seed in 0u64..32) {
            use rand::{Rng, SeedableRng};
            let grid = SpectralGrid::unit_torus(&[32]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut coeffs = vec![0.0; 16];
            for c in coeffs.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
            let f = Field::from_fn(&grid, 1, |x, _| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| a * ((k + 1) as f64 * x[0]).sin())
                    .sum()
            });
            let m = mollify(&f, 0.2); // cutoff |k| <= 5
            for k in 0..=3 {
                let before = sobolev_norm(&f, k, false).unwrap();
                let after = sobolev_norm(&m, k, false).unwrap();
                prop_assert!(after <= before);
            }
        }

        #[test]
        fn sobolev_monotone_in_k(seed in 0u64..16) {
            use rand::{Rng, SeedableRng};
            let grid = SpectralGrid::unit_torus(&[16, 16]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let f = Field::from_fn(&grid, 1, |x, _| a * x[0].sin() + b * (x[0] + 2.0*x[1]).cos());
            let mut prev = 0.0;
            for k in 0..=MAX_SOBOLEV_ORDER {
                let nk = sobolev_norm(&f, k, false).unwrap();
                prop_assert!(nk >= prev - 1e-12);
                prev = nk;
            }
        }
    }

    #[test]
    fn dealias_cuts_high_modes() {
        let grid = SpectralGrid::unit_torus(&[32]).unwrap();
        // n/3 = 10: mode 9 survives, mode 12 dies
        let f = Field::from_fn(&grid, 1, |x, _| (9.0 * x[0]).sin() + (12.0 * x[0]).sin());
        let d = dealias_two_thirds(&f);
        let survivor = Field::from_fn(&grid, 1, |x, _| (9.0 * x[0]).sin());
        assert!(d.max_abs_diff(&survivor) <= 1e-13);
    }
}
