//! Exact solutions of the linear scalar problems underlying the solvers:
//! the damped wave equation eps g'' + g' + k^2 g = 0 per Fourier mode, the
//! heat equation, the matching initial-layer mode, and the equator lift
//! that turns them into exact sphere-valued solutions.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::DirectorField;
use crate::grid::TWO_PI;
use crate::rates::{rate_fit, RateFit};

/// One Fourier mode of scalar initial data for the damped wave equation.
#[derive(Debug, Clone, Copy)]
pub struct ScalarModeIc {
    pub k: i64,
    /// initial value coefficient
    pub a: f64,
    /// initial velocity coefficient
    pub b: f64,
    pub eps: f64,
}

/// Value, first and second time derivative of one damped-wave mode.
#[derive(Debug, Clone, Copy)]
pub struct ModeSolution {
    pub value: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Entries of the exact 2x2 linear propagator over a step of length `t`:
/// (g, g') = (ga*g0 + gb*v0, dga*g0 + dgb*v0).
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    pub ga: f64,
    pub gb: f64,
    pub dga: f64,
    pub dgb: f64,
}

// Below this value of (mu*t)^2 the confluent series around the double root
// is used; above it the explicit root formulas are safe from cancellation.
const SERIES_Q_THRESHOLD: f64 = 1e-4;

/// Closed-form solution of eps g'' + g' + ksq g = 0 with g(0)=a, g'(0)=b.
///
/// Root regimes: real (4 eps ksq < 1), complex (> 1) and a confluent series
/// around the double root. The heat-like root is evaluated as
/// lambda_plus = -2 ksq / (1 + sqrt(1 - 4 eps ksq)) so small eps*ksq does
/// not cancel.
pub fn solve_damped_mode(eps: f64, ksq: f64, a: f64, b: f64, t: f64) -> ModeSolution {
    debug_assert!(eps > 0.0 && t >= 0.0 && ksq >= 0.0);
    if t == 0.0 {
        return ModeSolution {
            value: a,
            velocity: b,
            acceleration: -(b + ksq * a) / eps,
        };
    }
    if ksq == 0.0 {
        // eps g'' + g' = 0: g = a + eps b (1 - e^{-t/eps})
        let decay = (-t / eps).exp();
        return ModeSolution {
            value: a + eps * b * (1.0 - decay),
            velocity: b * decay,
            acceleration: -b / eps * decay,
        };
    }
    let disc = 1.0 - 4.0 * eps * ksq;
    let sigma = -1.0 / (2.0 * eps);
    let musq = disc / (4.0 * eps * eps);
    let q = musq * t * t;

    if q.abs() <= SERIES_Q_THRESHOLD {
        // g = e^{sigma t} h, h'' = musq h; cosh/sinhc expanded in q = (mu t)^2
        let u = 1.0 + q / 2.0 + q * q / 24.0 + q * q * q / 720.0;
        let s = t * (1.0 + q / 6.0 + q * q / 120.0 + q * q * q / 5040.0);
        let h0 = a;
        let h1 = b - sigma * a;
        let h = h0 * u + h1 * s;
        let hp = h0 * musq * s + h1 * u;
        let hpp = musq * h;
        let e = (sigma * t).exp();
        ModeSolution {
            value: e * h,
            velocity: e * (sigma * h + hp),
            acceleration: e * (sigma * sigma * h + 2.0 * sigma * hp + hpp),
        }
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let lp = -2.0 * ksq / (1.0 + sq);
        let lm = -(1.0 + sq) / (2.0 * eps);
        let delta = sq / eps; // lp - lm
        let ca = (b - a * lm) / delta;
        let cb = (a * lp - b) / delta;
        let ep = (lp * t).exp();
        let em = (lm * t).exp();
        ModeSolution {
            value: ca * ep + cb * em,
            velocity: ca * lp * ep + cb * lm * em,
            acceleration: ca * lp * lp * ep + cb * lm * lm * em,
        }
    } else {
        let omega = (-disc).sqrt() / (2.0 * eps);
        let c = (b - sigma * a) / omega;
        let (sin, cos) = (omega * t).sin_cos();
        let h = a * cos + c * sin;
        let hp = -a * omega * sin + c * omega * cos;
        let hpp = -omega * omega * h;
        let e = (sigma * t).exp();
        ModeSolution {
            value: e * h,
            velocity: e * (sigma * h + hp),
            acceleration: e * (sigma * sigma * h + 2.0 * sigma * hp + hpp),
        }
    }
}

/// Exact (value, velocity) of the damped-wave mode at time `t`.
pub fn damped_mode(ic: &ScalarModeIc, t: f64) -> (f64, f64) {
    let ksq = (ic.k * ic.k) as f64;
    let m = solve_damped_mode(ic.eps, ksq, ic.a, ic.b, t);
    (m.value, m.velocity)
}

/// Exact propagator entries for the linear part over a step `t`.
pub fn propagator(eps: f64, ksq: f64, t: f64) -> Propagator {
    let pa = solve_damped_mode(eps, ksq, 1.0, 0.0, t);
    let pb = solve_damped_mode(eps, ksq, 0.0, 1.0, t);
    Propagator {
        ga: pa.value,
        gb: pb.value,
        dga: pa.velocity,
        dgb: pb.velocity,
    }
}

/// Heat-equation mode: a * exp(-k^2 t).
pub fn heat_mode(k: i64, a: f64, t: f64) -> f64 {
    a * (-((k * k) as f64) * t).exp()
}

/// Scalar initial-layer mode: -eps * Dhat * exp(-t/eps) with
/// Dhat = b + k^2 a (the velocity mismatch against the heat mode).
pub fn scalar_layer_mode(k: i64, a: f64, b: f64, eps: f64, t: f64) -> f64 {
    let dhat = b + (k * k) as f64 * a;
    -eps * dhat * (-t / eps).exp()
}

/// Time derivative of the scalar layer mode: Dhat * exp(-t/eps).
pub fn scalar_layer_mode_velocity(k: i64, a: f64, b: f64, eps: f64, t: f64) -> f64 {
    let dhat = b + (k * k) as f64 * a;
    dhat * (-t / eps).exp()
}

/// Lift a scalar angle field onto the equator: (cos theta, sin theta, 0).
pub fn lift_to_equator(theta: &Field) -> DirectorField {
    assert_eq!(theta.components(), 1, "angle field must have one component");
    let mut values = vec![0.0; theta.n_points() * 3];
    for p in 0..theta.n_points() {
        let (s, c) = theta.at(p, 0).sin_cos();
        values[p * 3] = c;
        values[p * 3 + 1] = s;
    }
    let field = Field::from_values(theta.grid(), 3, values).expect("sized by construction");
    DirectorField::try_new(field).expect("equator lift is unit by construction")
}

/// One row of the scalar limit study: eps with the sup-in-time L2 errors of
/// the corrected position and velocity.
#[derive(Debug, Clone, Copy)]
pub struct ScalarStudyRow {
    pub eps: f64,
    pub err_pos: f64,
    pub err_vel: f64,
}

#[derive(Debug, Clone)]
pub struct ScalarStudy {
    pub rows: Vec<ScalarStudyRow>,
    pub pos: RateFit,
    pub vel: RateFit,
}

/// Measure, from the exact mode solutions on a length-2pi circle,
/// err(eps) = sup_{t<=T} |theta_eps - theta_0 - layer|_{L2} and the same for
/// velocities, then fit log err against log eps.
///
/// Modes are sine modes for k >= 1 and the constant for k = 0; duplicate
/// wavenumbers accumulate.
pub fn scalar_limit_study(
    theta0_modes: &[(i64, f64)],
    theta1_modes: &[(i64, f64)],
    eps_list: &[f64],
    t_final: f64,
) -> Result<ScalarStudy> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidParameter(
            "eps list needs at least 4 values".into(),
        ));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "eps list must be strictly decreasing".into(),
            ));
        }
    }
    if eps_list[0] / eps_list[eps_list.len() - 1] < 100.0 {
        return Err(Error::InvalidParameter(
            "eps list must span at least two decades".into(),
        ));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter("t_final must be positive".into()));
    }
    for &(k, _) in theta0_modes.iter().chain(theta1_modes) {
        if k < 0 {
            return Err(Error::InvalidParameter(format!("negative mode {k}")));
        }
    }

    let mut ks: Vec<i64> = theta0_modes
        .iter()
        .chain(theta1_modes)
        .map(|&(k, _)| k)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let coeff = |modes: &[(i64, f64)], k: i64| -> f64 {
        modes.iter().filter(|&&(kk, _)| kk == k).map(|&(_, c)| c).sum()
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("non-positive eps {eps}")));
        }
        let ts = study_times(eps, t_final);
        let mut sup_p = 0.0f64;
        let mut sup_v = 0.0f64;
        for &t in &ts {
            let mut ep2 = 0.0;
            let mut ev2 = 0.0;
            for &k in &ks {
                let a = coeff(theta0_modes, k);
                let b = coeff(theta1_modes, k);
                let ic = ScalarModeIc { k, a, b, eps };
                let (g, gp) = damped_mode(&ic, t);
                let heat = heat_mode(k, a, t);
                let heat_v = -((k * k) as f64) * heat;
                let lay = scalar_layer_mode(k, a, b, eps, t);
                let lay_v = scalar_layer_mode_velocity(k, a, b, eps, t);
                let w = if k == 0 { TWO_PI } else { TWO_PI / 2.0 };
                let dp = g - heat - lay;
                let dv = gp - heat_v - lay_v;
                ep2 += w * dp * dp;
                ev2 += w * dv * dv;
            }
            sup_p = sup_p.max(ep2.sqrt());
            sup_v = sup_v.max(ev2.sqrt());
        }
        rows.push(ScalarStudyRow {
            eps,
            err_pos: sup_p,
            err_vel: sup_v,
        });
    }
    let pos = rate_fit(&rows.iter().map(|r| (r.eps, r.err_pos)).collect::<Vec<_>>())?;
    let vel = rate_fit(&rows.iter().map(|r| (r.eps, r.err_vel)).collect::<Vec<_>>())?;
    Ok(ScalarStudy { rows, pos, vel })
}

/// Time samples for sup-in-time errors: t = 0, a geometric ladder through
/// the layer window [eps/100, 10 eps], then a uniform sweep to t_final.
pub(crate) fn study_times(eps: f64, t_final: f64) -> Vec<f64> {
    let mut ts = vec![0.0];
    let mut t = eps / 100.0;
    while t < (10.0 * eps).min(t_final) {
        ts.push(t);
        t *= 1.25;
    }
    let n_uniform = 400;
    for i in 1..=n_uniform {
        ts.push(t_final * i as f64 / n_uniform as f64);
    }
    ts
}

/// Write `scalar_rates.csv`: per-eps rows then a footer with the fits.
pub fn write_scalar_rates_csv(study: &ScalarStudy, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "eps,err_pos,err_vel")?;
    for r in &study.rows {
        writeln!(w, "{},{},{}", r.eps, r.err_pos, r.err_vel)?;
    }
    if study.pos.exact_zero && study.vel.exact_zero {
        writeln!(w, "slope_pos,slope_vel,residual")?;
        writeln!(w, "exact-zero,exact-zero,0")?;
    } else {
        writeln!(w, "slope_pos,slope_vel,residual")?;
        writeln!(
            w,
            "{},{},{}",
            study.pos.slope,
            study.vel.slope,
            study.pos.residual.max(study.vel.residual)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;

    // reference values computed at 50-digit precision from the closed form
    // g = e^{sigma t} (a cosh(mu t) + (b - sigma a) sinh(mu t)/mu)
    const REFERENCE: &[(i64, f64, f64, f64, f64, f64, f64)] = &[
        (0, 1.0, 1.0, 0.1, 0.3, 1.0950212931632136096, 0.049787068367863956798),
        (1, 1.0, 0.0, 0.25, 1.0, 0.40600584970983807568, -0.54134113294645076758),
        (1, 0.3, -0.7, 0.25, 0.5, 0.091969860292860580399, -0.22072766470286538479),
        (1, 1.0, 0.0, 0.01, 0.7, 0.49813406706804530851, -0.503217597121371616),
        (3, 0.5, 2.0, 0.4, 0.9, -0.24520041892079653037, 0.44483037015897885951),
        (8, 1.0, -1.0, 0.001, 0.2, 1.1578091895805562357e-6, -7.9567920568610017305e-5),
        (32, 1.0, 0.0, 1e-5, 0.05, 3.4372062128722039292e-23, -3.5564984710455167205e-20),
        (2, -0.4, 0.9, 0.049999999, 2.0, -8.634167175123047404e-6, 4.7728501343303962159e-5),
        (5, 1.0, 0.0, 0.01, 0.3, 4.8944371280292122956e-6, -2.2942674037636934791e-4),
        (1, 0.0, 1.0, 0.3, 4.0, 2.7230701108072963286e-4, -1.7101896097942382968e-3),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(k, a, b, eps, t, g_ref, gp_ref) in REFERENCE {
            let (g, gp) = damped_mode(&ScalarModeIc { k, a, b, eps }, t);
            let scale = g_ref.abs().max(1e-30);
            assert!(
                (g - g_ref).abs() / scale <= 1e-13,
                "value k={k} eps={eps}: {g} vs {g_ref}"
            );
            let scale = gp_ref.abs().max(1e-30);
            assert!(
                (gp - gp_ref).abs() / scale <= 1e-13,
                "velocity k={k} eps={eps}: {gp} vs {gp_ref}"
            );
        }
    }

    #[test]
    fn k_zero_closed_form() {
        // eps g'' + g' = 0  ->  g = a + eps b (1 - e^{-t/eps})
        let eps = 0.07;
        for &t in &[0.0, 0.05, 0.4, 3.0] {
            let (g, gp) = damped_mode(&ScalarModeIc { k: 0, a: 2.0, b: -1.5, eps }, t);
            let expect = 2.0 + eps * (-1.5) * (1.0 - (-t / eps).exp());
            let expect_v = -1.5 * (-t / eps).exp();
            assert!((g - expect).abs() <= 1e-14 * (1.0 + expect.abs()));
            assert!((gp - expect_v).abs() <= 1e-14);
        }
    }

    #[test]
    fn double_root_closed_form() {
        // 4 eps k^2 = 1: g = (a + (b + a/(2 eps)) t) e^{-t/(2 eps)}
        let (k, eps) = (1i64, 0.25);
        let (a, b) = (0.8, -0.3);
        for &t in &[0.0, 1e-9, 1e-4, 0.3, 2.0] {
            let (g, gp) = damped_mode(&ScalarModeIc { k, a, b, eps }, t);
            let slope = b + a / (2.0 * eps);
            let expect = (a + slope * t) * (-t / (2.0 * eps)).exp();
            let expect_v =
                (slope - (a + slope * t) / (2.0 * eps)) * (-t / (2.0 * eps)).exp();
            assert!((g - expect).abs() <= 1e-13 * (1.0 + expect.abs()), "t={t}");
            assert!((gp - expect_v).abs() <= 1e-13 * (1.0 + expect_v.abs()));
        }
    }

    #[test]
    fn initial_conditions_reproduced() {
        for &(k, a, b, eps, ..) in REFERENCE {
            let (g, gp) = damped_mode(&ScalarModeIc { k, a, b, eps }, 0.0);
            assert!((g - a).abs() <= 1e-13 * (1.0 + a.abs()));
            assert!((gp - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn ode_residual_from_analytic_derivatives() {
        for k in [0i64, 1, 2, 5, 13, 32] {
            for eps in [1e-1f64, 1e-2, 1e-3, 1e-4, 1e-5] {
                for t in [0.0, eps, eps.sqrt(), 0.3, 2.0] {
                    let ksq = (k * k) as f64;
                    let m = solve_damped_mode(eps, ksq, 1.0, -0.4, t);
                    let res = eps * m.acceleration + m.velocity + ksq * m.value;
                    let scale = 1.0 + ksq * m.value.abs() + m.velocity.abs();
                    assert!(
                        res.abs() / scale <= 1e-10,
                        "k={k} eps={eps} t={t}: residual {res}"
                    );
                }
            }
        }
    }

    #[test]
    fn converges_to_heat_mode() {
        // fixed t > 0: damped value -> heat value with O(eps) deviation
        let (k, a, b, t) = (1i64, 1.0, 0.0, 0.5);
        let heat = heat_mode(k, a, t);
        let devs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| (damped_mode(&ScalarModeIc { k, a, b, eps }, t).0 - heat).abs())
            .collect();
        for pair in devs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((8.0..12.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn heat_mode_values() {
        assert_eq!(heat_mode(0, 3.5, 9.0), 3.5);
        assert!((heat_mode(1, 1.0, std::f64::consts::LN_2) - 0.5).abs() <= 1e-15);
        assert!((heat_mode(2, 2.0, 1.0) - 2.0 * (-4.0f64).exp()).abs() <= 1e-15);
    }

    #[test]
    fn layer_mode_values() {
        // well-prepared: b = -k^2 a kills the layer
        assert_eq!(scalar_layer_mode(2, 1.0, -4.0, 0.1, 0.3), 0.0);
        // t = 0
        assert!((scalar_layer_mode(1, 1.0, 1.0, 0.05, 0.0) + 0.05 * 2.0).abs() <= 1e-15);
        // k = 0, b = 1
        let eps = 0.2;
        let t = 0.4;
        assert!(
            (scalar_layer_mode(0, 5.0, 1.0, eps, t) + eps * (-t / eps).exp()).abs() <= 1e-15
        );
        // decayed out after 40 eps
        assert!(scalar_layer_mode(1, 1.0, 1.0, 0.01, 0.4).abs() <= 2.0 * 0.01 * 1e-17);
    }

    #[test]
    fn equator_lift_basics() {
        let grid = SpectralGrid::unit_torus(&[16]).unwrap();
        let zero = Field::zeros(&grid, 1);
        let d = lift_to_equator(&zero);
        assert_eq!(d.field().at(0, 0), 1.0);
        assert_eq!(d.field().at(0, 1), 0.0);
        let half_pi = Field::from_fn(&grid, 1, |_, _| std::f64::consts::FRAC_PI_2);
        let d = lift_to_equator(&half_pi);
        assert!(d.field().at(0, 0).abs() <= 1e-16);
        assert!((d.field().at(0, 1) - 1.0).abs() <= 1e-16);
        let theta = Field::from_fn(&grid, 1, |x, _| 0.7 * x[0].sin());
        assert!(lift_to_equator(&theta).max_norm_violation() <= 1e-15);
    }

    #[test]
    fn study_measures_frozen_slopes() {
        // generic single mode k=1, a=1, b=0; T = 0.5, the standard sweep.
        // Slopes frozen from a 50-digit independent evaluation: position
        // exactly 1 (the sup sits at t=0 where the layer shifts the data by
        // eps*Dhat), velocity 0.93 +- sampling wiggle.
        let eps_list = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
        let study =
            scalar_limit_study(&[(1, 1.0)], &[(1, 0.0)], &eps_list, 0.5).unwrap();
        assert!((study.pos.slope - 1.0).abs() <= 0.02, "pos {}", study.pos.slope);
        assert!(
            (study.vel.slope - 0.93).abs() <= 0.05,
            "vel {}",
            study.vel.slope
        );
        // the t=0 sample pins err_pos(eps) = eps * Dhat * sqrt(pi)
        let sqrt_pi = 1.7724538509055160;
        for r in &study.rows {
            assert!((r.err_pos - r.eps * sqrt_pi).abs() / r.err_pos <= 1e-6);
        }
    }

    #[test]
    fn study_exact_zero_case() {
        // k = 0 data with b = 0: damped solution is constant, no layer
        let eps_list = [1e-1, 1e-2, 1e-3, 1e-4];
        let study = scalar_limit_study(&[(0, 2.0)], &[(0, 0.0)], &eps_list, 1.0).unwrap();
        assert!(study.pos.exact_zero);
        assert!(study.vel.exact_zero);
    }

    #[test]
    fn study_validates_eps_list() {
        assert!(scalar_limit_study(&[(1, 1.0)], &[], &[1e-1, 1e-2, 1e-3], 1.0).is_err());
        assert!(
            scalar_limit_study(&[(1, 1.0)], &[], &[1e-1, 1e-2, 1e-3, 2e-3], 1.0).is_err()
        );
        assert!(
            scalar_limit_study(&[(1, 1.0)], &[], &[1e-1, 5e-2, 2e-2, 1e-2], 1.0).is_err()
        );
    }
}
