//! Initial-layer construction, remainder extraction, the singular/regular
//! splitting of the remainder equation with its brute-force oracle, the
//! weighted energy functionals, and the closed-form envelope bounds.
//!
//! Setting: the damped wave map solution is written as
//!
//! ```text
//! d_eps = d0 + layer + sqrt(eps) dR,   layer(t) = -eps D exp(-t/eps),
//! D = dtilde_in - lap d_in - |grad d_in|^2 d_in,
//! ```
//!
//! so dR solves dtt dR + (1/eps) dt dR - (1/eps) lap dR = S + R with
//! dR(0) = sqrt(eps) D, dt dR(0) = 0. S collects the 1/sqrt(eps)- and
//! 1/eps-weighted terms, R the bounded ones.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::DirectorField;
use crate::heat::{heat_rhs, HeatState};
use crate::spectral::{gradient, l2_norm, laplacian, sobolev_norm, sobolev_norm_range};
use crate::wave::WaveState;

fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

/// Initial-layer amplitude D = dtilde_in - lap d_in - |grad d_in|^2 d_in,
/// the gap between the prescribed initial velocity and the limit-flow
/// velocity. Vanishes exactly for well-prepared data.
pub fn compute_d(d_in: &DirectorField, dtilde_in: &Field) -> Result<Field> {
    let max_dot = crate::geometry::max_orthogonality_violation(d_in, dtilde_in);
    if max_dot > 1e-8 {
        return Err(Error::IncompatibleInitialData { max_dot });
    }
    Ok(dtilde_in.sub(&heat_rhs(d_in)))
}

/// The layer itself: -eps D exp(-t/eps).
pub fn layer_eval(d_cap: &Field, eps: f64, t: f64) -> Field {
    d_cap.scale(-eps * (-t / eps).exp())
}

/// Time derivative of the layer: D exp(-t/eps).
pub fn layer_time_derivative(d_cap: &Field, eps: f64, t: f64) -> Field {
    d_cap.scale((-t / eps).exp())
}

/// Scaled discrepancy between the wave-map state and the corrected limit.
#[derive(Debug, Clone)]
pub struct RemainderState {
    pub t: f64,
    pub eps: f64,
    pub d_r: Field,
    pub v_r: Field,
}

/// dR = (d_eps - d0 - layer)/sqrt(eps) and
/// vR = (v_eps - heat_rhs(d0) - D exp(-t/eps))/sqrt(eps), taken from solver
/// states at the same time on the same grid.
pub fn extract_remainder(
    wave: &WaveState,
    heat: &HeatState,
    d_cap: &Field,
) -> Result<RemainderState> {
    if (wave.t - heat.t).abs() > 1e-12 * (1.0 + wave.t.abs()) {
        return Err(Error::TimeMismatch {
            a: wave.t,
            b: heat.t,
        });
    }
    if !wave.director.field().same_grid(heat.director.field())
        || !wave.director.field().same_grid(d_cap)
    {
        return Err(Error::GridMismatch);
    }
    let eps = wave.eps;
    validate_eps(eps)?;
    let scale = 1.0 / eps.sqrt();
    let layer = layer_eval(d_cap, eps, wave.t);
    let d_r = wave
        .director
        .field()
        .sub(heat.director.field())
        .sub(&layer)
        .scale(scale);
    let w0 = heat_rhs(&heat.director);
    let layer_v = layer_time_derivative(d_cap, eps, wave.t);
    let v_r = wave
        .velocity
        .field()
        .sub(&w0)
        .sub(&layer_v)
        .scale(scale);
    Ok(RemainderState {
        t: wave.t,
        eps,
        d_r,
        v_r,
    })
}

// ---- energy functionals ---------------------------------------------------

/// E = |vR|_{H2}^2 + (1/eps - 1)|dR|_{H2}^2 + (2/eps)|grad dR|_{H2}^2
///     + |vR + dR|_{H2}^2; nonnegative for eps < 1/2.
pub fn energy_e(rem: &RemainderState) -> Result<f64> {
    validate_eps(rem.eps)?;
    let vr_h2 = sobolev_norm(&rem.v_r, 2, false)?;
    let dr_h2 = sobolev_norm(&rem.d_r, 2, false)?;
    let grad_dr_h2 = sobolev_norm_range(&rem.d_r, 1, 3)?;
    let sum_h2 = sobolev_norm(&rem.v_r.add(&rem.d_r), 2, false)?;
    Ok(vr_h2 * vr_h2
        + (1.0 / rem.eps - 1.0) * dr_h2 * dr_h2
        + 2.0 / rem.eps * grad_dr_h2 * grad_dr_h2
        + sum_h2 * sum_h2)
}

/// F = (1/eps - 1/2)|vR|_{H2}^2 + (1/(2 eps))|grad dR|_{H2}^2.
pub fn energy_f(rem: &RemainderState) -> Result<f64> {
    validate_eps(rem.eps)?;
    let vr_h2 = sobolev_norm(&rem.v_r, 2, false)?;
    let grad_dr_h2 = sobolev_norm_range(&rem.d_r, 1, 3)?;
    Ok((1.0 / rem.eps - 0.5) * vr_h2 * vr_h2 + 0.5 / rem.eps * grad_dr_h2 * grad_dr_h2)
}

/// M = |D|_{H2}^2 + 2 |grad D|_{H2}^2; equals E at t = 0.
pub fn m_value(d_cap: &Field) -> f64 {
    let h2 = sobolev_norm(d_cap, 2, false).expect("order within range");
    let grad_h2 = sobolev_norm_range(d_cap, 1, 3).expect("order within range");
    h2 * h2 + 2.0 * grad_h2 * grad_h2
}

/// Envelope 2 M e^{C t} / (1 + eps M - eps (1 + M) e^{C t}); defined while
/// the denominator stays positive and increasing up to its blow-up time.
pub fn bound_curve(m: f64, c: f64, eps: f64, t: f64) -> Result<f64> {
    validate_bound_params(m, c)?;
    validate_eps(eps)?;
    let growth = (c * t).exp();
    let denom = 1.0 + eps * m - eps * (1.0 + m) * growth;
    if denom <= 0.0 {
        return Err(Error::BoundUndefined { t, denom });
    }
    Ok(2.0 * m * growth / denom)
}

/// Guaranteed horizon min(T, ln((1 + eps M)/(eps (1 + M)))/C).
pub fn t_eps(m: f64, c: f64, t_horizon: f64, eps: f64) -> Result<f64> {
    validate_bound_params(m, c)?;
    validate_eps(eps)?;
    if !(t_horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad horizon {t_horizon}"
        )));
    }
    let blowup = ((1.0 + eps * m) / (eps * (1.0 + m))).ln() / c;
    Ok(t_horizon.min(blowup))
}

/// Largest inertia for which the envelope survives to T:
/// min(1/2, 1/((1 + M) e^{C T} - M)).
pub fn epsilon0(m: f64, c: f64, t_horizon: f64) -> Result<f64> {
    validate_bound_params(m, c)?;
    if !(t_horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad horizon {t_horizon}"
        )));
    }
    Ok((0.5f64).min(1.0 / ((1.0 + m) * (c * t_horizon).exp() - m)))
}

fn validate_bound_params(m: f64, c: f64) -> Result<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad M {m}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad C {c}")));
    }
    Ok(())
}

// ---- singular / regular decomposition --------------------------------------

/// The three singular blocks; weights 1/sqrt(eps) on the first two, 1/eps
/// on the third.
#[derive(Debug, Clone)]
pub struct SingularParts {
    pub s1: Field,
    pub s2: Field,
    pub s3: Field,
}

impl SingularParts {
    pub fn total(&self) -> Field {
        self.s1.add(&self.s2).add(&self.s3)
    }
}

/// The four regular blocks.
#[derive(Debug, Clone)]
pub struct RegularParts {
    pub r1: Field,
    pub r2: Field,
    pub r3: Field,
    pub r4: Field,
}

impl RegularParts {
    pub fn total(&self) -> Field {
        self.r1.add(&self.r2).add(&self.r3).add(&self.r4)
    }
}

/// Singular part of the remainder forcing.
///
/// `w0` and `w00` stand for the first and second time derivatives of the
/// limit flow; they are inputs so the terms can be evaluated on arbitrary
/// fields.
#[allow(clippy::too_many_arguments)]
pub fn eval_singular(
    d0: &Field,
    w0: &Field,
    w00: &Field,
    d_cap: &Field,
    d_r: &Field,
    v_r: &Field,
    eps: f64,
    t: f64,
) -> SingularParts {
    let _ = v_r;
    let e = (-t / eps).exp();
    let rs = 1.0 / eps.sqrt();

    let grad_d0 = gradient(d0);
    let grad_dcap = gradient(d_cap);
    let grad_dr = gradient(d_r);
    let g_d0_d0 = grad_d0.squared_norm();
    let g_d0_dcap = grad_d0.dot(&grad_dcap);
    let g_d0_dr = grad_d0.dot(&grad_dr);
    let g_dr_dr = grad_dr.squared_norm();
    let wplus = w0.axpy(e, d_cap); // w0 + D e^{-t/eps}
    let wplus_sq = wplus.squared_norm();

    // S1 = -(1/sqrt(eps)) [ w00 + lap D e + |w0 + D e|^2 d0
    //                       + |grad d0|^2 D e + 2 (grad d0 . grad D) e d0 ]
    let s1 = w00
        .axpy(e, &laplacian(d_cap))
        .add(&d0.weighted_by(&wplus_sq))
        .add(&d_cap.weighted_by(&g_d0_d0).scale(e))
        .add(&d0.weighted_by(&g_d0_dcap).scale(2.0 * e))
        .scale(-rs);

    // S2 = (1/sqrt(eps)) [ 2 (grad d0 . grad dR) dR + |grad dR|^2 d0 ]
    let s2 = d_r
        .weighted_by(&g_d0_dr)
        .scale(2.0)
        .add(&d0.weighted_by(&g_dr_dr))
        .scale(rs);

    // S3 = (1/eps) [ |grad d0|^2 dR + 2 (grad d0 . grad dR) d0 ]
    let s3 = d_r
        .weighted_by(&g_d0_d0)
        .add(&d0.weighted_by(&g_d0_dr).scale(2.0))
        .scale(1.0 / eps);

    SingularParts { s1, s2, s3 }
}

/// Regular part of the remainder forcing.
#[allow(clippy::too_many_arguments)]
pub fn eval_regular(
    d0: &Field,
    w0: &Field,
    d_cap: &Field,
    d_r: &Field,
    v_r: &Field,
    eps: f64,
    t: f64,
) -> RegularParts {
    let e = (-t / eps).exp();
    let sq = eps.sqrt();

    let grad_d0 = gradient(d0);
    let grad_dcap = gradient(d_cap);
    let grad_dr = gradient(d_r);
    let g_dcap_dcap = grad_dcap.squared_norm();
    let g_d0_dcap = grad_d0.dot(&grad_dcap);
    let g_d0_dr = grad_d0.dot(&grad_dr);
    let g_dcap_dr = grad_dcap.dot(&grad_dr);
    let g_dr_dr = grad_dr.squared_norm();
    let wplus = w0.axpy(e, d_cap);
    let wplus_sq = wplus.squared_norm();
    let wplus_dot_vr = wplus.dot(v_r);
    let vr_sq = v_r.squared_norm();

    // R1 = sqrt(eps) |w0 + D e|^2 D e + sqrt(eps) |grad D|^2 e^2 d0
    //      - eps^{3/2} |grad D|^2 e^3 D + 2 sqrt(eps) (grad d0 . grad D) e^2 D
    let r1 = d_cap
        .weighted_by(&wplus_sq)
        .scale(sq * e)
        .add(&d0.weighted_by(&g_dcap_dcap).scale(sq * e * e))
        .add(&d_cap.weighted_by(&g_dcap_dcap).scale(-eps * sq * e * e * e))
        .add(&d_cap.weighted_by(&g_d0_dcap).scale(2.0 * sq * e * e));

    // R2 = -2 ((w0 + D e) . vR) d0 - |w0 + D e|^2 dR
    //      + 2 eps ((w0 + D e) . vR) D e + eps |grad D|^2 e^2 dR
    //      - 2 (grad d0 . grad D) e dR - 2 (grad d0 . grad dR) D e
    //      - 2 (grad D . grad dR) e d0 + 2 eps (grad D . grad dR) e^2 D
    let r2 = d0
        .weighted_by(&wplus_dot_vr)
        .scale(-2.0)
        .add(&d_r.weighted_by(&wplus_sq).scale(-1.0))
        .add(&d_cap.weighted_by(&wplus_dot_vr).scale(2.0 * eps * e))
        .add(&d_r.weighted_by(&g_dcap_dcap).scale(eps * e * e))
        .add(&d_r.weighted_by(&g_d0_dcap).scale(-2.0 * e))
        .add(&d_cap.weighted_by(&g_d0_dr).scale(-2.0 * e))
        .add(&d0.weighted_by(&g_dcap_dr).scale(-2.0 * e))
        .add(&d_cap.weighted_by(&g_dcap_dr).scale(2.0 * eps * e * e));

    // R3 = eps^{3/2} D e |vR|^2 - 2 sqrt(eps) ((w0 + D e) . vR) dR
    //      - sqrt(eps) |vR|^2 d0 - 2 sqrt(eps) (grad D . grad dR) e dR
    //      - sqrt(eps) |grad dR|^2 D e
    let r3 = d_cap
        .weighted_by(&vr_sq)
        .scale(eps * sq * e)
        .add(&d_r.weighted_by(&wplus_dot_vr).scale(-2.0 * sq))
        .add(&d0.weighted_by(&vr_sq).scale(-sq))
        .add(&d_r.weighted_by(&g_dcap_dr).scale(-2.0 * sq * e))
        .add(&d_cap.weighted_by(&g_dr_dr).scale(-sq * e));

    // R4 = -eps |vR|^2 dR + |grad dR|^2 dR
    let r4 = d_r
        .weighted_by(&vr_sq)
        .scale(-eps)
        .add(&d_r.weighted_by(&g_dr_dr));

    RegularParts { r1, r2, r3, r4 }
}

/// Brute-force check value for the S/R transcription: reassemble the full
/// wave-map nonlinearity on d_eps = d0 - eps D e + sqrt(eps) dR and strip
/// the limit-flow and layer contributions,
///
/// ```text
/// eps^{-3/2} [ N(d_eps) - eps w00 - |grad d0|^2 d0 - eps lap D e ],
/// N(d) = (|grad d|^2 - eps |dt d|^2) d,
/// ```
///
/// which must equal S + R identically for arbitrary smooth inputs.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_oracle(
    d0: &Field,
    w0: &Field,
    w00: &Field,
    d_cap: &Field,
    d_r: &Field,
    v_r: &Field,
    eps: f64,
    t: f64,
) -> Field {
    let e = (-t / eps).exp();
    let sq = eps.sqrt();
    let d_eps = d0.axpy(-eps * e, d_cap).axpy(sq, d_r);
    let v_eps = w0.axpy(e, d_cap).axpy(sq, v_r);
    let lambda = gradient(&d_eps)
        .squared_norm()
        .axpy(-eps, &v_eps.squared_norm());
    let nonlinear = d_eps.weighted_by(&lambda);
    let g_d0 = gradient(d0).squared_norm();
    nonlinear
        .axpy(-eps, w00)
        .sub(&d0.weighted_by(&g_d0))
        .axpy(-eps * e, &laplacian(d_cap))
        .scale(1.0 / (eps * sq))
}

/// L2 norm of the remainder-equation residual
/// dtt dR + (1/eps) dt dR - (1/eps) lap dR - S - R at the middle of three
/// equally spaced extracted states, with dtt dR by centered differencing.
#[allow(clippy::too_many_arguments)]
pub fn remainder_residual(
    prev: &RemainderState,
    center: &RemainderState,
    next: &RemainderState,
    d0: &Field,
    w0: &Field,
    w00: &Field,
    d_cap: &Field,
) -> Result<f64> {
    let eps = center.eps;
    validate_eps(eps)?;
    let h1 = center.t - prev.t;
    let h2 = next.t - center.t;
    if h1 <= 0.0 || h2 <= 0.0 || (h1 - h2).abs() > 1e-9 * h1 {
        return Err(Error::InvalidParameter(format!(
            "snapshots not equally spaced: {h1} vs {h2}"
        )));
    }
    if !prev.d_r.same_grid(&center.d_r) || !next.d_r.same_grid(&center.d_r) {
        return Err(Error::GridMismatch);
    }
    let h = 0.5 * (h1 + h2);
    let dtt = prev
        .d_r
        .add(&next.d_r)
        .axpy(-2.0, &center.d_r)
        .scale(1.0 / (h * h));
    let s = eval_singular(d0, w0, w00, d_cap, &center.d_r, &center.v_r, eps, center.t).total();
    let r = eval_regular(d0, w0, d_cap, &center.d_r, &center.v_r, eps, center.t).total();
    let residual = dtt
        .axpy(1.0 / eps, &center.v_r)
        .axpy(-1.0 / eps, &laplacian(&center.d_r))
        .sub(&s)
        .sub(&r);
    Ok(l2_norm(&residual))
}

/// Smallest C >= 0 with dE/dt + 3F <= C (1 + E)(1 + eps E) at every sample
/// of the trace (forward differences, left-endpoint E and F).
pub fn fit_c(samples: &[(f64, f64, f64)], eps: f64) -> Result<f64> {
    validate_eps(eps)?;
    if samples.len() < 3 {
        return Err(Error::TraceTooShort(samples.len(), 3));
    }
    let mut c = 0.0f64;
    for w in samples.windows(2) {
        let (t0, e0, f0) = w[0];
        let (t1, e1, _) = w[1];
        let dt = t1 - t0;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trace times not increasing at t={t0}"
            )));
        }
        let lhs = (e1 - e0) / dt + 3.0 * f0;
        let denom = (1.0 + e0) * (1.0 + eps * e0);
        c = c.max(lhs / denom);
    }
    Ok(c.max(0.0))
}

// ---- remainder trace --------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RemainderTraceRow {
    pub t: f64,
    pub e_eps: f64,
    pub f_eps: f64,
    pub h2_dr: f64,
    pub h3_dr: f64,
    pub h2_vr: f64,
    pub residual: f64,
    pub c_fit_running: f64,
    pub bound_value: f64,
}

pub fn write_remainder_trace_csv(rows: &[RemainderTraceRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "t,E_eps,F_eps,h2_dR,h3_dR,h2_vR,residual,C_fit_running,bound_value"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.e_eps,
            r.f_eps,
            r.h2_dr,
            r.h3_dr,
            r.h2_vr,
            r.residual,
            r.c_fit_running,
            r.bound_value
        )?;
    }
    w.flush()?;
    Ok(())
}
