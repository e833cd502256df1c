//! Python bindings: grids, fields and the main solver and diagnostic
//! entry points, enough to drive desk-scale experiments from a notebook.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use relaxlim::config::ExperimentConfig;
use relaxlim::field::Field as CoreField;
use relaxlim::geometry;
use relaxlim::grid::SpectralGrid;
use relaxlim::heat;
use relaxlim::oracle;
use relaxlim::remainder;
use relaxlim::spectral;
use relaxlim::wave;

fn err<T>(r: relaxlim::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Periodic grid descriptor.
#[pyclass]
#[derive(Clone)]
struct Grid {
    inner: SpectralGrid,
}

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (n, lengths = None))]
    fn new(n: Vec<usize>, lengths: Option<Vec<f64>>) -> PyResult<Self> {
        let lengths = lengths.unwrap_or_else(|| vec![relaxlim::grid::TWO_PI; n.len()]);
        Ok(Self {
            inner: err(SpectralGrid::new(&n, &lengths))?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths().to_vec()
    }

    fn coords(&self, index: usize) -> Vec<f64> {
        self.inner.coords(index)
    }

    fn __repr__(&self) -> String {
        format!("Grid(shape={:?}, lengths={:?})", self.inner.shape(), self.inner.lengths())
    }
}

/// Real field sampled on a grid, component-fastest.
#[pyclass]
#[derive(Clone)]
struct Field {
    inner: CoreField,
}

#[pymethods]
impl Field {
    #[new]
    fn new(grid: Grid, components: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: err(CoreField::from_values(&grid.inner, components, values))?,
        })
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.components()
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid {
            inner: self.inner.grid().clone(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn gradient(&self) -> Field {
        Field {
            inner: spectral::gradient(&self.inner),
        }
    }

    fn laplacian(&self) -> Field {
        Field {
            inner: spectral::laplacian(&self.inner),
        }
    }

    fn l2_norm(&self) -> f64 {
        spectral::l2_norm(&self.inner)
    }

    #[pyo3(signature = (k, homogeneous = false))]
    fn sobolev_norm(&self, k: usize, homogeneous: bool) -> PyResult<f64> {
        err(spectral::sobolev_norm(&self.inner, k, homogeneous))
    }

    fn mollify(&self, eta: f64) -> PyResult<Field> {
        if !(eta > 0.0) {
            return Err(PyValueError::new_err("eta must be positive"));
        }
        Ok(Field {
            inner: spectral::mollify(&self.inner, eta),
        })
    }

    fn dealias(&self) -> Field {
        Field {
            inner: spectral::dealias_two_thirds(&self.inner),
        }
    }

    fn write_rlxf(&self, path: String) -> PyResult<()> {
        err(self.inner.write_rlxf_path(std::path::Path::new(&path)))
    }

    #[staticmethod]
    fn read_rlxf(path: String) -> PyResult<Field> {
        Ok(Field {
            inner: err(CoreField::read_rlxf_path(std::path::Path::new(&path)))?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(shape={:?}, components={})",
            self.inner.grid().shape(),
            self.inner.components()
        )
    }
}

fn director(d: &Field) -> PyResult<geometry::DirectorField> {
    err(geometry::DirectorField::try_new(d.inner.clone()))
}

/// Normalize a 3-component field onto the unit sphere pointwise.
#[pyfunction]
fn project_to_sphere(v: &Field) -> PyResult<Field> {
    Ok(Field {
        inner: err(geometry::project_to_sphere(&v.inner))?.into_field(),
    })
}

/// Remove the component of v along the unit director d.
#[pyfunction]
fn project_to_tangent(d: &Field, v: &Field) -> PyResult<Field> {
    let d = director(d)?;
    Ok(Field {
        inner: geometry::project_to_tangent(&d, &v.inner).into_field(),
    })
}

/// Worst | |d|-1 | and, when v is given, worst |d . v| over the grid.
#[pyfunction]
#[pyo3(signature = (d, v = None))]
fn constraint_report(d: &Field, v: Option<&Field>) -> PyResult<(f64, Option<f64>)> {
    let d = director(d)?;
    let rep = geometry::constraint_report(&d, v.map(|f| &f.inner));
    Ok((rep.max_norm_violation, rep.max_orthogonality_violation))
}

/// (cos theta, sin theta, 0) from a one-component angle field.
#[pyfunction]
fn lift_to_equator(theta: &Field) -> Field {
    Field {
        inner: oracle::lift_to_equator(&theta.inner).into_field(),
    }
}

/// Heat-flow right side lap d + |grad d|^2 d.
#[pyfunction]
fn heat_rhs(d: &Field) -> PyResult<Field> {
    Ok(Field {
        inner: heat::heat_rhs(&director(d)?),
    })
}

/// Run the harmonic-map heat flow; returns (times, dirichlet_energy,
/// final_director).
#[pyfunction]
fn heat_solve(d_in: &Field, t_final: f64, dt: f64, stride: usize) -> PyResult<(Vec<f64>, Vec<f64>, Field)> {
    let run = err(heat::heat_solve(&director(d_in)?, t_final, dt, stride))?;
    let times = run.trace.iter().map(|r| r.t).collect();
    let energy = run.trace.iter().map(|r| r.dirichlet_energy).collect();
    let last = run.final_state().director.field().clone();
    Ok((times, energy, Field { inner: last }))
}

/// Run the damped wave map; returns (times, energy, balance_defect,
/// final_director, final_velocity).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn wave_solve(
    d_in: &Field,
    dtilde_in: &Field,
    eps: f64,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Field, Field)> {
    let run = err(wave::wave_solve(
        &director(d_in)?,
        &dtilde_in.inner,
        eps,
        t_final,
        dt,
        stride,
    ))?;
    let times = run.trace.iter().map(|r| r.t).collect();
    let w = run.trace.iter().map(|r| r.w).collect();
    let defect = run.trace.iter().map(|r| r.balance_defect).collect();
    let fin = run.final_state();
    Ok((
        times,
        w,
        defect,
        Field {
            inner: fin.director.field().clone(),
        },
        Field {
            inner: fin.velocity.field().clone(),
        },
    ))
}

/// Initial-layer amplitude D = dtilde_in - lap d_in - |grad d_in|^2 d_in.
#[pyfunction]
fn layer_amplitude(d_in: &Field, dtilde_in: &Field) -> PyResult<Field> {
    Ok(Field {
        inner: err(remainder::compute_d(&director(d_in)?, &dtilde_in.inner))?,
    })
}

/// The layer -eps D e^{-t/eps} and its time derivative D e^{-t/eps}.
#[pyfunction]
fn layer_eval(d_cap: &Field, eps: f64, t: f64) -> (Field, Field) {
    (
        Field {
            inner: remainder::layer_eval(&d_cap.inner, eps, t),
        },
        Field {
            inner: remainder::layer_time_derivative(&d_cap.inner, eps, t),
        },
    )
}

/// Weighted energies (E, F) of a remainder pair.
#[pyfunction]
fn remainder_energies(eps: f64, d_r: &Field, v_r: &Field) -> PyResult<(f64, f64)> {
    let rem = remainder::RemainderState {
        t: 0.0,
        eps,
        d_r: d_r.inner.clone(),
        v_r: v_r.inner.clone(),
    };
    Ok((err(remainder::energy_e(&rem))?, err(remainder::energy_f(&rem))?))
}

#[pyfunction]
fn m_value(d_cap: &Field) -> f64 {
    remainder::m_value(&d_cap.inner)
}

#[pyfunction]
fn bound_curve(m: f64, c: f64, eps: f64, t: f64) -> PyResult<f64> {
    err(remainder::bound_curve(m, c, eps, t))
}

#[pyfunction]
fn t_eps(m: f64, c: f64, t_horizon: f64, eps: f64) -> PyResult<f64> {
    err(remainder::t_eps(m, c, t_horizon, eps))
}

#[pyfunction]
fn epsilon0(m: f64, c: f64, t_horizon: f64) -> PyResult<f64> {
    err(remainder::epsilon0(m, c, t_horizon))
}

/// Exact (value, velocity) of the damped scalar mode.
#[pyfunction]
fn damped_mode(k: i64, a: f64, b: f64, eps: f64, t: f64) -> PyResult<(f64, f64)> {
    if !(eps > 0.0) || t < 0.0 {
        return Err(PyValueError::new_err("need eps > 0 and t >= 0"));
    }
    Ok(oracle::damped_mode(&oracle::ScalarModeIc { k, a, b, eps }, t))
}

#[pyfunction]
fn heat_mode(k: i64, a: f64, t: f64) -> f64 {
    oracle::heat_mode(k, a, t)
}

#[pyfunction]
fn scalar_layer_mode(k: i64, a: f64, b: f64, eps: f64, t: f64) -> f64 {
    oracle::scalar_layer_mode(k, a, b, eps, t)
}

/// Scalar rate study; returns (rows, slope_pos, slope_vel); slopes are None
/// for identically-zero errors.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn scalar_limit_study(
    theta0_modes: Vec<(i64, f64)>,
    theta1_modes: Vec<(i64, f64)>,
    eps_list: Vec<f64>,
    t_final: f64,
) -> PyResult<(Vec<(f64, f64, f64)>, Option<f64>, Option<f64>)> {
    let study = err(oracle::scalar_limit_study(
        &theta0_modes,
        &theta1_modes,
        &eps_list,
        t_final,
    ))?;
    let rows = study
        .rows
        .iter()
        .map(|r| (r.eps, r.err_pos, r.err_vel))
        .collect();
    let pos = (!study.pos.exact_zero).then_some(study.pos.slope);
    let vel = (!study.vel.exact_zero).then_some(study.vel.slope);
    Ok((rows, pos, vel))
}

/// Max relative deviation of S + R from the reassembled nonlinearity on
/// seeded random band-limited fields.
#[pyfunction]
#[pyo3(signature = (seed = 0, n = 32, sets = 20))]
fn verify_decomposition(seed: u64, n: usize, sets: usize) -> PyResult<f64> {
    err(relaxlim::study::decomposition_max_deviation(
        seed,
        n,
        sets,
        &[0.3, 0.05, 0.01],
        &[0.0, 1.0, 10.0],
    ))
}

/// Parse a `section.key = value` experiment config and run the sweep,
/// writing the report files; returns (M, C_fit, eps0).
#[pyfunction]
fn run_sweep(config_text: String) -> PyResult<(f64, f64, f64)> {
    let cfg = err(ExperimentConfig::parse(&config_text))?;
    let report = err(relaxlim::study::run_limit_study(&cfg))?;
    err(relaxlim::study::emit_report(&report, &cfg.output_dir))?;
    Ok((report.m, report.c_fit_family, report.eps0))
}

#[pymodule]
fn _relaxlim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Field>()?;
    m.add_function(wrap_pyfunction!(project_to_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(project_to_tangent, m)?)?;
    m.add_function(wrap_pyfunction!(constraint_report, m)?)?;
    m.add_function(wrap_pyfunction!(lift_to_equator, m)?)?;
    m.add_function(wrap_pyfunction!(heat_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(heat_solve, m)?)?;
    m.add_function(wrap_pyfunction!(wave_solve, m)?)?;
    m.add_function(wrap_pyfunction!(layer_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(layer_eval, m)?)?;
    m.add_function(wrap_pyfunction!(remainder_energies, m)?)?;
    m.add_function(wrap_pyfunction!(m_value, m)?)?;
    m.add_function(wrap_pyfunction!(bound_curve, m)?)?;
    m.add_function(wrap_pyfunction!(t_eps, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon0, m)?)?;
    m.add_function(wrap_pyfunction!(damped_mode, m)?)?;
    m.add_function(wrap_pyfunction!(heat_mode, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_layer_mode, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_limit_study, m)?)?;
    m.add_function(wrap_pyfunction!(verify_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
