//! Pointwise unit-sphere constraint handling for director and tangent
//! fields.

use crate::error::{Error, Result};
use crate::field::Field;

/// Tolerance on | |d| - 1 | and |d . v| accepted by the checked
/// constructors; projection keeps states far inside it.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// A three-component field with |d(x)| = 1 at every grid point.
#[derive(Debug, Clone)]
pub struct DirectorField {
    field: Field,
}

/// A three-component field with d(x) . v(x) = 0 against the director it was
/// projected with.
#[derive(Debug, Clone)]
pub struct TangentField {
    field: Field,
}

impl DirectorField {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    /// Wrap a field that is already unit-length within `CONSTRAINT_TOL`.
    pub fn try_new(field: Field) -> Result<Self> {
        if field.components() != 3 {
            return Err(Error::InvalidParameter(format!(
                "director needs 3 components, got {}",
                field.components()
            )));
        }
        let d = Self { field };
        let worst = d.max_norm_violation();
        if worst > CONSTRAINT_TOL {
            return Err(Error::InvalidParameter(format!(
                "field is off the sphere by {worst:.3e}"
            )));
        }
        Ok(d)
    }

    pub fn max_norm_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.field.n_points() {
            let n = point_norm(&self.field, p);
            worst = worst.max((n - 1.0).abs());
        }
        worst
    }
}

impl TangentField {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    /// Wrap a field already orthogonal to `d` within `CONSTRAINT_TOL`.
    pub fn try_new(field: Field, d: &DirectorField) -> Result<Self> {
        let worst = max_orthogonality_violation(d, &field);
        if worst > CONSTRAINT_TOL {
            return Err(Error::InvalidParameter(format!(
                "field is off the tangent space by {worst:.3e}"
            )));
        }
        Ok(Self { field })
    }
}

fn point_norm(f: &Field, p: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        let v = f.at(p, c);
        s += v * v;
    }
    s.sqrt()
}

/// Normalize a 3-component field pointwise onto the unit sphere.
/// Fails on any point with |v| < 1e-12, reporting the worst offender.
pub fn project_to_sphere(v: &Field) -> Result<DirectorField> {
    if v.components() != 3 {
        return Err(Error::InvalidParameter(format!(
            "sphere projection needs 3 components, got {}",
            v.components()
        )));
    }
    let n = v.n_points();
    let mut worst_norm = f64::INFINITY;
    let mut worst_idx = 0;
    let mut values = vec![0.0; n * 3];
    for p in 0..n {
        let norm = point_norm(v, p);
        if norm < worst_norm {
            worst_norm = norm;
            worst_idx = p;
        }
        if norm >= 1e-12 {
            for c in 0..3 {
                values[p * 3 + c] = v.at(p, c) / norm;
            }
        }
    }
    if worst_norm < 1e-12 {
        return Err(Error::DegeneratePoint {
            index: worst_idx,
            norm: worst_norm,
        });
    }
    let field = Field::from_values(v.grid(), 3, values)?;
    Ok(DirectorField { field })
}

/// Remove the component of `v` along `d` pointwise: v - (d.v) d.
pub fn project_to_tangent(d: &DirectorField, v: &Field) -> TangentField {
    let n = v.n_points();
    let mut values = vec![0.0; n * 3];
    for p in 0..n {
        let mut dot = 0.0;
        for c in 0..3 {
            dot += d.field.at(p, c) * v.at(p, c);
        }
        for c in 0..3 {
            values[p * 3 + c] = v.at(p, c) - dot * d.field.at(p, c);
        }
    }
    TangentField {
        field: Field::from_values(v.grid(), 3, values).expect("sized by construction"),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstraintReport {
    pub max_norm_violation: f64,
    pub max_orthogonality_violation: Option<f64>,
}

/// Worst | |d|-1 | over the grid, and worst |d . v| when a tangent field is
/// supplied.
pub fn constraint_report(d: &DirectorField, v: Option<&Field>) -> ConstraintReport {
    ConstraintReport {
        max_norm_violation: d.max_norm_violation(),
        max_orthogonality_violation: v.map(|f| max_orthogonality_violation(d, f)),
    }
}

pub fn max_orthogonality_violation(d: &DirectorField, v: &Field) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..v.n_points() {
        let mut dot = 0.0;
        for c in 0..3 {
            dot += d.field.at(p, c) * v.at(p, c);
        }
        worst = worst.max(dot.abs());
    }
    worst
}
