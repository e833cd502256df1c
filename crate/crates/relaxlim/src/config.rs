//! Experiment configuration: a small `section.key = value` text format.
//!
//! Lines are `#` comments, blanks, or `section.key = value`. Unknown keys
//! are rejected so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{project_to_tangent, DirectorField};
use crate::grid::{SpectralGrid, TWO_PI};
use crate::oracle::lift_to_equator;

#[derive(Debug, Clone, PartialEq)]
pub enum InitPreset {
    Constant,
    Equator,
    Twisted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Theta1Mode {
    Explicit,
    WellPrepared,
    Zero,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n: Vec<usize>,
    pub lengths: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub probe_dt: f64,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub preset: InitPreset,
    pub theta0_amplitude: f64,
    pub theta0_wavenumber: i64,
    pub theta1_mode: Theta1Mode,
    pub theta1_amplitude: f64,
    pub theta1_wavenumber: i64,
    pub twist_amplitude: f64,
    pub output_dir: PathBuf,
    pub run_heat: bool,
    pub run_wave: bool,
    pub run_remainder_diagnostics: bool,
    pub run_decomposition_check: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: vec![64],
            lengths: vec![TWO_PI],
            t_final: 0.5,
            dt: 1e-4,
            stride: 100,
            probe_dt: 1e-3,
            eps: None,
            eps_list: None,
            preset: InitPreset::Equator,
            theta0_amplitude: 0.1,
            theta0_wavenumber: 1,
            theta1_mode: Theta1Mode::Explicit,
            theta1_amplitude: 0.1,
            theta1_wavenumber: 1,
            twist_amplitude: 0.1,
            output_dir: PathBuf::from("runs/out"),
            run_heat: true,
            run_wave: true,
            run_remainder_diagnostics: true,
            run_decomposition_check: false,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut probe_set = false;
        let mut length_set = false;
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: lineno,
                msg: format!("expected `section.key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if let Some(prev) = seen.insert(key.to_string(), lineno) {
                return Err(Error::Config {
                    line: lineno,
                    msg: format!("duplicate key {key} (first set on line {prev})"),
                });
            }
            let bad = |msg: String| Error::Config { line: lineno, msg };
            match key {
                "domain.dim" => cfg.dim = parse_num(value).map_err(bad)?,
                "domain.n" => cfg.n = parse_list(value).map_err(bad)?,
                "domain.length" => {
                    cfg.lengths = parse_list(value).map_err(bad)?;
                    length_set = true;
                }
                "time.t_final" => cfg.t_final = parse_num(value).map_err(bad)?,
                "time.dt" => cfg.dt = parse_num(value).map_err(bad)?,
                "time.stride" => cfg.stride = parse_num(value).map_err(bad)?,
                "time.probe_dt" => {
                    cfg.probe_dt = parse_num(value).map_err(bad)?;
                    probe_set = true;
                }
                "eps.value" => cfg.eps = Some(parse_num(value).map_err(bad)?),
                "eps.list" => cfg.eps_list = Some(parse_list(value).map_err(bad)?),
                "init.preset" => {
                    cfg.preset = match value {
                        "constant" => InitPreset::Constant,
                        "equator" => InitPreset::Equator,
                        "twisted" => InitPreset::Twisted,
                        other => {
                            return Err(bad(format!(
                                "preset {other:?} (use constant|equator|twisted)"
                            )))
                        }
                    }
                }
                "init.theta0_amplitude" => cfg.theta0_amplitude = parse_num(value).map_err(bad)?,
                "init.theta0_wavenumber" => cfg.theta0_wavenumber = parse_num(value).map_err(bad)?,
                "init.theta1_mode" => {
                    cfg.theta1_mode = match value {
                        "explicit" => Theta1Mode::Explicit,
                        "well_prepared" => Theta1Mode::WellPrepared,
                        "zero" => Theta1Mode::Zero,
                        other => {
                            return Err(bad(format!(
                                "theta1 mode {other:?} (use explicit|well_prepared|zero)"
                            )))
                        }
                    }
                }
                "init.theta1_amplitude" => cfg.theta1_amplitude = parse_num(value).map_err(bad)?,
                "init.theta1_wavenumber" => cfg.theta1_wavenumber = parse_num(value).map_err(bad)?,
                "init.twist_amplitude" => cfg.twist_amplitude = parse_num(value).map_err(bad)?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                "toggles.run_heat" => cfg.run_heat = parse_bool(value).map_err(bad)?,
                "toggles.run_wave" => cfg.run_wave = parse_bool(value).map_err(bad)?,
                "toggles.run_remainder_diagnostics" => {
                    cfg.run_remainder_diagnostics = parse_bool(value).map_err(bad)?
                }
                "toggles.run_decomposition_check" => {
                    cfg.run_decomposition_check = parse_bool(value).map_err(bad)?
                }
                "toggles.seed" => cfg.seed = parse_num(value).map_err(bad)?,
                other => {
                    return Err(Error::Config {
                        line: lineno,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        if cfg.n.len() == 1 && cfg.dim > 1 {
            cfg.n = vec![cfg.n[0]; cfg.dim];
        }
        if !length_set {
            cfg.lengths = vec![TWO_PI; cfg.dim];
        } else if cfg.lengths.len() == 1 && cfg.dim > 1 {
            cfg.lengths = vec![cfg.lengths[0]; cfg.dim];
        }
        if !probe_set {
            cfg.probe_dt = 10.0 * cfg.dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Error::InvalidParameter(msg);
        if !(1..=3).contains(&self.dim) {
            return Err(invalid(format!("domain.dim = {} (need 1..3)", self.dim)));
        }
        if self.n.len() != self.dim || self.lengths.len() != self.dim {
            return Err(invalid(format!(
                "domain.n/domain.length need {} entries",
                self.dim
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(invalid(format!("time.t_final = {}", self.t_final)));
        }
        if !(self.dt > 0.0) {
            return Err(invalid(format!("time.dt = {}", self.dt)));
        }
        if !(self.probe_dt > 0.0) {
            return Err(invalid(format!("time.probe_dt = {}", self.probe_dt)));
        }
        if self.stride == 0 {
            return Err(invalid("time.stride = 0".into()));
        }
        for &e in self.eps.iter().chain(self.eps_list.iter().flatten()) {
            if !(e > 0.0 && e < 0.5) {
                return Err(Error::EpsOutOfRange(e));
            }
        }
        if self.preset == InitPreset::Twisted && self.dim < 2 {
            return Err(invalid("twisted preset needs domain.dim >= 2".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(&self.n, &self.lengths)
    }

    /// Closed-form initial data for the configured preset; the pair always
    /// satisfies the pointwise compatibility d_in . dtilde_in = 0.
    pub fn build_initial_data(&self, grid: &SpectralGrid) -> Result<(DirectorField, Field)> {
        match self.preset {
            InitPreset::Constant => {
                let d = DirectorField::try_new(Field::from_fn(grid, 3, |_, c| {
                    [1.0, 0.0, 0.0][c]
                }))?;
                let v = Field::zeros(grid, 3);
                Ok((d, v))
            }
            InitPreset::Equator => {
                let a = self.theta0_amplitude;
                let m = self.theta0_wavenumber as f64;
                let theta0 = Field::from_fn(grid, 1, |x, _| a * (m * x[0]).sin());
                let d = lift_to_equator(&theta0);
                let theta1 = self.theta1_profile();
                // velocity theta1 * tau with tau = (-sin th0, cos th0, 0)
                let v = Field::from_fn(grid, 3, |x, c| {
                    let th = a * (m * x[0]).sin();
                    let t1 = theta1_eval(&theta1, x);
                    t1 * [-th.sin(), th.cos(), 0.0][c]
                });
                Ok((d, v))
            }
            InitPreset::Twisted => {
                let a = self.theta0_amplitude;
                let b = self.twist_amplitude;
                let d = DirectorField::try_new(Field::from_fn(grid, 3, |x, c| {
                    let alpha = a * x[0].sin();
                    let beta = b * x[1].sin();
                    match c {
                        0 => alpha.cos() * beta.cos(),
                        1 => alpha.cos() * beta.sin(),
                        _ => alpha.sin(),
                    }
                }))?;
                // raw velocity along e_z with the theta1 profile, projected
                // onto the tangent space to restore compatibility
                let theta1 = self.theta1_profile();
                let raw = Field::from_fn(grid, 3, |x, c| {
                    if c == 2 {
                        theta1_eval(&theta1, x)
                    } else {
                        0.0
                    }
                });
                let v = project_to_tangent(&d, &raw);
                Ok((d, v.into_field()))
            }
        }
    }

    /// Scalar profile parameters for the initial angular velocity.
    fn theta1_profile(&self) -> Theta1Profile {
        match self.theta1_mode {
            Theta1Mode::Zero => Theta1Profile {
                amplitude: 0.0,
                wavenumber: 1.0,
            },
            Theta1Mode::Explicit => Theta1Profile {
                amplitude: self.theta1_amplitude,
                wavenumber: self.theta1_wavenumber as f64,
            },
            // theta1 = lap theta0 makes the data well prepared: the layer
            // amplitude D vanishes identically
            Theta1Mode::WellPrepared => Theta1Profile {
                amplitude: -self.theta0_amplitude
                    * (self.theta0_wavenumber * self.theta0_wavenumber) as f64,
                wavenumber: self.theta0_wavenumber as f64,
            },
        }
    }

    /// Scalar sine modes (k, coefficient) matching the preset's angle data,
    /// for the matching scalar-oracle study.
    pub fn scalar_modes(&self) -> (Vec<(i64, f64)>, Vec<(i64, f64)>) {
        let theta0 = vec![(self.theta0_wavenumber, self.theta0_amplitude)];
        let p = self.theta1_profile();
        let theta1 = vec![(p.wavenumber as i64, p.amplitude)];
        (theta0, theta1)
    }
}

struct Theta1Profile {
    amplitude: f64,
    wavenumber: f64,
}

fn theta1_eval(p: &Theta1Profile, x: &[f64]) -> f64 {
    p.amplitude * (p.wavenumber * x[0]).sin()
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("cannot parse bool {other:?}")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(|tok| parse_num(tok.trim()))
        .collect::<std::result::Result<Vec<T>, String>>()
        .and_then(|v| {
            if v.is_empty() {
                Err("empty list".into())
            } else {
                Ok(v)
            }
        })
}
