//! Run configuration: a flat `key = value` text format with `#` comments
//! and dotted key groups. Parsing resolves every default and echoes the
//! complete canonical key list, so a manifest's config section is itself a
//! valid config that reproduces the run.

use crate::analysis::StudyAxis;
use crate::convection::CutoffParams;
use crate::noise::{GKind, JumpMark, LargeMap, LargeMark, NoiseDescriptor};
use crate::operators::MonotoneOperatorSpec;
use crate::solver::{Initial, SolverConfig, SolverError};
use crate::spaces::{Boundary, Domain, Field};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    TypeMismatch { key: String, line: usize, expected: &'static str, value: String },
    #[error("line {line}: {message}")]
    BadValue { line: usize, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Parameters of the study subcommands, resolved alongside the solver
/// config so one file drives every run kind.
#[derive(Debug, Clone)]
pub struct StudyParams {
    pub axis: StudyAxis,
    pub values: Vec<f64>,
    pub delta0: f64,
    pub m_level: f64,
    pub paths: usize,
    pub r_values: Vec<f64>,
    pub alpha: f64,
    pub m: f64,
    pub lags: Vec<f64>,
    pub points: usize,
    pub pairs: usize,
    pub fields: usize,
    pub states: usize,
}

/// A fully resolved run: solver config, study parameters, and the
/// canonical echo of every key (defaults included) in a fixed order.
#[derive(Debug, Clone)]
pub struct ParsedRun {
    pub solver: SolverConfig,
    pub study: StudyParams,
    pub echo: Vec<(String, String)>,
}

impl ParsedRun {
    /// The echo as config text; parsing it back yields the same run.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.echo {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

fn canon_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn canon_list(vs: &[f64]) -> String {
    vs.iter().map(|v| canon_f64(*v)).collect::<Vec<_>>().join(",")
}

fn split_lines(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or(ConfigError::Malformed { line })?;
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() {
            return Err(ConfigError::Malformed { line });
        }
        if let Some((_, first)) = map.get(key) {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                first: *first,
                second: line,
            });
        }
        map.insert(key.to_string(), (value.to_string(), line));
    }
    Ok(map)
}

/// Consumes keys out of the raw table, recording the canonical echo as it
/// goes; leftover keys are unknown.
struct Reader {
    entries: BTreeMap<String, (String, usize)>,
    echo: Vec<(String, String)>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn echo(&mut self, key: &str, value: String) {
        self.echo.push((key.to_string(), value));
    }

    fn float(&mut self, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((s, line)) => {
                let v: f64 = s.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: key.to_string(),
                    line,
                    expected: "a float",
                    value: s,
                })?;
                Ok(Some((v, line)))
            }
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> Result<(f64, usize), ConfigError> {
        let (v, line) = self.float(key)?.unwrap_or((default, 0));
        self.echo(key, canon_f64(v));
        Ok((v, line))
    }

    fn float_req(&mut self, key: &str) -> Result<(f64, usize), ConfigError> {
        let got = self.float(key)?.ok_or(ConfigError::Missing { key: key.to_string() })?;
        self.echo(key, canon_f64(got.0));
        Ok(got)
    }

    fn uint(&mut self, key: &str) -> Result<Option<(u64, usize)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((s, line)) => {
                let v: u64 = s.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: key.to_string(),
                    line,
                    expected: "an unsigned integer",
                    value: s,
                })?;
                Ok(Some((v, line)))
            }
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<(usize, usize), ConfigError> {
        let (v, line) = self.uint(key)?.unwrap_or((default as u64, 0));
        self.echo(key, v.to_string());
        Ok((v as usize, line))
    }

    fn usize_req(&mut self, key: &str) -> Result<(usize, usize), ConfigError> {
        let (v, line) =
            self.uint(key)?.ok_or(ConfigError::Missing { key: key.to_string() })?;
        self.echo(key, v.to_string());
        Ok((v as usize, line))
    }

    fn u64_req(&mut self, key: &str) -> Result<(u64, usize), ConfigError> {
        let (v, line) =
            self.uint(key)?.ok_or(ConfigError::Missing { key: key.to_string() })?;
        self.echo(key, v.to_string());
        Ok((v, line))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<(bool, usize), ConfigError> {
        let got = match self.take(key) {
            None => (default, 0),
            Some((s, line)) => match s.as_str() {
                "true" => (true, line),
                "false" => (false, line),
                _ => {
                    return Err(ConfigError::TypeMismatch {
                        key: key.to_string(),
                        line,
                        expected: "true or false",
                        value: s,
                    })
                }
            },
        };
        self.echo(key, got.0.to_string());
        Ok(got)
    }

    fn string_or(&mut self, key: &str, default: &str) -> Result<(String, usize), ConfigError> {
        let got = self.take(key).unwrap_or((default.to_string(), 0));
        self.echo(key, got.0.clone());
        Ok(got)
    }

    fn string_req(&mut self, key: &str) -> Result<(String, usize), ConfigError> {
        let got = self.take(key).ok_or(ConfigError::Missing { key: key.to_string() })?;
        self.echo(key, got.0.clone());
        Ok(got)
    }

    fn list(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((s, line)) => {
                let mut out = Vec::new();
                for part in s.split(',') {
                    let v: f64 =
                        part.trim().parse().map_err(|_| ConfigError::TypeMismatch {
                            key: key.to_string(),
                            line,
                            expected: "a comma-separated float list",
                            value: s.clone(),
                        })?;
                    out.push(v);
                }
                Ok(Some((out, line)))
            }
        }
    }

    fn list_or(&mut self, key: &str, default: &[f64]) -> Result<(Vec<f64>, usize), ConfigError> {
        let (v, line) = self.list(key)?.unwrap_or((default.to_vec(), 0));
        self.echo(key, canon_list(&v));
        Ok((v, line))
    }

    fn finish(self) -> Result<Vec<(String, String)>, ConfigError> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(ConfigError::UnknownKey { key, line });
        }
        Ok(self.echo)
    }
}

fn bad(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { line, message: message.into() }
}

/// Mark atoms `intensity,amp,mode,b` separated by `;`.
fn parse_marks(s: &str, n: usize, line: usize) -> Result<Vec<JumpMark>, ConfigError> {
    let mut marks = Vec::new();
    for atom in s.split(';').filter(|a| !a.trim().is_empty()) {
        let parts: Vec<&str> = atom.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad(line, format!("mark `{atom}` needs intensity,amp,mode,b")));
        }
        let num = |p: &str| -> Result<f64, ConfigError> {
            p.parse().map_err(|_| bad(line, format!("mark `{atom}` has a non-numeric field")))
        };
        let intensity = num(parts[0])?;
        let amp = num(parts[1])?;
        let mode: usize = parts[2]
            .parse()
            .map_err(|_| bad(line, format!("mark `{atom}` has a non-integer mode")))?;
        let b = num(parts[3])?;
        if !(intensity > 0.0) {
            return Err(bad(line, format!("mark `{atom}` needs a positive intensity")));
        }
        if mode == 0 || mode > n {
            return Err(bad(line, format!("mark `{atom}` mode must lie in 1..={n}")));
        }
        marks.push(JumpMark { intensity, a: Field::single_mode(n, mode, amp), b });
    }
    Ok(marks)
}

/// Large atoms `intensity,reset` or `intensity,bump,mode,amp`.
fn parse_large(s: &str, n: usize, line: usize) -> Result<Vec<LargeMark>, ConfigError> {
    let mut large = Vec::new();
    for atom in s.split(';').filter(|a| !a.trim().is_empty()) {
        let parts: Vec<&str> = atom.split(',').map(str::trim).collect();
        let intensity: f64 = parts[0]
            .parse()
            .map_err(|_| bad(line, format!("large mark `{atom}` has a bad intensity")))?;
        if !(intensity > 0.0) {
            return Err(bad(line, format!("large mark `{atom}` needs a positive intensity")));
        }
        let map = match parts.get(1).copied() {
            Some("reset") if parts.len() == 2 => LargeMap::Reset,
            Some("bump") if parts.len() == 4 => {
                let mode: usize = parts[2].parse().map_err(|_| {
                    bad(line, format!("large mark `{atom}` has a non-integer mode"))
                })?;
                let amp: f64 = parts[3].parse().map_err(|_| {
                    bad(line, format!("large mark `{atom}` has a bad amplitude"))
                })?;
                if mode == 0 || mode > n {
                    return Err(bad(line, format!("large mark `{atom}` mode must lie in 1..={n}")));
                }
                LargeMap::Field(Field::single_mode(n, mode, amp))
            }
            _ => {
                return Err(bad(
                    line,
                    format!("large mark `{atom}` needs `intensity,reset` or `intensity,bump,mode,amp`"),
                ))
            }
        };
        large.push(LargeMark { intensity, map });
    }
    Ok(large)
}

fn canon_marks(marks: &[JumpMark]) -> String {
    marks
        .iter()
        .map(|m| {
            let mode = m.a.coeffs.iter().position(|c| *c != 0.0).map_or(1, |i| i + 1);
            format!(
                "{},{},{},{}",
                canon_f64(m.intensity),
                canon_f64(m.a.coeffs[mode - 1]),
                mode,
                canon_f64(m.b)
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn canon_large(large: &[LargeMark]) -> String {
    large
        .iter()
        .map(|l| match &l.map {
            LargeMap::Reset => format!("{},reset", canon_f64(l.intensity)),
            LargeMap::Field(f) => {
                let mode = f.coeffs.iter().position(|c| *c != 0.0).map_or(1, |i| i + 1);
                format!(
                    "{},bump,{},{}",
                    canon_f64(l.intensity),
                    mode,
                    canon_f64(f.coeffs[mode - 1])
                )
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_config(text: &str) -> Result<ParsedRun, ConfigError> {
    let mut r = Reader { entries: split_lines(text)?, echo: Vec::new() };

    let (t_horizon, _) = r.float_req("T")?;
    let (dt, _) = r.float_req("dt")?;
    let (n, n_line) = r.usize_req("n")?;
    let (seed, _) = r.u64_req("seed")?;
    let (n_quad, _) = r.usize_or("n_quad", 0)?;
    let (implicit_f, _) = r.bool_or("implicit_f", true)?;
    let (gamma, _) = r.float_or("gamma", 1.0)?;
    if n == 0 {
        return Err(bad(n_line, "mode count n must be positive"));
    }

    let (dim, dim_line) = r.usize_or("domain.dim", 1)?;
    let (length, _) = r.float_or("domain.length", 1.0)?;
    let (length2, _) = r.float_or("domain.length2", 1.0)?;
    let (bc_s, bc_line) = r.string_or("domain.bc", "dirichlet")?;
    let domain = match dim {
        1 => Domain::interval(length),
        2 => {
            let bc = match bc_s.as_str() {
                "dirichlet" => Boundary::Dirichlet,
                "dirichlet_x1" => Boundary::DirichletX1Only,
                _ => return Err(bad(bc_line, format!("unknown boundary `{bc_s}`"))),
            };
            Domain::rectangle(length, length2, bc)
        }
        _ => return Err(bad(dim_line, "domain.dim must be 1 or 2")),
    };

    let (name, name_line) = r.string_req("operator.name")?;
    let p_entry = r.float("operator.p")?;
    if let Some((p, line)) = p_entry {
        if !(p > 2.0) {
            return Err(bad(line, "p must exceed 2"));
        }
    }
    let coeffs_entry = r.list("operator.coeffs")?;
    let fold_entry = r.take("operator.fold_laplacian");
    if name != "polynomial" {
        if let Some((_, line)) = &coeffs_entry {
            return Err(bad(*line, "operator.coeffs applies only to the polynomial entry"));
        }
        if let Some((_, line)) = &fold_entry {
            return Err(bad(
                *line,
                "operator.fold_laplacian applies only to the polynomial entry",
            ));
        }
    }
    let ctor_err = |e: crate::operators::OperatorsError| bad(name_line, e.to_string());
    let (operator, p) = match name.as_str() {
        "none" => (None, p_entry.map_or(4.0, |e| e.0)),
        "smagorinsky" => {
            let p = p_entry.map_or(4.0, |e| e.0);
            (Some(MonotoneOperatorSpec::smagorinsky(p).map_err(ctor_err)?), p)
        }
        "p_laplacian" => {
            let p = p_entry.map_or(4.0, |e| e.0);
            (Some(MonotoneOperatorSpec::p_laplacian(p).map_err(ctor_err)?), p)
        }
        "biharmonic" => {
            let p = p_entry.map_or(4.0, |e| e.0);
            (Some(MonotoneOperatorSpec::biharmonic(p).map_err(ctor_err)?), p)
        }
        "anisotropic" => {
            let p = p_entry.map_or(4.0, |e| e.0);
            (Some(MonotoneOperatorSpec::anisotropic(p).map_err(ctor_err)?), p)
        }
        "polynomial" => {
            if let Some((_, line)) = p_entry {
                return Err(bad(
                    line,
                    "operator.p is derived from operator.coeffs for the polynomial entry",
                ));
            }
            let (coeffs, _) = coeffs_entry
                .ok_or(ConfigError::Missing { key: "operator.coeffs".to_string() })?;
            let fold = match &fold_entry {
                None => true,
                Some((s, line)) => match s.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(ConfigError::TypeMismatch {
                            key: "operator.fold_laplacian".to_string(),
                            line: *line,
                            expected: "true or false",
                            value: s.clone(),
                        })
                    }
                },
            };
            let op = MonotoneOperatorSpec::polynomial(&coeffs, fold).map_err(ctor_err)?;
            let p = op.p;
            r.echo("operator.coeffs", canon_list(&coeffs));
            r.echo("operator.fold_laplacian", fold.to_string());
            (Some(op), p)
        }
        _ => {
            return Err(bad(
                name_line,
                format!(
                    "unknown operator `{name}`; expected none, smagorinsky, p_laplacian, \
                     biharmonic, polynomial or anisotropic"
                ),
            ))
        }
    };
    if name != "polynomial" {
        r.echo("operator.p", canon_f64(p));
    }

    let truncation = match r.take("operator.truncation") {
        None => None,
        Some((s, line)) => {
            if s == "none" {
                None
            } else {
                let v: f64 = s.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: "operator.truncation".to_string(),
                    line,
                    expected: "a float or `none`",
                    value: s,
                })?;
                if !(v > 1.0) {
                    return Err(bad(line, "truncation radius must exceed 1"));
                }
                Some(v)
            }
        }
    };
    r.echo("operator.truncation", truncation.map_or("none".to_string(), canon_f64));

    let (convection_enabled, _) = r.bool_or("convection.enabled", false)?;
    let cutoff = match r.take("convection.cutoff") {
        None => None,
        Some((s, line)) => {
            if s == "none" {
                None
            } else {
                let lvl: f64 = s.parse().map_err(|_| ConfigError::TypeMismatch {
                    key: "convection.cutoff".to_string(),
                    line,
                    expected: "a float or `none`",
                    value: s,
                })?;
                Some(CutoffParams::new(lvl).map_err(|e| bad(line, e.to_string()))?)
            }
        }
    };
    if convection_enabled && cutoff.is_none() {
        return Err(ConfigError::Missing { key: "convection.cutoff".to_string() });
    }
    r.echo("convection.cutoff", cutoff.map_or("none".to_string(), |c| canon_f64(c.level())));

    let (q0, q0_line) = r.float_or("noise.q0", 0.0)?;
    if !(q0 >= 0.0) {
        return Err(bad(q0_line, "noise.q0 must be nonnegative"));
    }
    let (s_decay, _) = r.float_or("noise.s", 1.0)?;
    let (sigma, _) = r.float_or("noise.sigma", 1.0)?;
    let (g_s, g_line) = r.string_or("noise.g", "additive")?;
    let g_kind = match g_s.as_str() {
        "additive" => GKind::Additive,
        "diagonal" => GKind::DiagonalLinear,
        _ => return Err(bad(g_line, format!("unknown noise.g `{g_s}`; expected additive or diagonal"))),
    };
    let marks = match r.take("noise.marks") {
        None => Vec::new(),
        Some((s, line)) => parse_marks(&s, n, line)?,
    };
    r.echo("noise.marks", canon_marks(&marks));
    let large = match r.take("noise.large") {
        None => Vec::new(),
        Some((s, line)) => parse_large(&s, n, line)?,
    };
    r.echo("noise.large", canon_large(&large));
    let noise = NoiseDescriptor::new(
        NoiseDescriptor::q_polynomial(n, q0, s_decay),
        vec![sigma; n],
        g_kind,
        marks,
        large,
    )
    .map_err(SolverError::Noise)?;

    let (kind, kind_line) = r.string_or("initial.kind", "zero")?;
    let (mode, mode_line) = r.usize_or("initial.mode", 1)?;
    let (amp, _) = r.float_or("initial.amp", 1.0)?;
    let (decay_r, _) = r.float_or("initial.r", 1.5)?;
    let (scale, _) = r.float_or("initial.scale", 1.0)?;
    let (beta, beta_line) = r.float_or("initial.beta", 0.6)?;
    let init_coeffs = r.list("initial.coeffs")?;
    if let Some((c, _)) = &init_coeffs {
        r.echo("initial.coeffs", canon_list(c));
    }
    let initial = match kind.as_str() {
        "zero" => Initial::Deterministic(Field::zeros(n)),
        "mode" => {
            if mode == 0 || mode > n {
                return Err(bad(mode_line, format!("initial.mode must lie in 1..={n}")));
            }
            Initial::Deterministic(Field::single_mode(n, mode, amp))
        }
        "coeffs" => {
            let (c, line) = init_coeffs
                .ok_or(ConfigError::Missing { key: "initial.coeffs".to_string() })?;
            if c.len() != n {
                return Err(bad(line, format!("initial.coeffs needs exactly n = {n} entries")));
            }
            Initial::Deterministic(Field::from_coeffs(c))
        }
        "gaussian" => Initial::GaussianModes { r: decay_r, scale },
        "layer" => {
            if dim != 1 {
                return Err(bad(kind_line, "initial.kind = layer needs a 1-d domain"));
            }
            if !(beta > 0.0) {
                return Err(bad(beta_line.max(kind_line), "initial.beta must be positive"));
            }
            // projected after the basis exists, below
            Initial::Deterministic(Field::zeros(n))
        }
        _ => {
            return Err(bad(
                kind_line,
                format!("unknown initial.kind `{kind}`; expected zero, mode, coeffs, gaussian or layer"),
            ))
        }
    };

    let (axis_s, axis_line) = r.string_or("study.axis", "n")?;
    let axis = match axis_s.as_str() {
        "n" => StudyAxis::Modes,
        "R" => StudyAxis::Truncation,
        "cutoff" => StudyAxis::Cutoff,
        _ => return Err(bad(axis_line, format!("unknown study.axis `{axis_s}`; expected n, R or cutoff"))),
    };
    let (values, _) = r.list_or("study.values", &[8.0, 16.0, 32.0, 64.0])?;
    let (delta0, _) = r.float_or("study.delta0", 1e-8)?;
    let (m_level, _) = r.float_or("study.m_level", 1e6)?;
    let (paths, paths_line) = r.usize_or("study.paths", 200)?;
    if paths < 2 {
        return Err(bad(paths_line, "study.paths must be at least 2"));
    }
    let (r_values, rv_line) = r.list_or("study.r_values", &[2.0, 4.0, 8.0, 16.0])?;
    if r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(rv_line, "study.r_values must be strictly increasing"));
    }
    let (alpha, alpha_line) = r.float_or("study.alpha", 0.25)?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(bad(alpha_line, "study.alpha must lie in (0, 0.5)"));
    }
    let (m_exp, _) = r.float_or("study.m", p / (p - 1.0) * 0.9)?;
    let default_lags: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|m| m * dt)
        .filter(|l| *l <= t_horizon * (1.0 + 1e-12))
        .collect();
    let (lags, _) = r.list_or("study.lags", &default_lags)?;
    let (points, _) = r.usize_or("study.points", 200)?;
    let (pairs, _) = r.usize_or("study.pairs", 1000)?;
    let (fields, _) = r.usize_or("study.fields", 1000)?;
    let (states, _) = r.usize_or("study.states", 1000)?;

    let echo = r.finish()?;

    let mut solver = SolverConfig {
        domain,
        t_horizon,
        dt,
        n,
        n_quad,
        gamma,
        operator,
        truncation,
        cutoff,
        convection_enabled,
        noise,
        initial,
        implicit_f,
        seed,
    };
    if kind == "layer" {
        let basis = solver.basis()?;
        let profile =
            basis.project(|x| amp * (x[0].powf(beta) + (1.0 - x[0]).powf(beta) - 1.0));
        solver.initial = Initial::Deterministic(profile);
    }
    solver.validate()?;

    let study = StudyParams {
        axis,
        values,
        delta0,
        m_level,
        paths,
        r_values,
        alpha,
        m: m_exp,
        lags,
        points,
        pairs,
        fields,
        states,
    };
    Ok(ParsedRun { solver, study, echo })
}
