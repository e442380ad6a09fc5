//! Flat key = value run configuration, shared by the CLI and the test
//! harness. CLI overrides are applied as additional key = value pairs.

use std::path::PathBuf;

use crate::error::HarnessError;
use crate::grid::VelocityGrid;
use crate::reference::{bi_maxwellian_test_params, BiMaxwellianParams};
use crate::schemes::{SchemeConfig, SchemeTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Boltzmann,
    Landau,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Boltzmann => "boltzmann",
            Equation::Landau => "landau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Bkw,
    BiMaxwellian(BiMaxwellianParams),
}

/// Reference a convergence study measures errors against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorReference {
    /// The analytic BKW solution at the final time.
    Analytic,
    /// A run of the same scheme and operator at dt_min / factor. Removes the
    /// dt-independent spatial offset, which buries the time error of the
    /// second-order schemes at desk-scale resolutions.
    SelfRefined { factor: u32 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub equation: Equation,
    pub scheme: SchemeTag,
    pub n: usize,
    /// Domain scale S; the half-width L follows the per-equation rule.
    pub s: f64,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub entropy_offset: f64,
    pub eps: f64,
    pub beta: Option<f64>,
    pub neg_tol: f64,
    pub secant_tol: f64,
    pub secant_max_iter: usize,
    /// Total kernel strength: C_B * b for Boltzmann, C_L for Landau.
    pub kernel_strength: f64,
    pub gamma: f64,
    /// Boltzmann truncation radius; defaults to 2S.
    pub radius: f64,
    /// Quadrature orders; zero means the resolution-derived default.
    pub m_r: usize,
    pub m_th: usize,
    pub init: InitialCondition,
    pub reference: ErrorReference,
    pub out: Option<PathBuf>,
    pub field_out: Option<PathBuf>,
    pub modes_cache: Option<PathBuf>,
    /// Report every `cadence` steps; zero picks 1 for short runs and 10 for
    /// runs longer than 200 steps.
    pub cadence: usize,
}

impl RunConfig {
    pub fn new(equation: Equation, scheme: SchemeTag, n: usize, s: f64, dt: f64) -> Self {
        let kernel_strength = match equation {
            Equation::Boltzmann => 0.5 / std::f64::consts::PI,
            Equation::Landau => 1.0 / 16.0,
        };
        Self {
            equation,
            scheme,
            n,
            s,
            dt,
            t0: 0.5,
            t_end: 0.6,
            entropy_offset: 10.0,
            eps: 1e-16,
            beta: None,
            neg_tol: 1e-4,
            secant_tol: 1e-13,
            secant_max_iter: 100,
            kernel_strength,
            gamma: 0.0,
            radius: 2.0 * s,
            m_r: 0,
            m_th: 0,
            init: InitialCondition::Bkw,
            reference: ErrorReference::Analytic,
            out: None,
            field_out: None,
            modes_cache: None,
            cadence: 0,
        }
    }

    /// L = (3 sqrt(2) + 1) S / 2 for Boltzmann, L = 2 S for Landau.
    pub fn domain_half_width(&self) -> f64 {
        match self.equation {
            Equation::Boltzmann => (3.0 * std::f64::consts::SQRT_2 + 1.0) * self.s / 2.0,
            Equation::Landau => 2.0 * self.s,
        }
    }

    pub fn grid(&self) -> Result<VelocityGrid, HarnessError> {
        Ok(VelocityGrid::new(self.n, self.domain_half_width())?)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme,
            dt: self.dt,
            entropy_offset: self.entropy_offset,
            eps: self.eps,
            beta: self.beta,
            secant_tol: self.secant_tol,
            secant_max_iter: self.secant_max_iter,
            neg_tol: self.neg_tol,
        }
    }

    pub fn steps(&self) -> u64 {
        let span = self.t_end - self.t0;
        if span <= 0.0 {
            0
        } else {
            (span / self.dt - 1e-9).ceil().max(0.0) as u64
        }
    }

    pub fn effective_cadence(&self) -> usize {
        if self.cadence > 0 {
            self.cadence
        } else if self.steps() > 200 {
            10
        } else {
            1
        }
    }

    /// Resolved-config comment lines echoed into every output file.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("equation = {}", self.equation.name()),
            format!("scheme = {}", self.scheme.name()),
            format!("n = {}", self.n),
            format!("s = {}", self.s),
            format!("l = {}", self.domain_half_width()),
            format!("dt = {}", self.dt),
            format!("t0 = {}", self.t0),
            format!("t_end = {}", self.t_end),
            format!("c = {}", self.entropy_offset),
            format!("eps = {}", self.eps),
            format!("neg_tol = {}", self.neg_tol),
            format!("kernel_strength = {}", self.kernel_strength),
            format!("gamma = {}", self.gamma),
        ];
        if let Some(b) = self.beta {
            lines.push(format!("beta = {}", b));
        }
        match self.equation {
            Equation::Boltzmann => {
                lines.push(format!("radius = {}", self.radius));
                let (m_r, m_th) = self.quadrature_orders();
                lines.push(format!("m_r = {}", m_r));
                lines.push(format!("m_th = {}", m_th));
            }
            Equation::Landau => {}
        }
        match self.init {
            InitialCondition::Bkw => lines.push("init = bkw".into()),
            InitialCondition::BiMaxwellian(p) => {
                lines.push(format!(
                    "init = bimax {},{},{},{},{},{},{},{}",
                    p.rho[0],
                    p.temperature[0],
                    p.center[0][0],
                    p.center[0][1],
                    p.rho[1],
                    p.temperature[1],
                    p.center[1][0],
                    p.center[1][1]
                ));
            }
        }
        lines.push(format!(
            "reference = {}",
            match self.reference {
                ErrorReference::Analytic => "analytic".to_string(),
                ErrorReference::SelfRefined { factor } => format!("self:{}", factor),
            }
        ));
        lines.push(format!("cadence = {}", self.effective_cadence()));
        lines
    }

    pub fn quadrature_orders(&self) -> (usize, usize) {
        if self.m_r > 0 && self.m_th > 0 {
            (self.m_r, self.m_th)
        } else {
            let grid = VelocityGrid::new(self.n, self.domain_half_width())
                .expect("validated elsewhere");
            let (dr, dth) = crate::collision::default_quadrature_orders(&grid, self.radius);
            (
                if self.m_r > 0 { self.m_r } else { dr },
                if self.m_th > 0 { self.m_th } else { dth },
            )
        }
    }

    /// Parse a flat key = value file ('#' starts a comment), then apply
    /// overrides of the same form.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("override '{}': expected key=value", o))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    fn from_pairs(pairs: &[(String, String)]) -> Result<Self, HarnessError> {
        let get = |key: &str| -> Option<&str> {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let bad = |key: &str, v: &str| HarnessError::Config(format!("bad value for {key}: '{v}'"));

        let equation = match get("equation") {
            Some("boltzmann") => Equation::Boltzmann,
            Some("landau") => Equation::Landau,
            Some(v) => return Err(bad("equation", v)),
            None => return Err(HarnessError::Config("missing key 'equation'".into())),
        };
        let scheme = match get("scheme") {
            Some(v) => SchemeTag::parse(v).ok_or_else(|| bad("scheme", v))?,
            None => return Err(HarnessError::Config("missing key 'scheme'".into())),
        };
        let parse_f = |key: &str, v: &str| v.parse::<f64>().map_err(|_| bad(key, v));
        let parse_u = |key: &str, v: &str| v.parse::<usize>().map_err(|_| bad(key, v));

        let n = match get("n") {
            Some(v) => parse_u("n", v)?,
            None => return Err(HarnessError::Config("missing key 'n'".into())),
        };
        let s = match get("s") {
            Some(v) => parse_f("s", v)?,
            None => return Err(HarnessError::Config("missing key 's'".into())),
        };
        let dt = match get("dt") {
            Some(v) => parse_f("dt", v)?,
            None => return Err(HarnessError::Config("missing key 'dt'".into())),
        };
        let mut cfg = Self::new(equation, scheme, n, s, dt);

        let known = [
            "equation", "scheme", "n", "s", "dt", "t0", "t_end", "c", "eps", "beta", "neg_tol",
            "secant_tol", "secant_max_iter", "kernel_strength", "gamma", "radius", "m_r", "m_th",
            "init", "bimax", "reference", "out", "field_out", "modes_cache", "cadence",
        ];
        for (k, _) in pairs {
            if !known.contains(&k.as_str()) {
                return Err(HarnessError::Config(format!("unknown key '{k}'")));
            }
        }

        if let Some(v) = get("t0") {
            cfg.t0 = parse_f("t0", v)?;
        } else if matches!(get("init"), Some("bimax")) {
            cfg.t0 = 0.0;
        }
        if let Some(v) = get("t_end") {
            cfg.t_end = parse_f("t_end", v)?;
        }
        if let Some(v) = get("c") {
            cfg.entropy_offset = parse_f("c", v)?;
        }
        if let Some(v) = get("eps") {
            cfg.eps = parse_f("eps", v)?;
        }
        if let Some(v) = get("beta") {
            cfg.beta = Some(parse_f("beta", v)?);
        }
        if let Some(v) = get("neg_tol") {
            cfg.neg_tol = parse_f("neg_tol", v)?;
        }
        if let Some(v) = get("secant_tol") {
            cfg.secant_tol = parse_f("secant_tol", v)?;
        }
        if let Some(v) = get("secant_max_iter") {
            cfg.secant_max_iter = parse_u("secant_max_iter", v)?;
        }
        if let Some(v) = get("kernel_strength") {
            cfg.kernel_strength = parse_f("kernel_strength", v)?;
        }
        if let Some(v) = get("gamma") {
            cfg.gamma = parse_f("gamma", v)?;
        }
        if let Some(v) = get("radius") {
            cfg.radius = parse_f("radius", v)?;
        }
        if let Some(v) = get("m_r") {
            cfg.m_r = parse_u("m_r", v)?;
        }
        if let Some(v) = get("m_th") {
            cfg.m_th = parse_u("m_th", v)?;
        }
        match get("init") {
            None | Some("bkw") => {}
            Some("bimax") => {
                let params = match get("bimax") {
                    None => bi_maxwellian_test_params(),
                    Some(v) => {
                        let xs: Vec<f64> = v
                            .split(',')
                            .map(|t| t.trim().parse::<f64>())
                            .collect::<Result<_, _>>()
                            .map_err(|_| bad("bimax", v))?;
                        if xs.len() != 8 {
                            return Err(bad("bimax", v));
                        }
                        BiMaxwellianParams {
                            rho: [xs[0], xs[4]],
                            temperature: [xs[1], xs[5]],
                            center: [[xs[2], xs[3]], [xs[6], xs[7]]],
                        }
                    }
                };
                cfg.init = InitialCondition::BiMaxwellian(params);
                if get("t0").is_none() {
                    cfg.t0 = 0.0;
                }
            }
            Some(v) => return Err(bad("init", v)),
        }
        if let Some(v) = get("reference") {
            cfg.reference = if v == "analytic" {
                ErrorReference::Analytic
            } else if let Some(rest) = v.strip_prefix("self:") {
                ErrorReference::SelfRefined {
                    factor: rest.parse().map_err(|_| bad("reference", v))?,
                }
            } else if v == "self" {
                ErrorReference::SelfRefined { factor: 8 }
            } else {
                return Err(bad("reference", v));
            };
        }
        if let Some(v) = get("out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some(v) = get("field_out") {
            cfg.field_out = Some(PathBuf::from(v));
        }
        if let Some(v) = get("modes_cache") {
            cfg.modes_cache = Some(PathBuf::from(v));
        }
        if let Some(v) = get("cadence") {
            cfg.cadence = parse_u("cadence", v)?;
        }

        if !(cfg.dt > 0.0) {
            return Err(HarnessError::Config("dt must be positive".into()));
        }
        if cfg.t_end < cfg.t0 {
            return Err(HarnessError::Config("t_end must be >= t0".into()));
        }
        Ok(cfg)
    }
}
