//! Experiment configuration: line-based `key = value` text with dotted keys
//! and `#` comments. Every key has a documented default; unknown keys and
//! unparsable values are rejected with their line number.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::collision::AngularFactor;
use crate::error::{LabError, Result};
use crate::field::PhaseField;
use crate::flow::{FlowMap, FlowOptions};
use crate::metric::{GluedMetricParams, MetricField, RadialTable, bump_metric_1d, glued_sphere_metric};
use crate::trapped::plateau_field;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricSpec {
    Euclidean { dim: usize },
    GluedSphere(GluedMetricParams),
    /// Tabulated conformal factor of `g` on `[0, u_max]` in `u = |x|²`.
    CustomTable { dim: usize, u_max: f64, values: Vec<f64> },
    /// One-dimensional conformal bump `g = 1 + A·bump`.
    Bump1d { amplitude: f64 },
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Euclidean { dim } | Self::CustomTable { dim, .. } => *dim,
            Self::GluedSphere(p) => p.dim,
            Self::Bump1d { .. } => 1,
        }
    }

    pub fn build(&self) -> Result<MetricField> {
        match self {
            Self::Euclidean { dim } => MetricField::euclidean(*dim),
            Self::GluedSphere(p) => glued_sphere_metric(*p),
            Self::CustomTable { dim, u_max, values } => {
                MetricField::new(*dim, std::sync::Arc::new(RadialTable::new(*u_max, values.clone())?))
            }
            Self::Bump1d { amplitude } => bump_metric_1d(*amplitude),
        }
    }

    /// Parses the command-line form `euclidean:2`, `glued_sphere:0.1,0.05`, `bump:0.5`.
    pub fn parse_cli(text: &str) -> Result<Self> {
        let (kind, args) = text.split_once(':').unwrap_or((text, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',').filter(|s| !s.is_empty()).map(|s| parse_value::<f64>(s.trim(), 0)).collect()
        };
        match kind {
            "euclidean" => Ok(Self::Euclidean { dim: if args.is_empty() { 2 } else { parse_value(args, 0)? } }),
            "glued_sphere" => {
                let v = nums()?;
                let mut p = GluedMetricParams::default();
                if let [r0, eps, ..] = v[..] {
                    p.r0 = r0;
                    p.eps = eps;
                }
                p.validate()?;
                Ok(Self::GluedSphere(p))
            }
            "bump" => Ok(Self::Bump1d { amplitude: nums()?.first().copied().unwrap_or(0.5) }),
            _ => Err(LabError::Usage(format!("unknown metric `{text}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    SmoothBump,
    PolyBump { m: i32 },
    Plateau,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub rx: f64,
    pub rxi: f64,
    pub amplitude: f64,
}

impl FieldSpec {
    pub fn build(&self, dim: usize) -> PhaseField {
        let zero = vec![0.0; dim];
        let base = match self.kind {
            FieldKind::SmoothBump => PhaseField::smooth_bump(&zero, self.rx, &zero, self.rxi),
            FieldKind::PolyBump { m } => PhaseField::poly_bump(&zero, self.rx, &zero, self.rxi, m),
            FieldKind::Plateau => plateau_field(dim, self.rx, self.rxi),
        };
        if self.amplitude == 1.0 {
            return base;
        }
        let a = self.amplitude;
        PhaseField::closed(base.support().clone(), a >= 0.0, move |x, v| a * base.eval(x, v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub gamma: f64,
    /// Regularization; `None` means half the velocity spacing.
    pub eta: Option<f64>,
    pub angular: AngularFactor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannSpec {
    pub nx: usize,
    pub x_half: f64,
    pub nv: usize,
    pub v_half: f64,
    pub amplitude: f64,
    pub t_max: f64,
    pub iterations: usize,
    pub tol: f64,
    pub zeta_order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiclassicalSpec {
    pub n: usize,
    pub x_half: f64,
    pub t: f64,
    pub h_ladder: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorySpec {
    pub gamma: f64,
    pub eps_ladder: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub threads: usize,
    pub output_dir: String,
    pub metric: MetricSpec,
    pub field: FieldSpec,
    pub step_fraction: f64,
    pub kernel: KernelSpec,
    pub boltzmann: BoltzmannSpec,
    pub semiclassical: SemiclassicalSpec,
    pub oscillatory: OscillatorySpec,
    pub rho_t_max: f64,
    pub rho_grid: (usize, usize),
    pub trap_t_max: f64,
    pub trap_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 1,
            output_dir: "out".into(),
            metric: MetricSpec::Euclidean { dim: 2 },
            field: FieldSpec { kind: FieldKind::SmoothBump, rx: 1.0, rxi: 1.0, amplitude: 1.0 },
            step_fraction: FlowOptions::default().step_fraction,
            kernel: KernelSpec { gamma: -1.0, eta: None, angular: AngularFactor::Linear },
            boltzmann: BoltzmannSpec {
                nx: 4,
                x_half: 1.5,
                nv: 5,
                v_half: 1.5,
                amplitude: 0.01,
                t_max: 80.0,
                iterations: 20,
                tol: 1e-6,
                zeta_order: 3,
            },
            semiclassical: SemiclassicalSpec { n: 512, x_half: 10.0, t: 1.0, h_ladder: vec![0.2, 0.1, 0.05] },
            oscillatory: OscillatorySpec { gamma: 2.0, eps_ladder: vec![0.1, 0.01, 0.001] },
            rho_t_max: 50.0,
            rho_grid: (41, 12),
            trap_t_max: 100.0,
            trap_samples: 100_000,
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "threads",
    "output.dir",
    "metric.kind",
    "metric.dim",
    "glued_sphere.r0",
    "glued_sphere.eps",
    "custom_table.u_max",
    "custom_table.values",
    "bump.amplitude",
    "field.kind",
    "field.rx",
    "field.rxi",
    "field.amplitude",
    "field.m",
    "flow.step_fraction",
    "boltzmann.gamma",
    "boltzmann.eta",
    "boltzmann.b",
    "boltzmann.nx",
    "boltzmann.x_half",
    "boltzmann.nv",
    "boltzmann.v_half",
    "boltzmann.amplitude",
    "boltzmann.tmax",
    "boltzmann.iters",
    "boltzmann.tol",
    "boltzmann.zeta_order",
    "semiclassical.n",
    "semiclassical.x_half",
    "semiclassical.t",
    "semiclassical.h_ladder",
    "oscillatory.gamma",
    "oscillatory.eps_ladder",
    "rho.tmax",
    "rho.nx",
    "rho.nt",
    "trap.tmax",
    "trap.samples",
];

fn parse_value<T: FromStr>(v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| LabError::Config { line, msg: format!("cannot parse `{v}`") })
}

fn parse_list(v: &str, line: usize) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_value(s.trim(), line)).collect()
}

/// Parses configuration text; an empty input yields the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| LabError::Config { line, msg: format!("expected `key = value`, got `{body}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(LabError::Config { line, msg: format!("unknown key `{k}`") });
        }
        if entries.iter().any(|(_, e, _)| e == k) {
            return Err(LabError::Config { line, msg: format!("duplicate key `{k}`") });
        }
        entries.push((line, k.to_string(), v.to_string()));
    }
    let get = |k: &str| entries.iter().find(|(_, key, _)| key == k).map(|(l, _, v)| (*l, v.as_str()));

    let mut cfg = ExperimentConfig::default();
    macro_rules! set {
        ($key:expr, $slot:expr) => {
            if let Some((l, v)) = get($key) {
                $slot = parse_value(v, l)?;
            }
        };
    }
    set!("seed", cfg.seed);
    set!("threads", cfg.threads);
    if let Some((_, v)) = get("output.dir") {
        cfg.output_dir = v.to_string();
    }

    let mut dim = 2usize;
    set!("metric.dim", dim);
    let kind_line = get("metric.kind");
    cfg.metric = match kind_line.map(|(_, v)| v).unwrap_or("euclidean") {
        "euclidean" => MetricSpec::Euclidean { dim },
        "glued_sphere" => {
            let mut p = GluedMetricParams { dim, ..Default::default() };
            set!("glued_sphere.r0", p.r0);
            set!("glued_sphere.eps", p.eps);
            p.validate().map_err(|e| LabError::Config { line: kind_line.map_or(0, |l| l.0), msg: e.to_string() })?;
            MetricSpec::GluedSphere(p)
        }
        "custom_table" => {
            let line = kind_line.map_or(0, |l| l.0);
            let missing = |k: &str| LabError::Config { line, msg: format!("missing required key `{k}`") };
            let (ul, u) = get("custom_table.u_max").ok_or_else(|| missing("custom_table.u_max"))?;
            let (vl, vals) = get("custom_table.values").ok_or_else(|| missing("custom_table.values"))?;
            MetricSpec::CustomTable { dim, u_max: parse_value(u, ul)?, values: parse_list(vals, vl)? }
        }
        "bump" => {
            let mut amplitude = 0.5;
            set!("bump.amplitude", amplitude);
            MetricSpec::Bump1d { amplitude }
        }
        other => {
            return Err(LabError::Config { line: kind_line.map_or(0, |l| l.0), msg: format!("unknown metric kind `{other}`") });
        }
    };

    if let Some((l, v)) = get("field.kind") {
        cfg.field.kind = match v {
            "smooth_bump" => FieldKind::SmoothBump,
            "poly_bump" => FieldKind::PolyBump { m: 2 },
            "plateau" => FieldKind::Plateau,
            other => return Err(LabError::Config { line: l, msg: format!("unknown field kind `{other}`") }),
        };
    }
    if let Some((l, v)) = get("field.m") {
        match &mut cfg.field.kind {
            FieldKind::PolyBump { m } => *m = parse_value(v, l)?,
            _ => return Err(LabError::Config { line: l, msg: "field.m applies to poly_bump only".into() }),
        }
    }
    set!("field.rx", cfg.field.rx);
    set!("field.rxi", cfg.field.rxi);
    set!("field.amplitude", cfg.field.amplitude);
    set!("flow.step_fraction", cfg.step_fraction);

    set!("boltzmann.gamma", cfg.kernel.gamma);
    if let Some((l, v)) = get("boltzmann.eta") {
        cfg.kernel.eta = Some(parse_value(v, l)?);
    }
    if let Some((l, v)) = get("boltzmann.b") {
        cfg.kernel.angular = match v {
            "linear" => AngularFactor::Linear,
            "zero" => AngularFactor::Zero,
            other => return Err(LabError::Config { line: l, msg: format!("unknown angular factor `{other}`") }),
        };
    }
    let b = &mut cfg.boltzmann;
    set!("boltzmann.nx", b.nx);
    set!("boltzmann.x_half", b.x_half);
    set!("boltzmann.nv", b.nv);
    set!("boltzmann.v_half", b.v_half);
    set!("boltzmann.amplitude", b.amplitude);
    set!("boltzmann.tmax", b.t_max);
    set!("boltzmann.iters", b.iterations);
    set!("boltzmann.tol", b.tol);
    set!("boltzmann.zeta_order", b.zeta_order);

    set!("semiclassical.n", cfg.semiclassical.n);
    set!("semiclassical.x_half", cfg.semiclassical.x_half);
    set!("semiclassical.t", cfg.semiclassical.t);
    if let Some((l, v)) = get("semiclassical.h_ladder") {
        cfg.semiclassical.h_ladder = parse_list(v, l)?;
    }
    set!("oscillatory.gamma", cfg.oscillatory.gamma);
    if let Some((l, v)) = get("oscillatory.eps_ladder") {
        cfg.oscillatory.eps_ladder = parse_list(v, l)?;
    }
    set!("rho.tmax", cfg.rho_t_max);
    set!("rho.nx", cfg.rho_grid.0);
    set!("rho.nt", cfg.rho_grid.1);
    set!("trap.tmax", cfg.trap_t_max);
    set!("trap.samples", cfg.trap_samples);
    Ok(cfg)
}

impl ExperimentConfig {
    /// Canonical `key = value` rendering of every resolved setting.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "metric = {:?}", self.metric);
        let _ = writeln!(s, "field = {:?}", self.field);
        let _ = writeln!(s, "flow.step_fraction = {:e}", self.step_fraction);
        let _ = writeln!(s, "kernel = {:?}", self.kernel);
        let _ = writeln!(s, "boltzmann = {:?}", self.boltzmann);
        let _ = writeln!(s, "semiclassical = {:?}", self.semiclassical);
        let _ = writeln!(s, "oscillatory = {:?}", self.oscillatory);
        let _ = writeln!(s, "rho = {:e} {:?}", self.rho_t_max, self.rho_grid);
        let _ = writeln!(s, "trap = {:e} {}", self.trap_t_max, self.trap_samples);
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical rendering. The
    /// thread count and output directory do not affect results and are left out.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn flow_map(&self) -> Result<FlowMap> {
        Ok(FlowMap::with_options(self.metric.build()?, FlowOptions { step_fraction: self.step_fraction, ..Default::default() }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn glued_sphere_defaults() {
        let c = parse_config("metric.kind = glued_sphere").unwrap();
        assert_eq!(c.metric, MetricSpec::GluedSphere(GluedMetricParams { r0: 0.1, eps: 0.05, dim: 2 }));
    }

    #[test]
    fn gamma_reaches_the_kernel() {
        let c = parse_config("boltzmann.gamma = -1\nboltzmann.b = zero").unwrap();
        assert_eq!(c.kernel.gamma, -1.0);
        assert_eq!(c.kernel.angular, AngularFactor::Zero);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("seed = 3\n\nmetric.colour = red").unwrap_err();
        assert!(matches!(e, LabError::Config { line: 3, .. }), "{e}");
        let e = parse_config("seed = three").unwrap_err();
        assert!(matches!(e, LabError::Config { line: 1, .. }));
        let e = parse_config("metric.kind = custom_table\ncustom_table.u_max = 1").unwrap_err();
        assert!(e.to_string().contains("custom_table.values"), "{e}");
    }

    #[test]
    fn hash_tracks_settings() {
        let a = parse_config("seed = 1").unwrap();
        let b = parse_config("seed = 2").unwrap();
        let c = parse_config("threads = 4").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn cli_metric_forms() {
        assert_eq!(MetricSpec::parse_cli("euclidean:1").unwrap(), MetricSpec::Euclidean { dim: 1 });
        assert_eq!(MetricSpec::parse_cli("bump:0.25").unwrap(), MetricSpec::Bump1d { amplitude: 0.25 });
        assert!(MetricSpec::parse_cli("glued_sphere:0.6,0.3").is_err());
        assert!(MetricSpec::parse_cli("hyperbolic").is_err());
    }
}
