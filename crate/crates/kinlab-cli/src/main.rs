//! `kinlab` command line: experiment runs and the verification suites.
//!
//! Exit codes: 0 success, 1 failed criterion or computation, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinlab::config::{ExperimentConfig, FieldKind, FieldSpec, MetricSpec, parse_config};
use kinlab::error::{LabError, Result};
use kinlab::field::PhaseField;
use kinlab::flow::{FlowMap, FlowOptions};
use kinlab::io::{CsvTable, RunHeader, StateFile};
use kinlab::kt::{NormSpec, check_kt_admissible};
use kinlab::metric::GluedMetricParams;
use kinlab::semiclassical::{density_gap_ladder, log_frequency_grid, oscillatory_fourier_bound};
use kinlab::transport::{VelocityQuadrature, velocity_average};
use kinlab::trapped::{TrappedRegion, equator_seed, plateau_field, trapped_mass};
use kinlab::verify::{Suite, boltzmann_solver, run_verify, semiclassical_datum, trapping_params};

#[derive(Parser, Debug)]
#[command(name = "kinlab", version, about = "Kinetic transport laboratory")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed recorded in every output header.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for data-parallel kernels.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long = "emit", value_name = "DIR")]
    emit_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory of the Hamiltonian flow.
    Flow {
        #[arg(long)]
        metric: Option<String>,
        /// Initial phase point `x_1,..,x_d,ξ_1,..,ξ_d`.
        #[arg(long = "seed", value_name = "X,XI", allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, default_value = "trajectory.csv")]
        emit: String,
    },
    /// Velocity-averaged density on a space-time grid.
    Rho {
        #[arg(long)]
        metric: Option<String>,
        /// `smooth_bump:rx,rxi`, `poly_bump:rx,rxi,m` or `plateau:rx,rxi`.
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        tmax: Option<f64>,
        /// Points along the first axis and number of time levels.
        #[arg(long, value_name = "NX,NT")]
        grid: Option<String>,
        #[arg(long, default_value = "rho.csv")]
        emit: String,
    },
    /// Print the KT admissibility verdict of `(q, r, p, a)`.
    Norms {
        #[arg(long)]
        q: String,
        #[arg(long)]
        r: String,
        #[arg(long)]
        p: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        d: u32,
    },
    /// Trapped mass of a plateau datum on the tube around the equator.
    Trapmass {
        #[arg(long, default_value = "glued_sphere:0.75,0.1")]
        metric: String,
        #[arg(long, default_value = "mass.csv")]
        emit: String,
    },
    /// Kaniel–Shinbrot run for the three-dimensional Boltzmann equation.
    Boltzmann {
        #[arg(long, default_value = "euclidean:3")]
        metric: String,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        /// `poly_bump:AMPLITUDE`.
        #[arg(long)]
        f0: Option<String>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value = "run")]
        emit: String,
    },
    /// Quantum-classical density gaps over an h ladder.
    Semiclassical {
        #[arg(long, default_value = "bump:0.5")]
        metric: String,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_name = "H,..")]
        h_ladder: Option<String>,
        #[arg(long, default_value = "gap.csv")]
        emit: String,
    },
    /// Oscillatory Fourier bound over an ε ladder.
    Oscbound {
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long, value_name = "EPS,..")]
        eps_ladder: Option<String>,
        #[arg(long, default_value = "osc.csv")]
        emit: String,
    },
    /// Run a verification suite (`fast` or `full`).
    Verify {
        #[arg(long, default_value = "fast")]
        suite: String,
    },
}

fn list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| LabError::Usage(format!("cannot parse `{s}` as a number"))))
        .collect()
}

fn field_spec(text: &str, base: &FieldSpec) -> Result<FieldSpec> {
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    let v = if args.is_empty() { Vec::new() } else { list(args)? };
    let mut spec = base.clone();
    spec.kind = match kind {
        "smooth_bump" => FieldKind::SmoothBump,
        "poly_bump" => FieldKind::PolyBump { m: v.get(2).map_or(2, |m| *m as i32) },
        "plateau" => FieldKind::Plateau,
        _ => return Err(LabError::Usage(format!("unknown field `{text}`"))),
    };
    if let [rx, rxi, ..] = v[..] {
        spec.rx = rx;
        spec.rxi = rxi;
    }
    Ok(spec)
}

struct Ctx {
    cfg: ExperimentConfig,
    dir: PathBuf,
}

impl Ctx {
    fn header(&self) -> RunHeader {
        RunHeader { config_hash: self.cfg.hash(), seed: self.cfg.seed }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn flow_map(&self, metric: &Option<String>) -> Result<FlowMap> {
        let spec = match metric {
            Some(m) => MetricSpec::parse_cli(m)?,
            None => self.cfg.metric.clone(),
        };
        Ok(FlowMap::with_options(spec.build()?, FlowOptions { step_fraction: self.cfg.step_fraction, ..Default::default() }))
    }

    fn write(&self, table: &CsvTable, name: &str) -> Result<()> {
        let path = self.path(name);
        table.write(&path, &self.header())?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        cfg.threads = n.max(1);
    }
    let dir = cli.emit_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let ctx = Ctx { cfg, dir };

    match cli.command {
        Command::Flow { metric, point, t, samples, emit } => {
            let fm = ctx.flow_map(&metric)?;
            let z = list(&point)?;
            let d = fm.dim();
            if z.len() != 2 * d {
                return Err(LabError::Usage(format!("phase point needs {} coordinates", 2 * d)));
            }
            let mut cols: Vec<String> = vec!["t".into()];
            cols.extend((1..=d).map(|k| format!("x_{k}")));
            cols.extend((1..=d).map(|k| format!("xi_{k}")));
            cols.extend(["p".into(), "detJ".into()]);
            let mut table = CsvTable::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
            let n = samples.max(2) - 1;
            for k in 0..=n {
                let tk = t * k as f64 / n as f64;
                let (zt, jac) = fm.evaluate_with_jacobian(tk, &z)?;
                let mut row = vec![tk.into()];
                row.extend(zt.iter().map(|v| (*v).into()));
                row.push(fm.energy(&zt).into());
                row.push(jac.det.into());
                table.push(row);
            }
            ctx.write(&table, &emit)?;
        }
        Command::Rho { metric, field, tmax, grid, emit } => {
            let fm = ctx.flow_map(&metric)?;
            let d = fm.dim();
            let spec = match &field {
                Some(s) => field_spec(s, &ctx.cfg.field)?,
                None => ctx.cfg.field.clone(),
            };
            let f = spec.build(d);
            let tmax = tmax.unwrap_or(ctx.cfg.rho_t_max);
            let (nx, nt) = match &grid {
                Some(g) => match list(g)?[..] {
                    [a, b] if a >= 1.0 && b >= 1.0 => (a as usize, b as usize),
                    _ => return Err(LabError::Usage("--grid expects NX,NT".into())),
                },
                None => ctx.cfg.rho_grid,
            };
            rho_table(&ctx, &f, &fm, tmax, nx, nt, &emit)?;
        }
        Command::Norms { q, r, p, a, d } => {
            let parse = |s: &str| s.parse().map_err(|e: LabError| LabError::Usage(e.to_string()));
            let spec = NormSpec { q: parse(&q)?, r: parse(&r)?, p: parse(&p)?, a: parse(&a)? };
            if d == 0 {
                return Err(LabError::Usage("dimension must be positive".into()));
            }
            let v = check_kt_admissible(&spec, d);
            println!("({q}, {r}, {p}, {a}) at d = {d}: {}", v.reason);
        }
        Command::Trapmass { metric, emit } => {
            let spec = MetricSpec::parse_cli(&metric)?;
            let params = match spec {
                MetricSpec::GluedSphere(p) => p,
                _ => return Err(LabError::Usage("trapmass needs a glued_sphere metric".into())),
            };
            let params = if metric == "glued_sphere" { trapping_params() } else { GluedMetricParams { dim: 2, ..params } };
            let fm = FlowMap::with_options(
                kinlab::metric::glued_sphere_metric(params)?,
                FlowOptions { step_fraction: ctx.cfg.step_fraction, ..Default::default() },
            );
            let region = TrappedRegion::from_orbit(&fm, &equator_seed(&fm), 200, 0.02, 10.0)?;
            let samples = region.sample(&fm, ctx.cfg.trap_samples, ctx.cfg.seed)?;
            let times: Vec<f64> = (0..=20).map(|k| k as f64 * ctx.cfg.trap_t_max / 20.0).collect();
            let mass = trapped_mass(&plateau_field(2, 0.9, 4.0), &fm, &samples, &times)?;
            let mut table = CsvTable::new(&["t", "mass", "stderr"]);
            for (t, m) in times.iter().zip(&mass) {
                table.push(vec![(*t).into(), m.mean.into(), m.stderr.into()]);
            }
            ctx.write(&table, &emit)?;
        }
        Command::Boltzmann { metric, gamma, f0, tmax, iters, emit } => {
            if MetricSpec::parse_cli(&metric)? != (MetricSpec::Euclidean { dim: 3 }) {
                return Err(LabError::Usage("the Boltzmann solver runs on euclidean:3".into()));
            }
            let mut cfg = ctx.cfg.clone();
            if let Some(g) = gamma {
                cfg.kernel.gamma = g;
            }
            if let Some(s) = f0 {
                let amp = s.strip_prefix("poly_bump:").ok_or_else(|| LabError::Usage("--f0 expects poly_bump:AMPLITUDE".into()))?;
                cfg.boltzmann.amplitude = list(amp)?[0];
            }
            if let Some(t) = tmax {
                cfg.boltzmann.t_max = t;
            }
            if let Some(n) = iters {
                cfg.boltzmann.iterations = n;
            }
            let solver = boltzmann_solver(&cfg, cfg.kernel.angular)?;
            let gain = solver.gain_only_solve()?;
            let out = solver.ks_iterate(&gain.state)?;
            let mut it = CsvTable::new(&["n", "sup_gap", "l3_norm"]);
            for h in &out.history {
                it.push(vec![h.n.into(), h.sup_gap.into(), h.l3_norm.into()]);
            }
            let ladder: Vec<f64> = [5.0, 10.0, 20.0, 40.0].into_iter().filter(|t| 2.0 * t <= cfg.boltzmann.t_max).collect();
            let scat = solver.scattering_state(&out.pair.lower, &ladder)?;
            let mut sc = CsvTable::new(&["t", "tail_norm"]);
            for (t, v) in &scat.tails {
                sc.push(vec![(*t).into(), (*v).into()]);
            }
            let run_dir = Path::new(&emit);
            ctx.write(&it, &run_dir.join("iterates.csv").to_string_lossy())?;
            ctx.write(&sc, &run_dir.join("scattering.csv").to_string_lossy())?;
            let g = solver.grid();
            let (nx, nv) = (g.x_count(), g.v_count());
            let mut shape = vec![nx; 3];
            shape.extend([nv; 3]);
            let mut extents = vec![(-g.x_half, g.x_half); 3];
            extents.extend([(-g.v_half, g.v_half); 3]);
            let state = StateFile { shape, extents, values: scat.f_infinity };
            let path = ctx.path(&run_dir.join("final_state.bin").to_string_lossy());
            state.write(&path, &ctx.header())?;
            println!("wrote {}", path.display());
            if !out.converged {
                eprintln!("sandwich did not reach the tolerance within {} iterations", cfg.boltzmann.iterations);
                return Ok(ExitCode::from(1));
            }
        }
        Command::Semiclassical { metric, t, h_ladder, emit } => {
            let fm = FlowMap::new(MetricSpec::parse_cli(&metric)?.build()?);
            if fm.dim() != 1 {
                return Err(LabError::Usage("the semiclassical run needs a one-dimensional metric".into()));
            }
            let sc = &ctx.cfg.semiclassical;
            let hs = match &h_ladder {
                Some(s) => list(s)?,
                None => sc.h_ladder.clone(),
            };
            let quad = VelocityQuadrature { order: 24, panels: 8 };
            let ladder = density_gap_ladder(&semiclassical_datum(), &fm, t.unwrap_or(sc.t), sc.n, sc.x_half, &hs, &quad)?;
            let mut table = CsvTable::new(&["h", "sup_gap", "l1_gap", "fitted_order"]);
            for p in &ladder.points {
                table.push(vec![p.h.into(), p.sup_gap.into(), p.l1_gap.into(), ladder.fitted_order.into()]);
            }
            ctx.write(&table, &emit)?;
        }
        Command::Oscbound { gamma, eps_ladder, emit } => {
            let gamma = gamma.unwrap_or(ctx.cfg.oscillatory.gamma);
            let eps = match &eps_ladder {
                Some(s) => list(s)?,
                None => ctx.cfg.oscillatory.eps_ladder.clone(),
            };
            let xis = log_frequency_grid(-4, 4, 24);
            let mut table = CsvTable::new(&["gamma", "eps", "sup", "bound_ratio"]);
            for e in eps {
                let b = oscillatory_fourier_bound(gamma, e, &xis)?;
                table.push(vec![gamma.into(), e.into(), b.sup.into(), b.bound_ratio.into()]);
            }
            ctx.write(&table, &emit)?;
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let manifest = run_verify(&ctx.cfg, suite);
            print!("{}", manifest.summary());
            ctx.write(&manifest.table(), "manifest.csv")?;
            if !manifest.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn rho_table(ctx: &Ctx, f: &PhaseField, fm: &FlowMap, tmax: f64, nx: usize, nt: usize, name: &str) -> Result<()> {
    let d = fm.dim();
    let (_, big) = fm.inverse_bounds();
    let sb = f.support();
    let x_extent = sb.x_lo.iter().chain(&sb.x_hi).fold(0.0f64, |m, v| m.max(v.abs()));
    let reach = x_extent + 2.0 * big * sb.xi_radius() * tmax;
    let quad = VelocityQuadrature::default();
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((1..=d).map(|k| format!("x_{k}")));
    cols.push("rho".into());
    let mut table = CsvTable::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..nt {
        let t = if nt == 1 { tmax } else { tmax * i as f64 / (nt - 1) as f64 };
        for j in 0..nx {
            let mut x = vec![0.0; d];
            x[0] = if nx == 1 { 0.0 } else { -reach + 2.0 * reach * j as f64 / (nx - 1) as f64 };
            let rho = velocity_average(f, fm, t, &x, &quad)?;
            let mut row = vec![t.into()];
            row.extend(x.iter().map(|v| (*v).into()));
            row.push(rho.into());
            table.push(row);
        }
    }
    ctx.write(&table, name)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e @ (LabError::Usage(_) | LabError::Config { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
