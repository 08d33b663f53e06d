use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use afc_core::experiments::{
    dmp_table, parse_config, render_text, run_single, spatial_convergence, temporal_convergence, write_csv, DmpConfig,
    StudyConfig,
};
use afc_core::fem::{l2_error, QuadratureRule};
use afc_core::problems::{builtin_problem, Problem};
use afc_core::stabilization::{
    antidiffusive_fluxes, artificial_diffusion, correction_factors, write_limiter_edges_csv, write_limiter_nodes_csv,
};
use afc_core::{Error, FemSpace, Mesh, Result, SchemeConfig, StepRule, Variant};

/// P1 finite elements with algebraic flux correction for 2D scalar conservation laws.
#[derive(Parser, Debug)]
#[command(name = "afc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print node and triangle counts of the uniform mesh.
    MeshInfo(Opts),
    /// Integrate one problem with one scheme.
    Run(Opts),
    /// Sample standard and AFC solutions along y = 0.1 after a few steps.
    Dmp(Opts),
    /// Temporal convergence study against a fine-step reference.
    Temporal(Opts),
    /// Spatial convergence study against an exact solution.
    Spatial(Opts),
}

#[derive(Args, Debug, Default, Clone)]
struct Opts {
    /// Cells per side; a comma list for spatial studies.
    #[arg(long)]
    m: Option<String>,
    /// Number of time steps; a comma list for temporal studies.
    #[arg(long)]
    n0: Option<String>,
    /// Steps of the reference solution (temporal studies).
    #[arg(long = "ref-n0")]
    ref_n0: Option<usize>,
    /// Number of steps of the maximum principle table.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Problem name from the built-in catalog.
    #[arg(long)]
    problem: Option<String>,
    /// Comma list of standard, low-order, afc (or `all`).
    #[arg(long)]
    scheme: Option<String>,
    /// Step size factor: k = cfl * h0^cfl-power.
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long = "cfl-power")]
    cfl_power: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write limiter quantities at the final state to PREFIX_nodes.csv and PREFIX_edges.csv.
    #[arg(long = "dump-limiter", num_args = 0..=1, default_missing_value = "limiter", value_name = "PREFIX")]
    dump_limiter: Option<String>,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value '{v}' for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl Opts {
    /// Fills unset options from the config file.
    fn merge_config(&mut self) -> Result<()> {
        let Some(path) = &self.config else { return Ok(()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        let map: BTreeMap<String, String> = parse_config(&text)?;
        for (k, v) in map {
            match k.as_str() {
                "m" => fill(&mut self.m, v),
                "n0" => fill(&mut self.n0, v),
                "ref-n0" => fill(&mut self.ref_n0, parse_value(&k, &v)?),
                "steps" => fill(&mut self.steps, parse_value(&k, &v)?),
                "t-final" => fill(&mut self.t_final, parse_value(&k, &v)?),
                "problem" => fill(&mut self.problem, v),
                "scheme" => fill(&mut self.scheme, v),
                "cfl" => fill(&mut self.cfl, parse_value(&k, &v)?),
                "cfl-power" => fill(&mut self.cfl_power, parse_value(&k, &v)?),
                "out" => fill(&mut self.out, PathBuf::from(v)),
                "dump-limiter" => fill(&mut self.dump_limiter, v),
                _ => return Err(Error::InvalidArgument(format!("unknown config key '{k}'"))),
            }
        }
        Ok(())
    }

    fn problem(&self, default: &str) -> Result<Problem> {
        builtin_problem(self.problem.as_deref().unwrap_or(default))
    }

    fn single_m(&self, default: usize) -> Result<usize> {
        match &self.m {
            None => Ok(default),
            Some(v) => parse_value("--m", v),
        }
    }

    fn variants(&self, default: &[Variant]) -> Result<Vec<Variant>> {
        match self.scheme.as_deref() {
            None => Ok(default.to_vec()),
            Some("all") => Ok(Variant::ALL.to_vec()),
            Some(v) => {
                let list: Vec<Variant> = parse_list_variants(v)?;
                if list.is_empty() {
                    return Err(Error::InvalidArgument("empty scheme list".into()));
                }
                Ok(list)
            }
        }
    }
}

fn parse_list_variants(v: &str) -> Result<Vec<Variant>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

fn fill<T>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn mesh_info(o: &Opts) -> Result<()> {
    let mesh = Mesh::uniform(o.single_m(10)?)?;
    let (gamma, rho) = mesh.quality();
    println!("M = {}", mesh.m);
    println!("nodes = {}", mesh.num_nodes());
    println!("interior nodes = {}", mesh.interior_ids.len());
    println!("triangles = {}", mesh.num_triangles());
    println!("h0 = {}", mesh.h0);
    println!("h = {}", mesh.h);
    println!("gamma = {gamma}");
    println!("rho = {rho}");
    if let Some(out) = &o.out {
        mesh.write_dump(create(out)?)?;
    }
    Ok(())
}

fn run(o: &Opts) -> Result<()> {
    let problem = o.problem("burgers")?;
    let mesh = Mesh::uniform(o.single_m(20)?)?;
    let variants = o.variants(&[Variant::Afc])?;
    let [variant] = variants[..] else {
        return Err(Error::InvalidArgument("run takes exactly one scheme".into()));
    };
    let step = match (&o.n0, o.cfl) {
        (Some(n), _) => StepRule::Steps(parse_value("--n0", n)?),
        (None, c) => StepRule::Cfl {
            factor: c.unwrap_or(0.1),
            power: o.cfl_power.unwrap_or(1.0),
        },
    };
    let mut cfg = SchemeConfig::new(variant, problem.flux, o.t_final.unwrap_or(problem.t_final), step);
    if let Some(c) = problem.manufactured {
        cfg.source = Some(c.source);
    }
    let (u, report) = run_single(&mesh, &problem, cfg)?;
    println!("problem = {}  scheme = {}  M = {}", problem.name, variant, mesh.m);
    println!("steps = {}  k = {:.4e}  t = {}", report.n0, report.k, u.time);
    println!("initial range = [{:.4e}, {:.4e}]", report.bounds.0, report.bounds.1);
    println!("final range = [{:.4e}, {:.4e}]", u.min(), u.max());
    if report.dmp_satisfied() {
        println!("maximum principle held at every stage");
    } else {
        println!(
            "maximum principle violated in {} of {} steps (range [{:.4e}, {:.4e}])",
            report.violations.len(),
            report.n0,
            report.overall_min(),
            report.overall_max()
        );
    }
    if let Some(c) = problem.manufactured {
        let e = l2_error(&mesh, &u, c.exact, u.time, &QuadratureRule::six_point());
        println!("L2 error = {e:.4e}");
    }
    if let Some(out) = &o.out {
        let mut w = create(out)?;
        writeln!(w, "node,x,y,value")?;
        for (i, z) in mesh.nodes.iter().enumerate() {
            writeln!(w, "{i},{},{},{:e}", z[0], z[1], u.values[i])?;
        }
        w.flush()?;
    }
    if let Some(prefix) = &o.dump_limiter {
        let psi = (problem.flux.exponent == 1).then_some(&u.values[..]);
        let t = FemSpace::new(&mesh).assemble_convection(&problem.flux, psi, u.time)?;
        let d = artificial_diffusion(&t)?;
        let r = antidiffusive_fluxes(&d, &u.values);
        let lf = correction_factors(&mesh, &d, &r, &u.values, None);
        write_limiter_nodes_csv(&mesh, &lf, create(Path::new(&format!("{prefix}_nodes.csv")))?)?;
        write_limiter_edges_csv(&d, &r, &lf, create(Path::new(&format!("{prefix}_edges.csv")))?)?;
    }
    Ok(())
}

fn dmp(o: &Opts) -> Result<()> {
    let mut cfg = DmpConfig::new(o.problem("dmp-gauss")?);
    cfg.m = o.single_m(10)?;
    if let Some(n) = o.steps.or(o.n0.as_deref().map(|v| parse_value("--n0", v)).transpose()?) {
        cfg.steps = n;
    }
    cfg.variants = o.variants(&[Variant::Standard, Variant::Afc])?;
    let table = dmp_table(&cfg)?;
    print!("{}", table.to_text());
    if let Some(out) = &o.out {
        let mut w = create(out)?;
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn study(o: &Opts, temporal: bool) -> Result<()> {
    let problem = o.problem(if temporal { "advect-13" } else { "trig-advect" })?;
    let mut cfg = StudyConfig::new(problem);
    cfg.variants = o.variants(&[Variant::Standard, Variant::Afc])?;
    if let Some(t) = o.t_final {
        cfg.t_final = t;
    }
    if let Some(c) = o.cfl {
        cfg.cfl = c;
    }
    let tables = if temporal {
        cfg.m = o.single_m(50)?;
        if let Some(n) = &o.n0 {
            cfg.n0_list = parse_list("--n0", n)?;
        }
        if let Some(r) = o.ref_n0 {
            cfg.ref_n0 = r;
        }
        temporal_convergence(&cfg)?
    } else {
        if let Some(m) = &o.m {
            cfg.m_list = parse_list("--m", m)?;
        }
        spatial_convergence(&cfg)?
    };
    print!("{}", render_text(&tables, if temporal { "N0" } else { "h0" }));
    if let Some(out) = &o.out {
        let mut w = create(out)?;
        write_csv(&tables, &mut w)?;
        w.flush()?;
    }
    if tables.iter().any(|t| t.aborted.is_some()) {
        return Err(Error::Divergence { step: 0 });
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Io(_) => 2,
        Error::Divergence { .. } | Error::CgNotConverged { .. } => 3,
        Error::Internal(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MeshInfo(mut o) => o.merge_config().and_then(|_| mesh_info(&o)),
        Command::Run(mut o) => o.merge_config().and_then(|_| run(&o)),
        Command::Dmp(mut o) => o.merge_config().and_then(|_| dmp(&o)),
        Command::Temporal(mut o) => o.merge_config().and_then(|_| study(&o, true)),
        Command::Spatial(mut o) => o.merge_config().and_then(|_| study(&o, false)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Divergence { step: 0 }) => {
            eprintln!("error: at least one run diverged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
