//! Convergence studies, the maximum-principle table and table output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, interpolate, l2_error, mass_norm, NodalField, QuadratureRule};
use crate::mesh::Mesh;
use crate::problems::Problem;
use crate::time_integration::{SchemeConfig, Solver, StepReport, StepRule, Variant};

/// `order_k = log(e_{k-1} / e_k) / log(ratio)`; `None` for the first entry and
/// wherever an error is not positive.
pub fn compute_orders(errors: &[f64], ratio: f64) -> Vec<Option<f64>> {
    let ratios = vec![ratio; errors.len().saturating_sub(1)];
    orders_with_ratios(errors, &ratios)
}

fn orders_with_ratios(errors: &[f64], ratios: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(errors.len());
    for (k, &e) in errors.iter().enumerate() {
        if k == 0 {
            out.push(None);
            continue;
        }
        let prev = errors[k - 1];
        let r = ratios[k - 1];
        out.push((prev > 0.0 && e > 0.0 && r > 1.0).then(|| (prev / e).ln() / r.ln()));
    }
    out
}

/// Shared number formatting: `digits` decimals in scientific notation, or the
/// shortest round-trip representation when `None`.
pub fn format_sci(x: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{x:.d$e}"),
        None => format!("{x:e}"),
    }
}

fn format_fixed(x: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{x:.d$}"),
        None => format!("{x}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resolution {
    Steps(usize),
    MeshWidth(f64),
}

impl Resolution {
    fn value(self) -> f64 {
        match self {
            Resolution::Steps(n) => n as f64,
            Resolution::MeshWidth(h) => h,
        }
    }

    fn render(self, digits: Option<usize>) -> String {
        match self {
            Resolution::Steps(n) => n.to_string(),
            Resolution::MeshWidth(h) => format_sci(h, digits),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub resolution: Resolution,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub problem: String,
    pub variant: Variant,
    pub rows: Vec<ConvergenceRow>,
    /// Set when a run diverged; rows stop before the failing resolution.
    pub aborted: Option<(Resolution, String)>,
}

impl ConvergenceTable {
    fn build(problem: &str, variant: Variant, res: Vec<Resolution>, errors: Vec<f64>) -> Self {
        let ratios: Vec<f64> = res
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Resolution::Steps(a), Resolution::Steps(b)) => b as f64 / a as f64,
                (a, b) => a.value() / b.value(),
            })
            .collect();
        let orders = orders_with_ratios(&errors, &ratios);
        let rows = res
            .into_iter()
            .zip(errors)
            .zip(orders)
            .map(|((resolution, error), order)| ConvergenceRow {
                resolution,
                error,
                order,
            })
            .collect();
        Self {
            problem: problem.to_string(),
            variant,
            rows,
            aborted: None,
        }
    }

    pub fn orders(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.order).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }
}

/// Aligned text rendering, 4 decimals.
pub fn render_text(tables: &[ConvergenceTable], resolution_label: &str) -> String {
    let mut s = String::new();
    for t in tables {
        let _ = writeln!(s, "{} / {}", t.problem, t.variant);
        let _ = writeln!(s, "{:>12}  {:>12}  {:>8}", resolution_label, "error", "order");
        for r in &t.rows {
            let order = r.order.map_or_else(|| "-".to_string(), |o| format_fixed(o, Some(4)));
            let _ = writeln!(
                s,
                "{:>12}  {:>12}  {:>8}",
                r.resolution.render(Some(4)),
                format_sci(r.error, Some(4)),
                order
            );
        }
        if let Some((res, msg)) = &t.aborted {
            let _ = writeln!(s, "{:>12}  aborted: {msg}", res.render(Some(4)));
        }
        s.push('\n');
    }
    s
}

pub const CSV_HEADER: &str = "resolution,error,order,variant,problem";

/// CSV rendering at full precision; an aborted run is a row with error `diverged`.
pub fn write_csv<W: Write>(tables: &[ConvergenceTable], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for t in tables {
        for r in &t.rows {
            let order = r.order.map_or_else(String::new, |o| format_fixed(o, None));
            writeln!(
                w,
                "{},{},{},{},{}",
                r.resolution.render(None),
                format_sci(r.error, None),
                order,
                t.variant,
                t.problem
            )?;
        }
        if let Some((res, _)) = &t.aborted {
            writeln!(w, "{},diverged,,{},{}", res.render(None), t.variant, t.problem)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub problem: Problem,
    pub variants: Vec<Variant>,
    /// Mesh for temporal studies.
    pub m: usize,
    pub n0_list: Vec<usize>,
    /// Meshes for spatial studies.
    pub m_list: Vec<usize>,
    pub ref_n0: usize,
    pub t_final: f64,
    /// `k = cfl * h0` in spatial studies.
    pub cfl: f64,
    /// Reserved; all runs are deterministic.
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            variants: vec![Variant::Standard, Variant::Afc],
            m: 50,
            n0_list: problem.default_n0.to_vec(),
            m_list: vec![10, 20, 40, 80],
            ref_n0: problem.default_ref_n0,
            t_final: problem.t_final,
            cfl: 0.1,
            seed: 0,
            problem,
        }
    }

    fn scheme(&self, variant: Variant, step: StepRule) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(variant, self.problem.flux, self.t_final, step);
        if let Some(c) = self.problem.manufactured {
            cfg.source = Some(c.source);
        }
        cfg
    }
}

/// Worker pool sized by `AFC_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("AFC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("AFC_THREADS must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Internal(e.to_string()))
}

/// Runs a single configuration from the problem's initial data.
pub fn run_single(mesh: &Mesh, problem: &Problem, cfg: SchemeConfig) -> Result<(NodalField, StepReport)> {
    let enforce = problem.manufactured.is_some() || problem.initial.enforce_bc;
    let u0 = interpolate(mesh, problem.initial_fn(), enforce)?;
    Solver::new(mesh, cfg)?.integrate(&u0)
}

fn split_divergence<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ Error::Divergence { .. }) | Err(e @ Error::CgNotConverged { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Errors at `t_final` against a reference computed with `ref_n0` steps on
/// the same mesh and with the same variant, measured as `sqrt(e^T M e)`.
pub fn temporal_convergence(cfg: &StudyConfig) -> Result<Vec<ConvergenceTable>> {
    if cfg.n0_list.is_empty() {
        return Err(Error::invalid("temporal study needs at least one N0"));
    }
    for &n in &cfg.n0_list {
        if n == 0 || n >= cfg.ref_n0 {
            return Err(Error::invalid(format!(
                "reference N0 {} must exceed every study N0 (got {n})",
                cfg.ref_n0
            )));
        }
    }
    if cfg.n0_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("study N0 list must be increasing"));
    }
    let mesh = Mesh::uniform(cfg.m)?;
    let mass = assemble_mass(&mesh);
    let mut jobs = Vec::new();
    for &v in &cfg.variants {
        jobs.push((v, cfg.ref_n0));
        jobs.extend(cfg.n0_list.iter().map(|&n| (v, n)));
    }
    for &(v, n) in &jobs {
        cfg.scheme(v, StepRule::Steps(n)).validate()?;
    }
    let pool = thread_pool()?;
    let results: Vec<Result<std::result::Result<NodalField, String>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, n)| {
                split_divergence(run_single(&mesh, &cfg.problem, cfg.scheme(v, StepRule::Steps(n))).map(|r| r.0))
            })
            .collect()
    });
    let mut results = results.into_iter();
    let mut tables = Vec::new();
    for &v in &cfg.variants {
        let reference = results.next().expect("job count")?;
        let runs: Vec<_> = results.by_ref().take(cfg.n0_list.len()).collect::<Result<_>>()?;
        let reference = match reference {
            Ok(r) => r,
            Err(msg) => {
                let mut t = ConvergenceTable::build(cfg.problem.name, v, vec![], vec![]);
                t.aborted = Some((Resolution::Steps(cfg.ref_n0), msg));
                tables.push(t);
                continue;
            }
        };
        let mut res = Vec::new();
        let mut errs = Vec::new();
        let mut aborted = None;
        for (&n, run) in cfg.n0_list.iter().zip(runs) {
            match run {
                Ok(u) => {
                    let e: Vec<f64> = u.values.iter().zip(&reference.values).map(|(a, b)| a - b).collect();
                    res.push(Resolution::Steps(n));
                    errs.push(mass_norm(&mass, &e));
                }
                Err(msg) => {
                    aborted = Some((Resolution::Steps(n), msg));
                    break;
                }
            }
        }
        let mut t = ConvergenceTable::build(cfg.problem.name, v, res, errs);
        t.aborted = aborted;
        tables.push(t);
    }
    Ok(tables)
}

/// Errors against the exact solution with `k = cfl * h0`, integrated with the
/// degree-4 rule, over the meshes in `m_list`.
pub fn spatial_convergence(cfg: &StudyConfig) -> Result<Vec<ConvergenceTable>> {
    let case = cfg
        .problem
        .manufactured
        .ok_or_else(|| Error::invalid(format!("problem '{}' has no exact solution", cfg.problem.name)))?;
    if cfg.m_list.is_empty() || cfg.m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("spatial study needs an increasing, nonempty M list"));
    }
    let meshes: Vec<Mesh> = cfg.m_list.iter().map(|&m| Mesh::uniform(m)).collect::<Result<_>>()?;
    let step = StepRule::Cfl {
        factor: cfg.cfl,
        power: 1.0,
    };
    let mut jobs = Vec::new();
    for &v in &cfg.variants {
        cfg.scheme(v, step).validate()?;
        jobs.extend((0..meshes.len()).map(|i| (v, i)));
    }
    let rule = QuadratureRule::six_point();
    let pool = thread_pool()?;
    let results: Vec<Result<std::result::Result<f64, String>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, i)| {
                let mesh = &meshes[i];
                split_divergence(
                    run_single(mesh, &cfg.problem, cfg.scheme(v, step))
                        .map(|(u, _)| l2_error(mesh, &u, case.exact, u.time, &rule)),
                )
            })
            .collect()
    });
    let mut results = results.into_iter();
    let mut tables = Vec::new();
    for &v in &cfg.variants {
        let mut res = Vec::new();
        let mut errs = Vec::new();
        let mut aborted = None;
        for mesh in &meshes {
            match results.next().expect("job count")? {
                Ok(e) if aborted.is_none() => {
                    res.push(Resolution::MeshWidth(mesh.h0));
                    errs.push(e);
                }
                Ok(_) => {}
                Err(msg) => {
                    if aborted.is_none() {
                        aborted = Some((Resolution::MeshWidth(mesh.h0), msg));
                    }
                }
            }
        }
        let mut t = ConvergenceTable::build(cfg.problem.name, v, res, errs);
        t.aborted = aborted;
        tables.push(t);
    }
    Ok(tables)
}

/// Value of the P1 function with nodal `values` at `(x, y)` on a uniform mesh.
pub fn eval_uniform(mesh: &Mesh, values: &[f64], x: f64, y: f64) -> Result<f64> {
    if mesh.m == 0 {
        return Err(Error::invalid("point evaluation needs a uniform mesh"));
    }
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::invalid(format!("point ({x}, {y}) outside the unit square")));
    }
    let m = mesh.m;
    let (sx, sy) = (x / mesh.h0, y / mesh.h0);
    let p = (sx.floor() as usize).min(m - 1);
    let q = (sy.floor() as usize).min(m - 1);
    let (s, r) = (sx - p as f64, sy - q as f64);
    let a = values[mesh.grid_index(p, q)];
    let b = values[mesh.grid_index(p + 1, q)];
    let c = values[mesh.grid_index(p + 1, q + 1)];
    let d = values[mesh.grid_index(p, q + 1)];
    Ok(if r <= s {
        a + s * (b - a) + r * (c - b)
    } else {
        a + r * (d - a) + s * (c - d)
    })
}

#[derive(Clone, Debug)]
pub struct DmpConfig {
    pub problem: Problem,
    pub m: usize,
    pub steps: usize,
    pub variants: Vec<Variant>,
    pub sample_y: f64,
    pub sample_x: Vec<f64>,
}

impl DmpConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            m: 10,
            steps: 10,
            variants: vec![Variant::Standard, Variant::Afc],
            sample_y: 0.1,
            sample_x: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }

    /// `k = h^1.01 / 10` with `h = sqrt(2) h0` the longest edge.
    pub fn step_size(&self) -> f64 {
        (std::f64::consts::SQRT_2 / self.m as f64).powf(1.01) / 10.0
    }
}

#[derive(Clone, Debug)]
pub struct DmpColumn {
    pub variant: Variant,
    pub values: Vec<f64>,
    pub report: StepReport,
}

impl DmpColumn {
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < 0.0).count()
    }
}

#[derive(Clone, Debug)]
pub struct DmpTable {
    pub problem: String,
    pub k: f64,
    pub steps: usize,
    pub sample_y: f64,
    pub sample_x: Vec<f64>,
    pub columns: Vec<DmpColumn>,
}

/// Samples the final states of each variant along `y = sample_y`.
pub fn dmp_table(cfg: &DmpConfig) -> Result<DmpTable> {
    if cfg.steps == 0 {
        return Err(Error::invalid("dmp table needs at least one step"));
    }
    let mesh = Mesh::uniform(cfg.m)?;
    let k = cfg.step_size();
    let mut columns = Vec::new();
    for &v in &cfg.variants {
        let mut sc = SchemeConfig::new(v, cfg.problem.flux, k * cfg.steps as f64, StepRule::Steps(cfg.steps));
        if let Some(c) = cfg.problem.manufactured {
            sc.source = Some(c.source);
        }
        let (u, report) = run_single(&mesh, &cfg.problem, sc)?;
        let values = cfg
            .sample_x
            .iter()
            .map(|&x| eval_uniform(&mesh, &u.values, x, cfg.sample_y))
            .collect::<Result<_>>()?;
        columns.push(DmpColumn {
            variant: v,
            values,
            report,
        });
    }
    Ok(DmpTable {
        problem: cfg.problem.name.to_string(),
        k,
        steps: cfg.steps,
        sample_y: cfg.sample_y,
        sample_x: cfg.sample_x.clone(),
        columns,
    })
}

impl DmpTable {
    fn render(&self, digits: Option<usize>, sep: &str, width: usize) -> String {
        let mut s = String::new();
        let mut header = vec![format!("{:>w$}", "x", w = width.min(6))];
        header.extend(self.columns.iter().map(|c| format!("{:>width$}", c.variant.name())));
        let _ = writeln!(s, "{}", header.join(sep));
        for (i, &x) in self.sample_x.iter().enumerate() {
            let mut line = vec![format!("{:>w$}", format_fixed(x, digits.map(|_| 2)), w = width.min(6))];
            for c in &self.columns {
                let v = c.values[i];
                let mark = if digits.is_some() && v < 0.0 { "*" } else { "" };
                line.push(format!("{:>width$}", format!("{}{mark}", format_sci(v, digits))));
            }
            let _ = writeln!(s, "{}", line.join(sep));
        }
        s
    }

    /// Aligned text; negative entries are marked with `*`.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{}  y={}  k={}  steps={}\n",
            self.problem,
            self.sample_y,
            format_sci(self.k, Some(4)),
            self.steps
        );
        s.push_str(&self.render(Some(4), "  ", 12));
        for c in &self.columns {
            let _ = writeln!(
                s,
                "{}: {} negative samples, state range [{}, {}], maximum principle {}",
                c.variant,
                c.negative_count(),
                format_sci(c.report.overall_min(), Some(4)),
                format_sci(c.report.overall_max(), Some(4)),
                if c.report.dmp_satisfied() { "held" } else { "violated" }
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["x".to_string()];
        header.extend(self.columns.iter().map(|c| c.variant.to_string()));
        writeln!(w, "{}", header.join(","))?;
        for (i, &x) in self.sample_x.iter().enumerate() {
            let mut line = vec![format!("{x}")];
            line.extend(self.columns.iter().map(|c| format_sci(c.values[i], None)));
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Flat `key = value` configuration with `#` comments. Keys are normalized to
/// lowercase with `_` replaced by `-`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::invalid(format!("config line {}: empty key", lineno + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}
