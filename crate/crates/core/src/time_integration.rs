//! Semi-discrete right-hand sides and the SSP-RK2 time stepper.
//!
//! With `L(a, t)` the unscaled spatial operator, one step from `a` reads
//!
//! ```text
//! a1    = a + k Mass^-1 L(a, t)
//! a_new = a/2 + a1/2 + (k/2) Mass^-1 L(a1, t + k)
//! ```
//!
//! where `Mass` is the lumped mass for the stabilized variants and the
//! consistent mass (inverted by CG) for the standard Galerkin variant. All
//! state-dependent operators (`T`, `D`, limiter factors) are rebuilt from the
//! stage state they act on.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::fem::{cg_solve, lump_mass, FemSpace, NodalField, SparseMatrix};
use crate::mesh::Mesh;
use crate::problems::{FluxField, ScalarField};
use crate::stabilization::{
    afc_correction_into, antidiffusive_fluxes_into, artificial_diffusion_into, correction_factors_into,
    DiffusionOperator, FluxSet, LimiterFactors,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Consistent mass, plain Galerkin convection.
    Standard,
    /// Lumped mass plus full artificial diffusion.
    LowOrder,
    /// Low-order operator plus limited antidiffusion.
    Afc,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Standard, Variant::LowOrder, Variant::Afc];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::LowOrder => "low-order",
            Variant::Afc => "afc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" | "std" | "galerkin" => Ok(Variant::Standard),
            "low-order" | "low_order" | "loworder" | "low" => Ok(Variant::LowOrder),
            "afc" => Ok(Variant::Afc),
            other => Err(Error::invalid(format!(
                "unknown scheme '{other}' (standard, low-order, afc)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// Uniform partition into `n0` steps.
    Steps(usize),
    /// `k <= factor * h0^power`; the number of steps is rounded up so the
    /// partition stays uniform.
    Cfl { factor: f64, power: f64 },
}

#[derive(Clone, Debug, Default)]
pub struct LimiterOptions {
    /// Per-node multipliers of `q_i`; 1 everywhere when absent.
    pub gamma: Option<Vec<f64>>,
    /// Skip limiting and restore every antidiffusive flux (`a_ij = 1`).
    pub unlimited: bool,
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub flux: FluxField,
    pub source: Option<ScalarField>,
    pub t_final: f64,
    pub step: StepRule,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub limiter: LimiterOptions,
}

impl SchemeConfig {
    pub fn new(variant: Variant, flux: FluxField, t_final: f64, step: StepRule) -> Self {
        Self {
            variant,
            flux,
            source: None,
            t_final,
            step,
            cg_tol: 1e-12,
            cg_max_iter: 1000,
            limiter: LimiterOptions::default(),
        }
    }

    pub fn with_source(mut self, source: ScalarField) -> Self {
        self.source = Some(source);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        match self.step {
            StepRule::Steps(0) => return Err(Error::invalid("N0 must be at least 1")),
            StepRule::Cfl { factor, power } if !(factor > 0.0) || !power.is_finite() => {
                return Err(Error::invalid(format!("bad CFL rule factor={factor} power={power}")))
            }
            _ => {}
        }
        if self.flux.exponent > 1 {
            return Err(Error::invalid(format!(
                "unsupported flux exponent {}",
                self.flux.exponent
            )));
        }
        if self.variant == Variant::Standard && !(self.cg_tol > 0.0 && self.cg_max_iter > 0) {
            return Err(Error::invalid(
                "standard variant needs a positive CG tolerance and iteration cap",
            ));
        }
        Ok(())
    }

    /// Number of steps and step size on `mesh`.
    pub fn time_step(&self, mesh: &Mesh) -> (usize, f64) {
        let n0 = match self.step {
            StepRule::Steps(n) => n,
            StepRule::Cfl { factor, power } => {
                let kmax = factor * mesh.h0.powf(power);
                ((self.t_final / kmax) * (1.0 - 1e-12)).ceil().max(1.0) as usize
            }
        };
        (n0, self.t_final / n0 as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepExtrema {
    pub step: usize,
    pub stage_min: f64,
    pub stage_max: f64,
    pub min: f64,
    pub max: f64,
}

/// Extrema of every intermediate and final state against `G = [min a0, max a0]`.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub bounds: (f64, f64),
    pub slack: f64,
    pub steps: Vec<StepExtrema>,
    /// Steps whose stage or final state left `G` by more than `slack`.
    pub violations: Vec<usize>,
    pub n0: usize,
    pub k: f64,
}

impl StepReport {
    pub fn dmp_satisfied(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn overall_min(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.min.min(s.stage_min))
            .fold(self.bounds.0, f64::min)
    }

    pub fn overall_max(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.max.max(s.stage_max))
            .fold(self.bounds.1, f64::max)
    }
}

/// Absolute slack allowed outside `G` when monitoring the discrete maximum principle.
pub const DMP_SLACK: f64 = 1e-12;

pub struct Solver<'a> {
    space: FemSpace<'a>,
    cfg: SchemeConfig,
    mass: SparseMatrix,
    lumped: Vec<f64>,
    conv: SparseMatrix,
    diffusion: DiffusionOperator,
    fluxes: FluxSet,
    limiter: LimiterFactors,
    rbar: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(mesh: &'a Mesh, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        if !cfg.flux.theory_covered() {
            warn!(
                "flux '{}' is nonlinear with div(beta) != 0; running outside the covered setting",
                cfg.flux.name
            );
        }
        if let Some(g) = &cfg.limiter.gamma {
            if g.len() != mesh.num_nodes() {
                return Err(Error::invalid("gamma must have one entry per node"));
            }
        }
        let space = FemSpace::new(mesh);
        let mass = space.assemble_mass();
        let lumped = lump_mass(&mass)?;
        let pattern = space.pattern().clone();
        Ok(Self {
            conv: pattern.zeros_like(),
            diffusion: DiffusionOperator {
                matrix: pattern.zeros_like(),
            },
            fluxes: FluxSet {
                matrix: pattern.zeros_like(),
            },
            limiter: LimiterFactors::new(&pattern),
            rbar: vec![0.0; mesh.num_nodes()],
            space,
            cfg,
            mass,
            lumped,
        })
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.space.mesh
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Operators from the most recent `spatial_operator` call.
    pub fn last_operators(&self) -> (&SparseMatrix, &DiffusionOperator, &FluxSet, &LimiterFactors) {
        (&self.conv, &self.diffusion, &self.fluxes, &self.limiter)
    }

    /// Right-hand side before mass scaling, boundary rows zeroed:
    /// `T a + b` (standard), `(T + D) a + b` (low order),
    /// `(T + D) a + rbar(a) + b` (AFC).
    pub fn spatial_operator(&mut self, alpha: &[f64], t: f64) -> Result<Vec<f64>> {
        let mesh = self.space.mesh;
        let n = mesh.num_nodes();
        if alpha.len() != n {
            return Err(Error::invalid("state length does not match the mesh"));
        }
        let psi = (self.cfg.flux.exponent == 1).then_some(alpha);
        self.space
            .assemble_convection_into(&mut self.conv, &self.cfg.flux, psi, t)?;
        let mut l = self.conv.mul_vec(alpha);

        if self.cfg.variant != Variant::Standard {
            artificial_diffusion_into(&self.conv, &mut self.diffusion)?;
            let da = self.diffusion.matrix.mul_vec(alpha);
            l.iter_mut().zip(&da).for_each(|(a, b)| *a += b);
        }
        if self.cfg.variant == Variant::Afc {
            antidiffusive_fluxes_into(&self.diffusion, alpha, &mut self.fluxes);
            if self.cfg.limiter.unlimited {
                for i in 0..n {
                    for k in self.limiter.factors.row_range(i) {
                        self.limiter.factors.values[k] = if self.limiter.factors.col(k) == i { 0.0 } else { 1.0 };
                    }
                }
            } else {
                correction_factors_into(
                    mesh,
                    &self.diffusion,
                    &self.fluxes,
                    alpha,
                    self.cfg.limiter.gamma.as_deref(),
                    &mut self.limiter,
                );
            }
            afc_correction_into(&self.limiter, &self.fluxes, &mut self.rbar);
            l.iter_mut().zip(&self.rbar).for_each(|(a, b)| *a += b);
        }
        if let Some(f) = self.cfg.source {
            match self.cfg.variant {
                Variant::Standard => {
                    let b = self.space.consistent_load(&self.mass, |x, y| f(x, y, t));
                    l.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                }
                _ => {
                    for (i, z) in mesh.nodes.iter().enumerate() {
                        l[i] += self.lumped[i] * f(z[0], z[1], t);
                    }
                }
            }
        }
        for &i in &mesh.boundary_ids {
            l[i] = 0.0;
        }
        Ok(l)
    }

    /// `Mass^-1 rhs` on the interior nodes.
    fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.cfg.variant {
            Variant::Standard => cg_solve(
                &self.mass,
                rhs,
                &self.space.mesh.is_boundary,
                self.cfg.cg_tol,
                self.cfg.cg_max_iter,
            ),
            _ => Ok(rhs.iter().zip(&self.lumped).map(|(r, m)| r / m).collect()),
        }
    }

    /// Time derivative `Mass^-1 L(a, t)`.
    pub fn rate(&mut self, alpha: &[f64], t: f64) -> Result<Vec<f64>> {
        let l = self.spatial_operator(alpha, t)?;
        self.solve_mass(&l)
    }

    /// `a + k Mass^-1 L(a, t)` with boundary entries re-pinned to zero.
    pub fn forward_euler_stage(&mut self, alpha: &NodalField, k: f64) -> Result<NodalField> {
        if !(k > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {k}")));
        }
        let rate = self.rate(&alpha.values, alpha.time)?;
        let mut out = NodalField::new(
            alpha.values.iter().zip(&rate).map(|(a, r)| a + k * r).collect(),
            alpha.time + k,
        );
        out.pin_boundary(self.space.mesh);
        Ok(out)
    }

    /// One SSP-RK2 step; returns the stage state and the new state.
    pub fn ssp_rk2_stages(&mut self, alpha: &NodalField, k: f64) -> Result<(NodalField, NodalField)> {
        let stage = self.forward_euler_stage(alpha, k)?;
        let rate = self.rate(&stage.values, alpha.time + k)?;
        let mut out = NodalField::new(
            alpha
                .values
                .iter()
                .zip(&stage.values)
                .zip(&rate)
                .map(|((a, s), r)| 0.5 * a + 0.5 * s + 0.5 * k * r)
                .collect(),
            alpha.time + k,
        );
        out.pin_boundary(self.space.mesh);
        Ok((stage, out))
    }

    pub fn ssp_rk2_step(&mut self, alpha: &NodalField, k: f64) -> Result<NodalField> {
        Ok(self.ssp_rk2_stages(alpha, k)?.1)
    }

    pub fn integrate(&mut self, u0: &NodalField) -> Result<(NodalField, StepReport)> {
        self.integrate_with(u0, |_, _| {})
    }

    /// Runs the configured number of steps from `u0` (time taken from
    /// `u0.time`), calling `observer(step, state)` after each step.
    pub fn integrate_with(
        &mut self,
        u0: &NodalField,
        mut observer: impl FnMut(usize, &NodalField),
    ) -> Result<(NodalField, StepReport)> {
        let mesh = self.space.mesh;
        let (n0, k) = self.cfg.time_step(mesh);
        let mut state = u0.clone();
        state.pin_boundary(mesh);
        let bounds = (state.min(), state.max());
        let slack = DMP_SLACK * bounds.0.abs().max(bounds.1.abs()).max(1.0);
        let mut report = StepReport {
            bounds,
            slack,
            steps: Vec::with_capacity(n0),
            violations: Vec::new(),
            n0,
            k,
        };
        let t0 = state.time;
        for step in 1..=n0 {
            let (stage, mut next) = self.ssp_rk2_stages(&state, k)?;
            if !stage.values.iter().chain(&next.values).all(|v| v.is_finite()) {
                return Err(Error::Divergence { step });
            }
            next.time = t0 + step as f64 * k;
            let ex = StepExtrema {
                step,
                stage_min: stage.min(),
                stage_max: stage.max(),
                min: next.min(),
                max: next.max(),
            };
            if ex.stage_min.min(ex.min) < bounds.0 - slack || ex.stage_max.max(ex.max) > bounds.1 + slack {
                report.violations.push(step);
            }
            report.steps.push(ex);
            observer(step, &next);
            state = next;
        }
        Ok((state, report))
    }
}
