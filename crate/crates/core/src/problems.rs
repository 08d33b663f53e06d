//! Flux fields, initial data and manufactured solutions used by the
//! experiments. Catalog names double as CLI problem identifiers.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type VectorField = fn(f64, f64, f64) -> [f64; 2];
pub type ScalarField = fn(f64, f64, f64) -> f64;

/// Flux `f(u) = beta(x, y, t) u^(exponent + 1)`.
#[derive(Clone, Copy)]
pub struct FluxField {
    pub name: &'static str,
    /// 0 for linear advection, 1 for Burgers-type fluxes.
    pub exponent: u32,
    pub beta: VectorField,
    pub divergence_free: bool,
}

impl fmt::Debug for FluxField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxField")
            .field("name", &self.name)
            .field("exponent", &self.exponent)
            .field("divergence_free", &self.divergence_free)
            .finish()
    }
}

impl FluxField {
    /// Nonlinear fluxes are only covered by the error theory when `div beta = 0`.
    pub fn theory_covered(&self) -> bool {
        self.exponent == 0 || self.divergence_free
    }
}

pub const FLUX_NAMES: &[&str] = &[
    "advect-13",
    "advect-x2-2y",
    "advect-sin-t",
    "advect-24",
    "burgers",
    "burgers-xy",
    "burgers-rot-t",
];

pub fn builtin_flux(name: &str) -> Result<FluxField> {
    let f = match name {
        "advect-13" => FluxField {
            name: "advect-13",
            exponent: 0,
            beta: |_, _, _| [1.0, 3.0],
            divergence_free: true,
        },
        "advect-x2-2y" => FluxField {
            name: "advect-x2-2y",
            exponent: 0,
            beta: |x, y, _| [x * x, 2.0 * y],
            divergence_free: false,
        },
        "advect-sin-t" => FluxField {
            name: "advect-sin-t",
            exponent: 0,
            beta: |x, y, t| [(-t).exp() * (PI * x).sin(), (-t).exp() * (PI * y).sin()],
            divergence_free: false,
        },
        "advect-24" => FluxField {
            name: "advect-24",
            exponent: 0,
            beta: |_, _, _| [2.0, 4.0],
            divergence_free: true,
        },
        "burgers" => FluxField {
            name: "burgers",
            exponent: 1,
            beta: |_, _, _| [0.5, 0.5],
            divergence_free: true,
        },
        "burgers-xy" => FluxField {
            name: "burgers-xy",
            exponent: 1,
            beta: |x, y, _| [x, -y],
            divergence_free: true,
        },
        "burgers-rot-t" => FluxField {
            name: "burgers-rot-t",
            exponent: 1,
            beta: |x, y, t| [(-t).exp() * (PI * y).sin(), (-t).exp() * (PI * x).sin()],
            divergence_free: true,
        },
        _ => return Err(unknown("flux", name, FLUX_NAMES)),
    };
    Ok(f)
}

#[derive(Clone, Copy)]
pub struct InitialCondition {
    pub name: &'static str,
    pub func: fn(f64, f64) -> f64,
    /// Zero the boundary coefficients after interpolation (formula is nonzero on the boundary).
    pub enforce_bc: bool,
    pub nonnegative: bool,
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialCondition")
            .field("name", &self.name)
            .field("enforce_bc", &self.enforce_bc)
            .finish()
    }
}

pub const INITIAL_NAMES: &[&str] = &["poly", "sine", "gauss", "gauss-shifted"];

pub fn builtin_initial(name: &str) -> Result<InitialCondition> {
    let ic = match name {
        "poly" => InitialCondition {
            name: "poly",
            func: |x, y| x * (1.0 - x) * y * (1.0 - y),
            enforce_bc: false,
            nonnegative: true,
        },
        "sine" => InitialCondition {
            name: "sine",
            func: |x, y| (PI * x).sin() * (PI * y).sin(),
            enforce_bc: false,
            nonnegative: true,
        },
        "gauss" => InitialCondition {
            name: "gauss",
            func: |x, y| (-100.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp(),
            enforce_bc: true,
            nonnegative: true,
        },
        "gauss-shifted" => InitialCondition {
            name: "gauss-shifted",
            func: |x, y| 10.0 * (-10.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp() + 5.0,
            enforce_bc: true,
            nonnegative: true,
        },
        _ => return Err(unknown("initial condition", name, INITIAL_NAMES)),
    };
    Ok(ic)
}

/// Prescribed solution with the source term that makes it exact.
#[derive(Clone, Copy)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub exact: ScalarField,
    pub source: ScalarField,
    pub flux: FluxField,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("flux", &self.flux)
            .finish()
    }
}

pub const MANUFACTURED_NAMES: &[&str] = &["trig-advect", "poly-advect", "trig-burgers", "poly-burgers"];

fn trig(x: f64, y: f64, t: f64) -> f64 {
    (-t).exp() * (PI * x).sin() * (PI * y).sin()
}

fn trig_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
    let e = (-t).exp() * PI;
    [e * (PI * x).cos() * (PI * y).sin(), e * (PI * x).sin() * (PI * y).cos()]
}

fn poly(x: f64, y: f64, t: f64) -> f64 {
    (-t).exp() * x * (1.0 - x) * y * (1.0 - y)
}

fn poly_grad(x: f64, y: f64, t: f64) -> [f64; 2] {
    let e = (-t).exp();
    [e * (1.0 - 2.0 * x) * y * (1.0 - y), e * x * (1.0 - x) * (1.0 - 2.0 * y)]
}

/// Sources: `u_t + beta . grad u` for beta = (2, 4); `u_t + 2 u (beta . grad u)`
/// for beta = (1/2, 1/2). The Burgers form uses `div(beta u^2) = 2 u beta . grad u`,
/// valid because beta is divergence free. Both solutions satisfy `u_t = -u`.
pub fn manufactured_case(name: &str) -> Result<ManufacturedCase> {
    let case = match name {
        "trig-advect" => ManufacturedCase {
            name: "trig-advect",
            exact: trig,
            source: |x, y, t| {
                let g = trig_grad(x, y, t);
                -trig(x, y, t) + 2.0 * g[0] + 4.0 * g[1]
            },
            flux: builtin_flux("advect-24")?,
        },
        "poly-advect" => ManufacturedCase {
            name: "poly-advect",
            exact: poly,
            source: |x, y, t| {
                let g = poly_grad(x, y, t);
                -poly(x, y, t) + 2.0 * g[0] + 4.0 * g[1]
            },
            flux: builtin_flux("advect-24")?,
        },
        "trig-burgers" => ManufacturedCase {
            name: "trig-burgers",
            exact: trig,
            source: |x, y, t| {
                let u = trig(x, y, t);
                let g = trig_grad(x, y, t);
                -u + u * (g[0] + g[1])
            },
            flux: builtin_flux("burgers")?,
        },
        "poly-burgers" => ManufacturedCase {
            name: "poly-burgers",
            exact: poly,
            source: |x, y, t| {
                let u = poly(x, y, t);
                let g = poly_grad(x, y, t);
                -u + u * (g[0] + g[1])
            },
            flux: builtin_flux("burgers")?,
        },
        _ => return Err(unknown("manufactured case", name, MANUFACTURED_NAMES)),
    };
    Ok(case)
}

/// A runnable problem: flux, initial data, default final time and study
/// resolutions, and optionally an exact solution with its source.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: &'static str,
    pub flux: FluxField,
    pub initial: InitialCondition,
    pub t_final: f64,
    pub manufactured: Option<ManufacturedCase>,
    pub default_n0: &'static [usize],
    pub default_ref_n0: usize,
}

impl Problem {
    pub fn initial_fn(&self) -> Box<dyn Fn(f64, f64) -> f64 + Send + Sync> {
        match self.manufactured {
            Some(c) => Box::new(move |x, y| (c.exact)(x, y, 0.0)),
            None => Box::new(self.initial.func),
        }
    }
}

const ADVECT_N0: &[usize] = &[100, 200, 400, 800, 1600, 3200];
const SHORT_N0: &[usize] = &[10, 20, 40, 80, 160, 320];
const SPATIAL_N0: &[usize] = &[];

pub const PROBLEM_NAMES: &[&str] = &[
    "advect-13",
    "advect-x2-2y",
    "advect-sin-t",
    "advect-sin-t-gauss",
    "burgers",
    "burgers-poly",
    "burgers-gauss",
    "burgers-xy",
    "burgers-rot-t",
    "dmp-gauss",
    "trig-advect",
    "poly-advect",
    "trig-burgers",
    "poly-burgers",
];

pub fn builtin_problem(name: &str) -> Result<Problem> {
    let p = |name, flux: &str, initial: &str, t_final, default_n0, default_ref_n0| -> Result<Problem> {
        Ok(Problem {
            name,
            flux: builtin_flux(flux)?,
            initial: builtin_initial(initial)?,
            t_final,
            manufactured: None,
            default_n0,
            default_ref_n0,
        })
    };
    let m = |name: &str| -> Result<Problem> {
        let case = manufactured_case(name)?;
        Ok(Problem {
            name: case.name,
            flux: case.flux,
            initial: builtin_initial(if name.starts_with("trig") { "sine" } else { "poly" })?,
            t_final: 0.01,
            manufactured: Some(case),
            default_n0: SPATIAL_N0,
            default_ref_n0: 0,
        })
    };
    match name {
        "advect-13" => p("advect-13", "advect-13", "poly", 0.1, ADVECT_N0, 10_000),
        "advect-x2-2y" => p("advect-x2-2y", "advect-x2-2y", "sine", 0.1, ADVECT_N0, 10_000),
        "advect-sin-t" => p("advect-sin-t", "advect-sin-t", "sine", 0.1, SHORT_N0, 2000),
        "advect-sin-t-gauss" => p(
            "advect-sin-t-gauss",
            "advect-sin-t",
            "gauss-shifted",
            0.1,
            SHORT_N0,
            2000,
        ),
        "burgers" => p("burgers", "burgers", "sine", 0.01, SHORT_N0, 2000),
        "burgers-poly" => p("burgers-poly", "burgers", "poly", 0.01, SHORT_N0, 2000),
        "burgers-gauss" => p("burgers-gauss", "burgers", "gauss-shifted", 0.01, SHORT_N0, 2000),
        "burgers-xy" => p("burgers-xy", "burgers-xy", "sine", 0.01, SHORT_N0, 2000),
        "burgers-rot-t" => p("burgers-rot-t", "burgers-rot-t", "gauss-shifted", 0.01, SHORT_N0, 2000),
        "dmp-gauss" => p("dmp-gauss", "advect-13", "gauss", 0.1, ADVECT_N0, 10_000),
        "trig-advect" | "poly-advect" | "trig-burgers" | "poly-burgers" => m(name),
        _ => Err(unknown("problem", name, PROBLEM_NAMES)),
    }
}

fn unknown(kind: &str, name: &str, catalog: &[&str]) -> Error {
    Error::invalid(format!("unknown {kind} '{name}'; available: {}", catalog.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FD_STEP: f64 = 1e-5;

    fn fd_divergence(beta: VectorField, x: f64, y: f64, t: f64) -> f64 {
        let h = FD_STEP;
        (beta(x + h, y, t)[0] - beta(x - h, y, t)[0]) / (2.0 * h)
            + (beta(x, y + h, t)[1] - beta(x, y - h, t)[1]) / (2.0 * h)
    }

    /// `u_t + div(beta u^(l+1)) - f` by central differences.
    fn fd_residual(case: &ManufacturedCase, x: f64, y: f64, t: f64) -> f64 {
        let h = FD_STEP;
        let u = case.exact;
        let l = case.flux.exponent as i32;
        let flux = |x: f64, y: f64| {
            let b = (case.flux.beta)(x, y, t);
            let p = u(x, y, t).powi(l + 1);
            [b[0] * p, b[1] * p]
        };
        let ut = (u(x, y, t + h) - u(x, y, t - h)) / (2.0 * h);
        let div =
            (flux(x + h, y)[0] - flux(x - h, y)[0]) / (2.0 * h) + (flux(x, y + h)[1] - flux(x, y - h)[1]) / (2.0 * h);
        ut + div - (case.source)(x, y, t)
    }

    #[test]
    fn catalog_fluxes() {
        let f = builtin_flux("advect-13").unwrap();
        assert_eq!(f.exponent, 0);
        assert_eq!((f.beta)(0.3, 0.7, 0.0), [1.0, 3.0]);
        assert!(f.divergence_free);
        let f = builtin_flux("burgers-xy").unwrap();
        assert_eq!(f.exponent, 1);
        assert_eq!((f.beta)(0.25, 0.5, 0.0), [0.25, -0.5]);
        assert!(f.divergence_free);
        let f = builtin_flux("burgers-rot-t").unwrap();
        assert!(f.divergence_free && f.theory_covered());
        assert!(matches!(builtin_flux("nope"), Err(Error::InvalidArgument(m)) if m.contains("advect-13")));
    }

    #[test]
    fn divergence_flags_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in FLUX_NAMES {
            let f = builtin_flux(name).unwrap();
            let mut max_div: f64 = 0.0;
            for _ in 0..100 {
                let (x, y, t) = (
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                );
                max_div = max_div.max(fd_divergence(f.beta, x, y, t).abs());
            }
            if f.divergence_free {
                assert!(max_div <= 1e-6, "{name}: {max_div}");
            } else {
                assert!(max_div > 1e-3, "{name} claims nonzero divergence");
            }
        }
    }

    #[test]
    fn catalog_initials() {
        assert_eq!((builtin_initial("poly").unwrap().func)(0.5, 0.5), 0.0625);
        assert_eq!((builtin_initial("sine").unwrap().func)(0.5, 0.5), 1.0);
        assert_eq!((builtin_initial("gauss-shifted").unwrap().func)(0.5, 0.5), 15.0);
        assert!(builtin_initial("gauss").unwrap().enforce_bc);
        assert!(builtin_initial("nope").is_err());
    }

    #[test]
    fn nonnegative_initials_are_nonnegative_on_meshes() {
        for name in INITIAL_NAMES {
            let ic = builtin_initial(name).unwrap();
            assert!(ic.nonnegative);
            for m in [2usize, 7, 10, 33, 80] {
                for q in 0..=m {
                    for p in 0..=m {
                        let v = (ic.func)(p as f64 / m as f64, q as f64 / m as f64);
                        // sin(pi) rounds to ~1.2e-16, either sign
                        assert!(v >= -1e-15, "{name} at ({p},{q}) of M={m}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn poly_advect_source_at_centre() {
        let case = manufactured_case("poly-advect").unwrap();
        assert!(((case.source)(0.5, 0.5, 0.0) + 1.0 / 16.0).abs() < 1e-15);
        assert!(fd_residual(&case, 0.5, 0.5, 0.0).abs() < 1e-6);
    }

    #[test]
    fn manufactured_cases_vanish_on_boundary_and_solve_the_pde() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for name in MANUFACTURED_NAMES {
            let case = manufactured_case(name).unwrap();
            for _ in 0..100 {
                let (x, y, t) = (
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                );
                let r = fd_residual(&case, x, y, t);
                assert!(r.abs() <= 1e-6, "{name} residual {r} at ({x},{y},{t})");
                for (bx, by) in [(0.0, y), (1.0, y), (x, 0.0), (x, 1.0)] {
                    assert!((case.exact)(bx, by, t).abs() < 1e-15);
                }
            }
        }
        assert!(manufactured_case("nope").is_err());
    }

    #[test]
    fn problem_catalog_resolves() {
        for name in PROBLEM_NAMES {
            let p = builtin_problem(name).unwrap();
            assert_eq!(p.name, *name);
            assert!(p.t_final > 0.0);
        }
        assert!(builtin_problem("nope").is_err());
    }
}
