use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LatticeModel;
use crate::conditioning::{conditional_cubic, ConstrainedPrior, GaussianMoments};
use crate::error::{invalid, Error, Result};
use crate::ode::{integrate, OdeProblem, Trajectory};
use crate::policy::NumericalPolicy;

/// One monomial `coeff · Π_i x_i^{powers[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub powers: Vec<u8>,
}

/// Polynomial of degree at most three in the `2N` collective variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicPolynomial {
    pub names: Vec<String>,
    pub terms: Vec<Term>,
}

impl CubicPolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.powers
                    .iter()
                    .zip(x)
                    .fold(t.coeff, |acc, (&p, &v)| acc * v.powi(i32::from(p)))
            })
            .sum()
    }

    /// Coefficient of the monomial with the given powers (zero if absent).
    pub fn coefficient(&self, powers: &[u8]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.powers == powers)
            .map(|t| t.coeff)
            .sum()
    }

    /// Coefficient looked up by variable names, e.g. `["Vq1", "Vq1", "Vq2"]`.
    pub fn coefficient_of(&self, vars: &[&str]) -> Option<f64> {
        let mut powers = vec![0u8; self.names.len()];
        for v in vars {
            let i = self.names.iter().position(|n| n == v)?;
            powers[i] += 1;
        }
        Some(self.coefficient(&powers))
    }

    fn monomial_name(&self, powers: &[u8]) -> String {
        powers
            .iter()
            .zip(&self.names)
            .filter(|(&p, _)| p > 0)
            .map(|(&p, n)| if p == 1 { n.clone() } else { format!("{n}^{p}") })
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl std::fmt::Display for CubicPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let sign = if t.coeff < 0.0 { "-" } else { "+" };
            if i == 0 {
                write!(f, "{}{:.6}*{}", if t.coeff < 0.0 { "-" } else { "" }, t.coeff.abs(), self.monomial_name(&t.powers))?;
            } else {
                write!(f, " {sign} {:.6}*{}", t.coeff.abs(), self.monomial_name(&t.powers))?;
            }
        }
        Ok(())
    }
}

/// Closed system for the mean collective variables `V = (V^p, V^q)`, built
/// from the Gaussianised prior. Conditional means are linear and conditional
/// variances constant in `V`, so each right-hand side is an exact cubic
/// polynomial whose coefficients are computed once here.
#[derive(Debug, Clone)]
pub struct EffectiveSystem {
    model: LatticeModel,
    base: Arc<ConstrainedPrior>,
    polys: Vec<CubicPolynomial>,
}

pub fn variable_names(n_kernels: usize) -> Vec<String> {
    (1..=n_kernels)
        .map(|a| format!("Vp{a}"))
        .chain((1..=n_kernels).map(|a| format!("Vq{a}")))
        .collect()
}

impl EffectiveSystem {
    pub fn new(model: &LatticeModel, prior: GaussianMoments, policy: &NumericalPolicy) -> Result<Self> {
        if prior.d() != 2 || prior.n() != model.n() {
            return Err(Error::DimensionMismatch {
                what: "prior size (2 components of n sites)",
                expected: 2 * model.n(),
                found: prior.dim(),
            });
        }
        if prior.mean().components().iter().flatten().any(|&m| m != 0.0) {
            return Err(invalid("the effective lattice system assumes a zero-mean prior"));
        }
        let kernels = model.kernel_set(policy)?;
        let base = ConstrainedPrior::with_policy(prior, kernels, *policy)?;
        let polys = build_polynomials(model, &base);
        Ok(Self {
            model: model.clone(),
            base,
            polys,
        })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn constrained_prior(&self) -> &Arc<ConstrainedPrior> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    /// Right-hand side of the equation for variable `i` (`V^p` first).
    pub fn polynomial(&self, i: usize) -> &CubicPolynomial {
        &self.polys[i]
    }

    pub fn polynomials(&self) -> &[CubicPolynomial] {
        &self.polys
    }

    /// Evaluates the precomputed polynomials.
    pub fn rhs(&self, v: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.polys) {
            *o = p.eval(v);
        }
    }

    /// Evaluates the right-hand side from the conditional moments directly.
    pub fn rhs_direct(&self, v: &[f64]) -> Result<Vec<f64>> {
        let cond = self.base.condition(v)?;
        let n = self.model.n();
        let inv_dx2 = 1.0 / (self.model.dx() * self.model.dx());
        let (a, b) = (self.model.params().quadratic, self.model.params().quartic);
        let mean = cond.mean();
        // Per site: conditional mean of the force in each component.
        let force = |component: usize| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    let jj = j as isize;
                    let lap = mean.get(component, jj - 1) - 2.0 * mean.get(component, jj) + mean.get(component, jj + 1);
                    let cube = conditional_cubic(&cond, j, component);
                    -lap * inv_dx2 + a * mean.get(component, jj) + b * cube
                })
                .collect()
        };
        let fq = force(1);
        let fp = force(0);
        let nk = self.model.n_kernels();
        let mut out = Vec::with_capacity(2 * nk);
        for alpha in 0..nk {
            let g = self.model.kernel_weights(alpha);
            out.push(g.iter().zip(&fq).map(|(w, f)| w * f).sum());
        }
        for alpha in 0..nk {
            let g = self.model.kernel_weights(alpha);
            out.push(-g.iter().zip(&fp).map(|(w, f)| w * f).sum::<f64>());
        }
        Ok(out)
    }

    /// RK4 solution of the effective system from `v0`.
    pub fn integrate(&self, v0: &[f64], t_end: f64, dt: f64, record_every: usize) -> Result<Trajectory> {
        if v0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "effective initial values",
                expected: self.dim(),
                found: v0.len(),
            });
        }
        integrate(&OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| self.rhs(y, dy),
            y0: v0.to_vec(),
            t_end,
            dt,
            record_every,
        })
    }
}

/// Direct evaluation of the effective right-hand side at `V`.
pub fn effective_nonlinear_rhs(
    model: &LatticeModel,
    prior: &GaussianMoments,
    v: &[f64],
    policy: &NumericalPolicy,
) -> Result<Vec<f64>> {
    EffectiveSystem::new(model, prior.clone(), policy)?.rhs_direct(v)
}

fn build_polynomials(model: &LatticeModel, base: &ConstrainedPrior) -> Vec<CubicPolynomial> {
    let n = model.n();
    let nk = model.n_kernels();
    let vars = 2 * nk;
    let inv_dx2 = 1.0 / (model.dx() * model.dx());
    let (a, b) = (model.params().quadratic, model.params().quartic);
    let coeffs: &DMatrix<f64> = base.coefficient_matrix();
    let cov = base.covariance();
    let names = variable_names(nk);

    let component_poly = |component: usize, g: &[f64], sign: f64| -> CubicPolynomial {
        let row = |j: usize| component * n + j;
        let mut terms = Vec::new();
        // Linear part: −Δ/Δx² + a + 3b·var acting on the regression coefficients.
        for gamma in 0..vars {
            let mut acc = 0.0;
            for j in 0..n {
                let (l, r) = (row((j + n - 1) % n), row((j + 1) % n));
                let c = |k: usize| coeffs[(k, gamma)];
                let lap = c(l) - 2.0 * c(row(j)) + c(r);
                let var = cov[(row(j), row(j))];
                acc += g[j] * (-lap * inv_dx2 + (a + 3.0 * b * var) * c(row(j)));
            }
            let mut powers = vec![0u8; vars];
            powers[gamma] = 1;
            terms.push(Term {
                coeff: sign * acc,
                powers,
            });
        }
        // Cubic part: b Σ_j g(j) (Σ_γ c_γ(j) V_γ)³ expanded over multisets.
        for g1 in 0..vars {
            for g2 in g1..vars {
                for g3 in g2..vars {
                    let mult = match (g1 == g2, g2 == g3) {
                        (true, true) => 1.0,
                        (false, false) => 6.0,
                        _ => 3.0,
                    };
                    let sum: f64 = (0..n)
                        .map(|j| g[j] * coeffs[(row(j), g1)] * coeffs[(row(j), g2)] * coeffs[(row(j), g3)])
                        .sum();
                    let mut powers = vec![0u8; vars];
                    powers[g1] += 1;
                    powers[g2] += 1;
                    powers[g3] += 1;
                    terms.push(Term {
                        coeff: sign * b * mult * sum,
                        powers,
                    });
                }
            }
        }
        let scale = terms.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max);
        terms.retain(|t| t.coeff.abs() > 1e-14 * scale);
        CubicPolynomial {
            names: names.clone(),
            terms,
        }
    };

    let mut polys = Vec::with_capacity(vars);
    for alpha in 0..nk {
        polys.push(component_poly(1, model.kernel_weights(alpha), 1.0));
    }
    for alpha in 0..nk {
        polys.push(component_poly(0, model.kernel_weights(alpha), -1.0));
    }
    polys
}
