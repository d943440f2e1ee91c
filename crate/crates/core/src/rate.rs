//! Per-slot rate control: choose admitted rates `r` minimizing
//! `Σ_n (w_n·r_n − c_n·log₂(1+r_n))` subject to `Σ r_n ≤ cap`, `r ≥ 0`,
//! with `w_n = Q_n·T₀` (backlog pressure) and `c_n = V·χ_n` (utility pull).
//!
//! When the cap is slack at the per-device optima the problem separates and
//! the closed-form optimum is returned directly. Otherwise the active-cap
//! problem is solved as a two-block ADMM splitting
//!
//! ```text
//! minimize F(x) + G(z)   s.t.   1ᵀx + 1ᵀz = cap
//! ```
//!
//! with scaled dual `μ`, penalty `ρ`, and the stopping rule
//! `‖R_p‖ ≤ ε_pri ∧ ‖R_d‖ ≤ ε_dual` on the primal/dual residuals. Each block
//! update is exact: the penalty couples a block only through its sum, so the
//! block minimizer is a one-dimensional root find on the coupling value
//! `t = ρ·(Σ block + offset)`, with per-variable closed forms given `t`.
//!
//! [`RateProblem::kkt_rates`] is the independent reference solver: a
//! water-filling form over the cap multiplier found by bisection. It serves
//! as the optimality oracle for the ADMM path and as the rate solver of the
//! convex-toolbox baseline controller.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::SolverConfig;
use crate::error::{Error, Result};

const LN2: f64 = core::f64::consts::LN_2;

/// One slot's rate-control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProblem {
    /// Backlog pressure per device, `Q_n·T₀` (Mbit).
    pub queue_weights: Vec<f64>,
    /// Utility pull per device, `V·χ_n`.
    pub utility_weights: Vec<f64>,
    /// Network-wide admission cap (Mbit/s).
    pub sum_cap: f64,
    /// Variables in the first ADMM block.
    pub first_block: usize,
    /// Penalty ρ.
    pub penalty: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iterations: usize,
}

/// Solver outcome. `bypassed` marks slots where the cap was slack and the
/// separable optimum was returned without running ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSolution {
    pub rates: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub bypassed: bool,
}

/// One ADMM iteration of the optional residual trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

impl RateProblem {
    pub fn new(
        queue_weights: Vec<f64>,
        utility_weights: Vec<f64>,
        sum_cap: f64,
        first_block: usize,
        solver: &SolverConfig,
    ) -> Result<Self> {
        let n = queue_weights.len();
        if n == 0 || utility_weights.len() != n {
            return Err(Error::InvalidInput(format!(
                "weight vectors must be nonempty and equal length, got {n} and {}",
                utility_weights.len()
            )));
        }
        if queue_weights.iter().chain(&utility_weights).any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        if sum_cap < 0.0 {
            return Err(Error::InvalidInput(format!("sum cap must be nonnegative, got {sum_cap}")));
        }
        if first_block == 0 || (n > 1 && first_block >= n) {
            return Err(Error::InvalidInput(format!(
                "first block must satisfy 1 ≤ l ≤ {} for {n} devices, got {first_block}",
                n.max(2) - 1
            )));
        }
        Ok(Self {
            queue_weights,
            utility_weights,
            sum_cap,
            first_block,
            penalty: solver.penalty,
            tol_primal: solver.tol_primal,
            tol_dual: solver.tol_dual,
            max_iterations: solver.max_iterations,
        })
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.queue_weights.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.queue_weights.is_empty()
    }

    /// `Σ_n (w_n·r_n − c_n·log₂(1+r_n))`, lower is better.
    #[must_use]
    pub fn objective(&self, rates: &[f64]) -> f64 {
        rates
            .iter()
            .zip(&self.queue_weights)
            .zip(&self.utility_weights)
            .map(|((r, w), c)| w * r - c * libm::log2(1.0 + r))
            .sum()
    }

    /// Per-device optima ignoring the cap: `max(0, c/(w·ln2) − 1)`.
    /// Devices with zero backlog pressure and positive utility pull have an
    /// unbounded optimum, reported as infinity.
    #[must_use]
    pub fn unconstrained_optimum(&self) -> Vec<f64> {
        self.queue_weights
            .iter()
            .zip(&self.utility_weights)
            .map(|(w, c)| {
                if *c == 0.0 {
                    0.0
                } else if *w == 0.0 {
                    f64::INFINITY
                } else {
                    (c / (w * LN2) - 1.0).max(0.0)
                }
            })
            .collect()
    }

    fn split(&self) -> usize {
        self.first_block.min(self.len())
    }

    /// First-block update: exact minimizer of
    /// `F(x) + (ρ/2)(1ᵀx + 1ᵀz − cap + μ)²`.
    #[must_use]
    pub fn x_update(&self, z: &[f64], mu: f64) -> Vec<f64> {
        self.x_update_with(z, mu, self.penalty)
    }

    fn x_update_with(&self, z: &[f64], mu: f64, rho: f64) -> Vec<f64> {
        let l = self.split();
        let offset = z.iter().sum::<f64>() - self.sum_cap + mu;
        minimize_block(
            &self.queue_weights[..l],
            &self.utility_weights[..l],
            rho,
            offset,
        )
    }

    /// Second-block update, mirror of [`Self::x_update`].
    #[must_use]
    pub fn z_update(&self, x: &[f64], mu: f64) -> Vec<f64> {
        self.z_update_with(x, mu, self.penalty)
    }

    fn z_update_with(&self, x: &[f64], mu: f64, rho: f64) -> Vec<f64> {
        let l = self.split();
        let offset = x.iter().sum::<f64>() - self.sum_cap + mu;
        minimize_block(
            &self.queue_weights[l..],
            &self.utility_weights[l..],
            rho,
            offset,
        )
    }

    /// Reference solver: water-filling over the cap multiplier λ,
    /// `r_n(λ) = max(0, c_n/((w_n+λ)·ln2) − 1)`, with λ ≥ 0 located by
    /// bisection to 1e-10 so that the cap holds with complementary slackness.
    #[must_use]
    pub fn kkt_rates(&self) -> Vec<f64> {
        let rates_at = |lambda: f64| -> Vec<f64> {
            self.queue_weights
                .iter()
                .zip(&self.utility_weights)
                .map(|(w, c)| {
                    if *c == 0.0 {
                        return 0.0;
                    }
                    let denom = w + lambda;
                    if denom <= 0.0 {
                        f64::INFINITY
                    } else {
                        (c / (denom * LN2) - 1.0).max(0.0)
                    }
                })
                .collect()
        };
        let total = |lambda: f64| rates_at(lambda).iter().sum::<f64>();

        if total(0.0) <= self.sum_cap {
            return rates_at(0.0);
        }
        let mut lo = 0.0;
        let mut hi = self
            .utility_weights
            .iter()
            .zip(&self.queue_weights)
            .map(|(c, w)| c / LN2 - w)
            .fold(0.0f64, f64::max)
            + 1.0;
        for _ in 0..200 {
            if hi - lo <= 1e-10 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if total(mid) > self.sum_cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rates_at(0.5 * (lo + hi))
    }

    /// Solves the slot problem: separable optimum when the cap is slack,
    /// otherwise ADMM on the active-cap form.
    #[must_use]
    pub fn solve(&self) -> RateSolution {
        self.solve_impl(None)
    }

    /// Like [`Self::solve`] but records the per-iteration residual trace.
    #[must_use]
    pub fn solve_traced(&self) -> (RateSolution, Vec<IterationTrace>) {
        let mut trace = Vec::new();
        let solution = self.solve_impl(Some(&mut trace));
        (solution, trace)
    }

    fn solve_impl(&self, trace: Option<&mut Vec<IterationTrace>>) -> RateSolution {
        let unconstrained = self.unconstrained_optimum();
        let total: f64 = unconstrained.iter().sum();
        if total <= self.sum_cap {
            return RateSolution {
                rates: unconstrained,
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                converged: true,
                bypassed: true,
            };
        }

        // Utility-proportional feasible start.
        let c_total: f64 = self.utility_weights.iter().sum();
        let init: Vec<f64> = if c_total > 0.0 {
            self.utility_weights
                .iter()
                .map(|c| self.sum_cap * c / c_total)
                .collect()
        } else {
            vec![self.sum_cap / self.len() as f64; self.len()]
        };
        let l = self.first_block.min(self.len());
        let x0 = init[..l].to_vec();
        let z0 = init[l..].to_vec();
        self.solve_from(x0, z0, 0.0, trace)
    }

    /// Curvature of a block's sum response at the given rates: the series
    /// combination of the per-variable curvatures `c/((1+r)²·ln2)`.
    fn block_curvature(w: &[f64], c: &[f64], rates: &[f64]) -> Option<f64> {
        let _ = w;
        let mut compliance = 0.0;
        let mut any = false;
        for (c, r) in c.iter().zip(rates) {
            if *c > 0.0 {
                any = true;
                compliance += (1.0 + r) * (1.0 + r) * LN2 / c;
            }
        }
        if any {
            Some(1.0 / compliance)
        } else {
            None
        }
    }

    /// Matched penalty for the current iterate: the geometric mean of the
    /// two blocks' sum-response curvatures, times the configured ρ.
    fn matched_penalty(&self, x: &[f64], z: &[f64]) -> f64 {
        let l = self.split();
        let h_x = Self::block_curvature(&self.queue_weights[..l], &self.utility_weights[..l], x);
        let h_z = Self::block_curvature(&self.queue_weights[l..], &self.utility_weights[l..], z);
        let scale = match (h_x, h_z) {
            (Some(a), Some(b)) => libm::sqrt(a * b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1.0,
        };
        (self.penalty * scale).clamp(1e-8, 1e8)
    }

    /// ADMM from an explicit starting point (warm starts permitted).
    ///
    /// The penalty is the configured ρ scaled to the iterate's curvature:
    /// re-matched for the early iterations while the iterate still moves,
    /// then frozen (with residual balancing as a safety net), rescaling the
    /// scaled dual to keep `y = ρ·μ` fixed across penalty changes. A fixed
    /// unit penalty stalls for tens of iterations whenever the solution
    /// scale or the block size strays from unit scale; matching keeps the
    /// iteration count flat across both.
    pub fn solve_from(
        &self,
        mut x: Vec<f64>,
        mut z: Vec<f64>,
        mut mu: f64,
        mut trace: Option<&mut Vec<IterationTrace>>,
    ) -> RateSolution {
        const REMATCH_UNTIL: usize = 25;
        let mut rho = self.matched_penalty(&x, &z);
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;

        for i in 1..=self.max_iterations {
            x = self.x_update_with(&z, mu, rho);
            let z_prev = core::mem::take(&mut z);
            z = self.z_update_with(&x, mu, rho);
            mu = dual_update(mu, &x, &z, self.sum_cap);
            let (rp, rd) = residuals(&x, &z, &z_prev, rho, self.sum_cap);
            primal = rp;
            dual = rd;
            iterations = i;
            if let Some(t) = trace.as_deref_mut() {
                let mut rates = x.clone();
                rates.extend_from_slice(&z);
                t.push(IterationTrace {
                    iteration: i,
                    primal_residual: rp,
                    dual_residual: rd,
                    objective: self.objective(&rates),
                });
            }
            if rp <= self.tol_primal && rd <= self.tol_dual {
                converged = true;
                break;
            }
            let rho_next = if i <= REMATCH_UNTIL {
                self.matched_penalty(&x, &z)
            } else if rp > 10.0 * rd && rd > 0.0 {
                rho * libm::sqrt(rp / rd).min(10.0)
            } else if rd > 10.0 * rp && rp > 0.0 {
                rho / libm::sqrt(rd / rp).min(10.0)
            } else {
                rho
            };
            if rho_next != rho {
                mu *= rho / rho_next;
                rho = rho_next;
            }
        }

        let mut rates = x;
        rates.extend_from_slice(&z);
        RateSolution {
            rates,
            iterations,
            primal_residual: primal,
            dual_residual: dual,
            converged,
            bypassed: false,
        }
    }
}

/// Scaled dual ascent: `μ' = μ + 1ᵀx + 1ᵀz − cap`.
#[must_use]
pub fn dual_update(mu: f64, x: &[f64], z: &[f64], sum_cap: f64) -> f64 {
    mu + x.iter().sum::<f64>() + z.iter().sum::<f64>() - sum_cap
}

/// Primal and dual residual norms. The coupling constraint is scalar, so
/// both collapse to absolute values:
/// `‖R_p‖ = |1ᵀx + 1ᵀz − cap|`, `‖R_d‖ = ρ·|1ᵀ(z − z_prev)|`.
#[must_use]
pub fn residuals(x: &[f64], z: &[f64], z_prev: &[f64], penalty: f64, sum_cap: f64) -> (f64, f64) {
    let rp = x.iter().sum::<f64>() + z.iter().sum::<f64>() - sum_cap;
    let rd = penalty * (z.iter().sum::<f64>() - z_prev.iter().sum::<f64>());
    (libm::fabs(rp), libm::fabs(rd))
}

/// Exact block minimizer of
/// `Σ_j (w_j·r_j − c_j·log₂(1+r_j)) + (ρ/2)(Σ_j r_j + offset)²` over `r ≥ 0`.
///
/// Stationarity ties every variable to the scalar `t = ρ·(Σ r + offset)`:
/// `r_j(t) = max(0, c_j/((w_j+t)·ln2) − 1)`, and `Σ_j r_j(t)` is strictly
/// decreasing in `t`, so the self-consistent `t` is a bracketed root.
#[must_use]
pub fn minimize_block(w: &[f64], c: &[f64], penalty: f64, offset: f64) -> Vec<f64> {
    if w.is_empty() {
        return Vec::new();
    }
    let rates_at = |t: f64| -> Vec<f64> {
        w.iter()
            .zip(c)
            .map(|(wj, cj)| {
                if *cj == 0.0 {
                    0.0
                } else {
                    let denom = wj + t;
                    if denom <= 0.0 {
                        f64::INFINITY
                    } else {
                        (cj / (denom * LN2) - 1.0).max(0.0)
                    }
                }
            })
            .collect()
    };
    // g(t) = ρ·(Σ r(t) + offset) − t is strictly decreasing.
    let g = |t: f64| penalty * (rates_at(t).iter().sum::<f64>() + offset) - t;

    if c.iter().all(|cj| *cj == 0.0) {
        return vec![0.0; w.len()];
    }
    let t_min = -w
        .iter()
        .zip(c)
        .filter(|(_, cj)| **cj > 0.0)
        .map(|(wj, _)| *wj)
        .fold(f64::INFINITY, f64::min);
    let mut lo = t_min + 1e-12 * (1.0 + libm::fabs(t_min));
    let mut hi = lo.max(0.0) + 1.0;
    for _ in 0..200 {
        if g(hi) <= 0.0 {
            break;
        }
        hi = hi * 2.0 + 1.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + libm::fabs(hi) + libm::fabs(lo)) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rates_at(0.5 * (lo + hi))
}
