//! Kernel operator families: Urysohn-type operators on a measure space,
//! Mellin-type operators on ℝ⁺ with Haar measure, the moment kernel,
//! singularity certificates and convergence experiments.

mod audit;
mod experiment;
mod mellin;
mod urysohn;

#[cfg(test)]
mod tests;

use std::sync::Arc;

use crate::error::Result;
use crate::lattice::LatticeElement;
use crate::measure::{Interval, IntervalSet, LatticeFunction, MeasureSpace};

pub use audit::{
    lipschitz_audit, psi_audit, scale_invariance, singularity_audit, star_property_audit,
    ClauseResult, LipschitzReport, PsiReport, ScaleInvarianceReport, SingularityCertificate,
    SingularityKind, StarPropertyReport,
};
pub use experiment::{
    operator_convergence_experiment, operator_output, ExperimentMode, ExperimentReport,
    ExperimentSettings, InMeasureOutcome, ModularOutcome, UniformOutcome,
};
pub use mellin::{mellin_apply, moment_kernel, MellinKernel, MellinKernelFamily};
pub use urysohn::{urysohn_apply, KernelFamily};

/// Quadrature tolerance for the shell-divergence check of kernel integrals.
pub(crate) const KERNEL_TOL: f64 = 1e-10;

/// Membership test for the index set `H ⊆ ℕ`.
pub type IndexSet = Arc<dyn Fn(usize) -> bool + Send + Sync>;

/// What a kernel family has to expose for the audits and experiments.
///
/// Radii `δ` are in the family's own parametrisation: a metric radius for
/// Urysohn families, a ratio `δ > 1` for Mellin families (the ball around
/// `s` is `[s/δ, sδ]`).
pub trait KernelOperator: Send + Sync {
    fn label(&self) -> String;
    /// The measure space `(G, μ)` the outputs live on.
    fn space(&self) -> MeasureSpace;
    /// The mass bound `D⁽¹⁾`.
    fn d1(&self) -> f64;
    /// `None` when `H = ℕ`.
    fn index_set(&self) -> Option<IndexSet>;
    /// `K_n(s, t, u)` on scalars.
    fn kernel(&self, n: usize, s: f64, t: f64, u: f64) -> f64;
    /// `L_n(s, t)`.
    fn majorant(&self, n: usize, s: f64, t: f64) -> f64;
    /// `ψ_n(u)` for `u ≥ 0`.
    fn psi(&self, n: usize, u: f64) -> f64;
    /// Whether `K_n(s,t,u) = L_n(s,t)·u`.
    fn is_linear(&self) -> bool;
    /// `(T_n f)(s)`.
    fn apply(&self, f: &LatticeFunction, s: f64, n: usize) -> Result<LatticeElement>;
    /// `∫ L_n(s,t) dμ(t)` over `G`, or over `G ∖ B(s, δ)` when `outside` is
    /// given.
    fn section_mass(&self, n: usize, s: f64, outside: Option<f64>) -> Result<f64>;
    /// `∫ L_n(s,t) dμ(s)` for fixed `t`, over `G` or over `over`.
    fn cosection_mass(&self, n: usize, t: f64, over: Option<&IntervalSet>) -> Result<f64>;
    /// Points `s` of the finite-measure probe set used by the audits.
    fn audit_points(&self) -> Vec<f64>;
    /// Where `t` is sampled in the Lipschitz audit.
    fn sample_window(&self) -> Interval;
    /// Support of `T_n f` given the support of `f`; `None` if unknown.
    fn output_support(&self, n: usize, f: &Interval) -> Option<Interval>;
    /// Kinks of `T_n f` implied by the kinks of `f`.
    fn output_breaks(&self, n: usize, f: &LatticeFunction) -> Vec<f64>;
}
