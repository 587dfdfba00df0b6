//! Noncontextual hidden-variable models.
//!
//! [`micro`] deduces macroscopic probabilities from a distribution over
//! microscopic states; [`strategy`], [`lp`] and [`simplex`] search for local
//! models of correlation experiments as convex combinations of deterministic
//! trichotomic strategies.

pub mod lp;
pub mod micro;
pub mod simplex;
pub mod strategy;

pub use lp::{
    build_feasibility_lp, conditional_correlation, detection_efficiency, CorrelationTarget, EfficiencyConstraint,
    FeasibilityProblem, FeasibilitySpec, LinearConstraint, Relation, ResidualReport, StrategyLp,
};
pub use micro::{macro_from_micro, MicroPropertySet, Microstate, MicrostateModel};
pub use simplex::{solve_lp_simplex, FeasiblePoint, LpOutcome};
pub use strategy::{enumerate_local_strategies, LocalStrategy};
