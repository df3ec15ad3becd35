//! Clearing engine for divisible-goods markets with budget-constrained,
//! quasi-linear buyers holding linear valuations.
//!
//! The central object is the set of feasible price vectors: prices at which
//! every buyer can be given a bundle they demand without exceeding supply.
//! That set is closed under elementwise minimum, its least element is the
//! unique competitive-equilibrium price vector, and the equilibrium both
//! maximises revenue and welfare among feasible outcomes. This crate
//! computes that price vector two independent ways (a convex program and a
//! monotone descent over the feasible set), certifies it exactly, and
//! provides the brute-force oracles used to check the structural results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arctic;
pub mod descent;
pub mod eg;
pub mod error;
pub mod exact;
pub mod feasibility;
pub mod fixtures;
pub mod flow;
pub mod generate;
pub mod market;
pub mod metrics;
pub mod monopoly;
pub mod numeric;
pub mod oracle;
pub mod properties;
pub mod solver;

pub use arctic::{flatten_bids, parse_instance, reaggregate, ArcticBid, BidCollection, Instance};
pub use descent::{initial_feasible_price, lattice_descent, DescentTrace, Schedule};
pub use eg::{solve_eg, EgOptions, EgSolution};
pub use error::{Error, Result};
pub use feasibility::{
    check_clearing, check_feasible, max_extension, meet, meet_allocation, FeasibilityCertificate,
    OverDemand,
};
pub use market::{
    bang_per_buck, demand_vertices, is_demanded, validate_market, Allocation, BangPerBuckSet,
    Bundle, Buyer, Good, Market, Outcome, PriceVector, Violation,
};
pub use metrics::{
    certify_constrained_efficiency, revenue, social_welfare, EfficiencyCertificate, Verdict,
};
pub use monopoly::{
    clearing_price, demand_single, divergence_witness, max_revenue_price, ConcaveValuation,
    MonopolyInstance,
};
pub use numeric::{Rational, Scalar};
pub use oracle::{grid_scan, oracle_max_revenue, oracle_min_price, region_boundary_2d, RegionGrid};
pub use solver::{solve, solve_with, Certificates, Diagnostics, EquilibriumResult, SolveOptions};
