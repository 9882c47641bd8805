//! Exact optimizer and experiment harness for service-chain placement and
//! flow routing: given a network, a set of unsplittable traffic demands, an
//! ordered chain of network functions, and per-node hosting budgets, choose
//! one route per demand and a placement of every chain function so that total
//! bandwidth consumption (flow × hops, summed over demands) is minimized.
//!
//! The crate is organized bottom-up:
//!
//! * [`topology`] — scenario data model, file ingestion/validation, derived
//!   scalar quantities (total offered flow, per-node intake capacity).
//! * [`paths`] — exact K-shortest loopless path enumeration and the
//!   path-indexed sets the integer program consumes.
//! * [`ilp`] — compilation of a scenario + hosting strategy into a pure 0-1
//!   integer linear program, solution decoding, independent verification,
//!   and LP-format export.
//! * [`solver`] — exact branch-and-bound over the compiled program, plus an
//!   exhaustive oracle for small instances that shares no search code.
//! * [`analysis`] — post-solve metrics: link loads, congestion sweeps,
//!   inflection points, normalization.
//! * [`harness`] — experiment orchestration (placement enumeration, sweep
//!   grids, CSV output) and the command-line interface.
//! * [`gen`] — seeded random small-instance generator used by the test
//!   suites to battle the solver against the oracle.

pub mod analysis;
pub mod gen;
pub mod harness;
pub mod ilp;
pub mod paths;
pub mod solver;
pub mod topology;
