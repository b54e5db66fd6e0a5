//! Linear network coding over prime fields for the generalized M-network:
//! exact GF(p) linear algebra, acyclic network descriptions, linear code
//! verification, exhaustive solution search, discrete polymatroid checks,
//! and a numerical ledger of the divisibility bound `m | d`.

pub mod code;
pub mod error;
pub mod field;
pub mod ledger;
pub mod mnet;
pub mod network;
pub mod polymatroid;
pub mod solver;

pub use code::{propagate, verify_solution, GlobalTransfer, InducedRankOracle, LinearCode, TerminalVerdict, Verdict};
pub use error::{Error, Result};
pub use field::{solve_decoder, FMatrix, PrimeField};
pub use ledger::{run_ledger, LedgerReport};
pub use mnet::{build, routing_code, terminal_tuple, MnetLayout};
pub use network::{butterfly, Edge, MessageRef, Network, Node, Role, Violation};
pub use polymatroid::{check_axioms, check_dpn, from_subspaces, membership, rho_max, RankOracle, RankTable};
pub use solver::{certify, search, Certificate, SearchConfig, SearchOutcome};
