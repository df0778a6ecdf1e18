//! Exact and numerical machinery for the generalized divisor sums
//! `B(l, n) = sum over d_1 | d_2 | ... | d_{l-1} | n of d_1 d_2 ... d_{l-1}`
//! and the index `B(l, n) / n^(l-1)`.

pub mod abundancy;
pub mod arith;
pub mod genfunc;
pub mod limit_stats;
pub mod perm_oracle;
pub mod qseries;
pub mod sieve;
pub mod tori;

pub use abundancy::{
    abundancy_index, b_via_flags, b_via_multiplicativity, b_via_recursion, local_factor,
};
pub use arith::{ExactInt, ExactRational, FactorizationMap};
pub use perm_oracle::{ATable, PermTuple, Permutation};
pub use sieve::{load_table, save_table, sieve_b, ArithTable, SieveConfig};
pub use tori::{build_torus, TorusRealization, TorusSpec};
