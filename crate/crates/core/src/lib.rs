//! Library for reasoning about tuple-generating dependencies: a budgeted
//! restricted chase, homomorphism and bounded-homomorphism search, an
//! exact triviality decider for linear rule sets, bounded conservativity
//! checkers for frontier-one rule sets, and a generator suite of
//! Conway-function gadget databases with combinatorial oracles.

pub mod chase;
pub mod conservativity;
pub mod conway;
pub mod textio;
pub mod triviality;
pub mod hom;
pub mod model;
pub mod verdict;

pub use model::{ConstantId, Cq, Database, Fact, Instance, RelationSymbol, Schema, Tgd};
pub use verdict::{Basis, Budget, Certificate, Verdict, VerdictValue};
