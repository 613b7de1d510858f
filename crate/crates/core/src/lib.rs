//! Bell nonlocality as a resource for device-independent key distribution.
//!
//! * [`scenario`]: Bell scenarios, distribution tuples, validation.
//! * [`local_polytope`]: deterministic vertices, LP membership, local fraction.
//! * [`transforms`]: wirings, elementary moves, the nonlocality order check.
//! * [`monotones`]: Bell functionals and the CHSH monotone.
//! * [`key_rates`]: closed-form key-rate bounds and the threshold of `N`.
//! * [`quantum`]: two-qubit Born-rule realizations.
//! * [`protocol`]: seeded Monte Carlo simulation of raw-key protocols.

pub mod error;
pub mod key_rates;
pub mod local_polytope;
pub mod lp;
pub mod monotones;
pub mod protocol;
pub mod quantum;
pub mod random;
pub mod scenario;
pub mod transforms;

pub use error::{Error, Result};
pub use key_rates::{rate_report, threshold, RateReport};
pub use local_polytope::{is_local, local_fraction, DeterministicVertex, LocalDecomposition, LocalVerdict};
pub use monotones::{chsh_measure, BellFunctional, NuMap};
pub use protocol::{run_lemma_protocol, run_protocol, ProtocolSpec, SimResult};
pub use quantum::{make_paper_model, TwoQubitModel};
pub use scenario::{make_theta_family, BellScenario, DistributionTuple, ValidationReport, DEFAULT_TOL};
pub use transforms::{apply_wiring, check_order, OrderCertificate, OrderVerdict, Wiring};
