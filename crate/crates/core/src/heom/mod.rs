//! Hierarchical equations of motion for a two-level system coupled through
//! σ_z to a bath described by an exponential correlation expansion.
//!
//! Propagation runs in the diabatic frame, where the coupling operator is
//! exactly σ_z; observables are rotated to the adiabatic frame afterwards.
//! The hierarchy is closed by hard truncation at level L.

pub mod hierarchy;
pub mod propagate;
pub mod rhs;
pub mod system;

pub use hierarchy::{ado_count, AdoIndex, Hierarchy, Link};
pub use propagate::{propagate, propagate_with, PropagationSettings, Rk4, Trajectory};
pub use rhs::{heom_rhs, HeomGenerator, HierarchyState};
pub use system::{from_adiabatic, purity, to_adiabatic, SysMatrix, SystemSpec};
