//! Numerical laboratory for the Calabi flow of toric symplectic potentials.
//!
//! The fiber of an admissible projective bundle `P(O ⊕ L₁ ⊕ L₂) → Σ` is a
//! toric surface whose moment polytope is a Delzant triangle. Kähler metrics
//! in an admissible class are encoded by a symplectic potential
//! `u = ½ Σ lᵢ ln lᵢ + f` on that polytope, and the Calabi flow becomes the
//! fourth-order parabolic equation `∂u/∂t = R̄ − R(u)` acting on the smooth
//! correction `f`.
//!
//! Module map:
//!
//! | module        | contents                                                        |
//! |---------------|-----------------------------------------------------------------|
//! | [`polytope`]  | Delzant polytopes, distances to the boundary, boundary measure  |
//! | [`grid`]      | interior lattice grids and stencil classification               |
//! | [`stencil`]   | finite-difference and local-fit derivative operators            |
//! | [`quadrature`]| interior quadrature with clipped boundary cells                 |
//! | [`potential`] | symplectic potentials, derivative jets, Legendre duality        |
//! | [`curvature`] | scalar, weighted scalar, fiber and admissible curvature         |
//! | [`energy`]    | Calabi energy, dissipation and class invariants                 |
//! | [`flow`]      | RK4 time stepping, monitors, grid-graph distances               |
//! | [`sobolev`]   | Yamabe and Sobolev constant certification                       |
//! | [`io`]        | JSON/CSV interchange formats                                    |

pub mod curvature;
pub mod energy;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod polytope;
pub mod potential;
pub mod quadrature;
pub mod sobolev;
pub mod stencil;

pub use curvature::{AdmissibleClass, CurvatureSample, InverseHessianJet};
pub use energy::EnergyReport;
pub use error::{Error, Result};
pub use flow::{FlowState, MonitorRecord, RunConfig};
pub use grid::Grid;
pub use polytope::{DelzantPolytope, Facet, Point};
pub use potential::{Correction, DerivativeProvider, Domain, Jet, SymplecticPotential};
pub use stencil::DEFAULT_ACCURACY;
pub use sobolev::{ClassTopology, SobolevCertificate};
