//! Multimesh finite element discretization of the Poisson and
//! reaction-diffusion problems on ordered stacks of overlapping triangular
//! meshes, coupled across interfaces with Nitsche's method and stabilized on
//! the overlaps.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geom2d;
pub mod mesh;
pub mod multimesh;
pub mod problem;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
pub use geom2d::{ConvexPolygon, Point2, PolySet, QuadRule, Segment};
pub use mesh::{FeSpace, TriMesh};
pub use multimesh::{CellRef, CutTopology, MultiMeshConfig, Part};
pub use analysis::{Diagnostics, EnergyBreakdown, ErrorReport, MultimeshFunction};
pub use assembly::{DirichletBC, DofMap, FormParams, StabVariant, VALUE_JUMP_BETA1};
pub use solver::{CsrMatrix, SolveReport};
