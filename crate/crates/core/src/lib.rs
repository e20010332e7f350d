//! Spatio-temporal pattern analysis on discrete measure spaces.
//!
//! This crate represents evolving spatial data — image stacks, fields on
//! curved meshes, arbitrary weighted point clouds — as time series of vector
//! fields over a [`space::MeasureSpace`], and provides:
//!
//! * the two-parameter **L^{p,q} norm and distance family** combining a
//!   pointwise q-norm with a measure-weighted p-norm ([`field`], [`metrics`]);
//! * **classical MDS** embeddings of pairwise distance matrices, with
//!   spectral diagnostics ([`mds`]);
//! * **linear state reconstruction** from a truncated set of principal
//!   coordinates ([`reconstruct`]);
//! * reference **pattern-forming simulators** — the complex Ginzburg–Landau
//!   equation on a periodic lattice ([`cgle`]) and a Gray–Scott
//!   reaction–diffusion system on a geodesic sphere ([`gray_scott`]);
//! * a **largest-Lyapunov-exponent estimator** for scalar series
//!   ([`lyapunov`]);
//! * file formats and an end-to-end **pipeline** (simulate → distances →
//!   embedding → reconstruction → diagnostics) with reproducible,
//!   manifest-driven runs ([`io`], [`pipeline`]).
//!
//! Determinism is a design requirement throughout: reductions use a fixed
//! pairwise summation tree, parallelism only ever spans independent outputs,
//! and all randomness flows from explicit seeds.

pub mod cgle;
pub mod error;
pub mod field;
pub mod gray_scott;
pub mod io;
pub mod lyapunov;
pub mod mds;
pub mod metrics;
pub mod numeric;
pub mod pipeline;
pub mod reconstruct;
pub mod series;
pub mod space;

pub use error::{Error, Result};
pub use field::{Boundary, Exponent, PQ, VectorField, vnorm_q};
pub use lyapunov::{LyapunovEstimate, LyapunovParams, estimate_lyapunov};
pub use mds::{DEFAULT_EPS_KEEP, Embedding, double_center, embed};
pub use metrics::{DistanceMatrix, distance, distance_matrix, distance_matrix_tiled};
pub use pipeline::{PipelineConfig, PipelineReport, run_pipeline};
pub use reconstruct::{ReconstructionModel, fit, reconstruction_error};
pub use series::FieldSeries;
pub use space::{MeasureSpace, SpaceKind, TriMesh, icosphere};
