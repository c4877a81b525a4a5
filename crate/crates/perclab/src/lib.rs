//! Simulation laboratory for Boolean (continuum percolation) models on
//! Euclidean and hyperbolic spaces.
//!
//! The library is organized around a pipeline:
//!
//! * [`geometry`]: metric, volume, sampling and isometries of the ambient
//!   space (ℝ², ℝ³, or the hyperbolic plane in the Poincaré-disk chart);
//! * [`process`]: marked point measures, Poisson sampling, and the local
//!   modification operations (insertion, deletion, label thinning);
//! * [`scene`]: a realized Boolean model in a geodesic window: occupied
//!   ball graph, metric raster, component labelings, intrinsic distances;
//! * [`forest`]: branch-point detection on components, the labeled forest
//!   over branch points, minimal spanning forests, backbones and unit flows;
//! * [`walks`]: the delayed reversible walk on the forest, the ambient
//!   unit-ball walk, and their statistical diagnostics;
//! * [`experiments`]: pivotal-ball scans, the component indistinguishability
//!   harness, coupled monotonicity, connectivity decay and percolation inside
//!   components;
//! * [`lab`]: run configuration, deterministic orchestration, manifests.

pub mod error;
pub mod experiments;
pub mod flow;
pub mod forest;
pub mod geometry;
pub mod lab;
pub mod msf;
pub mod process;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
