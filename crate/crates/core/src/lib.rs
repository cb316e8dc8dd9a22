//! Numerical kernels behind the wheelforge dataset pipeline.

pub mod depthsynth;
pub mod designspace;
pub mod fem2d;
pub mod mesh;
pub mod metrics3d;
pub mod modal;
pub mod raster;
pub mod recon;
pub mod reference;
pub mod sparse;
pub mod topo;
pub mod wheel;
