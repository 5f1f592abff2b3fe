//! Geometry-consistent Gaussian-splat reconstruction.
//!
//! The crate covers the splat data model and CPU rasterizer, the training
//! objectives with their analytic gradients, the optimizer with densification,
//! screen-space covariance culling, and TSDF fusion with marching-cubes mesh
//! extraction. Numeric code is generic over [`Real`]; the `*32`/`*64`
//! aliases below name the common instantiations.

pub mod backward;
pub mod camera;
pub mod checkpoint;
pub mod culling;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod linalg;
pub mod losses;
pub mod mesh;
pub mod optim;
pub mod projection;
pub mod raster;
pub mod scalar;
pub mod splat;
pub mod synthetic;

pub use camera::Camera;
pub use culling::{cull_mask, CullConfig};
pub use dataset::{Frame, FrameDataset};
pub use error::{Error, Result};
pub use image::{Image, Mask};
pub use linalg::{Mat3, Quat, Sym2, Vec2, Vec3};
pub use raster::{rasterize, RenderOutput};
pub use optim::{train, TrainConfig, TrainReport};
pub use scalar::Real;
pub use splat::{Splat, SplatSet};

pub type Splat32 = Splat<f32>;
pub type Splat64 = Splat<f64>;
pub type SplatSet32 = SplatSet<f32>;
pub type SplatSet64 = SplatSet<f64>;
pub type Camera32 = Camera<f32>;
pub type Camera64 = Camera<f64>;
pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;
pub type RenderOutput32 = RenderOutput<f32>;
pub type RenderOutput64 = RenderOutput<f64>;
pub type FrameDataset32 = FrameDataset<f32>;
pub type FrameDataset64 = FrameDataset<f64>;
