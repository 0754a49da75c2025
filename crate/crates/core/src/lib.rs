//! Differentiable triangle-mesh path tracer.
//!
//! Renders scenes with a deterministic Monte Carlo path tracer and computes
//! unbiased gradients of pixel values (or a loss) with respect to scene
//! parameters. Smooth dependence is handled by replaying checkpointed paths
//! with dual numbers; the Dirac terms that visibility discontinuities
//! contribute are estimated by explicit edge sampling.

pub mod adjoint;
pub mod dual;
pub mod edge;
pub mod engine;
pub mod geometry;
pub mod io;
pub mod math;
pub mod optimize;
pub mod render;
pub mod rng;
pub mod scene;

pub use adjoint::{backprop_image, backprop_sample, DualScene, PixelAdjoint};
pub use engine::{
    fd_check, fd_gradient, gradient_image, loss_adjoint, loss_value, render_with_gradients,
    FdReport, GradConfig, GradResult, Loss,
};
pub use geometry::{Bvh, Face, HitRecord, RAY_EPSILON};
pub use math::{Ray, Vec2, Vec3};
pub use optimize::{adam_step, optimize, AdamConfig, AdamState, OptimizeResult, TrajectoryRecord};
pub use render::{render, ImageBuffer, PathState, RenderConfig};
pub use scene::{
    load_scene, GradientVector, Material, Mesh, ParamTarget, ParameterRegistry, Scene, SceneError,
};
