//! Edge sampling: the Dirac part of the pixel gradient that path replay
//! cannot see.
//!
//! Visibility makes radiance discontinuous across projected mesh silhouettes.
//! Differentiating the pixel integral therefore produces, besides the smooth
//! (interior) term, a boundary integral over those silhouette curves. This
//! module estimates that boundary integral by sampling points on mesh edges:
//! in screen space for primary (camera) visibility, and on 3D silhouette
//! edges as seen from each shading point for secondary visibility.

use crate::adjoint::{BounceReplay, DualScene};
use crate::dual::Dual;
use crate::geometry::RAY_EPSILON;
use crate::math::{Ray, Vec2, Vec3};
use crate::render::radiance;
use crate::rng::Pcg32;
use crate::scene::{brdf_eval, EdgeRecord, Scene};

/// Half-width of the straddle used to evaluate the two one-sided radiances.
pub const EDGE_OFFSET: f64 = 1e-6;

// ---------------------------------------------------------------------------
// 2D (screen-space) edge equation

/// Signed line equation of the screen segment a->b at screen point (x, y):
/// zero on the line, linear in everything.
pub fn alpha_2d(a: Vec2, b: Vec2, x: Vec2) -> f64 {
    (a.y - b.y) * x.x + (b.x - a.x) * x.y + (a.x * b.y - b.x * a.y)
}

#[derive(Debug, Clone, Copy)]
pub struct Alpha2dGrads {
    pub d_a: Vec2,
    pub d_b: Vec2,
    pub d_x: Vec2,
}

pub fn alpha_2d_grads(a: Vec2, b: Vec2, x: Vec2) -> Alpha2dGrads {
    Alpha2dGrads {
        d_a: Vec2::new(b.y - x.y, x.x - b.x),
        d_b: Vec2::new(x.y - a.y, a.x - x.x),
        d_x: Vec2::new(a.y - b.y, b.x - a.x),
    }
}

/// Norm of the screen-space gradient of alpha; the density of the Dirac on
/// the line.
pub fn screen_gradient_norm(a: Vec2, b: Vec2) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// 3D edge equation

/// Signed volume form: zero iff m lies on the plane spanned by the edge
/// (v0, v1) and the viewpoint p.
pub fn alpha_3d(p: Vec3, v0: Vec3, v1: Vec3, m: Vec3) -> f64 {
    (m - p).dot((v0 - p).cross(v1 - p))
}

#[derive(Debug, Clone, Copy)]
pub struct Alpha3dGrads {
    pub d_p: Vec3,
    pub d_v0: Vec3,
    pub d_v1: Vec3,
    pub d_m: Vec3,
}

/// Analytic gradients of `alpha_3d`. The viewpoint gradient is the exact
/// derivative, equal to minus the sum of the other three, so a rigid
/// translation of all four points leaves alpha unchanged.
pub fn alpha_3d_grads(p: Vec3, v0: Vec3, v1: Vec3, m: Vec3) -> Alpha3dGrads {
    let v0p = v0 - p;
    let v1p = v1 - p;
    let mp = m - p;
    let d_m = v0p.cross(v1p);
    let d_v0 = v1p.cross(mp);
    let d_v1 = mp.cross(v0p);
    Alpha3dGrads { d_p: -(d_m + d_v0 + d_v1), d_v0, d_v1, d_m }
}

/// Jacobian of the map t -> receiver point: how the projection of the edge
/// point v0 + (v1-v0)t from p onto the receiver plane (m, n_m) moves with t.
/// `None` when the edge direction grazes the receiver plane.
pub fn edge_point_jacobian(p: Vec3, v0: Vec3, v1: Vec3, t: f64, m: Vec3, n_m: Vec3) -> Option<Vec3> {
    let e = v1 - v0;
    let omega = v0 + e * t - p;
    let denom = omega.dot(n_m);
    if denom.abs() < 1e-8 * omega.length() {
        return None;
    }
    let tau = (m - p).dot(n_m) / denom;
    Some((e - omega * (e.dot(n_m) / denom)) * tau)
}

// ---------------------------------------------------------------------------
// Silhouette classification

/// True iff the edge separates front- from back-facing geometry as seen from
/// `viewpoint` (boundary edges always qualify).
pub fn is_silhouette(scene: &Scene, edge: &EdgeRecord, viewpoint: Vec3) -> bool {
    let face_b = match edge.face_b {
        None => return true,
        Some(f) => f,
    };
    let fa = scene.face(scene.flat_face_index(edge.mesh_id, edge.face_a));
    let fb = scene.face(scene.flat_face_index(edge.mesh_id, face_b));
    let sa = fa.normal_unnormalized().dot(viewpoint - fa.v0);
    let sb = fb.normal_unnormalized().dot(viewpoint - fb.v0);
    sa * sb < 0.0
}

// ---------------------------------------------------------------------------
// Primary (camera-visibility) edges

struct ClippedEdge {
    mesh_id: u32,
    v0: u32,
    v1: u32,
    /// Projected endpoints, unclipped.
    a: Vec2,
    b: Vec2,
    /// Parametric span inside the viewport.
    t0: f64,
    t1: f64,
}

/// Camera-silhouette edges projected and clipped to the viewport, with a
/// length CDF for area-proportional sampling.
pub struct PrimaryEdgeSampler {
    edges: Vec<ClippedEdge>,
    cdf: Vec<f64>,
    total_length: f64,
}

/// Parametric clip of the screen segment a->b against [0,w]x[0,h].
fn clip_segment(a: Vec2, b: Vec2, w: f64, h: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-d.x, a.x),
        (d.x, w - a.x),
        (-d.y, a.y),
        (d.y, h - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 < t1).then_some((t0, t1))
}

impl PrimaryEdgeSampler {
    pub fn build(scene: &Scene) -> PrimaryEdgeSampler {
        let cam = &scene.camera;
        let (w, h) = (cam.resolution.0 as f64, cam.resolution.1 as f64);
        let mut edges = Vec::new();
        let mut cdf = Vec::new();
        let mut total = 0.0;
        for per_mesh in &scene.accel.edges {
            for edge in per_mesh {
                if !is_silhouette(scene, edge, cam.position) {
                    continue;
                }
                let mesh = &scene.meshes[edge.mesh_id as usize];
                let p0 = mesh.world_vertex(edge.v0 as usize);
                let p1 = mesh.world_vertex(edge.v1 as usize);
                // edges crossing the near plane are skipped rather than clipped
                let (Some((a, _)), Some((b, _))) = (cam.project(p0), cam.project(p1)) else {
                    continue;
                };
                let Some((t0, t1)) = clip_segment(a, b, w, h) else {
                    continue;
                };
                let length = (b - a).length() * (t1 - t0);
                if length <= 0.0 {
                    continue;
                }
                total += length;
                edges.push(ClippedEdge {
                    mesh_id: edge.mesh_id,
                    v0: edge.v0,
                    v1: edge.v1,
                    a,
                    b,
                    t0,
                    t1,
                });
                cdf.push(total);
            }
        }
        PrimaryEdgeSampler { edges, cdf, total_length: total }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    fn pick(&self, u: f64) -> &ClippedEdge {
        let target = u * self.total_length;
        let i = self.cdf.partition_point(|&c| c < target);
        &self.edges[i.min(self.edges.len() - 1)]
    }
}

/// One Monte Carlo sample of the primary-visibility boundary term.
///
/// Draws a point on a projected silhouette edge, evaluates radiance on both
/// sides of it with common random numbers, chains the screen-space edge
/// derivatives through the dual projection, and hands the per-parameter
/// pixel-value derivative to `emit(px, py, param, d_rgb)`. `d_rgb` is already
/// divided by the total sample count `n_total`.
#[allow(clippy::too_many_arguments)]
pub fn primary_edge_sample(
    scene: &Scene,
    dscene: &DualScene,
    sampler: &PrimaryEdgeSampler,
    rng: &mut Pcg32,
    n_total: usize,
    max_bounces: u32,
    emit: &mut impl FnMut(u32, u32, usize, Vec3),
) {
    if sampler.is_empty() {
        return;
    }
    let edge = sampler.pick(rng.next_f64());
    let t = edge.t0 + rng.next_f64() * (edge.t1 - edge.t0);
    let x = edge.a + (edge.b - edge.a) * t;

    let grad_norm = screen_gradient_norm(edge.a, edge.b);
    if grad_norm < 1e-12 {
        return;
    }
    let g = alpha_2d_grads(edge.a, edge.b, x);
    // unit screen normal toward the alpha > 0 side
    let n = g.d_x * (1.0 / grad_norm);

    let (w, h) = scene.camera.resolution;
    let px = (x.x.floor() as i64).clamp(0, w as i64 - 1) as u32;
    let py = (x.y.floor() as i64).clamp(0, h as i64 - 1) as u32;

    // one-sided radiances with common random numbers
    let mut rng_u = rng.clone();
    let mut rng_l = rng.clone();
    let xu = x + n * EDGE_OFFSET;
    let xl = x - n * EDGE_OFFSET;
    let f_u = radiance(scene, &scene.camera.primary_ray(xu.x, xu.y), &mut rng_u, max_bounces, None);
    let f_l = radiance(scene, &scene.camera.primary_ray(xl.x, xl.y), &mut rng_l, max_bounces, None);
    let df = f_u - f_l;
    if df == Vec3::ZERO {
        return;
    }

    // chain d alpha / d endpoints through the dual screen projection
    let mesh = edge.mesh_id as usize;
    let pa = &dscene.world_vertices[mesh][edge.v0 as usize];
    let pb = &dscene.world_vertices[mesh][edge.v1 as usize];
    let (Some((ax, ay)), Some((bx, by))) = (dscene.project(pa), dscene.project(pb)) else {
        return;
    };
    let d_alpha = Dual::constant(g.d_a.x) * ax
        + Dual::constant(g.d_a.y) * ay
        + Dual::constant(g.d_b.x) * bx
        + Dual::constant(g.d_b.y) * by;
    if d_alpha.g.is_empty() {
        return;
    }

    let scale = sampler.total_length / (grad_norm * n_total as f64);
    for (k, &dk) in d_alpha.g.iter().enumerate() {
        if dk != 0.0 {
            emit(px, py, k, df * (dk * scale));
        }
    }
}

// ---------------------------------------------------------------------------
// Secondary (shading-point visibility) edges

/// One Monte Carlo sample of the secondary-visibility boundary term at a
/// shading point.
///
/// Selects a silhouette edge (as seen from the shading point) with
/// probability proportional to a length-over-distance weight, picks a point
/// on it, traces the blocked and unblocked sides, and emits the
/// per-parameter derivative of this path sample's contribution. The caller
/// folds in the pixel adjoint and the 1/spp weight through `emit`.
/// Radiance restricted to directly visible emitters, for edge terms at the
/// deepest path vertex where the estimand's hemisphere integral contains
/// only direct lighting.
fn emitter_radiance(scene: &Scene, ray: &Ray) -> Vec3 {
    match scene.accel.bvh.intersect(&scene.accel.faces, ray) {
        Some(hit) => {
            let mesh = &scene.meshes[hit.mesh_id as usize];
            let winding = scene.face(hit.face_index).normal_unnormalized();
            if mesh.is_emissive() && winding.dot(ray.direction) < 0.0 {
                mesh.emission
            } else {
                Vec3::ZERO
            }
        }
        None => Vec3::ZERO,
    }
}

pub fn secondary_edge_sample(
    scene: &Scene,
    dscene: &DualScene,
    bounce: &BounceReplay,
    rng: &mut Pcg32,
    remaining_bounces: Option<u32>,
    emit: &mut impl FnMut(usize, Vec3),
) {
    let p = bounce.position.value();
    let shading_face = bounce.flat_face;

    // weighted reservoir selection of one silhouette edge
    let mut chosen: Option<(&EdgeRecord, f64)> = None;
    let mut w_sum = 0.0;
    for per_mesh in &scene.accel.edges {
        for edge in per_mesh {
            let fa = scene.flat_face_index(edge.mesh_id, edge.face_a);
            let fb = edge.face_b.map(|f| scene.flat_face_index(edge.mesh_id, f));
            if fa == shading_face || fb == Some(shading_face) {
                continue;
            }
            if !is_silhouette(scene, edge, p) {
                continue;
            }
            let mesh = &scene.meshes[edge.mesh_id as usize];
            let v0 = mesh.world_vertex(edge.v0 as usize);
            let v1 = mesh.world_vertex(edge.v1 as usize);
            let len = (v1 - v0).length();
            let dist = ((v0 + v1) * 0.5 - p).length();
            let weight = len / dist.max(0.1 * len);
            if !(weight > 0.0) {
                continue;
            }
            w_sum += weight;
            if rng.next_f64() * w_sum < weight {
                chosen = Some((edge, weight));
            }
        }
    }
    let Some((edge, weight)) = chosen else { return };
    let p_edge = weight / w_sum;

    let mesh = &scene.meshes[edge.mesh_id as usize];
    let v0 = mesh.world_vertex(edge.v0 as usize);
    let v1 = mesh.world_vertex(edge.v1 as usize);
    let t = rng.next_f64();
    let q = v0 + (v1 - v0) * t;
    let omega = q - p;
    let dist_q = omega.length();
    if dist_q < 1e-9 {
        return;
    }
    let dir = omega / dist_q;

    // plane through p and the edge; its normal is the direction in which
    // alpha grows, so it separates the two one-sided evaluations
    let n_h_raw = (v0 - p).cross(v1 - p);
    let grad_m_norm = n_h_raw.length();
    if grad_m_norm < 1e-12 {
        return;
    }
    let n_h = n_h_raw / grad_m_norm;

    // receiver: first hit past the edge, skipping the faces that share it
    let fa = scene.flat_face_index(edge.mesh_id, edge.face_a);
    let fb = edge.face_b.map(|f| scene.flat_face_index(edge.mesh_id, f));
    let ray = Ray::with_range(p, dir, RAY_EPSILON, f64::INFINITY);
    let hit = scene.accel.bvh.intersect_filtered(&scene.accel.faces, &ray, |fi| {
        fi != fa && Some(fi) != fb && fi != shading_face
    });
    let (m, n_m) = match hit {
        Some(h) => (h.position, h.geometric_normal),
        None => {
            // nothing behind the edge: the discontinuity is the edge itself
            // (an emitter or object boundary against empty space)
            let face = scene.face(fa);
            let mut n = face.normal_unnormalized().normalized();
            if n.dot(p - face.v0) < 0.0 {
                n = -n;
            }
            (q, n)
        }
    };
    let omega_dot = omega.dot(n_m);
    if omega_dot.abs() < 1e-8 * dist_q {
        return;
    }

    let Some(jac) = edge_point_jacobian(p, v0, v1, t, m, n_m) else {
        return;
    };
    let width = n_m.cross(n_h).length();
    if width < 1e-8 {
        return;
    }

    // one-sided incoming radiance, common random numbers
    let n_p = bounce.normal;
    let dir_u = (dir + n_h * EDGE_OFFSET).normalized();
    let dir_l = (dir - n_h * EDGE_OFFSET).normalized();
    let cos_p = n_p.dot(dir);
    if cos_p <= 0.0 {
        return;
    }
    let mut rng_u = rng.clone();
    let mut rng_l = rng.clone();
    let ray_u = Ray::with_range(p, dir_u, RAY_EPSILON, f64::INFINITY);
    let ray_l = Ray::with_range(p, dir_l, RAY_EPSILON, f64::INFINITY);
    let (l_u, l_l) = match remaining_bounces {
        Some(b) => (
            radiance(scene, &ray_u, &mut rng_u, b, None),
            radiance(scene, &ray_l, &mut rng_l, b, None),
        ),
        None => (emitter_radiance(scene, &ray_u), emitter_radiance(scene, &ray_l)),
    };
    let dl = l_u - l_l;
    if dl == Vec3::ZERO {
        return;
    }

    let material = scene.material_of_mesh(bounce.mesh_id);
    let f = brdf_eval(material, n_p, bounce.wo, dir);
    let dist_m = (m - p).length();
    let cos_m = n_m.dot(dir).abs();
    let dh = f * dl * (cos_p * cos_m / (dist_m * dist_m));

    let g = alpha_3d_grads(p, v0, v1, m);
    let scale = jac.length() / (grad_m_norm * width * p_edge);

    // chain the analytic alpha gradients through the parameter velocities;
    // at fixed direction the hit point rides along with the shading point,
    // so the viewpoint velocity also enters through d_m
    let dp_plus_dm = g.d_p + g.d_m;
    let dv0 = &dscene.world_vertices[edge.mesh_id as usize][edge.v0 as usize];
    let dv1 = &dscene.world_vertices[edge.mesh_id as usize][edge.v1 as usize];
    for k in 0..dscene.dim {
        let d_alpha = dp_plus_dm.dot(bounce.position.grad_component(k))
            + g.d_v0.dot(dv0.grad_component(k))
            + g.d_v1.dot(dv1.grad_component(k));
        if d_alpha != 0.0 {
            emit(k, bounce.throughput * dh * (d_alpha * scale));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn screen_gradient_norm_is_segment_length() {
        assert_eq!(
            screen_gradient_norm(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)),
            5.0
        );
    }

    #[test]
    fn alpha_2d_frozen_value() {
        let a = Vec2::new(1.0, 2.0);
        let b = Vec2::new(3.0, 5.0);
        assert_eq!(alpha_2d(a, b, Vec2::new(0.0, 0.0)), -1.0);
        // endpoints lie on their own line
        assert_eq!(alpha_2d(a, b, a), 0.0);
        assert_eq!(alpha_2d(a, b, b), 0.0);
    }

    #[test]
    fn alpha_2d_grads_match_finite_differences() {
        let h = 1e-6;
        let mut rng = Pcg32::new(7);
        for _ in 0..200 {
            let mut r = || rng.next_f64() * 10.0 - 5.0;
            let (a, b, x) = (
                Vec2::new(r(), r()),
                Vec2::new(r(), r()),
                Vec2::new(r(), r()),
            );
            let g = alpha_2d_grads(a, b, x);
            for (analytic, fd) in [
                (g.d_a.x, (alpha_2d(a + Vec2::new(h, 0.0), b, x) - alpha_2d(a - Vec2::new(h, 0.0), b, x)) / (2.0 * h)),
                (g.d_a.y, (alpha_2d(a + Vec2::new(0.0, h), b, x) - alpha_2d(a - Vec2::new(0.0, h), b, x)) / (2.0 * h)),
                (g.d_b.x, (alpha_2d(a, b + Vec2::new(h, 0.0), x) - alpha_2d(a, b - Vec2::new(h, 0.0), x)) / (2.0 * h)),
                (g.d_b.y, (alpha_2d(a, b + Vec2::new(0.0, h), x) - alpha_2d(a, b - Vec2::new(0.0, h), x)) / (2.0 * h)),
                (g.d_x.x, (alpha_2d(a, b, x + Vec2::new(h, 0.0)) - alpha_2d(a, b, x - Vec2::new(h, 0.0))) / (2.0 * h)),
                (g.d_x.y, (alpha_2d(a, b, x + Vec2::new(0.0, h)) - alpha_2d(a, b, x - Vec2::new(0.0, h))) / (2.0 * h)),
            ] {
                assert!((analytic - fd).abs() < 1e-5 * analytic.abs().max(1.0));
            }
        }
    }

    #[test]
    fn alpha_3d_frozen_value_and_gradient() {
        let p = Vec3::ZERO;
        let v0 = Vec3::new(1.0, 0.0, 0.0);
        let v1 = Vec3::new(0.0, 1.0, 0.0);
        let m = Vec3::new(0.0, 0.0, 2.0);
        assert_eq!(alpha_3d(p, v0, v1, m), 2.0);
        let g = alpha_3d_grads(p, v0, v1, m);
        assert_eq!(g.d_m, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn alpha_3d_translation_invariance_is_exact() {
        let mut rng = Pcg32::new(11);
        for _ in 0..500 {
            let mut r = || rng.next_f64() * 4.0 - 2.0;
            let g = alpha_3d_grads(
                Vec3::new(r(), r(), r()),
                Vec3::new(r(), r(), r()),
                Vec3::new(r(), r(), r()),
                Vec3::new(r(), r(), r()),
            );
            let s = g.d_p + g.d_v0 + g.d_v1 + g.d_m;
            assert!(s.length() <= 1e-12, "{s:?}");
        }
    }

    #[test]
    fn alpha_3d_grads_match_finite_differences() {
        let h = 1e-6;
        let mut rng = Pcg32::new(13);
        for _ in 0..200 {
            let mut r = || rng.next_f64() * 4.0 - 2.0;
            let p = Vec3::new(r(), r(), r());
            let v0 = Vec3::new(r(), r(), r());
            let v1 = Vec3::new(r(), r(), r());
            let m = Vec3::new(r(), r(), r());
            let g = alpha_3d_grads(p, v0, v1, m);
            for axis in 0..3 {
                let mut e = Vec3::ZERO;
                *e.component_mut(axis) = h;
                let checks = [
                    (g.d_p.component(axis), alpha_3d(p + e, v0, v1, m) - alpha_3d(p - e, v0, v1, m)),
                    (g.d_v0.component(axis), alpha_3d(p, v0 + e, v1, m) - alpha_3d(p, v0 - e, v1, m)),
                    (g.d_v1.component(axis), alpha_3d(p, v0, v1 + e, m) - alpha_3d(p, v0, v1 - e, m)),
                    (g.d_m.component(axis), alpha_3d(p, v0, v1, m + e) - alpha_3d(p, v0, v1, m - e)),
                ];
                for (analytic, diff) in checks {
                    let fd = diff / (2.0 * h);
                    assert!(
                        (analytic - fd).abs() < 1e-4 * analytic.abs().max(1.0),
                        "{analytic} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_frozen_case() {
        // edge one unit in front of p, receiver plane one unit further:
        // the projected point moves twice as fast as the edge point
        let p = Vec3::ZERO;
        let v0 = Vec3::new(-1.0, 0.0, 1.0);
        let v1 = Vec3::new(1.0, 0.0, 1.0);
        let m = Vec3::new(0.0, 0.0, 2.0);
        let n_m = Vec3::new(0.0, 0.0, 1.0);
        let j = edge_point_jacobian(p, v0, v1, 0.5, m, n_m).unwrap();
        assert!((j - Vec3::new(4.0, 0.0, 0.0)).length() < 1e-12, "{j:?}");
    }

    #[test]
    fn jacobian_rejects_grazing_edges() {
        // edge direction parallel to the ray through a receiver the edge
        // grazes: omega ends up in the receiver plane
        let p = Vec3::ZERO;
        let v0 = Vec3::new(1.0, 0.0, 0.0);
        let v1 = Vec3::new(2.0, 0.0, 0.0);
        let m = Vec3::new(3.0, 0.0, 0.0);
        let n_m = Vec3::new(0.0, 0.0, 1.0);
        assert!(edge_point_jacobian(p, v0, v1, 0.5, m, n_m).is_none());
    }

    #[test]
    fn clip_keeps_interior_and_drops_exterior_segments() {
        let w = 10.0;
        let h = 10.0;
        assert_eq!(
            clip_segment(Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0), w, h),
            Some((0.0, 1.0))
        );
        assert_eq!(clip_segment(Vec2::new(-5.0, 5.0), Vec2::new(-1.0, 5.0), w, h), None);
        // straddles the left border: half the span survives
        let (t0, t1) = clip_segment(Vec2::new(-5.0, 5.0), Vec2::new(5.0, 5.0), w, h).unwrap();
        assert!((t0 - 0.5).abs() < 1e-12 && (t1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_edge_is_always_a_silhouette() {
        let scene = crate::scene::load_scene(
            r#"{
            "camera": {"position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0],
                       "fov": 45, "resolution": [4,4]},
            "materials": [{"diffuse": [0.5,0.5,0.5], "specular": [0,0,0], "shininess": 1}],
            "meshes": [{"vertices": [-1,-1,0, 1,-1,0, 0,1,0],
                        "indices": [0,1,2], "material": 0}]
        }"#,
        )
        .unwrap();
        for edge in &scene.accel.edges[0] {
            assert!(is_silhouette(&scene, edge, Vec3::new(0.0, 0.0, 3.0)));
        }
    }

    #[test]
    fn coplanar_interior_edge_is_not_a_silhouette() {
        let scene = crate::scene::load_scene(
            r#"{
            "camera": {"position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0],
                       "fov": 45, "resolution": [4,4]},
            "materials": [{"diffuse": [0.5,0.5,0.5], "specular": [0,0,0], "shininess": 1}],
            "meshes": [{"vertices": [-1,-1,0, 1,-1,0, 1,1,0, -1,1,0],
                        "indices": [0,1,2, 0,2,3], "material": 0}]
        }"#,
        )
        .unwrap();
        let viewpoint = Vec3::new(0.3, -0.2, 3.0);
        let interior: Vec<_> = scene.accel.edges[0]
            .iter()
            .filter(|e| e.face_b.is_some())
            .collect();
        assert_eq!(interior.len(), 1);
        assert!(!is_silhouette(&scene, interior[0], viewpoint));
    }

    #[test]
    fn primary_sampler_covers_visible_silhouettes() {
        let scene = crate::scene::load_scene(
            r#"{
            "camera": {"position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0],
                       "fov": 45, "resolution": [16,16]},
            "materials": [{"diffuse": [0.5,0.5,0.5], "specular": [0,0,0], "shininess": 1}],
            "meshes": [{"vertices": [-0.5,-0.5,0, 0.5,-0.5,0, 0,0.5,0],
                        "indices": [0,1,2], "material": 0}]
        }"#,
        )
        .unwrap();
        let sampler = PrimaryEdgeSampler::build(&scene);
        assert_eq!(sampler.edges.len(), 3);
        assert!(sampler.total_length() > 0.0);
        // picking must stay in range across the whole unit interval
        for i in 0..100 {
            let u = i as f64 / 99.0;
            let e = sampler.pick(u);
            assert!(e.t1 > e.t0);
        }
    }
}
