//! Seeded deterministic path tracer.
//!
//! Direct lighting is estimated by one area-sampled light connection per
//! bounce (next-event estimation); indirect bounces are cosine-sampled with
//! no Russian roulette. Per-pixel RNG streams are derived by hashing
//! (seed, px, py, sample index), so pixel order and worker count never change
//! the result.

use rayon::prelude::*;

use crate::geometry::RAY_EPSILON;
use crate::math::{Ray, Vec3};
use crate::rng::{stream, Pcg32};
use crate::scene::{brdf_eval, Scene};

#[derive(Debug, Clone, Copy)]
pub struct RenderConfig {
    pub spp: u32,
    /// 0 = direct lighting only.
    pub max_bounces: u32,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { spp: 16, max_bounces: 1, seed: 0 }
    }
}

/// Linear-radiometric RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major, 3 floats per pixel, top row first.
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        ImageBuffer { width, height, data: vec![0.0; (width * height * 3) as usize] }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Vec3 {
        let i = ((y * self.width + x) * 3) as usize;
        Vec3::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: Vec3) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i] = rgb.x;
        self.data[i + 1] = rgb.y;
        self.data[i + 2] = rgb.z;
    }

    pub fn add_pixel(&mut self, x: u32, y: u32, rgb: Vec3) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i] += rgb.x;
        self.data[i + 1] += rgb.y;
        self.data[i + 2] += rgb.z;
    }

    pub fn pixel_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Box pixel filter of width 1 and weight 1.
pub fn sample_pixel_point(px: u32, py: u32, u1: f64, u2: f64) -> (f64, f64) {
    (px as f64 + u1, py as f64 + u2)
}

/// Frozen discrete structure of one light-path sample, for adjoint replay.
#[derive(Debug, Clone, Default)]
pub struct PathState {
    /// Continuous screen-space sample position.
    pub x: f64,
    pub y: f64,
    pub bounces: Vec<BounceRecord>,
}

#[derive(Debug, Clone)]
pub struct BounceRecord {
    pub mesh_id: u32,
    pub face_id: u32,
    /// Flat index into the scene's face array.
    pub flat_face: usize,
    /// True if the winding normal was flipped to face the incoming ray.
    pub normal_flipped: bool,
    /// Hit position and oriented unit normal at the time of tracing.
    pub position: Vec3,
    pub normal: Vec3,
    /// Direction the path arrived from (unit, pointing away from the surface).
    pub wo: Vec3,
    /// Path throughput up to (not including) this bounce's scattering.
    pub throughput: Vec3,
    /// Emission was added at this bounce (camera hit on a front-facing light).
    pub emission_added: bool,
    pub light: Option<LightRecord>,
    pub indirect: Option<IndirectRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct LightRecord {
    pub flat_face: usize,
    pub barycentric: (f64, f64),
    /// Shadow test outcome, held fixed during replay.
    pub visible: bool,
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy)]
pub struct IndirectRecord {
    /// Sampled world-space direction, held fixed during replay.
    pub direction: Vec3,
    /// Solid-angle pdf value at the time of sampling, held fixed.
    pub pdf: f64,
}

fn cosine_sample_hemisphere(n: Vec3, u1: f64, u2: f64) -> (Vec3, f64) {
    // local frame around n
    let t = if n.x.abs() > 0.9 { Vec3::new(0.0, 1.0, 0.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let b1 = n.cross(t).normalized();
    let b2 = n.cross(b1);
    let r = u1.sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    let local = Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt());
    let dir = b1 * local.x + b2 * local.y + n * local.z;
    let pdf = local.z / std::f64::consts::PI;
    (dir, pdf)
}

/// Unbiased outgoing-radiance estimate along `ray`, recording the path's
/// discrete structure into `path_state` when provided.
pub fn radiance(
    scene: &Scene,
    ray: &Ray,
    rng: &mut Pcg32,
    max_bounces: u32,
    mut path_state: Option<&mut PathState>,
) -> Vec3 {
    let mut result = Vec3::ZERO;
    let mut throughput = Vec3::new(1.0, 1.0, 1.0);
    let mut current = *ray;
    let mut include_emission = true;
    for depth in 0..=max_bounces {
        let hit = match scene.accel.bvh.intersect(&scene.accel.faces, &current) {
            Some(h) => h,
            None => break,
        };
        let mesh = &scene.meshes[hit.mesh_id as usize];
        let material = &scene.materials[mesh.material_id];
        let face = scene.face(hit.face_index);
        let winding_normal = face.normal_unnormalized().normalized();
        let normal_flipped = winding_normal.dot(current.direction) > 0.0;
        let n = hit.geometric_normal;
        let wo = -current.direction;

        let mut record = BounceRecord {
            mesh_id: hit.mesh_id,
            face_id: hit.face_id,
            flat_face: hit.face_index,
            normal_flipped,
            position: hit.position,
            normal: n,
            wo,
            throughput,
            emission_added: false,
            light: None,
            indirect: None,
        };

        // Emission only on the camera ray; NEE covers it at later bounces.
        if include_emission && mesh.is_emissive() && !normal_flipped {
            result += throughput * mesh.emission;
            record.emission_added = true;
        }

        // Next-event estimation: one area-sampled light connection.
        // Draws happen unconditionally so RNG streams stay aligned across
        // perturbed renders (common random numbers).
        let (u_sel, u1, u2) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
        if let Some(ls) = scene.sample_light(u_sel, u1, u2) {
            if ls.flat_face != hit.face_index {
                let delta = ls.point - hit.position;
                let dist2 = delta.length_squared();
                let wi = delta / dist2.sqrt();
                let cos_p = n.dot(wi);
                let cos_l = ls.normal.dot(-wi);
                if cos_p > 0.0 && cos_l > 0.0 && dist2 > 0.0 {
                    let visible =
                        !scene.accel.bvh.occluded(&scene.accel.faces, hit.position, ls.point);
                    record.light = Some(LightRecord {
                        flat_face: ls.flat_face,
                        barycentric: ls.barycentric,
                        visible,
                        point: ls.point,
                    });
                    if visible {
                        let f = brdf_eval(material, n, wo, wi);
                        let geom = cos_p * cos_l / dist2;
                        result += throughput * f * ls.emission * (geom / ls.pdf_area);
                    }
                }
            }
        }

        if depth == max_bounces {
            if let Some(ps) = path_state.as_deref_mut() {
                ps.bounces.push(record);
            }
            break;
        }
        // Cosine-sampled indirect bounce; valid for both BRDF lobes.
        let (bu1, bu2) = (rng.next_f64(), rng.next_f64());
        let (wi, pdf) = cosine_sample_hemisphere(n, bu1, bu2);
        if pdf <= 1e-12 {
            if let Some(ps) = path_state.as_deref_mut() {
                ps.bounces.push(record);
            }
            break;
        }
        let f = brdf_eval(material, n, wo, wi);
        let factor = f * (n.dot(wi).max(0.0) / pdf);
        record.indirect = Some(IndirectRecord { direction: wi, pdf });
        if let Some(ps) = path_state.as_deref_mut() {
            ps.bounces.push(record);
        }
        throughput *= factor;
        if throughput.max_component() <= 0.0 {
            break;
        }
        current = Ray::with_range(hit.position, wi, RAY_EPSILON, f64::INFINITY);
        include_emission = false;
    }
    result
}

/// Trace one pixel sample; used by both render and the gradient replay so
/// RNG consumption stays identical.
pub fn trace_pixel_sample(
    scene: &Scene,
    px: u32,
    py: u32,
    sample: u32,
    config: &RenderConfig,
    path_state: Option<&mut PathState>,
) -> Vec3 {
    let mut rng = Pcg32::for_sample(config.seed, stream::PIXEL, px, py, sample);
    let u1 = rng.next_f64();
    let u2 = rng.next_f64();
    let (x, y) = sample_pixel_point(px, py, u1, u2);
    let ray = scene.camera.primary_ray(x, y);
    let mut ps = path_state;
    if let Some(ps) = ps.as_deref_mut() {
        ps.x = x;
        ps.y = y;
        ps.bounces.clear();
    }
    radiance(scene, &ray, &mut rng, config.max_bounces, ps)
}

/// Per-pixel average of `spp` radiance samples. Pure function of
/// (scene, config).
pub fn render(scene: &Scene, config: &RenderConfig) -> ImageBuffer {
    let (w, h) = scene.camera.resolution;
    let mut img = ImageBuffer::new(w, h);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut row = vec![0.0; (w * 3) as usize];
            for px in 0..w {
                let mut acc = Vec3::ZERO;
                for s in 0..config.spp {
                    acc += trace_pixel_sample(scene, px, py, s, config, None);
                }
                let rgb = acc / config.spp as f64;
                let i = (px * 3) as usize;
                row[i] = rgb.x;
                row[i + 1] = rgb.y;
                row[i + 2] = rgb.z;
            }
            row
        })
        .collect();
    for (py, row) in rows.into_iter().enumerate() {
        let base = py * (w as usize) * 3;
        img.data[base..base + row.len()].copy_from_slice(&row);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::load_scene;

    fn emitter_scene() -> Scene {
        load_scene(
            r#"{
            "camera": {
                "position": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                "fov": 45, "resolution": [8, 8]
            },
            "materials": [{"diffuse": [0.5, 0.5, 0.5], "specular": [0, 0, 0], "shininess": 1}],
            "meshes": [{
                "vertices": [-5, -5, 0, 5, -5, 0, 0, 5, 0],
                "indices": [0, 1, 2],
                "material": 0,
                "emission": [2, 1, 0.5]
            }]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn direct_emitter_hit_returns_emission_exactly() {
        let scene = emitter_scene();
        let ray = scene.camera.primary_ray(4.0, 4.0);
        let mut rng = Pcg32::new(1);
        let rgb = radiance(&scene, &ray, &mut rng, 0, None);
        assert_eq!(rgb, Vec3::new(2.0, 1.0, 0.5));
    }

    #[test]
    fn pixel_point_box_filter() {
        assert_eq!(sample_pixel_point(3, 5, 0.0, 0.0), (3.0, 5.0));
        assert_eq!(sample_pixel_point(3, 5, 0.5, 0.5), (3.5, 5.5));
    }

    #[test]
    fn pixel_points_cover_unit_square_uniformly() {
        // chi-square over a 4x4 grid of the unit pixel square
        let mut rng = Pcg32::new(123);
        let mut counts = [0u32; 16];
        let n = 100_000;
        for _ in 0..n {
            let (x, y) = sample_pixel_point(0, 0, rng.next_f64(), rng.next_f64());
            let cx = ((x * 4.0) as usize).min(3);
            let cy = ((y * 4.0) as usize).min(3);
            counts[cy * 4 + cx] += 1;
        }
        let expected = n as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 15 dof, 0.999 quantile is ~37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn same_seed_renders_are_bit_identical() {
        let scene = emitter_scene();
        let config = RenderConfig { spp: 8, max_bounces: 1, seed: 7 };
        let a = render(&scene, &config);
        let b = render(&scene, &config);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_scene_renders_black() {
        let scene = load_scene(
            r#"{
            "camera": {
                "position": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                "fov": 45, "resolution": [4, 4]
            }
        }"#,
        )
        .unwrap();
        let img = render(&scene, &RenderConfig::default());
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radiance_is_nonnegative() {
        let scene = emitter_scene();
        let config = RenderConfig { spp: 4, max_bounces: 2, seed: 3 };
        let img = render(&scene, &config);
        assert!(img.data.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn bounce_count_irrelevant_without_secondary_paths() {
        // emitter only: nothing to bounce off, so max_bounces must not matter
        let scene = emitter_scene();
        let a = render(&scene, &RenderConfig { spp: 4, max_bounces: 0, seed: 5 });
        let b = render(&scene, &RenderConfig { spp: 4, max_bounces: 3, seed: 5 });
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn primary_ray_projection_round_trip() {
        let scene = emitter_scene();
        let mut rng = Pcg32::new(11);
        for _ in 0..1_000 {
            let x = rng.next_f64() * 8.0;
            let y = rng.next_f64() * 8.0;
            let ray = scene.camera.primary_ray(x, y);
            let far = ray.at(10.0);
            let (screen, _z) = scene.camera.project(far).expect("in front of camera");
            assert!((screen.x - x).abs() < 1e-6, "x {x} vs {}", screen.x);
            assert!((screen.y - y).abs() < 1e-6, "y {y} vs {}", screen.y);
        }
    }

    #[test]
    fn center_ray_is_view_direction() {
        let scene = emitter_scene();
        let ray = scene.camera.primary_ray(4.0, 4.0);
        let view = (scene.camera.look_at - scene.camera.position).normalized();
        assert!((ray.direction - view).length() < 1e-12);
    }

    #[test]
    fn corner_rays_match_fov_trig() {
        let scene = emitter_scene();
        // vertical fov 45 deg, square image: at the top edge center,
        // the ray's angle from the view axis is atan(tan(22.5 deg))
        let ray = scene.camera.primary_ray(4.0, 0.0);
        let view = (scene.camera.look_at - scene.camera.position).normalized();
        let angle = ray.direction.dot(view).acos();
        assert!((angle - 22.5f64.to_radians()).abs() < 1e-9);
    }
}
