//! Smooth-gradient backpropagation by replaying checkpointed paths.
//!
//! Each traced sample leaves a `PathState` describing its discrete structure:
//! which faces were hit, which light point was sampled, whether the shadow
//! ray was blocked, which indirect direction was drawn. The replay holds that
//! structure fixed and re-evaluates the sample's contribution with dual
//! numbers over the registered parameters; positions move differentiably via
//! ray-plane reprojection of the recorded faces. Discontinuity (Dirac) terms
//! are deliberately absent here; edge sampling supplies them.

use rayon::prelude::*;

use crate::dual::{DVec3, Dual};
use crate::math::Vec3;
use crate::render::{trace_pixel_sample, ImageBuffer, PathState, RenderConfig};
use crate::scene::{GradientVector, ParamTarget, Scene};

/// Per-pixel loss derivative used to weight one sample's gradient.
#[derive(Debug, Clone, Copy)]
pub struct PixelAdjoint {
    pub px: u32,
    pub py: u32,
    /// dLoss/dPixel, one weight per channel.
    pub weight: Vec3,
}

/// Scene quantities lifted to duals over the parameter vector, built once
/// per gradient pass.
pub struct DualScene {
    pub dim: usize,
    pub camera_position: DVec3,
    forward: DVec3,
    right: DVec3,
    up: DVec3,
    tan_half_fov: f64,
    aspect: f64,
    width: f64,
    height: f64,
    /// World-space vertex duals per mesh (vertex + translation).
    pub world_vertices: Vec<Vec<DVec3>>,
    pub diffuse: Vec<DVec3>,
    pub specular: Vec<DVec3>,
    pub shininess: Vec<f64>,
    pub emission: Vec<DVec3>,
    pub total_emissive_area: Dual,
}

fn dual_vec3(v: Vec3, slots: [Option<usize>; 3], dim: usize) -> DVec3 {
    let comp = |val: f64, slot: Option<usize>| match slot {
        Some(i) => Dual::variable(val, i, dim),
        None => Dual::constant(val),
    };
    DVec3::new(comp(v.x, slots[0]), comp(v.y, slots[1]), comp(v.z, slots[2]))
}

impl DualScene {
    pub fn new(scene: &Scene) -> DualScene {
        let dim = scene.registry.total_dim();
        let mut cam_pos = [None; 3];
        let mut cam_look = [None; 3];
        let mut mesh_translation = vec![[None; 3]; scene.meshes.len()];
        let mut mesh_emission = vec![[None; 3]; scene.meshes.len()];
        let mut mat_diffuse = vec![[None; 3]; scene.materials.len()];
        let mut mat_specular = vec![[None; 3]; scene.materials.len()];
        let mut vertex_slots: Vec<Vec<[Option<usize>; 3]>> = scene
            .meshes
            .iter()
            .map(|m| vec![[None; 3]; m.vertices.len()])
            .collect();
        for (i, entry) in scene.registry.entries().iter().enumerate() {
            match entry.target {
                ParamTarget::CameraPosition(a) => cam_pos[a] = Some(i),
                ParamTarget::CameraLookAt(a) => cam_look[a] = Some(i),
                ParamTarget::MeshTranslation { mesh, axis } => {
                    mesh_translation[mesh][axis] = Some(i)
                }
                ParamTarget::MeshVertex { mesh, vertex, axis } => {
                    vertex_slots[mesh][vertex][axis] = Some(i)
                }
                ParamTarget::MeshEmission { mesh, axis } => mesh_emission[mesh][axis] = Some(i),
                ParamTarget::MaterialDiffuse { material, axis } => {
                    mat_diffuse[material][axis] = Some(i)
                }
                ParamTarget::MaterialSpecular { material, axis } => {
                    mat_specular[material][axis] = Some(i)
                }
            }
        }

        let camera_position = dual_vec3(scene.camera.position, cam_pos, dim);
        let camera_look_at = dual_vec3(scene.camera.look_at, cam_look, dim);
        let forward = camera_look_at.sub(&camera_position).normalized();
        let up_const = DVec3::constant(scene.camera.up);
        let right = forward.cross(&up_const).normalized();
        let up = right.cross(&forward);

        let world_vertices: Vec<Vec<DVec3>> = scene
            .meshes
            .iter()
            .enumerate()
            .map(|(mi, mesh)| {
                let t_slots = mesh_translation[mi];
                let translation = dual_vec3(mesh.translation, t_slots, dim);
                mesh.vertices
                    .iter()
                    .enumerate()
                    .map(|(vi, &v)| {
                        let vs = vertex_slots[mi][vi];
                        if vs == [None; 3] && t_slots == [None; 3] {
                            DVec3::constant(v + mesh.translation)
                        } else {
                            dual_vec3(v, vs, dim).add(&translation)
                        }
                    })
                    .collect()
            })
            .collect();

        // total emissive area with its parameter dependence, for the NEE pdf
        let mut total_emissive_area = Dual::constant(0.0);
        for (mi, mesh) in scene.meshes.iter().enumerate() {
            if !mesh.is_emissive() {
                continue;
            }
            for idx in &mesh.indices {
                let v0 = &world_vertices[mi][idx[0] as usize];
                let v1 = &world_vertices[mi][idx[1] as usize];
                let v2 = &world_vertices[mi][idx[2] as usize];
                let area = v1.sub(v0).cross(&v2.sub(v0)).length() * 0.5;
                total_emissive_area = total_emissive_area + area;
            }
        }

        DualScene {
            dim,
            camera_position,
            forward,
            right,
            up,
            tan_half_fov: (scene.camera.vertical_fov.to_radians() * 0.5).tan(),
            aspect: scene.camera.resolution.0 as f64 / scene.camera.resolution.1 as f64,
            width: scene.camera.resolution.0 as f64,
            height: scene.camera.resolution.1 as f64,
            world_vertices,
            diffuse: scene
                .materials
                .iter()
                .enumerate()
                .map(|(i, m)| dual_vec3(m.diffuse, mat_diffuse[i], dim))
                .collect(),
            specular: scene
                .materials
                .iter()
                .enumerate()
                .map(|(i, m)| dual_vec3(m.specular, mat_specular[i], dim))
                .collect(),
            shininess: scene.materials.iter().map(|m| m.shininess).collect(),
            emission: scene
                .meshes
                .iter()
                .enumerate()
                .map(|(i, m)| dual_vec3(m.emission, mesh_emission[i], dim))
                .collect(),
            total_emissive_area,
        }
    }

    /// Dual world vertices of a flat face index.
    pub fn face_vertices(&self, scene: &Scene, flat_face: usize) -> [&DVec3; 3] {
        let face = scene.face(flat_face);
        let mesh = &scene.meshes[face.mesh_id as usize];
        let idx = mesh.indices[face.face_id as usize];
        let verts = &self.world_vertices[face.mesh_id as usize];
        [
            &verts[idx[0] as usize],
            &verts[idx[1] as usize],
            &verts[idx[2] as usize],
        ]
    }

    /// Dual pinhole ray through a fixed screen point.
    pub fn primary_ray(&self, x: f64, y: f64) -> (DVec3, DVec3) {
        let ndc_x = 2.0 * x / self.width - 1.0;
        let ndc_y = 1.0 - 2.0 * y / self.height;
        let dir = self
            .forward
            .add(&self.right.scale_const(ndc_x * self.tan_half_fov * self.aspect))
            .add(&self.up.scale_const(ndc_y * self.tan_half_fov));
        (self.camera_position.clone(), dir.normalized())
    }

    /// Dual screen projection of a dual world point. `None` behind the
    /// near plane.
    pub fn project(&self, p: &DVec3) -> Option<(Dual, Dual)> {
        let rel = p.sub(&self.camera_position);
        let z = rel.dot(&self.forward);
        if z.v < crate::scene::CAMERA_NEAR {
            return None;
        }
        let inv_z = z.recip();
        let ndc_x = rel.dot(&self.right) * inv_z.clone() * (1.0 / (self.tan_half_fov * self.aspect));
        let ndc_y = rel.dot(&self.up) * inv_z * (1.0 / self.tan_half_fov);
        let sx = (ndc_x + Dual::constant(1.0)) * (0.5 * self.width);
        let sy = (Dual::constant(1.0) - ndc_y) * (0.5 * self.height);
        Some((sx, sy))
    }
}

/// BRDF value lifted to duals; branch structure mirrors `scene::brdf_eval`.
pub fn brdf_eval_dual(
    diffuse: &DVec3,
    specular: &DVec3,
    shininess: f64,
    n: &DVec3,
    wo: &DVec3,
    wi: &DVec3,
) -> DVec3 {
    let cos_o = n.dot(wo);
    let cos_i = n.dot(wi);
    if cos_o.v <= 0.0 || cos_i.v <= 0.0 {
        return DVec3::constant(Vec3::ZERO);
    }
    let d = diffuse.scale_const(1.0 / std::f64::consts::PI);
    let h = wo.add(wi).normalized();
    let cos_h = n.dot(&h).max_const(0.0);
    let norm = (shininess + 2.0) / (2.0 * std::f64::consts::PI);
    let lobe = cos_h.powf(shininess) * norm;
    d.add(&specular.scale(&lobe))
}

/// One bounce's differentiable shading context, exposed for secondary edge
/// sampling.
pub struct BounceReplay {
    pub position: DVec3,
    /// Oriented unit normal (value only; duals not needed downstream).
    pub normal: Vec3,
    pub wo: Vec3,
    /// Throughput up to this bounce, held fixed as an edge-term weight.
    pub throughput: Vec3,
    pub mesh_id: u32,
    pub flat_face: usize,
}

pub struct SampleReplay {
    /// The sample's radiance estimate as a dual RGB triple.
    pub contribution: DVec3,
    pub bounces: Vec<BounceReplay>,
}

/// Re-evaluate one sample's contribution with duals, holding the discrete
/// path structure in `path_state` fixed.
pub fn replay_path(scene: &Scene, dscene: &DualScene, path_state: &PathState) -> SampleReplay {
    let mut contribution = DVec3::constant(Vec3::ZERO);
    let mut bounces = Vec::with_capacity(path_state.bounces.len());
    let (mut origin, mut dir) = dscene.primary_ray(path_state.x, path_state.y);
    let mut throughput = DVec3::constant(Vec3::new(1.0, 1.0, 1.0));
    let mut wo = dir.neg();

    for record in &path_state.bounces {
        let [v0, v1, v2] = dscene.face_vertices(scene, record.flat_face);
        let n_unnorm = v1.sub(v0).cross(&v2.sub(v0));
        // ray-plane reprojection: the hit point moves with the face plane
        let denom = dir.dot(&n_unnorm);
        let t = v0.sub(&origin).dot(&n_unnorm) / denom.clone();
        let p = origin.add(&dir.scale(&t));
        let n_winding = n_unnorm.normalized();
        let n = if record.normal_flipped { n_winding.neg() } else { n_winding };

        let mesh_id = record.mesh_id as usize;
        let material_id = scene.meshes[mesh_id].material_id;

        if record.emission_added {
            contribution =
                contribution.add(&throughput.mul_componentwise(&dscene.emission[mesh_id]));
        }

        if let Some(light) = &record.light {
            if light.visible {
                // Detached estimator: the sampled direction is the fixed
                // coordinate, and the area-sampling importance weight
                // (total area * cos_l / d^2) enters at its current value
                // only. Its parameter dependence belongs to the boundary
                // term that edge sampling estimates.
                let delta = light.point - record.position;
                let wi = DVec3::constant(delta.normalized());
                let ln_val = scene
                    .face(light.flat_face)
                    .normal_unnormalized()
                    .normalized();
                let cos_p = n.dot(&wi);
                let cos_l_val = ln_val.dot(-delta.normalized());
                if cos_p.v > 0.0 && cos_l_val > 0.0 {
                    let light_mesh = scene.face(light.flat_face).mesh_id as usize;
                    let f = brdf_eval_dual(
                        &dscene.diffuse[material_id],
                        &dscene.specular[material_id],
                        dscene.shininess[material_id],
                        &n,
                        &wo,
                        &wi,
                    );
                    // 1 / pdf_area == total emissive area
                    let weight =
                        cos_l_val / delta.length_squared() * dscene.total_emissive_area.v;
                    let geom = cos_p * weight;
                    let term = throughput
                        .mul_componentwise(&f)
                        .mul_componentwise(&dscene.emission[light_mesh])
                        .scale(&geom);
                    contribution = contribution.add(&term);
                }
            }
        }

        bounces.push(BounceReplay {
            position: p.clone(),
            normal: n.value(),
            wo: wo.value(),
            throughput: record.throughput,
            mesh_id: record.mesh_id,
            flat_face: record.flat_face,
        });

        match &record.indirect {
            Some(ind) => {
                let wi = DVec3::constant(ind.direction);
                let f = brdf_eval_dual(
                    &dscene.diffuse[material_id],
                    &dscene.specular[material_id],
                    dscene.shininess[material_id],
                    &n,
                    &wo,
                    &wi,
                );
                let cos = n.dot(&wi).max_const(0.0);
                // pdf held fixed: detached sampling estimator
                let factor = f.scale(&(cos * (1.0 / ind.pdf)));
                throughput = throughput.mul_componentwise(&factor);
                origin = p;
                dir = wi;
                wo = DVec3::constant(-ind.direction);
            }
            None => break,
        }
    }

    SampleReplay { contribution, bounces }
}

/// Add one sample's smooth parameter gradient, weighted by the pixel
/// adjoint, to `grad_out`.
pub fn backprop_sample(
    scene: &Scene,
    dscene: &DualScene,
    path_state: &PathState,
    adjoint: &PixelAdjoint,
    grad_out: &mut GradientVector,
) {
    if adjoint.weight == Vec3::ZERO {
        return;
    }
    let replay = replay_path(scene, dscene, path_state);
    accumulate_weighted(&replay.contribution, adjoint.weight, grad_out);
}

pub(crate) fn accumulate_weighted(contribution: &DVec3, weight: Vec3, grad_out: &mut GradientVector) {
    // an empty dual gradient means identically zero
    for (g, w) in [
        (&contribution.x.g, weight.x),
        (&contribution.y.g, weight.y),
        (&contribution.z.g, weight.z),
    ] {
        if !g.is_empty() {
            grad_out.add_scaled(g, w);
        }
    }
}

/// Smooth-gradient part of the loss gradient: replays the same RNG streams
/// as `render` and accumulates `backprop_sample` over all samples.
///
/// Summation order is fixed (sample-major within pixel, pixel-major within
/// row, row order at merge), so the result is bitwise identical for any
/// worker count.
pub fn backprop_image(
    scene: &Scene,
    adjoint_image: &ImageBuffer,
    config: &RenderConfig,
) -> GradientVector {
    assert_eq!(
        (adjoint_image.width, adjoint_image.height),
        scene.camera.resolution,
        "adjoint image dimensions must match the camera resolution"
    );
    let dscene = DualScene::new(scene);
    let (w, h) = scene.camera.resolution;
    let dim = scene.registry.total_dim();
    let rows: Vec<GradientVector> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut grad = GradientVector::zeros(dim);
            let mut ps = PathState::default();
            for px in 0..w {
                let weight = adjoint_image.pixel(px, py) / config.spp as f64;
                if weight == Vec3::ZERO {
                    continue;
                }
                let adjoint = PixelAdjoint { px, py, weight };
                for s in 0..config.spp {
                    trace_pixel_sample(scene, px, py, s, config, Some(&mut ps));
                    backprop_sample(scene, &dscene, &ps, &adjoint, &mut grad);
                }
            }
            grad
        })
        .collect();
    let mut total = GradientVector::zeros(dim);
    for row in &rows {
        total.add(row);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::render;
    use crate::scene::load_scene;

    fn emitter_scene(extra: &str) -> Scene {
        load_scene(&format!(
            r#"{{
            "camera": {{
                "position": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                "fov": 45, "resolution": [8, 8]
            }},
            "materials": [{{"diffuse": [0.6, 0.5, 0.4], "specular": [0, 0, 0], "shininess": 1}}],
            "meshes": [{{
                "vertices": [-5, -5, 0, 5, -5, 0, 0, 5, 0],
                "indices": [0, 1, 2],
                "material": 0,
                "emission": [2, 1, 0.5]
            }}]{extra}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_adjoint_produces_zero_gradient() {
        let scene = emitter_scene(r#", "differentiable": ["mesh[0].emission"]"#);
        let config = RenderConfig { spp: 4, max_bounces: 1, seed: 1 };
        let adjoint = ImageBuffer::new(8, 8);
        let grad = backprop_image(&scene, &adjoint, &config);
        assert!(grad.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn emitter_pixel_emission_gradient_is_pixel_adjoint() {
        // pixel value is exactly the emission, so d pixel.r / d emission.r = 1
        let scene = emitter_scene(r#", "differentiable": ["mesh[0].emission"]"#);
        let config = RenderConfig { spp: 4, max_bounces: 0, seed: 1 };
        let mut adjoint = ImageBuffer::new(8, 8);
        adjoint.set_pixel(4, 4, Vec3::new(1.0, 0.0, 0.0));
        let grad = backprop_image(&scene, &adjoint, &config);
        assert!((grad.values[0] - 1.0).abs() < 1e-12, "{:?}", grad.values);
        assert_eq!(grad.values[1], 0.0);
        assert_eq!(grad.values[2], 0.0);
    }

    #[test]
    fn backprop_is_linear_in_the_adjoint() {
        let scene = emitter_scene(r#", "differentiable": ["mesh[0].emission"]"#);
        let config = RenderConfig { spp: 2, max_bounces: 1, seed: 9 };
        let mut a1 = ImageBuffer::new(8, 8);
        let mut a2 = ImageBuffer::new(8, 8);
        a1.set_pixel(2, 3, Vec3::new(1.0, 0.5, 0.25));
        a2.set_pixel(5, 6, Vec3::new(-0.5, 1.0, 2.0));
        let g1 = backprop_image(&scene, &a1, &config);
        let g2 = backprop_image(&scene, &a2, &config);
        let mut combined = ImageBuffer::new(8, 8);
        combined.set_pixel(2, 3, Vec3::new(2.0, 1.0, 0.5));
        combined.set_pixel(5, 6, Vec3::new(-1.5, 3.0, 6.0));
        let gc = backprop_image(&scene, &combined, &config);
        for i in 0..3 {
            let expect = 2.0 * g1.values[i] + 3.0 * g2.values[i];
            assert!((gc.values[i] - expect).abs() < 1e-12);
        }
    }

    /// Lambertian patch under a fixed area light: diffuse gradient must match
    /// a central finite difference of the renderer itself (no discontinuity
    /// is crossed by a reflectance perturbation).
    #[test]
    fn diffuse_gradient_matches_finite_difference() {
        let text = r#"{
            "camera": {
                "position": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                "fov": 45, "resolution": [8, 8]
            },
            "materials": [
                {"diffuse": [0.5, 0.4, 0.3], "specular": [0.1, 0.1, 0.1], "shininess": 20},
                {"diffuse": [0, 0, 0], "specular": [0, 0, 0], "shininess": 1}
            ],
            "meshes": [
                {
                    "vertices": [-5, -5, 0, 5, -5, 0, 5, 5, 0, -5, 5, 0],
                    "indices": [0, 1, 2, 0, 2, 3],
                    "material": 0
                },
                {
                    "vertices": [-1, -1, 2.5, 1, -1, 2.5, 0, 1, 2.5],
                    "indices": [0, 1, 2],
                    "material": 1,
                    "emission": [5, 5, 5]
                }
            ],
            "differentiable": ["material[0].diffuse"]
        }"#;
        let scene = load_scene(text).unwrap();
        let config = RenderConfig { spp: 16, max_bounces: 0, seed: 3 };
        // loss = sum of red channel over all pixels -> adjoint (1,0,0)
        let mut adjoint = ImageBuffer::new(8, 8);
        for py in 0..8 {
            for px in 0..8 {
                adjoint.set_pixel(px, py, Vec3::new(1.0, 0.0, 0.0));
            }
        }
        let grad = backprop_image(&scene, &adjoint, &config);

        let h = 1e-4;
        let base = scene.read_parameters();
        let red_sum = |s: &Scene| -> f64 {
            let img = render(s, &config);
            (0..8u32)
                .flat_map(|py| (0..8u32).map(move |px| (px, py)))
                .map(|(px, py)| img.pixel(px, py).x)
                .sum()
        };
        let mut plus = base.clone();
        plus[0] += h;
        let mut minus = base.clone();
        minus[0] -= h;
        let fd = (red_sum(&scene.apply_parameters(&plus).unwrap())
            - red_sum(&scene.apply_parameters(&minus).unwrap()))
            / (2.0 * h);
        let rel = (grad.values[0] - fd).abs() / fd.abs().max(1e-12);
        assert!(rel < 1e-3, "analytic {} vs fd {fd}", grad.values[0]);
    }

    #[test]
    fn worker_count_does_not_change_gradient() {
        let scene = emitter_scene(r#", "differentiable": ["mesh[0].emission"]"#);
        let config = RenderConfig { spp: 8, max_bounces: 1, seed: 4 };
        let mut adjoint = ImageBuffer::new(8, 8);
        for py in 0..8 {
            for px in 0..8 {
                adjoint.set_pixel(px, py, Vec3::new(0.3, -0.7, 1.1));
            }
        }
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| backprop_image(&scene, &adjoint, &config))
        };
        let g1 = run(1);
        let g4 = run(4);
        assert_eq!(g1.values, g4.values);
    }
}
