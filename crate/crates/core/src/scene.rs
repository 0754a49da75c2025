//! Scene description, differentiable-parameter registry, and unique-edge
//! extraction.
//!
//! A `Scene` is immutable during rendering. `apply_parameters` produces a new
//! scene value with the registered scalars overwritten and all derived data
//! (world-space faces, BVH, edge list, light tables) rebuilt.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{Bvh, Face};
use crate::math::{Ray, Vec2, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error("non-manifold edge ({v0}, {v1}) in mesh {mesh}: more than two adjacent faces")]
    NonManifold { mesh: usize, v0: u32, v1: u32 },
    #[error("unknown differentiable parameter path '{0}'")]
    UnknownParameter(String),
    #[error("duplicate differentiable parameter path '{0}'")]
    DuplicateParameter(String),
    #[error("parameter vector length {got}, registry dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

fn invalid(msg: impl Into<String>) -> SceneError {
    SceneError::Validation(msg.into())
}

#[derive(Debug, Clone)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view, degrees, in (0, 180).
    pub vertical_fov: f64,
    pub resolution: (u32, u32),
}

/// Orthonormal camera frame: forward, right, up.
#[derive(Debug, Clone, Copy)]
pub struct CameraBasis {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub tan_half_fov: f64,
    pub aspect: f64,
}

pub const CAMERA_NEAR: f64 = 1e-4;

impl Camera {
    pub fn basis(&self) -> CameraBasis {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        CameraBasis {
            forward,
            right,
            up,
            tan_half_fov: (self.vertical_fov.to_radians() * 0.5).tan(),
            aspect: self.resolution.0 as f64 / self.resolution.1 as f64,
        }
    }

    /// Pinhole ray through the continuous screen point (x, y), y down.
    pub fn primary_ray(&self, x: f64, y: f64) -> Ray {
        let b = self.basis();
        let (w, h) = (self.resolution.0 as f64, self.resolution.1 as f64);
        let ndc_x = 2.0 * x / w - 1.0;
        let ndc_y = 1.0 - 2.0 * y / h;
        let dir = b.forward
            + b.right * (ndc_x * b.tan_half_fov * b.aspect)
            + b.up * (ndc_y * b.tan_half_fov);
        Ray::new(self.position, dir.normalized())
    }

    /// Screen-space projection of a world point, with its camera-space depth.
    /// Returns `None` behind the near plane.
    pub fn project(&self, p: Vec3) -> Option<(Vec2, f64)> {
        let b = self.basis();
        let rel = p - self.position;
        let z = rel.dot(b.forward);
        if z < CAMERA_NEAR {
            return None;
        }
        let ndc_x = rel.dot(b.right) / (z * b.tan_half_fov * b.aspect);
        let ndc_y = rel.dot(b.up) / (z * b.tan_half_fov);
        let (w, h) = (self.resolution.0 as f64, self.resolution.1 as f64);
        Some((Vec2::new((ndc_x + 1.0) * 0.5 * w, (1.0 - ndc_y) * 0.5 * h), z))
    }
}

#[derive(Debug, Clone)]
pub struct Material {
    pub diffuse: Vec3,
    pub specular: Vec3,
    pub shininess: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub indices: Vec<[u32; 3]>,
    /// Differentiable pose offset; world vertex = vertex + translation.
    pub translation: Vec3,
    pub material_id: usize,
    /// Area light iff any component > 0.
    pub emission: Vec3,
}

impl Mesh {
    pub fn world_vertex(&self, vi: usize) -> Vec3 {
        self.vertices[vi] + self.translation
    }

    pub fn is_emissive(&self) -> bool {
        self.emission.max_component() > 0.0
    }
}

/// A unique undirected mesh edge with its adjacent faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub v0: u32,
    pub v1: u32,
    pub face_a: u32,
    pub face_b: Option<u32>,
    pub mesh_id: u32,
}

/// Each undirected edge once, with 1 or 2 adjacent faces.
pub fn extract_edges(mesh: &Mesh, mesh_id: u32) -> Result<Vec<EdgeRecord>, SceneError> {
    let mut map: HashMap<(u32, u32), EdgeRecord> = HashMap::new();
    for (fi, idx) in mesh.indices.iter().enumerate() {
        for k in 0..3 {
            let a = idx[k];
            let b = idx[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            match map.get_mut(&key) {
                None => {
                    map.insert(
                        key,
                        EdgeRecord {
                            v0: key.0,
                            v1: key.1,
                            face_a: fi as u32,
                            face_b: None,
                            mesh_id,
                        },
                    );
                }
                Some(rec) if rec.face_b.is_none() => rec.face_b = Some(fi as u32),
                Some(_) => {
                    return Err(SceneError::NonManifold {
                        mesh: mesh_id as usize,
                        v0: key.0,
                        v1: key.1,
                    })
                }
            }
        }
    }
    let mut edges: Vec<EdgeRecord> = map.into_values().collect();
    edges.sort_by_key(|e| (e.v0, e.v1));
    Ok(edges)
}

/// One registered differentiable scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamTarget {
    CameraPosition(usize),
    CameraLookAt(usize),
    MeshTranslation { mesh: usize, axis: usize },
    MeshVertex { mesh: usize, vertex: usize, axis: usize },
    MeshEmission { mesh: usize, axis: usize },
    MaterialDiffuse { material: usize, axis: usize },
    MaterialSpecular { material: usize, axis: usize },
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    /// Per-scalar path, e.g. "mesh[0].translation.x".
    pub path: String,
    pub target: ParamTarget,
}

/// Ordered map from differentiable scalars to positions in a flat vector.
#[derive(Debug, Clone, Default)]
pub struct ParameterRegistry {
    entries: Vec<ParamEntry>,
}

const AXES: [&str; 3] = ["x", "y", "z"];
const RGB: [&str; 3] = ["r", "g", "b"];

impl ParameterRegistry {
    pub fn total_dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn index_of(&self, path: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.path == path)
    }

    /// Expand a declared group path ("mesh[0].translation") into scalar
    /// entries and append them.
    fn declare(
        &mut self,
        path: &str,
        camera_only: &Camera,
        meshes: &[Mesh],
        materials: &[Material],
    ) -> Result<(), SceneError> {
        let _ = camera_only;
        let mut push = |path: String, target: ParamTarget| -> Result<(), SceneError> {
            if self.entries.iter().any(|e| e.path == path) {
                return Err(SceneError::DuplicateParameter(path));
            }
            self.entries.push(ParamEntry { path, target });
            Ok(())
        };
        if path == "camera.position" {
            for (i, ax) in AXES.iter().enumerate() {
                push(format!("camera.position.{ax}"), ParamTarget::CameraPosition(i))?;
            }
            return Ok(());
        }
        if path == "camera.look_at" {
            for (i, ax) in AXES.iter().enumerate() {
                push(format!("camera.look_at.{ax}"), ParamTarget::CameraLookAt(i))?;
            }
            return Ok(());
        }
        if let Some(rest) = path.strip_prefix("mesh[") {
            let (idx_str, field) = rest
                .split_once("].")
                .ok_or_else(|| SceneError::UnknownParameter(path.to_string()))?;
            let mesh: usize = idx_str
                .parse()
                .map_err(|_| SceneError::UnknownParameter(path.to_string()))?;
            if mesh >= meshes.len() {
                return Err(invalid(format!("mesh index {mesh} out of range in '{path}'")));
            }
            match field {
                "translation" => {
                    for (i, ax) in AXES.iter().enumerate() {
                        push(
                            format!("mesh[{mesh}].translation.{ax}"),
                            ParamTarget::MeshTranslation { mesh, axis: i },
                        )?;
                    }
                    return Ok(());
                }
                "vertices" => {
                    for v in 0..meshes[mesh].vertices.len() {
                        for (i, ax) in AXES.iter().enumerate() {
                            push(
                                format!("mesh[{mesh}].vertices[{v}].{ax}"),
                                ParamTarget::MeshVertex { mesh, vertex: v, axis: i },
                            )?;
                        }
                    }
                    return Ok(());
                }
                "emission" => {
                    for (i, ch) in RGB.iter().enumerate() {
                        push(
                            format!("mesh[{mesh}].emission.{ch}"),
                            ParamTarget::MeshEmission { mesh, axis: i },
                        )?;
                    }
                    return Ok(());
                }
                _ => return Err(SceneError::UnknownParameter(path.to_string())),
            }
        }
        if let Some(rest) = path.strip_prefix("material[") {
            let (idx_str, field) = rest
                .split_once("].")
                .ok_or_else(|| SceneError::UnknownParameter(path.to_string()))?;
            let material: usize = idx_str
                .parse()
                .map_err(|_| SceneError::UnknownParameter(path.to_string()))?;
            if material >= materials.len() {
                return Err(invalid(format!(
                    "material index {material} out of range in '{path}'"
                )));
            }
            match field {
                "diffuse" => {
                    for (i, ch) in RGB.iter().enumerate() {
                        push(
                            format!("material[{material}].diffuse.{ch}"),
                            ParamTarget::MaterialDiffuse { material, axis: i },
                        )?;
                    }
                    return Ok(());
                }
                "specular" => {
                    for (i, ch) in RGB.iter().enumerate() {
                        push(
                            format!("material[{material}].specular.{ch}"),
                            ParamTarget::MaterialSpecular { material, axis: i },
                        )?;
                    }
                    return Ok(());
                }
                _ => return Err(SceneError::UnknownParameter(path.to_string())),
            }
        }
        Err(SceneError::UnknownParameter(path.to_string()))
    }
}

/// Dense gradient accumulator aligned with the `ParameterRegistry`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

impl GradientVector {
    pub fn zeros(dim: usize) -> Self {
        GradientVector { values: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&mut self, other: &GradientVector) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &[f64], scale: f64) {
        debug_assert_eq!(self.values.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += b * scale;
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Geometry and light tables derived from the mesh list, rebuilt whenever
/// parameters change.
#[derive(Debug)]
pub struct SceneAccel {
    /// World-space faces, flat across meshes in (mesh, face) order.
    pub faces: Vec<Face>,
    pub bvh: Bvh,
    /// Flat face index of the first face of each mesh.
    pub face_offsets: Vec<usize>,
    /// Flat face indices of emissive faces, with an area CDF for selection.
    pub light_faces: Vec<usize>,
    pub light_cdf: Vec<f64>,
    pub total_emissive_area: f64,
    /// Per-mesh unique edges.
    pub edges: Vec<Vec<EdgeRecord>>,
}

#[derive(Debug)]
pub struct Scene {
    pub camera: Camera,
    pub materials: Vec<Material>,
    pub meshes: Vec<Mesh>,
    pub registry: ParameterRegistry,
    pub accel: SceneAccel,
}

impl Scene {
    pub fn new(
        camera: Camera,
        materials: Vec<Material>,
        meshes: Vec<Mesh>,
        registry: ParameterRegistry,
    ) -> Result<Scene, SceneError> {
        validate(&camera, &materials, &meshes)?;
        let accel = build_accel(&meshes)?;
        Ok(Scene { camera, materials, meshes, registry, accel })
    }

    pub fn face(&self, flat: usize) -> &Face {
        &self.accel.faces[flat]
    }

    pub fn flat_face_index(&self, mesh_id: u32, face_id: u32) -> usize {
        self.accel.face_offsets[mesh_id as usize] + face_id as usize
    }

    pub fn material_of_mesh(&self, mesh_id: u32) -> &Material {
        &self.materials[self.meshes[mesh_id as usize].material_id]
    }

    /// Read the registered scalars back as a flat vector.
    pub fn read_parameters(&self) -> Vec<f64> {
        self.registry
            .entries
            .iter()
            .map(|e| match e.target {
                ParamTarget::CameraPosition(i) => self.camera.position.component(i),
                ParamTarget::CameraLookAt(i) => self.camera.look_at.component(i),
                ParamTarget::MeshTranslation { mesh, axis } => {
                    self.meshes[mesh].translation.component(axis)
                }
                ParamTarget::MeshVertex { mesh, vertex, axis } => {
                    self.meshes[mesh].vertices[vertex].component(axis)
                }
                ParamTarget::MeshEmission { mesh, axis } => {
                    self.meshes[mesh].emission.component(axis)
                }
                ParamTarget::MaterialDiffuse { material, axis } => {
                    self.materials[material].diffuse.component(axis)
                }
                ParamTarget::MaterialSpecular { material, axis } => {
                    self.materials[material].specular.component(axis)
                }
            })
            .collect()
    }

    /// New scene with the registered scalars overwritten by `values`.
    pub fn apply_parameters(&self, values: &[f64]) -> Result<Scene, SceneError> {
        if values.len() != self.registry.total_dim() {
            return Err(SceneError::DimensionMismatch {
                got: values.len(),
                want: self.registry.total_dim(),
            });
        }
        let mut camera = self.camera.clone();
        let mut materials = self.materials.clone();
        let mut meshes = self.meshes.clone();
        for (entry, &v) in self.registry.entries.iter().zip(values) {
            match entry.target {
                ParamTarget::CameraPosition(i) => *camera.position.component_mut(i) = v,
                ParamTarget::CameraLookAt(i) => *camera.look_at.component_mut(i) = v,
                ParamTarget::MeshTranslation { mesh, axis } => {
                    *meshes[mesh].translation.component_mut(axis) = v
                }
                ParamTarget::MeshVertex { mesh, vertex, axis } => {
                    *meshes[mesh].vertices[vertex].component_mut(axis) = v
                }
                ParamTarget::MeshEmission { mesh, axis } => {
                    *meshes[mesh].emission.component_mut(axis) = v
                }
                ParamTarget::MaterialDiffuse { material, axis } => {
                    *materials[material].diffuse.component_mut(axis) = v
                }
                ParamTarget::MaterialSpecular { material, axis } => {
                    *materials[material].specular.component_mut(axis) = v
                }
            }
        }
        Scene::new(camera, materials, meshes, self.registry.clone())
    }

    /// Sample a point on an emissive face, uniform by area over all lights.
    /// Returns (flat face index, barycentric uv, point, pdf over area).
    pub fn sample_light(&self, u_select: f64, u1: f64, u2: f64) -> Option<LightSample> {
        if self.accel.light_faces.is_empty() {
            return None;
        }
        let target = u_select * self.accel.total_emissive_area;
        let k = self
            .accel
            .light_cdf
            .partition_point(|&c| c < target)
            .min(self.accel.light_faces.len() - 1);
        let flat = self.accel.light_faces[k];
        let face = &self.accel.faces[flat];
        // uniform barycentric via square-root warp
        let su = u1.sqrt();
        let b1 = 1.0 - su;
        let b2 = u2 * su;
        let point = face.v0 * (1.0 - b1 - b2) + face.v1 * b1 + face.v2 * b2;
        Some(LightSample {
            flat_face: flat,
            barycentric: (b1, b2),
            point,
            normal: face.normal_unnormalized().normalized(),
            emission: self.meshes[face.mesh_id as usize].emission,
            pdf_area: 1.0 / self.accel.total_emissive_area,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LightSample {
    pub flat_face: usize,
    pub barycentric: (f64, f64),
    pub point: Vec3,
    pub normal: Vec3,
    pub emission: Vec3,
    pub pdf_area: f64,
}

fn validate(camera: &Camera, materials: &[Material], meshes: &[Mesh]) -> Result<(), SceneError> {
    if !(camera.vertical_fov > 0.0 && camera.vertical_fov < 180.0) {
        return Err(invalid(format!("camera fov {} outside (0, 180)", camera.vertical_fov)));
    }
    if camera.resolution.0 == 0 || camera.resolution.1 == 0 {
        return Err(invalid("camera resolution must be nonzero"));
    }
    let view = camera.look_at - camera.position;
    if view.length() < 1e-12 {
        return Err(invalid("camera look_at coincides with position"));
    }
    if view.normalized().cross(camera.up).length() < 1e-9 {
        return Err(invalid("camera up is parallel to the view direction"));
    }
    for (i, m) in materials.iter().enumerate() {
        for c in 0..3 {
            let d = m.diffuse.component(c);
            let s = m.specular.component(c);
            if !(0.0..=1.0).contains(&d) || !(0.0..=1.0).contains(&s) || d + s > 1.0 + 1e-12 {
                return Err(invalid(format!(
                    "material[{i}] violates diffuse + specular <= 1 in channel {c}"
                )));
            }
        }
        if !(m.shininess > 0.0) {
            return Err(invalid(format!("material[{i}].shininess must be > 0")));
        }
    }
    for (mi, mesh) in meshes.iter().enumerate() {
        if mesh.material_id >= materials.len() {
            return Err(invalid(format!(
                "mesh[{mi}].material index {} out of range ({} materials)",
                mesh.material_id,
                materials.len()
            )));
        }
        if mesh.emission.min_component() < 0.0 {
            return Err(invalid(format!("mesh[{mi}].emission must be non-negative")));
        }
        for (fi, idx) in mesh.indices.iter().enumerate() {
            for &v in idx {
                if v as usize >= mesh.vertices.len() {
                    return Err(invalid(format!(
                        "mesh[{mi}] face {fi} vertex index {v} out of range"
                    )));
                }
            }
            let a = mesh.vertices[idx[0] as usize];
            let b = mesh.vertices[idx[1] as usize];
            let c = mesh.vertices[idx[2] as usize];
            if (b - a).cross(c - a).length() < 1e-12 {
                return Err(invalid(format!("mesh[{mi}] face {fi} is degenerate (zero area)")));
            }
        }
    }
    Ok(())
}

fn build_accel(meshes: &[Mesh]) -> Result<SceneAccel, SceneError> {
    let mut faces = Vec::new();
    let mut face_offsets = Vec::with_capacity(meshes.len());
    let mut edges = Vec::with_capacity(meshes.len());
    for (mi, mesh) in meshes.iter().enumerate() {
        face_offsets.push(faces.len());
        for (fi, idx) in mesh.indices.iter().enumerate() {
            faces.push(Face {
                v0: mesh.world_vertex(idx[0] as usize),
                v1: mesh.world_vertex(idx[1] as usize),
                v2: mesh.world_vertex(idx[2] as usize),
                mesh_id: mi as u32,
                face_id: fi as u32,
            });
        }
        edges.push(extract_edges(mesh, mi as u32)?);
    }
    let bvh = Bvh::build(&faces);
    let mut light_faces = Vec::new();
    let mut light_cdf = Vec::new();
    let mut total = 0.0;
    for (flat, face) in faces.iter().enumerate() {
        if meshes[face.mesh_id as usize].is_emissive() {
            total += face.area();
            light_faces.push(flat);
            light_cdf.push(total);
        }
    }
    Ok(SceneAccel {
        faces,
        bvh,
        face_offsets,
        light_faces,
        light_cdf,
        total_emissive_area: total,
        edges,
    })
}

// ---------------------------------------------------------------------------
// JSON loading

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    camera: CameraFile,
    #[serde(default)]
    materials: Vec<MaterialFile>,
    #[serde(default)]
    meshes: Vec<MeshFile>,
    #[serde(default)]
    differentiable: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    position: [f64; 3],
    look_at: [f64; 3],
    up: [f64; 3],
    fov: f64,
    resolution: [u32; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    diffuse: [f64; 3],
    specular: [f64; 3],
    shininess: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<f64>,
    indices: Vec<u32>,
    #[serde(default)]
    material: usize,
    #[serde(default)]
    translation: [f64; 3],
    #[serde(default)]
    emission: [f64; 3],
}

/// Parse and validate a scene from its JSON text.
pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    let file: SceneFile = serde_json::from_str(text)?;
    let camera = Camera {
        position: Vec3::from_array(file.camera.position),
        look_at: Vec3::from_array(file.camera.look_at),
        up: Vec3::from_array(file.camera.up),
        vertical_fov: file.camera.fov,
        resolution: (file.camera.resolution[0], file.camera.resolution[1]),
    };
    let materials: Vec<Material> = file
        .materials
        .iter()
        .map(|m| Material {
            diffuse: Vec3::from_array(m.diffuse),
            specular: Vec3::from_array(m.specular),
            shininess: m.shininess,
        })
        .collect();
    let mut meshes = Vec::with_capacity(file.meshes.len());
    for (mi, m) in file.meshes.iter().enumerate() {
        if m.vertices.len() % 3 != 0 {
            return Err(invalid(format!("mesh[{mi}].vertices length not a multiple of 3")));
        }
        if m.indices.len() % 3 != 0 {
            return Err(invalid(format!("mesh[{mi}].indices length not a multiple of 3")));
        }
        meshes.push(Mesh {
            vertices: m
                .vertices
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
            indices: m.indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            translation: Vec3::from_array(m.translation),
            material_id: m.material,
            emission: Vec3::from_array(m.emission),
        });
    }
    let mut registry = ParameterRegistry::default();
    for path in &file.differentiable {
        registry.declare(path, &camera, &meshes, &materials)?;
    }
    Scene::new(camera, materials, meshes, registry)
}

/// Energy-normalized Lambert + Blinn-Phong BRDF value for a pair of unit
/// directions on the upper hemisphere of `n`.
pub fn brdf_eval(material: &Material, n: Vec3, wo: Vec3, wi: Vec3) -> Vec3 {
    let cos_o = n.dot(wo);
    let cos_i = n.dot(wi);
    if cos_o <= 0.0 || cos_i <= 0.0 {
        return Vec3::ZERO;
    }
    let diffuse = material.diffuse / PI;
    let h = (wo + wi).normalized();
    let cos_h = n.dot(h).max(0.0);
    let norm = (material.shininess + 2.0) / (2.0 * PI);
    diffuse + material.specular * (norm * cos_h.powf(material.shininess))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "camera": {
            "position": [0, 0, 3],
            "look_at": [0, 0, 0],
            "up": [0, 1, 0],
            "fov": 45,
            "resolution": [16, 16]
        },
        "materials": [
            {"diffuse": [0.5, 0.5, 0.5], "specular": [0, 0, 0], "shininess": 1}
        ],
        "meshes": [
            {
                "vertices": [-1, -1, 0, 1, -1, 0, 0, 1, 0],
                "indices": [0, 1, 2],
                "material": 0,
                "emission": [1, 1, 1]
            }
        ]
    }"#;

    #[test]
    fn minimal_scene_loads() {
        let scene = load_scene(MINIMAL).unwrap();
        assert_eq!(scene.accel.edges[0].len(), 3);
        assert_eq!(scene.registry.total_dim(), 0);
        assert!(scene.accel.edges[0].iter().all(|e| e.face_b.is_none()));
    }

    #[test]
    fn translation_parameter_registers_three_scalars() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["differentiable"] = serde_json::json!(["mesh[0].translation"]);
        let scene = load_scene(&v.to_string()).unwrap();
        assert_eq!(scene.registry.total_dim(), 3);
        assert_eq!(scene.registry.index_of("mesh[0].translation.y"), Some(1));
    }

    #[test]
    fn duplicate_parameter_path_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["differentiable"] =
            serde_json::json!(["mesh[0].translation", "mesh[0].translation"]);
        match load_scene(&v.to_string()) {
            Err(SceneError::DuplicateParameter(_)) => {}
            other => panic!("expected duplicate-parameter error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["frobnicate"] = serde_json::json!(1);
        assert!(load_scene(&v.to_string()).is_err());
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["meshes"][0]["vertices"] = serde_json::json!([0, 0, 0, 1, 1, 1, 2, 2, 2]);
        match load_scene(&v.to_string()) {
            Err(SceneError::Validation(msg)) => assert!(msg.contains("degenerate")),
            other => panic!("expected degenerate-face error, got {other:?}"),
        }
    }

    #[test]
    fn quad_has_five_edges_one_interior() {
        let mesh = Mesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            indices: vec![[0, 1, 2], [0, 2, 3]],
            translation: Vec3::ZERO,
            material_id: 0,
            emission: Vec3::ZERO,
        };
        let edges = extract_edges(&mesh, 0).unwrap();
        assert_eq!(edges.len(), 5);
        assert_eq!(edges.iter().filter(|e| e.face_b.is_some()).count(), 1);
    }

    #[test]
    fn tetrahedron_edge_count_matches_euler_formula() {
        // V - E + F = 2 with V = 4, F = 4 forces E = 6, all interior.
        let mesh = Mesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            indices: vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
            translation: Vec3::ZERO,
            material_id: 0,
            emission: Vec3::ZERO,
        };
        let edges = extract_edges(&mesh, 0).unwrap();
        assert_eq!(edges.len(), 6);
        assert!(edges.iter().all(|e| e.face_b.is_some()));
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let mesh = Mesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(0.0, -1.0, 0.0),
            ],
            indices: vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
            translation: Vec3::ZERO,
            material_id: 0,
            emission: Vec3::ZERO,
        };
        assert!(matches!(extract_edges(&mesh, 0), Err(SceneError::NonManifold { .. })));
    }

    #[test]
    fn apply_read_round_trip_is_identity() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["differentiable"] =
            serde_json::json!(["mesh[0].translation", "material[0].diffuse"]);
        let scene = load_scene(&v.to_string()).unwrap();
        let params = vec![0.1, -0.2, 0.3, 0.4, 0.5, 0.05];
        let scene2 = scene.apply_parameters(&params).unwrap();
        assert_eq!(scene2.read_parameters(), params);
        // and the original is untouched
        assert_eq!(scene.read_parameters(), vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn apply_parameters_shifts_world_vertices() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["differentiable"] = serde_json::json!(["mesh[0].translation"]);
        let scene = load_scene(&v.to_string()).unwrap();
        let h = 0.25;
        let scene2 = scene.apply_parameters(&[h, 0.0, 0.0]).unwrap();
        for (f1, f2) in scene.accel.faces.iter().zip(&scene2.accel.faces) {
            assert_eq!(f2.v0, f1.v0 + Vec3::new(h, 0.0, 0.0));
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let scene = load_scene(MINIMAL).unwrap();
        assert!(matches!(
            scene.apply_parameters(&[1.0]),
            Err(SceneError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn edge_counts_sum_over_meshes() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let mesh = v["meshes"][0].clone();
        v["meshes"] = serde_json::json!([mesh.clone(), mesh]);
        let scene = load_scene(&v.to_string()).unwrap();
        let total: usize = scene.accel.edges.iter().map(|e| e.len()).sum();
        assert_eq!(total, 6);
    }
}
