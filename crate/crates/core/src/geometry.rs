//! Ray casting: triangle intersection and a bounding-volume hierarchy.
//!
//! The BVH is read-only after construction and safe to traverse from many
//! workers. Build quality is not contractual; agreement with a linear scan is.

use crate::math::{Ray, Vec3};

/// Epsilon added to `t_min` of secondary/shadow rays to avoid self-hits.
pub const RAY_EPSILON: f64 = 1e-6;

/// A triangle in world space, tagged with the mesh/face it came from.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub mesh_id: u32,
    pub face_id: u32,
}

impl Face {
    /// Unnormalized geometric normal `(v1-v0) x (v2-v0)`.
    pub fn normal_unnormalized(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.normal_unnormalized().length()
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HitRecord {
    pub t: f64,
    /// Index into the flat face array used to build the BVH.
    pub face_index: usize,
    pub mesh_id: u32,
    pub face_id: u32,
    /// Barycentric coordinates (u, v) of v1 and v2; weight of v0 is 1-u-v.
    pub barycentric: (f64, f64),
    pub position: Vec3,
    /// Unit geometric normal, oriented to face the ray origin.
    pub geometric_normal: Vec3,
}

/// Moller-Trumbore. Returns (t, u, v) in the open interval (t_min, t_max).
fn intersect_triangle(face: &Face, ray: &Ray) -> Option<(f64, f64, f64)> {
    let e1 = face.v1 - face.v0;
    let e2 = face.v2 - face.v0;
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - face.v0;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t <= ray.t_min || t >= ray.t_max {
        return None;
    }
    Some((t, u, v))
}

fn make_hit(face: &Face, face_index: usize, ray: &Ray, t: f64, u: f64, v: f64) -> HitRecord {
    let mut n = face.normal_unnormalized().normalized();
    if n.dot(ray.direction) > 0.0 {
        n = -n;
    }
    HitRecord {
        t,
        face_index,
        mesh_id: face.mesh_id,
        face_id: face.face_id,
        barycentric: (u, v),
        position: ray.at(t),
        geometric_normal: n,
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vec3::splat(f64::INFINITY),
            max: Vec3::splat(f64::NEG_INFINITY),
        }
    }

    fn grow_point(&mut self, p: Vec3) {
        self.min = Vec3::new(self.min.x.min(p.x), self.min.y.min(p.y), self.min.z.min(p.z));
        self.max = Vec3::new(self.max.x.max(p.x), self.max.y.max(p.y), self.max.z.max(p.z));
    }

    fn grow_face(&mut self, f: &Face) {
        self.grow_point(f.v0);
        self.grow_point(f.v1);
        self.grow_point(f.v2);
    }

    fn hit(&self, ray: &Ray, inv_dir: Vec3, t_max: f64) -> bool {
        let mut t0 = ray.t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let lo = (self.min.component(i) - ray.origin.component(i)) * inv_dir.component(i);
            let hi = (self.max.component(i) - ray.origin.component(i)) * inv_dir.component(i);
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug)]
enum BvhNode {
    Leaf {
        bounds: Aabb,
        start: usize,
        count: usize,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

/// Median-split BVH over a face list. Every face appears in exactly one leaf.
#[derive(Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Permutation of face indices; leaves address contiguous ranges of it.
    order: Vec<usize>,
    root: usize,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(faces: &[Face]) -> Bvh {
        let mut order: Vec<usize> = (0..faces.len()).collect();
        let mut nodes = Vec::new();
        let root = if faces.is_empty() {
            nodes.push(BvhNode::Leaf { bounds: Aabb::empty(), start: 0, count: 0 });
            0
        } else {
            let len = order.len();
            Self::build_range(faces, &mut order, 0, len, &mut nodes)
        };
        Bvh { nodes, order, root }
    }

    fn build_range(
        faces: &[Face],
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<BvhNode>,
    ) -> usize {
        let mut bounds = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &fi in &order[start..end] {
            bounds.grow_face(&faces[fi]);
            centroid_bounds.grow_point(faces[fi].centroid());
        }
        let count = end - start;
        if count <= LEAF_SIZE {
            nodes.push(BvhNode::Leaf { bounds, start, count });
            return nodes.len() - 1;
        }
        let extent = centroid_bounds.max - centroid_bounds.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = start + count / 2;
        order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
            faces[a]
                .centroid()
                .component(axis)
                .total_cmp(&faces[b].centroid().component(axis))
        });
        let left = Self::build_range(faces, order, start, mid, nodes);
        let right = Self::build_range(faces, order, mid, end, nodes);
        nodes.push(BvhNode::Inner { bounds, left, right });
        nodes.len() - 1
    }

    /// Nearest hit with t in (t_min, t_max), or `None` on a miss.
    pub fn intersect(&self, faces: &[Face], ray: &Ray) -> Option<HitRecord> {
        self.intersect_filtered(faces, ray, |_| true)
    }

    /// Nearest hit among faces accepted by `accept` (by flat face index).
    pub fn intersect_filtered(
        &self,
        faces: &[Face],
        ray: &Ray,
        accept: impl Fn(usize) -> bool,
    ) -> Option<HitRecord> {
        let inv_dir = Vec3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<HitRecord> = None;
        let mut t_max = ray.t_max;
        let mut stack = vec![self.root];
        while let Some(ni) = stack.pop() {
            match &self.nodes[ni] {
                BvhNode::Leaf { bounds, start, count } => {
                    if *count == 0 || !bounds.hit(ray, inv_dir, t_max) {
                        continue;
                    }
                    for &fi in &self.order[*start..*start + *count] {
                        if !accept(fi) {
                            continue;
                        }
                        let clipped = Ray { t_max, ..*ray };
                        if let Some((t, u, v)) = intersect_triangle(&faces[fi], &clipped) {
                            t_max = t;
                            best = Some(make_hit(&faces[fi], fi, ray, t, u, v));
                        }
                    }
                }
                BvhNode::Inner { bounds, left, right } => {
                    if bounds.hit(ray, inv_dir, t_max) {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }

    /// True iff any face blocks the open segment, with epsilon offsets at
    /// both ends.
    pub fn occluded(&self, faces: &[Face], origin: Vec3, target: Vec3) -> bool {
        let delta = target - origin;
        let dist = delta.length();
        if dist <= 2.0 * RAY_EPSILON {
            return false;
        }
        let ray = Ray::with_range(origin, delta / dist, RAY_EPSILON, dist - RAY_EPSILON);
        let inv_dir = Vec3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut stack = vec![self.root];
        while let Some(ni) = stack.pop() {
            match &self.nodes[ni] {
                BvhNode::Leaf { bounds, start, count } => {
                    if *count == 0 || !bounds.hit(&ray, inv_dir, ray.t_max) {
                        continue;
                    }
                    for &fi in &self.order[*start..*start + *count] {
                        if intersect_triangle(&faces[fi], &ray).is_some() {
                            return true;
                        }
                    }
                }
                BvhNode::Inner { bounds, left, right } => {
                    if bounds.hit(&ray, inv_dir, ray.t_max) {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        false
    }
}

/// Exhaustive linear-scan intersection, kept as an oracle for the BVH.
pub fn intersect_linear(faces: &[Face], ray: &Ray) -> Option<HitRecord> {
    let mut best: Option<HitRecord> = None;
    let mut clipped = *ray;
    for (fi, face) in faces.iter().enumerate() {
        if let Some((t, u, v)) = intersect_triangle(face, &clipped) {
            clipped.t_max = t;
            best = Some(make_hit(face, fi, ray, t, u, v));
        }
    }
    best
}

/// Linear-scan occlusion oracle.
pub fn occluded_linear(faces: &[Face], origin: Vec3, target: Vec3) -> bool {
    let delta = target - origin;
    let dist = delta.length();
    if dist <= 2.0 * RAY_EPSILON {
        return false;
    }
    let ray = Ray::with_range(origin, delta / dist, RAY_EPSILON, dist - RAY_EPSILON);
    faces.iter().any(|f| intersect_triangle(f, &ray).is_some())
}
