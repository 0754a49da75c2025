//! Property tests for the invariants the library is built around.

use proptest::prelude::*;

use edgetrace_core::edge::{alpha_2d, alpha_3d, alpha_3d_grads, screen_gradient_norm};
use edgetrace_core::engine::{loss_adjoint, loss_value, Loss};
use edgetrace_core::render::ImageBuffer;
use edgetrace_core::rng::Pcg32;
use edgetrace_core::scene::load_scene;
use edgetrace_core::{Vec2, Vec3};

fn vec3() -> impl Strategy<Value = Vec3> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn vec2() -> impl Strategy<Value = Vec2> {
    (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #[test]
    fn alpha_2d_vanishes_on_the_segment(a in vec2(), b in vec2(), t in 0.0..1.0f64) {
        let x = a + (b - a) * t;
        let scale = screen_gradient_norm(a, b).max(1.0);
        prop_assert!(alpha_2d(a, b, x).abs() <= 1e-9 * scale * (a.length() + b.length() + 1.0));
    }

    #[test]
    fn alpha_2d_is_antisymmetric_in_endpoints(a in vec2(), b in vec2(), x in vec2()) {
        prop_assert!((alpha_2d(a, b, x) + alpha_2d(b, a, x)).abs() < 1e-9);
    }

    #[test]
    fn alpha_3d_is_translation_invariant(
        p in vec3(), v0 in vec3(), v1 in vec3(), m in vec3(), d in vec3()
    ) {
        let a = alpha_3d(p, v0, v1, m);
        let b = alpha_3d(p + d, v0 + d, v1 + d, m + d);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0) * (1.0 + d.length()));
    }

    #[test]
    fn alpha_3d_gradients_sum_to_zero(
        p in vec3(), v0 in vec3(), v1 in vec3(), m in vec3()
    ) {
        let g = alpha_3d_grads(p, v0, v1, m);
        prop_assert!((g.d_p + g.d_v0 + g.d_v1 + g.d_m).length() <= 1e-12);
    }

    #[test]
    fn rng_stays_in_unit_interval(seed in any::<u64>()) {
        let mut rng = Pcg32::new(seed);
        for _ in 0..100 {
            let u = rng.next_f64();
            prop_assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn sample_streams_are_reproducible(
        seed in any::<u64>(), px in 0u32..1024, py in 0u32..1024, s in 0u32..64
    ) {
        let mut a = Pcg32::for_sample(seed, 1, px, py, s);
        let mut b = Pcg32::for_sample(seed, 1, px, py, s);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u32(), b.next_u32());
        }
    }

    #[test]
    fn loss_of_identical_images_is_zero(vals in proptest::collection::vec(-5.0..5.0f64, 12)) {
        let mut img = ImageBuffer::new(2, 2);
        img.data.copy_from_slice(&vals);
        prop_assert_eq!(loss_value(Loss::L2, &img, &img), 0.0);
        prop_assert_eq!(loss_value(Loss::L1, &img, &img), 0.0);
        let adj = loss_adjoint(Loss::L2, &img, &img);
        prop_assert!(adj.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn losses_are_nonnegative(
        a in proptest::collection::vec(-5.0..5.0f64, 12),
        b in proptest::collection::vec(-5.0..5.0f64, 12)
    ) {
        let mut x = ImageBuffer::new(2, 2);
        let mut y = ImageBuffer::new(2, 2);
        x.data.copy_from_slice(&a);
        y.data.copy_from_slice(&b);
        prop_assert!(loss_value(Loss::L2, &x, &y) >= 0.0);
        prop_assert!(loss_value(Loss::L1, &x, &y) >= 0.0);
    }

    #[test]
    fn parameter_round_trip_is_identity(
        tx in -3.0..3.0f64, ty in -3.0..3.0f64, tz in -3.0..3.0f64,
        dr in 0.05..0.9f64
    ) {
        let scene = load_scene(&format!(r#"{{
            "camera": {{"position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0],
                       "fov": 45, "resolution": [4,4]}},
            "materials": [{{"diffuse": [{dr}, 0.2, 0.2], "specular": [0,0,0], "shininess": 1}}],
            "meshes": [{{"vertices": [-1,-1,0, 1,-1,0, 0,1,0],
                        "indices": [0,1,2], "material": 0}}],
            "differentiable": ["mesh[0].translation", "material[0].diffuse"]
        }}"#)).unwrap();
        let values = vec![tx, ty, tz, dr, 0.3, 0.1];
        let applied = scene.apply_parameters(&values).unwrap();
        prop_assert_eq!(applied.read_parameters(), values);
    }
}
