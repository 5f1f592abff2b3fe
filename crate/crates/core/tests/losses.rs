use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatnav_core::losses::{
    geo_consistency_loss, ncc_depth_loss, normal_loss, pseudo_normals_from_depth, rgb_loss, scale_loss, PatchGrid,
    DEFAULT_PCA_RADIUS,
};
use splatnav_core::synthetic::check_scene;
use splatnav_core::{rasterize, Camera, Image};

/// Smooth random field with enough texture for every patch.
fn field(seed: u64, w: usize, h: usize, channels: usize) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: [f64; 6] = std::array::from_fn(|_| rng.gen_range(0.2..1.5));
    let ph: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..6.3));
    let mut img = Image::new(w, h, channels);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..channels {
                let (x, y) = (c as f64, r as f64);
                let v = 0.5
                    + 0.25 * (f[0] * x + ph[ch % 3]).sin() * (f[1] * y).cos()
                    + 0.1 * (f[2 + ch % 3] * (x + y)).sin()
                    + 0.05 * rng.gen_range(-1.0..1.0);
                img.set(r, c, ch, v);
            }
        }
    }
    img
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ncc_is_affine_invariant(seed in any::<u64>(), a in 1e-3f64..1e3, b in -1e3f64..1e3) {
        let d = field(seed, 32, 32, 1).map(|v| 1.0 + 4.0 * v);
        let g = PatchGrid::default_for(32, 32).unwrap();
        let e = ncc_depth_loss(&d.map(|v| a * v + b), &d, &g, None).unwrap();
        prop_assert!(e.value.abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn ncc_loss_lies_in_zero_two(s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = PatchGrid::new(7, 5, 24, 24).unwrap();
        let e = ncc_depth_loss(&field(s1, 24, 24, 1), &field(s2, 24, 24, 1), &g, None).unwrap();
        prop_assert!((0.0..=2.0).contains(&e.value));
        let flipped = ncc_depth_loss(&field(s1, 24, 24, 1).map(|v| -v), &field(s1, 24, 24, 1), &g, None).unwrap();
        prop_assert!((flipped.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rgb_loss_is_non_negative_and_zero_on_match(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (x, y) = (field(s1, 20, 20, 3), field(s2, 20, 20, 3));
        prop_assert!(rgb_loss(&x, &y, None).unwrap().value >= 0.0);
        prop_assert!(rgb_loss(&x, &x, None).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn normal_losses_are_bounded(seed in 0u64..10_000) {
        let s = check_scene::<f64>(15, 32, seed);
        let r = rasterize(&s.splats, &s.camera, None).unwrap();
        if let Ok(e) = normal_loss(&r.normal, &s.pseudo) {
            prop_assert!((0.0..=2.0).contains(&e.value));
        }
        let geo = geo_consistency_loss(&r.normal, &s.depth).unwrap();
        prop_assert!((0.0..=2.0).contains(&geo.value));
    }
}

#[test]
fn geo_loss_vanishes_for_constant_normals() {
    let mut n = Image::new(16, 12, 3);
    for p in 0..16 * 12 {
        n.data[3 * p..3 * p + 3].copy_from_slice(&[0.1, -0.3, -0.9]);
    }
    let d = field(3, 16, 12, 1);
    assert!(geo_consistency_loss(&n, &d).unwrap().value.abs() < 1e-12);
}

#[test]
fn pseudo_normals_of_a_fronto_parallel_plane_face_the_camera() {
    let cam = Camera::<f64>::identity_pose(30.0, 24, 20);
    let d = Image::filled(24, 20, 1, 2.5);
    let p = pseudo_normals_from_depth(&d, &cam, DEFAULT_PCA_RADIUS);
    assert!(p.valid.count() > 0);
    for pix in 0..24 * 20 {
        if p.valid.data[pix] {
            let z = p.normals.data[3 * pix + 2];
            assert!((z + 1.0).abs() < 1e-9, "{z}");
        }
    }
}

#[test]
fn losses_are_bit_stable() {
    let s = check_scene::<f64>(12, 32, 9);
    let r = rasterize(&s.splats, &s.camera, None).unwrap();
    let g = PatchGrid::default_for(32, 32).unwrap();
    for _ in 0..3 {
        assert_eq!(rgb_loss(&r.color, &s.image, None).unwrap(), rgb_loss(&r.color, &s.image, None).unwrap());
        assert_eq!(
            ncc_depth_loss(&r.depth, &s.depth, &g, None).unwrap(),
            ncc_depth_loss(&r.depth, &s.depth, &g, None).unwrap()
        );
    }
    assert_eq!(scale_loss(&s.splats).0, scale_loss(&s.splats).0);
}
