use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatnav_core::projection::{build_covariance, project_covariance, project_splat, COV2D_DILATION};
use splatnav_core::raster::TRANSMITTANCE_EPS;
use splatnav_core::synthetic::{check_scene, random_quat, random_splats};
use splatnav_core::{rasterize, Camera, Image, Quat, SplatSet, Vec3};

/// Per-pixel compositing over every splat in global depth order, no tiles.
fn reference(splats: &SplatSet<f64>, cam: &Camera<f64>) -> (Image<f64>, Image<f64>, Image<f64>) {
    let mut proj: Vec<_> = splats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| project_splat(i, s, cam).unwrap())
        .collect();
    proj.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));
    let (w, h) = (cam.width, cam.height);
    let mut color = Image::new(w, h, 3);
    let mut depth = Image::new(w, h, 1);
    let mut alpha = Image::new(w, h, 1);
    for r in 0..h {
        for c in 0..w {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            let mut t = 1.0;
            let mut rgb = [0.0; 3];
            let mut d = 0.0;
            for p in &proj {
                let m2 = p.mahalanobis_sq(px, py);
                if m2 > 9.0 {
                    continue;
                }
                let a = p.opacity * (-0.5 * m2).exp();
                for k in 0..3 {
                    rgb[k] += t * a * p.color[k];
                }
                d += t * a * p.depth;
                t *= 1.0 - a;
                if t < TRANSMITTANCE_EPS {
                    break;
                }
            }
            for k in 0..3 {
                color.set(r, c, k, rgb[k]);
            }
            depth.set(r, c, 0, d);
            alpha.set(r, c, 0, 1.0 - t);
        }
    }
    (color, depth, alpha)
}

fn orbit_camera(seed: u64, w: usize, h: usize) -> Camera<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let eye = Vec3::new(3.5 * th.cos(), 3.5 * th.sin(), rng.gen_range(-1.0..1.5));
    Camera::look_at(rng.gen_range(40.0..90.0), w, h, eye, Vec3::zero(), Vec3::new(0.0, 0.0, 1.0))
}

#[test]
fn tiled_render_matches_reference_compositing() {
    for seed in 0..12 {
        let splats = random_splats::<f64>(40, 0.9, (0.03, 0.35), seed);
        // Sizes that are not tile multiples exercise partial tiles.
        let cam = orbit_camera(seed, 53 + seed as usize, 37);
        let out = rasterize(&splats, &cam, None).unwrap();
        let (c, d, a) = reference(&splats, &cam);
        assert!(out.color.max_abs_diff(&c) < 1e-12, "seed {seed}");
        assert!(out.depth.max_abs_diff(&d) < 1e-12, "seed {seed}");
        assert!(out.alpha.max_abs_diff(&a) < 1e-12, "seed {seed}");
    }
}

#[test]
fn outputs_are_bounded() {
    for seed in 0..8 {
        let s = check_scene::<f64>(20, 32, seed);
        let out = rasterize(&s.splats, &s.camera, None).unwrap();
        assert!(out.alpha.data.iter().all(|&a| (0.0..=1.0).contains(&a)));
        assert!(out.color.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for p in 0..32 * 32 {
            let n = Vec3::new(out.normal.data[3 * p], out.normal.data[3 * p + 1], out.normal.data[3 * p + 2]);
            assert!(n.norm() <= out.alpha.data[p] + 1e-12);
        }
    }
}

#[test]
fn f32_render_tracks_f64() {
    let s = random_splats::<f64>(30, 0.8, (0.05, 0.3), 3);
    let cam = orbit_camera(3, 64, 48);
    let a = rasterize(&s, &cam, None).unwrap();
    let b = rasterize(&s.cast::<f32>(), &cam.cast::<f32>(), None).unwrap();
    let worst = a
        .color
        .data
        .iter()
        .zip(&b.color.data)
        .map(|(x, y)| (x - *y as f64).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn render_is_invariant_to_splat_order(seed in 0u64..1000, shuffle in any::<u64>()) {
        let splats = random_splats::<f64>(25, 0.8, (0.05, 0.3), seed);
        let cam = orbit_camera(seed, 48, 40);
        let mut perm = splats.splats.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let a = rasterize(&splats, &cam, None).unwrap();
        let b = rasterize(&SplatSet::new(perm), &cam, None).unwrap();
        prop_assert!(a.color.max_abs_diff(&b.color) <= 1e-12);
        prop_assert!(a.depth.max_abs_diff(&b.depth) <= 1e-12);
    }

    #[test]
    fn covariance_is_symmetric_psd_with_squared_scales(seed in any::<u64>(), s in prop::array::uniform3(1e-3f64..2.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Quat<f64> = random_quat(&mut rng);
        let cov = build_covariance(q, Vec3::from_array(s)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((cov.m[i][j] - cov.m[j][i]).abs() < 1e-12);
            }
        }
        let (ev, _) = cov.symmetric_eigen();
        let mut want = s.map(|x| x * x);
        let mut got = [ev.x, ev.y, ev.z];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for k in 0..3 {
            prop_assert!((got[k] - want[k]).abs() <= 1e-9 * want[2].max(1.0));
        }
        prop_assert!(got[0] >= -1e-12);
    }

    #[test]
    fn screen_covariance_is_positive_definite(seed in 0u64..500) {
        let splats = random_splats::<f64>(10, 0.8, (1e-3, 0.5), seed);
        let cam = orbit_camera(seed, 64, 48);
        for (i, s) in splats.iter().enumerate() {
            if let Some(c) = project_covariance(s, &cam).unwrap() {
                let scale = c.a.abs().max(c.c.abs()).max(1e-300);
                prop_assert!(c.a >= 0.0 && c.c >= 0.0);
                prop_assert!(c.determinant() >= -1e-9 * scale * scale);
                let p = project_splat(i, s, &cam).unwrap().unwrap();
                prop_assert!((p.cov2d.a - c.a - COV2D_DILATION).abs() <= 1e-9 * scale.max(1.0));
                prop_assert!(p.cov2d.determinant() > 0.0);
            }
        }
    }
}
