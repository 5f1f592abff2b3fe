use splatnav_core::gradcheck::{check_gradients, GradCheck, Tolerance, PARAM_NAMES};
use splatnav_core::optim::{FrameTargets, LossConfig};
use splatnav_core::synthetic::{check_scene, CheckScene};

fn only(term: &str) -> LossConfig {
    let mut c = LossConfig::rgb_only();
    c.rgb = term == "rgb";
    c.depth = term == "depth";
    c.normal = term == "normal";
    c.geo = term == "geo";
    c.scale = term == "scale";
    c.skip_empty = false;
    c
}

fn targets(s: &CheckScene<f64>) -> FrameTargets<'_, f64> {
    FrameTargets {
        camera: &s.camera,
        image: &s.image,
        depth: Some(&s.depth),
        pseudo_normals: Some(&s.pseudo),
        mask: None,
    }
}

fn run(term: &str, seeds: std::ops::Range<u64>) -> GradCheck {
    let mut all = GradCheck::default();
    for seed in seeds {
        let s = check_scene::<f64>(12, 32, seed);
        let r = check_gradients(&s.splats, &targets(&s), &only(term), 1e-7, &Tolerance::default()).unwrap();
        for m in r.mismatches.iter().take(3) {
            eprintln!(
                "{term} seed {seed} splat {} {}: analytic {:e} numeric {:e}",
                m.splat, PARAM_NAMES[m.param], m.analytic, m.numeric
            );
        }
        all.merge(r);
    }
    eprintln!("{term}: checked {} skipped {} max rel {:e}", all.checked, all.skipped, all.max_rel_err);
    assert!(all.skipped * 10 < all.checked, "too many probes crossed a support boundary");
    all
}

#[test]
fn rgb_gradient_matches_central_differences() {
    let r = run("rgb", 0..4);
    assert!(r.passed(), "{} of {} mismatched, max rel {:e}", r.mismatches.len(), r.checked, r.max_rel_err);
}

#[test]
fn depth_gradient_matches_central_differences() {
    let r = run("depth", 10..14);
    assert!(r.passed(), "{} of {} mismatched, max rel {:e}", r.mismatches.len(), r.checked, r.max_rel_err);
}

#[test]
fn normal_gradient_matches_central_differences() {
    let r = run("normal", 20..24);
    assert!(r.passed(), "{} of {} mismatched, max rel {:e}", r.mismatches.len(), r.checked, r.max_rel_err);
}

#[test]
fn geo_gradient_matches_central_differences() {
    let r = run("geo", 30..34);
    assert!(r.passed(), "{} of {} mismatched, max rel {:e}", r.mismatches.len(), r.checked, r.max_rel_err);
}

#[test]
fn scale_gradient_matches_central_differences() {
    let r = run("scale", 40..44);
    assert!(r.passed(), "{} of {} mismatched, max rel {:e}", r.mismatches.len(), r.checked, r.max_rel_err);
}

#[test]
fn weighted_total_gradient_matches_central_differences() {
    for seed in 50..53 {
        let s = check_scene::<f64>(16, 32, seed);
        let r = check_gradients(&s.splats, &targets(&s), &LossConfig::default(), 1e-7, &Tolerance::default()).unwrap();
        assert!(r.passed(), "seed {seed}: {:?}", &r.mismatches[..r.mismatches.len().min(3)]);
    }
}

#[test]
fn f32_gradient_agrees_with_f64() {
    let s = check_scene::<f64>(10, 32, 77);
    let s32 = check_scene::<f32>(10, 32, 77);
    let cfg = LossConfig::default();
    let g64 = splatnav_core::optim::loss_and_grad(&s.splats, &targets(&s), &cfg).unwrap();
    let t32 = FrameTargets {
        camera: &s32.camera,
        image: &s32.image,
        depth: Some(&s32.depth),
        pseudo_normals: Some(&s32.pseudo),
        mask: None,
    };
    let g32 = splatnav_core::optim::loss_and_grad(&s32.splats, &t32, &cfg).unwrap();
    assert!((g64.total - g32.total).abs() < 1e-4);
    for (a, b) in g64.grads.iter().zip(&g32.grads) {
        for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
            assert!((x - y as f64).abs() <= 1e-3 * x.abs().max(1e-2), "{x} vs {y}");
        }
    }
}

#[test]
fn single_axis_aligned_splat_photometric_gradient_at_coarse_step() {
    use splatnav_core::{Camera, Image, Quat, Splat, SplatSet, Vec3};
    let cam = Camera::<f64>::identity_pose(38.4, 32, 32);
    let splat = Splat::new(
        Vec3::new(0.05, -0.03, 3.0),
        Quat::identity(),
        Vec3::new(0.25, 0.15, 0.05),
        0.7,
        Vec3::new(0.8, 0.3, 0.5),
    );
    let mut image = Image::new(32, 32, 3);
    for r in 0..32 {
        for c in 0..32 {
            for k in 0..3 {
                image.set(r, c, k, 0.3 + 0.2 * ((r + 2 * c + k) as f64 * 0.3).sin());
            }
        }
    }
    let splats = SplatSet::new(vec![splat]);
    let t = FrameTargets {
        camera: &cam,
        image: &image,
        depth: None,
        pseudo_normals: None,
        mask: None,
    };
    let r = check_gradients(&splats, &t, &only("rgb"), 1e-4, &Tolerance::default()).unwrap();
    assert_eq!(r.skipped, 0);
    assert!(r.passed(), "{:?} max rel {:e}", r.mismatches, r.max_rel_err);
}

#[test]
fn full_objective_on_ten_splats_at_coarse_step() {
    let mut all = GradCheck::default();
    for seed in 60..63 {
        let s = check_scene::<f64>(10, 32, seed);
        all.merge(check_gradients(&s.splats, &targets(&s), &LossConfig::default(), 1e-4, &Tolerance::default()).unwrap());
    }
    eprintln!("coarse step: checked {} skipped {} refined {} max rel {:e}", all.checked, all.skipped, all.refined, all.max_rel_err);
    assert!(all.passed(), "{} mismatches, first {:?}", all.mismatches.len(), all.mismatches.first());
}
