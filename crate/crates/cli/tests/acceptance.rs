//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criteria run concurrently; output order is fixed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatnav_core::culling::{cull_mask, exceeds_threshold, stress_view};
use splatnav_core::gradcheck::{check_gradients, GradCheck, Tolerance};
use splatnav_core::losses::{ncc_depth_loss, PatchGrid};
use splatnav_core::mesh::trimesh::norm;
use splatnav_core::mesh::{
    connected_ground, default_seed_region, extract_mesh, fusable_depth, ground_faces_from_masks, ground_faces_from_vector,
    ground_mask, marching_cubes, FusionConfig, GroundView, TriangleMesh, TsdfVolume, VectorGround, DEFAULT_MAX_REL_JUMP,
};
use splatnav_core::optim::{evaluate_views, FrameTargets, LossConfig};
use splatnav_core::raster::rasterize_with_state;
use splatnav_core::synthetic::{
    check_scene, mean_normal_error_deg, orbit_cameras, plane_box_scene, plane_cameras, plane_init, random_splats,
    render_frames, self_reconstruction_scene, textured_plane, PlaneBox,
};
use splatnav_core::{rasterize, train, CullConfig, FrameDataset, Image, Splat, TrainConfig, TrainReport, Vec3};
use splatnav_sim::collision::{brute_force_query, Bvh, SweptDisc, Triangle};
use splatnav_sim::dynamics::PHYSICS_DT;
use splatnav_sim::grid::OccupancyGrid;
use splatnav_sim::reward::StepOutcome;
use splatnav_sim::{
    compute_metrics, compute_reward, rollout, step_dynamics, Action, AgentState, BicycleParams, Env, EnvOptions,
    EpisodeRecord, OraclePolicy, RewardWeights, Scene, Task, TerminalReason,
};

type Outcome = (bool, String);

fn gradients() -> Outcome {
    let terms = ["rgb", "depth", "normal", "geo", "scale"];
    let tol = Tolerance::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (t, term) in terms.iter().enumerate() {
        let mut cfg = LossConfig::rgb_only();
        cfg.rgb = *term == "rgb";
        cfg.depth = *term == "depth";
        cfg.normal = *term == "normal";
        cfg.geo = *term == "geo";
        cfg.scale = *term == "scale";
        cfg.skip_empty = false;
        let mut all = GradCheck::default();
        for k in 0..20u64 {
            let s = check_scene::<f64>(20, 32, 1000 * t as u64 + k);
            let targets = FrameTargets {
                camera: &s.camera,
                image: &s.image,
                depth: Some(&s.depth),
                pseudo_normals: Some(&s.pseudo),
                mask: None,
            };
            match check_gradients(&s.splats, &targets, &cfg, 1e-4, &tol) {
                Ok(r) => all.merge(r),
                Err(e) => return (false, format!("{term}: {e}")),
            }
        }
        pass &= all.passed();
        lines.push(format!(
            "{term} {}/{} ok ({} refined, {} skipped) max_abs {:.1e} max_rel above floor {:.1e}",
            all.checked - all.mismatches.len(),
            all.checked,
            all.refined,
            all.skipped,
            all.max_abs_err,
            all.max_rel_err
        ));
    }
    (pass, format!("20 scenes x 20 splats, 32x32, h 1e-4; {}", lines.join(", ")))
}

fn self_reconstruction() -> Outcome {
    let s = self_reconstruction_scene::<f32>(50, 40, 64, 48, 7).unwrap();
    let init = TrainReport::mean_psnr(&evaluate_views(&s.init, &s.dataset, &s.dataset.test, None).unwrap()).unwrap();
    let mut cfg = TrainConfig::with_iterations(2000);
    cfg.loss = LossConfig::rgb_only();
    cfg.densify.enabled = false;
    cfg.log_every = 0;
    let (_, report) = train(&s.dataset, s.init.clone(), &cfg).unwrap();
    let fin = TrainReport::mean_psnr(&report.test_views).unwrap();
    (
        fin >= init + 10.0 && fin > 30.0,
        format!("held-out PSNR {init:.2} -> {fin:.2} dB over {} test views", s.dataset.test.len()),
    )
}

fn geometry_efficacy() -> Outcome {
    let truth = textured_plane::<f32>(24, 1.0);
    let cams = plane_cameras::<f32>(16, 70.0, 64, 48);
    let ds = FrameDataset::new(render_frames(&truth, &cams).unwrap());
    let up = Vec3::new(0.0f32, 0.0, 1.0);
    let run = |loss: LossConfig| {
        let mut cfg = TrainConfig::with_iterations(1000);
        cfg.loss = loss;
        cfg.geometry_start = 100;
        cfg.densify.enabled = false;
        cfg.seed = 5;
        cfg.log_every = 0;
        let (out, _) = train(&ds, plane_init::<f32>(300, 1.0, 3), &cfg).unwrap();
        let errs: Vec<f64> = cams.iter().filter_map(|c| mean_normal_error_deg(&out, c, up).unwrap()).collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let (rgb, geo) = std::thread::scope(|sc| {
        let a = sc.spawn(|| run(LossConfig::rgb_only()));
        let b = sc.spawn(|| run(LossConfig::default()));
        (a.join().unwrap(), b.join().unwrap())
    });
    (geo < rgb, format!("plane normal error: rgb-only {rgb:.2} deg, with geometry {geo:.2} deg"))
}

fn ncc_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let grid = PatchGrid::default_for(32, 32).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut d = Image::new(32, 32, 1);
        for v in d.data.iter_mut() {
            *v = rng.gen_range(0.5..6.0);
        }
        let a = 10f64.powf(rng.gen_range(-3.0..3.0));
        let b = rng.gen_range(-1e3..1e3);
        let e = ncc_depth_loss(&d.map(|v| a * v + b), &d, &grid, None).unwrap();
        worst = worst.max(e.value.abs());
    }
    (worst < 1e-9, format!("max loss under affine maps {worst:.1e} over 100 samples"))
}

fn culling() -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    let mut monotone_fail = 0;
    let mut culled = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..10 {
        let mut splats = random_splats::<f64>(60, 0.9, (0.03, 0.25), seed);
        let cams = orbit_cameras::<f64>(6, 3.5, 1.0, Vec3::zero(), 70.0, 96, 64);
        let eye = cams[0].center();
        for k in 0..6 {
            let p = eye.scale(1.0 - (0.15 + 0.05 * k as f64));
            splats.splats.push(Splat::isotropic(p, 0.04 + 0.02 * k as f64, 0.6, Vec3::new(0.9, 0.9, 0.9)));
        }
        for cam in &cams {
            let v = stress_view(cam, 0.5);
            let cfg = CullConfig::default();
            let thr = cfg.threshold(v.width, v.height);
            let (_, kept) = rasterize_with_state(&splats, &v, Some(&cfg)).unwrap();
            let (_, all) = rasterize_with_state(&splats, &v, None).unwrap();
            violations += kept.projected.iter().filter(|p| exceeds_threshold(p, thr)).count();
            culled += all.projected.len() - kept.projected.len();
            checked += 1;
            let a = 10f64.powf(rng.gen_range(-5.0..-2.0));
            let lo = cull_mask(&splats, &v, &CullConfig::new(a).unwrap()).unwrap();
            let hi = cull_mask(&splats, &v, &CullConfig::new(a * rng.gen_range(1.0..20.0)).unwrap()).unwrap();
            monotone_fail += lo.iter().zip(&hi).filter(|(l, h)| **l && !**h).count();
        }
    }
    (
        violations == 0 && monotone_fail == 0 && culled > 0,
        format!(
            "{checked} stress views: {violations} oversized splats rendered, {culled} culled; {monotone_fail} monotonicity violations"
        ),
    )
}

fn plane_box_label(m: &TriangleMesh, f: usize, s: &PlaneBox<f32>, voxel: f64) -> Option<bool> {
    let c = m.face_centroid(f);
    let (lo, hi) = (s.box_lo, s.box_hi);
    let inside = (0..3).all(|k| c[k] >= lo[k] && c[k] <= hi[k]);
    let d_box = if inside {
        (0..3).map(|k| (c[k] - lo[k]).min(hi[k] - c[k])).fold(f64::INFINITY, f64::min)
    } else {
        norm(std::array::from_fn(|k| (lo[k] - c[k]).max(c[k] - hi[k]).max(0.0)))
    };
    let d_plane = c[2].abs();
    (d_plane >= voxel || d_box >= voxel).then_some(d_plane < d_box)
}

fn ground_score(m: &TriangleMesh, ground: &[bool], s: &PlaneBox<f32>, voxel: f64) -> (f64, f64) {
    let (mut plane, mut removed, mut boxf, mut kept) = (0, 0, 0, 0);
    for (f, &g) in ground.iter().enumerate() {
        match plane_box_label(m, f, s, voxel) {
            Some(true) => {
                plane += 1;
                removed += g as usize;
            }
            Some(false) => {
                boxf += 1;
                kept += !g as usize;
            }
            None => {}
        }
    }
    (removed as f64 / plane.max(1) as f64, kept as f64 / boxf.max(1) as f64)
}

fn meshing() -> Outcome {
    let voxel = 0.05;
    let v = TsdfVolume::from_fn([-1.5; 3], [61, 61, 61], voxel, 4.0 * voxel, |p| norm(p) - 1.0).unwrap();
    let sphere = marching_cubes(&v);
    let sphere_err = sphere.vertices.iter().map(|&p| (norm(p) - 1.0).abs()).fold(0.0, f64::max);

    let fusion = FusionConfig {
        voxel_size: voxel,
        truncation: 4.0 * voxel,
        ..FusionConfig::default()
    };
    let plane = extract_mesh(&textured_plane::<f64>(48, 2.0), &plane_cameras::<f64>(12, 70.0, 96, 72), &fusion).unwrap();
    let inner: Vec<f64> = plane
        .vertices
        .iter()
        .filter(|p| p[0].abs() < 1.2 && p[1].abs() < 1.2)
        .map(|p| p[2])
        .collect();
    let rms = (inner.iter().map(|z| z * z).sum::<f64>() / inner.len().max(1) as f64).sqrt();

    let s = plane_box_scene::<f32>(16, 128, 96);
    let mesh = extract_mesh(&s.splats, &s.cameras, &fusion).unwrap();
    let (vr, vk) = ground_score(&mesh, &ground_faces_from_vector(&mesh, &VectorGround::default()), &s, voxel);
    let mut masks = Vec::new();
    for cam in &s.cameras {
        let r = rasterize(&s.splats, cam, None).unwrap();
        let seed = default_seed_region(cam.width, cam.height, 0.2);
        let depth = fusable_depth(&r, fusion.min_alpha);
        let g = ground_mask(&r.normal, &seed, 15.0).unwrap();
        masks.push((connected_ground(&g, &seed, &depth, DEFAULT_MAX_REL_JUMP).unwrap(), depth));
    }
    let views: Vec<GroundView<'_, f32>> = s
        .cameras
        .iter()
        .zip(&masks)
        .map(|(camera, (mask, depth))| GroundView {
            camera,
            mask,
            depth: Some(depth),
        })
        .collect();
    let (mr, mk) = ground_score(&mesh, &ground_faces_from_masks(&mesh, &views, 2.0 * voxel), &s, voxel);
    let pass = sphere_err < voxel
        && !inner.is_empty()
        && rms < voxel
        && [(vr, vk), (mr, mk)].iter().all(|(r, k)| *r >= 0.95 && *k >= 0.99);
    (
        pass,
        format!(
            "sphere max err {sphere_err:.4} (voxel {voxel}); plane rms {rms:.4}; plane+box masks removed {:.1}% kept {:.1}%, vector removed {:.1}% kept {:.1}%",
            100.0 * mr,
            100.0 * mk,
            100.0 * vr,
            100.0 * vk
        ),
    )
}

fn env(scene: &std::sync::Arc<Scene>, task: Task, seed: u64) -> Env {
    Env::new(std::sync::Arc::clone(scene), EnvOptions { task, seed })
}

fn reward_stream(scene: &std::sync::Arc<Scene>, seed: u64, task: Task) -> Vec<u64> {
    let mut e = env(scene, task, 0);
    e.reset(Some(seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    for _ in 0..60 {
        let r = e.step(Action::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).unwrap();
        out.push(r.reward.to_bits());
        out.extend(r.observation.rgb8().chunks(4096).map(|c| c.iter().map(|&b| b as u64).sum::<u64>()));
        if r.terminated || r.truncated {
            break;
        }
    }
    out
}

fn simulator() -> Outcome {
    let scene = common::corridor();
    let deterministic = [Task::PointNav, Task::SocialNav]
        .iter()
        .all(|&t| reward_stream(&scene, 42, t) == reward_stream(&scene, 42, t));

    let p = BicycleParams::default();
    let expected = 0.8 / 30f64.to_radians().tan();
    let mut st = AgentState::default();
    let mut pts = Vec::new();
    for _ in 0..2000 {
        st = step_dynamics(&st, Action::new(1.0, 1.0), &p, PHYSICS_DT);
        pts.push([st.x, st.y]);
    }
    let (a, b, c) = (pts[0], pts[50], pts[100]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let sq = |q: [f64; 2]| q[0] * q[0] + q[1] * q[1];
    let cx = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
    let cy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
    let radius_err = pts
        .iter()
        .map(|q| ((q[0] - cx).hypot(q[1] - cy) - expected).abs() / expected)
        .fold(0.0, f64::max);

    let r = compute_reward(
        &StepOutcome {
            prev_distance: 5.0,
            distance: 4.5,
            prev_steer: 0.0,
            steer: 0.0,
            speed: 0.0,
            collided: false,
            terminal: None,
        },
        &RewardWeights::default(),
    );
    (
        deterministic && radius_err < 0.01 && (r.total - 0.4).abs() < 1e-12,
        format!(
            "same-seed replay identical: {deterministic}; full-steer radius rel err {radius_err:.2e}; 0.5 m approach reward {:.6}",
            r.total
        ),
    )
}

fn random_soup(rng: &mut ChaCha8Rng, n: usize) -> Vec<Triangle> {
    (0..n)
        .map(|_| {
            let c = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-0.5..2.0)];
            let s = rng.gen_range(0.05..1.5);
            let mut t = [[0.0; 3]; 3];
            for v in t.iter_mut() {
                *v = [c[0] + rng.gen_range(-s..s), c[1] + rng.gen_range(-s..s), c[2] + rng.gen_range(-s..s)];
            }
            t
        })
        .collect()
}

fn bvh() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let tris = random_soup(&mut rng, 5000);
    let tree = Bvh::new(tris.clone());
    let (mut bad, mut contacts) = (0, 0);
    for _ in 0..1000 {
        let from = [rng.gen_range(-11.0..11.0), rng.gen_range(-11.0..11.0)];
        let step = rng.gen_range(0.0..0.5);
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let disc = SweptDisc {
            from,
            to: [from[0] + step * ang.cos(), from[1] + step * ang.sin()],
            radius: rng.gen_range(0.05..0.6),
            z_min: 0.1,
            z_max: 1.0,
        };
        let want = brute_force_query(&tris, &disc);
        if tree.query(&disc) != want || tree.any_hit(&disc) == want.is_empty() {
            bad += 1;
        }
        contacts += usize::from(!want.is_empty());
    }
    (bad == 0, format!("1000 poses on 5000 triangles: {bad} disagreements, {contacts} contacts"))
}

fn metrics() -> Outcome {
    let scene = {
        let (mut cfg, splats, mesh) = splatnav_sim::demo::default_corridor();
        cfg.spawn.max_obstacles = 0;
        Scene::from_parts(cfg, Some(splats), mesh).unwrap()
    };
    let mut e = env(&scene, Task::PointNav, 100);
    let mut oracle = OraclePolicy::default();
    let records: Vec<_> = (0..25).map(|_| rollout(&mut e, &mut oracle, None).unwrap()).collect();
    let m = compute_metrics(&records);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bounded = true;
    for _ in 0..200 {
        let batch: Vec<EpisodeRecord> = (0..rng.gen_range(1..30))
            .map(|_| {
                let success = rng.gen_bool(0.6);
                EpisodeRecord {
                    seed: 0,
                    task: Task::PointNav,
                    reason: if success { TerminalReason::Success } else { TerminalReason::Timeout },
                    success,
                    steps: 10,
                    collisions: 0,
                    path_length: rng.gen_range(0.0..50.0),
                    shortest_path: rng.gen_range(0.1..50.0),
                    close_steps: 0,
                    total_reward: 0.0,
                }
            })
            .collect();
        let b = compute_metrics(&batch);
        bounded &= b.spl <= b.sr + 1e-12;
    }
    let fixture = EpisodeRecord {
        seed: 0,
        task: Task::PointNav,
        reason: TerminalReason::Success,
        success: true,
        steps: 10,
        collisions: 0,
        path_length: 8.0,
        shortest_path: 4.0,
        close_steps: 0,
        total_reward: 0.0,
    }
    .spl_term();
    (
        m.sr == 1.0 && m.spl >= 0.95 && bounded && (fixture - 0.5).abs() < 1e-12,
        format!(
            "oracle over 25 episodes SR {:.3} SPL {:.3}; SPL <= SR on 200 batches: {bounded}; p = 2l gives {fixture}",
            m.sr, m.spl
        ),
    )
}

fn astar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut checked, mut bad) = (0, 0);
    for _ in 0..50 {
        let nx = rng.gen_range(5..40);
        let ny = rng.gen_range(5..40);
        let p = rng.gen_range(0.0..0.35);
        let free = (0..nx * ny).map(|_| rng.gen::<f64>() >= p).collect();
        let g = OccupancyGrid::new([0.0, 0.0], 0.25, nx, ny, free);
        let cells = g.free_cells();
        if cells.len() < 2 {
            continue;
        }
        for _ in 0..10 {
            let s = cells[rng.gen_range(0..cells.len())];
            let t = cells[rng.gen_range(0..cells.len())];
            let d = g.dijkstra(s)[g.index(t)];
            checked += 1;
            let ok = match g.astar(s, t) {
                Some(p) => (p.cost - d).abs() < 1e-9,
                None => d.is_infinite(),
            };
            bad += usize::from(!ok);
        }
    }
    (bad == 0 && checked > 0, format!("50 grids, {checked} queries, {bad} cost mismatches"))
}

fn protocol() -> Outcome {
    let scene = common::corridor();
    let r = common::protocol_fuzz(&scene, 10_000, 2024);
    let mut s = common::session(&scene, 0);
    let resp = common::request(&mut s, serde_json::json!(1), "reset", serde_json::json!({"seed": 0}));
    let (bytes, shape) = common::decode_obs(&resp);
    let shape_ok = shape == [6, 72, 128, 3] && bytes.len() == 6 * 72 * 128 * 3;
    (
        r.failures.is_empty() && shape_ok,
        format!(
            "{} fuzzed messages, {} bad responses, {} successful steps; observation shape {shape:?} ({} bytes)",
            r.messages,
            r.failures.len(),
            r.steps_ok,
            bytes.len()
        ),
    )
}

const CRITERIA: [(&str, fn() -> Outcome); 11] = [
    ("gradients", gradients),
    ("self_reconstruction", self_reconstruction),
    ("geometry_loss_efficacy", geometry_efficacy),
    ("ncc_affine_invariance", ncc_invariance),
    ("culling", culling),
    ("meshing", meshing),
    ("simulator", simulator),
    ("bvh_vs_brute_force", bvh),
    ("metrics", metrics),
    ("astar_vs_dijkstra", astar),
    ("protocol", protocol),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> = CRITERIA
        .iter()
        .filter(|(name, _)| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str())))
        .collect();
    let results: Vec<(Outcome, f64)> = std::thread::scope(|sc| {
        let handles: Vec<_> = selected
            .iter()
            .map(|(_, f)| {
                sc.spawn(move || {
                    let t = Instant::now();
                    let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
                        let msg = e
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_default();
                        (false, format!("panicked: {msg}"))
                    });
                    (out, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for ((name, _), ((pass, detail), secs)) in selected.iter().zip(results) {
        println!("{} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    println!("acceptance: {} passed, {failed} failed", selected.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
