mod common;

use common::{corridor_scene, env};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatnav_core::Image;
use splatnav_sim::collision::{brute_force_query, Bvh, SweptDisc, Triangle};
use splatnav_sim::dynamics::PHYSICS_DT;
use splatnav_sim::grid::OccupancyGrid;
use splatnav_sim::render::{compose, Layer};
use splatnav_sim::{compute_metrics, spawn_episode, step_dynamics, Action, AgentState, BicycleParams, EpisodeRecord, Task, TerminalReason};

fn random_soup(rng: &mut ChaCha8Rng, n: usize) -> Vec<Triangle> {
    (0..n)
        .map(|_| {
            let c = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-0.5..2.0)];
            let s = rng.gen_range(0.05..1.5);
            let mut t = [[0.0; 3]; 3];
            for v in t.iter_mut() {
                *v = [c[0] + rng.gen_range(-s..s), c[1] + rng.gen_range(-s..s), c[2] + rng.gen_range(-s..s)];
            }
            // Some exactly vertical or horizontal faces.
            match rng.gen_range(0..4) {
                0 => {
                    let x = t[0][0];
                    t.iter_mut().for_each(|v| v[0] = x);
                }
                1 => {
                    let z = t[0][2];
                    t.iter_mut().for_each(|v| v[2] = z);
                }
                _ => {}
            }
            t
        })
        .collect()
}

#[test]
fn bvh_matches_brute_force_over_random_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut disagreements = 0;
    let mut contacts = 0;
    for scene in 0..5 {
        let n = [50, 500, 2000, 4000, 5000][scene];
        let tris = random_soup(&mut rng, n);
        let bvh = Bvh::new(tris.clone());
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
            let a = bvh.query(&disc);
            let b = brute_force_query(&tris, &disc);
            if a != b || bvh.any_hit(&disc) != !b.is_empty() {
                disagreements += 1;
            }
            contacts += usize::from(!b.is_empty());
        }
    }
    assert_eq!(disagreements, 0);
    assert!(contacts > 100, "suite should exercise contacts ({contacts})");
}

fn random_grid(rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let nx = rng.gen_range(5..40);
    let ny = rng.gen_range(5..40);
    let p = rng.gen_range(0.0..0.35);
    let free = (0..nx * ny).map(|_| rng.gen::<f64>() >= p).collect();
    OccupancyGrid::new([0.0, 0.0], 0.25, nx, ny, free)
}

#[test]
fn astar_costs_match_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for _ in 0..50 {
        let g = random_grid(&mut rng);
        let cells = g.free_cells();
        if cells.len() < 2 {
            continue;
        }
        for _ in 0..10 {
            let s = cells[rng.gen_range(0..cells.len())];
            let t = cells[rng.gen_range(0..cells.len())];
            let d = g.dijkstra(s)[g.index(t)];
            match g.astar(s, t) {
                Some(p) => {
                    assert!((p.cost - d).abs() < 1e-9, "astar {} dijkstra {d}", p.cost);
                    // The returned cells form a valid walk of that length.
                    let mut prev = s;
                    let mut len = 0.0;
                    for &c in &p.cells {
                        let step = g.neighbors(prev).find(|(n, _)| *n == c).expect("path step is an edge");
                        len += step.1;
                        prev = c;
                    }
                    assert!((len - p.cost).abs() < 1e-9);
                    checked += 1;
                }
                None => assert!(d.is_infinite()),
            }
        }
    }
    assert!(checked > 200);
}

#[test]
fn full_steer_traces_minimum_turning_circle() {
    let p = BicycleParams::default();
    let expected = 0.8 / 30f64.to_radians().tan();
    assert!((p.min_turn_radius() - expected).abs() < 1e-12);
    let mut s = AgentState::default();
    let mut pts = Vec::new();
    for _ in 0..2000 {
        s = step_dynamics(&s, Action::new(1.0, 1.0), &p, PHYSICS_DT);
        pts.push([s.x, s.y]);
    }
    // Circumcenter of three well-separated samples.
    let (a, b, c) = (pts[0], pts[50], pts[100]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let sq = |q: [f64; 2]| q[0] * q[0] + q[1] * q[1];
    let cx = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
    let cy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
    for q in &pts {
        let r = (q[0] - cx).hypot(q[1] - cy);
        assert!((r - expected).abs() / expected < 0.01, "radius {r} vs {expected}");
    }
}

#[test]
fn pedestrians_stay_on_walkable_cells() {
    let scene = corridor_scene(|c| c.pedestrians.count = 6);
    for seed in 0..4 {
        let mut e = env(&scene, Task::SocialNav, seed);
        e.reset(None).unwrap();
        for _ in 0..150 {
            let ep = e.episode().unwrap();
            for p in &ep.pedestrians {
                let g = &ep.pedestrian_grid;
                let c = g.cell_of(p.position).expect("pedestrian inside grid");
                assert!(g.is_free(c), "pedestrian at {:?}", p.position);
                assert!(scene.config.walkable.contains(p.position));
                for w in &p.waypoints {
                    assert!(g.is_free(g.cell_of(*w).unwrap()));
                }
            }
            let r = e.step(Action::default()).unwrap();
            if r.terminated || r.truncated {
                break;
            }
        }
    }
}

#[test]
fn spawn_respects_task_and_counts() {
    let scene = corridor_scene(|_| {});
    let mut counts = [0usize; 6];
    for seed in 0..60 {
        let a = spawn_episode(&scene, Task::PointNav, seed).unwrap();
        let b = spawn_episode(&scene, Task::PointNav, seed).unwrap();
        assert_eq!((a.start, a.goal, &a.obstacles), (b.start, b.goal, &b.obstacles));
        assert!(a.pedestrians.is_empty());
        assert!(a.obstacles.len() <= 5);
        counts[a.requested_obstacles] += 1;
        let d = (a.goal[0] - a.start[0]).hypot(a.goal[1] - a.start[1]);
        assert!((10.0..=30.0).contains(&d), "{d}");
        for o in &a.obstacles {
            for p in [a.start, a.goal] {
                let gap = (o.position[0] - p[0]).hypot(o.position[1] - p[1]);
                assert!(gap >= o.footprint + scene.config.agent.radius);
            }
        }
        let s = spawn_episode(&scene, Task::SocialNav, seed).unwrap();
        assert_eq!(s.pedestrians.len(), scene.config.pedestrians.count);
        for p in &s.pedestrians {
            assert!((0.5..=1.2).contains(&p.speed));
        }
    }
    assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
}

#[test]
fn small_region_scales_spawn_distance() {
    let scene = corridor_scene(|c| {
        c.walkable = splatnav_sim::polygon::Polygon::rectangle([0.0, -2.0], [12.0, 2.0]);
    });
    let ep = spawn_episode(&scene, Task::PointNav, 3).unwrap();
    assert!(ep.distance_scale < 1.0);
    let d = (ep.goal[0] - ep.start[0]).hypot(ep.goal[1] - ep.start[1]);
    assert!(d >= 10.0 * ep.distance_scale - 1e-9 && d <= 30.0 * ep.distance_scale + 1e-9);
}

fn random_layer(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Layer {
    let mut l = Layer::empty(w, h);
    for v in l.color.data.iter_mut() {
        *v = rng.gen();
    }
    for d in l.depth.data.iter_mut() {
        *d = if rng.gen_bool(0.3) { f32::INFINITY } else { rng.gen_range(0.1..20.0) };
    }
    l
}

#[test]
fn composition_equals_per_pixel_min() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (a, b) = (random_layer(&mut rng, 31, 17), random_layer(&mut rng, 31, 17));
        let out = compose(&a, &b).unwrap();
        for p in 0..31 * 17 {
            let (da, db) = (a.depth.data[p], b.depth.data[p]);
            let src = if db < da { &b } else { &a };
            assert_eq!(out.depth.data[p], da.min(db));
            assert_eq!(&out.color.data[p * 3..p * 3 + 3], &src.color.data[p * 3..p * 3 + 3]);
        }
    }
}

#[test]
fn splat_layer_ignores_low_alpha() {
    let mut r = splatnav_core::RenderOutput::<f32> {
        color: Image::filled(2, 1, 3, 0.5),
        depth: Image::from_vec(2, 1, 1, vec![1.0, 1.0]).unwrap(),
        normal: Image::new(2, 1, 3),
        alpha: Image::from_vec(2, 1, 1, vec![0.4, 0.5]).unwrap(),
    };
    let l = Layer::from_splats(&r);
    assert!(l.depth.data[0].is_infinite());
    assert_eq!(l.depth.data[1], 2.0);
    r.alpha.data[0] = 1.0;
    assert_eq!(Layer::from_splats(&r).depth.data[0], 1.0);
}

fn arb_record() -> impl Strategy<Value = EpisodeRecord> {
    (any::<bool>(), 0.0f64..100.0, 0.1f64..100.0, 1usize..100, 0usize..100, 0usize..5).prop_map(
        |(success, p, l, steps, close, collisions)| EpisodeRecord {
            seed: 0,
            task: Task::SocialNav,
            reason: if success { TerminalReason::Success } else { TerminalReason::CollisionLimit },
            success,
            steps,
            collisions,
            path_length: p,
            shortest_path: l,
            close_steps: close.min(steps),
            total_reward: 0.0,
        },
    )
}

proptest! {
    #[test]
    fn spl_and_sns_never_exceed_sr(batch in prop::collection::vec(arb_record(), 1..40)) {
        let m = compute_metrics(&batch);
        prop_assert!(m.spl <= m.sr + 1e-12);
        prop_assert!(m.sns <= m.sr + 1e-12);
        prop_assert!(m.spl >= 0.0 && m.sns >= 0.0);
    }

    #[test]
    fn clamped_actions_stay_in_bounds(s in -10.0f64..10.0, v in -10.0f64..10.0) {
        let a = Action::new(s, v);
        prop_assert!(a.is_within_bounds());
        let st = step_dynamics(&AgentState::default(), a, &BicycleParams::default(), PHYSICS_DT);
        prop_assert!(st.steer.abs() <= 30f64.to_radians() + 1e-15);
        prop_assert!(st.speed.abs() <= 1.5);
    }
}
