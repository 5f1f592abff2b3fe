use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use splatnav_cli::commands::{self, GroundMode, PolicyKind, Split};
use splatnav_cli::server;
use splatnav_core::CullConfig;
use splatnav_sim::Task;

#[derive(Parser)]
#[command(name = "splatnav", version, about = "Splat reconstruction, meshing and navigation simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize splats against a posed dataset.
    Reconstruct {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 30000)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
        /// Start from this checkpoint instead of back-projected depth.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Photometric loss only.
        #[arg(long)]
        rgb_only: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20000)]
        max_init_points: usize,
        #[arg(long)]
        json: bool,
    },
    /// Fuse rendered depth into a collision mesh.
    ExtractMesh {
        #[arg(long)]
        ckpt: PathBuf,
        /// Dataset whose training cameras are used for fusion.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        voxel: f64,
        #[arg(long)]
        truncation: Option<f64>,
        #[arg(long, value_enum, default_value_t = GroundMode::Masks)]
        ground_removal: GroundMode,
        #[arg(long, default_value_t = commands::DEFAULT_GROUND_ANGLE)]
        ground_angle: f64,
    },
    /// Run one episode and print the per-step reward log.
    Simulate {
        #[arg(long)]
        scene_config: Option<PathBuf>,
        #[arg(long, value_parser = parse_task, default_value = "pointnav")]
        task: Task,
        #[arg(long, value_enum, default_value_t = PolicyKind::Oracle)]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        /// Directory for per-step observation PNGs.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        obstacles: Option<usize>,
        #[arg(long)]
        cull_alpha: Option<f64>,
    },
    /// Serve the environment protocol over TCP or stdio.
    Serve {
        #[arg(long)]
        scene_config: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        stdio: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_task, default_value = "pointnav")]
        task: Task,
        #[arg(long)]
        obstacles: Option<usize>,
        #[arg(long)]
        cull_alpha: Option<f64>,
    },
    /// Roll out a policy and report SR / SPL / SNS / Cost.
    Eval {
        #[arg(long)]
        scene_config: Option<PathBuf>,
        #[arg(long, value_parser = parse_task, default_value = "pointnav")]
        task: Task,
        #[arg(long, default_value_t = 25)]
        episodes: usize,
        #[arg(long, value_enum, default_value_t = PolicyKind::Oracle)]
        policy: PolicyKind,
        /// Address of the external agent for `--policy remote`.
        #[arg(long)]
        remote: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        obstacles: Option<usize>,
        #[arg(long)]
        cull_alpha: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Render dataset views from a checkpoint and report PSNR / SSIM.
    RenderViews {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        /// Apply screen-space culling with this threshold.
        #[arg(long)]
        cull_alpha: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Write the built-in corridor scene (splats, mesh, config).
    DemoScene {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic posed dataset rendered from known splats.
    DemoDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: splatnav_sim::SimError| e.to_string())
}

fn scene_with(
    config: Option<&std::path::Path>,
    obstacles: Option<usize>,
    cull_alpha: Option<f64>,
) -> Result<std::sync::Arc<splatnav_sim::Scene>> {
    let scene = commands::load_scene(config, obstacles)?;
    match cull_alpha {
        None => Ok(scene),
        Some(a) => {
            let mut cfg = scene.config.clone();
            cfg.cull_alpha = a;
            Ok(splatnav_sim::Scene::from_parts(cfg, scene.splats.clone(), scene.static_mesh.clone())?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Reconstruct {
            scene,
            iters,
            out,
            init,
            rgb_only,
            seed,
            max_init_points,
            json,
        } => {
            let (_, _, summary) = commands::reconstruct(&commands::ReconstructArgs {
                scene: &scene,
                iters,
                out: &out,
                init: init.as_deref(),
                geometry: !rgb_only,
                seed,
                max_init_points,
            })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!(
                    "{} iterations, {} -> {} splats, test PSNR {}",
                    summary.iterations,
                    summary.initial_splats,
                    summary.final_splats,
                    summary.test_psnr.map(|p| format!("{p:.2} dB")).unwrap_or("n/a".into())
                );
                println!("wrote {}", out.display());
            }
        }
        Cmd::ExtractMesh {
            ckpt,
            scene,
            out,
            voxel,
            truncation,
            ground_removal,
            ground_angle,
        } => {
            let (raw, cleaned) = commands::extract(&commands::ExtractArgs {
                ckpt: &ckpt,
                scene: scene.as_deref(),
                out: &out,
                voxel,
                truncation,
                ground: ground_removal,
                ground_angle,
            })?;
            println!(
                "fused {} faces, kept {} after ground removal; wrote {}",
                raw.faces.len(),
                cleaned.faces.len(),
                out.display()
            );
        }
        Cmd::Simulate {
            scene_config,
            task,
            policy,
            seed,
            steps,
            frames,
            obstacles,
            cull_alpha,
        } => {
            let scene = scene_with(scene_config.as_deref(), obstacles, cull_alpha)?;
            for line in commands::simulate(scene, task, policy, seed, steps, frames.as_deref())? {
                println!("{line}");
            }
        }
        Cmd::Serve {
            scene_config,
            port,
            host,
            stdio,
            seed,
            task,
            obstacles,
            cull_alpha,
        } => {
            let scene = scene_with(scene_config.as_deref(), obstacles, cull_alpha)?;
            if stdio {
                server::serve_stdio(scene, seed, task)?;
            } else {
                server::serve_tcp((host.as_str(), port), scene, seed, task)?;
            }
        }
        Cmd::Eval {
            scene_config,
            task,
            episodes,
            policy,
            remote,
            seed,
            obstacles,
            cull_alpha,
            json,
        } => {
            let scene = scene_with(scene_config.as_deref(), obstacles, cull_alpha)?;
            let report = commands::evaluate(scene, task, episodes, policy, seed, remote.as_deref())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{}", commands::format_metrics(&report.summary));
            }
        }
        Cmd::RenderViews {
            ckpt,
            scene,
            split,
            out,
            cull_alpha,
            json,
        } => {
            let cull = cull_alpha.map(CullConfig::new).transpose()?;
            let views = commands::render_views(&ckpt, &scene, split, &out, cull)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&views)?);
            } else {
                println!("{:<24} {:>8} {:>8}", "view", "PSNR", "SSIM");
                for v in &views {
                    println!("{:<24} {:>8.2} {:>8.4}", v.name, v.psnr, v.ssim);
                }
                let n = views.len().max(1) as f64;
                println!(
                    "{:<24} {:>8.2} {:>8.4}",
                    "mean",
                    views.iter().map(|v| v.psnr).sum::<f64>() / n,
                    views.iter().map(|v| v.ssim).sum::<f64>() / n
                );
            }
        }
        Cmd::DemoScene { out } => {
            let p = commands::demo_scene(&out)?;
            println!("wrote {}", p.display());
        }
        Cmd::DemoDataset { out, views, seed } => {
            commands::demo_dataset(&out, views, seed)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
