#![allow(dead_code)]

use std::sync::Arc;

use splatnav_sim::demo::default_corridor;
use splatnav_sim::{Env, EnvOptions, Scene, SceneConfig, Task};

pub fn corridor_scene(edit: impl FnOnce(&mut SceneConfig)) -> Arc<Scene> {
    let (mut cfg, splats, mesh) = default_corridor();
    edit(&mut cfg);
    Scene::from_parts(cfg, Some(splats), mesh).unwrap()
}

pub fn env(scene: &Arc<Scene>, task: Task, seed: u64) -> Env {
    Env::new(Arc::clone(scene), EnvOptions { task, seed })
}
