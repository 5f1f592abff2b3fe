//! Line-delimited JSON protocol over one environment.
//!
//! Request: `{"id": any, "cmd": "reset"|"step"|"render"|"close"|"spec", "payload": {...}}`.
//! Response: `{"id": <echoed>, "ok": true, "payload": {...}}` or
//! `{"id": <echoed>, "ok": false, "error": {"code": str, "message": str}}`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Map, Value};
use splatnav_sim::{Action, Env, EnvOptions, Observation, Scene, SimError, Task};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolError {
    pub code: &'static str,
    pub message: String,
}

impl ProtocolError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<SimError> for ProtocolError {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::NotStarted => "no_episode",
            SimError::EpisodeOver => "episode_over",
            SimError::Spawn(_) => "spawn_failed",
            _ => "internal",
        };
        Self::new(code, e.to_string())
    }
}

pub fn encode_observation(obs: &Observation) -> Value {
    json!({
        "rgb": STANDARD.encode(obs.rgb8()),
        "shape": obs.shape(),
        "goal": obs.goal,
    })
}

/// One client's environment and protocol state.
pub struct Session {
    env: Env,
    closed: bool,
}

fn ok(id: Value, payload: Value) -> Value {
    json!({"id": id, "ok": true, "payload": payload})
}

fn err(id: Value, e: ProtocolError) -> Value {
    json!({"id": id, "ok": false, "error": {"code": e.code, "message": e.message}})
}

fn parse_action(payload: &Map<String, Value>) -> Result<Action, ProtocolError> {
    let bad = || ProtocolError::new("invalid_payload", "step needs \"action\": [steer, speed] with finite numbers");
    let a = payload.get("action").ok_or_else(bad)?;
    let (s, v) = match a {
        Value::Array(v) if v.len() == 2 => (v[0].as_f64(), v[1].as_f64()),
        Value::Object(m) => (
            m.get("steer").and_then(Value::as_f64),
            m.get("speed").and_then(Value::as_f64),
        ),
        _ => return Err(bad()),
    };
    match (s, v) {
        (Some(s), Some(v)) if s.is_finite() && v.is_finite() => {
            let raw = Action { steer: s, speed: v };
            if !raw.is_within_bounds() {
                log::warn!("action {s}, {v} clamped to [-1, 1]");
            }
            Ok(raw)
        }
        _ => Err(bad()),
    }
}

impl Session {
    pub fn new(scene: Arc<Scene>, seed: u64, task: Task) -> Self {
        Self {
            env: Env::new(scene, EnvOptions { task, seed }),
            closed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Handles one request line; always yields exactly one response.
    pub fn handle_line(&mut self, line: &str) -> Value {
        let req: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return err(Value::Null, ProtocolError::new("parse_error", e.to_string())),
        };
        let Value::Object(mut req) = req else {
            return err(Value::Null, ProtocolError::new("invalid_request", "request must be a JSON object"));
        };
        let id = req.remove("id").unwrap_or(Value::Null);
        let cmd = match req.remove("cmd") {
            Some(Value::String(c)) => c,
            _ => return err(id, ProtocolError::new("invalid_request", "missing string field \"cmd\"")),
        };
        let payload = match req.remove("payload") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m,
            Some(_) => return err(id, ProtocolError::new("invalid_payload", "\"payload\" must be an object")),
        };
        if self.closed {
            return err(id, ProtocolError::new("closed", "session is closed"));
        }
        match catch_unwind(AssertUnwindSafe(|| self.dispatch(&cmd, &payload))) {
            Ok(Ok(p)) => ok(id, p),
            Ok(Err(e)) => err(id, e),
            Err(_) => err(id, ProtocolError::new("internal", "command panicked")),
        }
    }

    fn dispatch(&mut self, cmd: &str, payload: &Map<String, Value>) -> Result<Value, ProtocolError> {
        match cmd {
            "spec" => {
                let mut s = self.env.spec();
                s["protocol_version"] = json!(PROTOCOL_VERSION);
                Ok(s)
            }
            "reset" => {
                let seed = match payload.get("seed") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(
                        v.as_u64()
                            .ok_or_else(|| ProtocolError::new("invalid_payload", "seed must be a non-negative integer"))?,
                    ),
                };
                if let Some(t) = payload.get("task") {
                    let t = t
                        .as_str()
                        .ok_or_else(|| ProtocolError::new("invalid_payload", "task must be a string"))?;
                    let task = t
                        .parse::<Task>()
                        .map_err(|e| ProtocolError::new("invalid_payload", e.to_string()))?;
                    self.env.set_task(task);
                }
                let obs = self.env.reset(seed)?;
                let ep = self.env.episode().expect("episode after reset");
                Ok(json!({
                    "obs": encode_observation(&obs),
                    "info": {
                        "seed": ep.seed,
                        "task": ep.task,
                        "start": ep.start,
                        "goal": ep.goal,
                        "obstacles": ep.obstacles.len(),
                        "pedestrians": ep.pedestrians.len(),
                        "distance_scale": ep.distance_scale,
                        "shortest_path": ep.shortest_path,
                    },
                }))
            }
            "step" => {
                let action = parse_action(payload)?;
                let r = self.env.step(action)?;
                Ok(json!({
                    "obs": encode_observation(&r.observation),
                    "reward": r.reward,
                    "breakdown": r.breakdown,
                    "terminated": r.terminated,
                    "truncated": r.truncated,
                    "info": r.info,
                }))
            }
            "render" => {
                let (frame, _) = self.env.render()?;
                let depth: Vec<u8> = frame.depth.data.iter().flat_map(|d| d.to_le_bytes()).collect();
                Ok(json!({
                    "width": frame.width(),
                    "height": frame.height(),
                    "rgb": STANDARD.encode(frame.color.to_rgb8()),
                    "depth": STANDARD.encode(depth),
                    "depth_encoding": "f32_le_meters_inf_empty",
                }))
            }
            "close" => {
                self.closed = true;
                Ok(json!({}))
            }
            other => Err(ProtocolError::new("unknown_command", format!("unknown command '{other}'"))),
        }
    }
}
