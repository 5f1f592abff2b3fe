#![allow(dead_code)]

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use splatnav_cli::Session;
use splatnav_sim::demo::default_corridor;
use splatnav_sim::{Scene, Task};

pub const ERROR_CODES: [&str; 9] = [
    "parse_error",
    "invalid_request",
    "invalid_payload",
    "unknown_command",
    "no_episode",
    "episode_over",
    "spawn_failed",
    "closed",
    "internal",
];

pub fn corridor() -> Arc<Scene> {
    let (cfg, splats, mesh) = default_corridor();
    Scene::from_parts(cfg, Some(splats), mesh).unwrap()
}

pub fn session(scene: &Arc<Scene>, seed: u64) -> Session {
    Session::new(Arc::clone(scene), seed, Task::PointNav)
}

pub fn request(s: &mut Session, id: Value, cmd: &str, payload: Value) -> Value {
    s.handle_line(&json!({"id": id, "cmd": cmd, "payload": payload}).to_string())
}

pub fn decode_obs(resp: &Value) -> (Vec<u8>, Vec<usize>) {
    let obs = &resp["payload"]["obs"];
    let bytes = STANDARD.decode(obs["rgb"].as_str().unwrap()).unwrap();
    let shape = obs["shape"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    (bytes, shape)
}

/// What a fuzzed line is expected to produce.
#[derive(Debug, Clone, PartialEq)]
enum Expect {
    /// The line does not parse or is not an object; id comes back null.
    Code(&'static str),
    /// Well formed object; id must be echoed and the code, if any, is
    /// determined by the session state.
    Echo(Value, Option<&'static str>),
}

fn garbage(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"{}[]\":,0123456789abcdefnulltrue \\";
    let n = rng.gen_range(1..40);
    let s: String = (0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect();
    s
}

fn random_id(rng: &mut ChaCha8Rng, k: usize) -> Value {
    match rng.gen_range(0..4) {
        0 => json!(k),
        1 => json!(format!("req-{k}")),
        2 => json!({"k": k, "tag": [1, 2]}),
        _ => json!(-(k as i64) - 1),
    }
}

/// Outcome of a protocol fuzz run.
#[derive(Debug, Default)]
pub struct FuzzReport {
    pub messages: usize,
    pub failures: Vec<String>,
    pub steps_ok: usize,
}

/// Sends `n` mixed valid and malformed requests to one session, checking
/// that every line gets exactly one well-formed response with the echoed id
/// and the expected error code.
pub fn protocol_fuzz(scene: &Arc<Scene>, n: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = session(scene, seed);
    let mut report = FuzzReport::default();
    let mut live = false;
    let mut started = false;
    for k in 0..n {
        let id = random_id(&mut rng, k);
        let kind = rng.gen_range(0..100);
        let (line, expect, is_step, is_reset) = match kind {
            0..=4 => {
                let g = garbage(&mut rng);
                let e = match serde_json::from_str::<Value>(&g) {
                    Err(_) => Expect::Code("parse_error"),
                    Ok(Value::Object(m)) => match m.get("cmd") {
                        // Vanishingly rare; skip the check rather than model it.
                        Some(_) => continue,
                        None => Expect::Echo(m.get("id").cloned().unwrap_or(Value::Null), Some("invalid_request")),
                    },
                    Ok(_) => Expect::Code("invalid_request"),
                };
                (g, e, false, false)
            }
            5..=7 => (json!([1, 2, 3]).to_string(), Expect::Code("invalid_request"), false, false),
            8..=10 => (json!({"id": id, "payload": {}}).to_string(), Expect::Echo(id.clone(), Some("invalid_request")), false, false),
            11..=13 => (
                json!({"id": id, "cmd": "teleport"}).to_string(),
                Expect::Echo(id.clone(), Some("unknown_command")),
                false,
                false,
            ),
            14..=16 => (
                json!({"id": id, "cmd": "step", "payload": 7}).to_string(),
                Expect::Echo(id.clone(), Some("invalid_payload")),
                false,
                false,
            ),
            17..=21 => {
                let bad = match rng.gen_range(0..4) {
                    0 => json!({}),
                    1 => json!({"action": [0.1]}),
                    2 => json!({"action": "fast"}),
                    _ => json!({"action": {"steer": 0.1}}),
                };
                let line = json!({"id": id, "cmd": "step", "payload": bad}).to_string();
                (line, Expect::Echo(id.clone(), Some("invalid_payload")), false, false)
            }
            22..=23 => (
                json!({"id": id, "cmd": "reset", "payload": {"seed": -3}}).to_string(),
                Expect::Echo(id.clone(), Some("invalid_payload")),
                false,
                false,
            ),
            24..=25 => (
                json!({"id": id, "cmd": "reset", "payload": {"task": "flying"}}).to_string(),
                Expect::Echo(id.clone(), Some("invalid_payload")),
                false,
                false,
            ),
            26..=28 => (json!({"id": id, "cmd": "spec"}).to_string(), Expect::Echo(id.clone(), None), false, false),
            29..=33 => {
                let line = json!({"id": id, "cmd": "reset", "payload": {"seed": rng.gen_range(0..1000u64)}}).to_string();
                (line, Expect::Echo(id.clone(), None), false, true)
            }
            34..=35 => {
                let e = if started { None } else { Some("no_episode") };
                (json!({"id": id, "cmd": "render"}).to_string(), Expect::Echo(id.clone(), e), false, false)
            }
            _ => {
                let a = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
                let payload = if rng.gen_bool(0.5) {
                    json!({"action": a})
                } else {
                    json!({"action": {"steer": a[0], "speed": a[1]}})
                };
                let e = if !started {
                    Some("no_episode")
                } else if !live {
                    Some("episode_over")
                } else {
                    None
                };
                let line = json!({"id": id, "cmd": "step", "payload": payload}).to_string();
                (line, Expect::Echo(id.clone(), e), true, false)
            }
        };
        report.messages += 1;
        let resp = s.handle_line(&line);
        let mut fail = |why: String| report.failures.push(format!("message {k}: {why}: {line} -> {resp}"));
        let Some(okv) = resp.get("ok").and_then(Value::as_bool) else {
            fail("missing ok".into());
            continue;
        };
        let code = resp["error"]["code"].as_str();
        if let Some(c) = code {
            if !ERROR_CODES.contains(&c) {
                fail(format!("unknown code {c}"));
            }
        }
        match expect {
            Expect::Code(c) => {
                if okv || code != Some(c) || resp["id"] != Value::Null {
                    fail(format!("expected {c}"));
                }
            }
            Expect::Echo(want, e) => {
                if resp["id"] != want {
                    fail("id not echoed".into());
                }
                if okv != e.is_none() || code != e {
                    fail(format!("expected {e:?}"));
                }
            }
        }
        if okv && is_reset {
            started = true;
            live = true;
        }
        if okv && is_step {
            report.steps_ok += 1;
            let p = &resp["payload"];
            if p["terminated"].as_bool().unwrap_or(false) || p["truncated"].as_bool().unwrap_or(false) {
                live = false;
            }
        }
    }
    report
}
