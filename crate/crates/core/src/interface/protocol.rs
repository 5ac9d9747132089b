//! Line-delimited JSON session protocol.
//!
//! Every request is one JSON object on one line with a `cmd` field; every
//! response is one JSON object on one line. Successful responses carry
//! `"ok": true`, failures carry `"ok": false` and an `error` object with a
//! stable `code`. A failed request never changes the session.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::episode::{Episode, EpisodeConfig, Observation, DEFAULT_AGENTS};
use crate::error::Error;
use crate::geom::Action;
use crate::manualgen::Split;
use crate::world::{EnvKind, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    UnknownCommand,
    NoEpisode,
    BadActions,
    EpisodeDone,
    BadConfig,
}

impl ErrorCode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::ParseError => "parse_error",
            ErrorCode::UnknownCommand => "unknown_command",
            ErrorCode::NoEpisode => "no_episode",
            ErrorCode::BadActions => "bad_actions",
            ErrorCode::EpisodeDone => "episode_done",
            ErrorCode::BadConfig => "bad_config",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type Reply = Result<Map<String, Value>, ProtocolError>;
/// Command name, echoed `id`, remaining fields.
type Request = (String, Option<Value>, Map<String, Value>);

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

/// What the connection should do after a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Close,
}

#[derive(Debug, Default)]
pub struct Session {
    id: u64,
    episode: Option<Episode>,
}

impl Session {
    pub fn new(id: u64) -> Self {
        Self { id, episode: None }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    /// Handles one request line and returns the response line (without a
    /// trailing newline).
    pub fn handle_line(&mut self, line: &str) -> (String, Flow) {
        let (cmd, id, result) = match parse_request(line) {
            Ok((cmd, id, req)) => {
                let r = self.dispatch(&cmd, &req);
                (Some(cmd), id, r)
            }
            Err(e) => (None, None, Err(e)),
        };
        let flow = match (&cmd, &result) {
            (Some(c), Ok(_)) if c == "close" => Flow::Close,
            _ => Flow::Continue,
        };
        let mut out = Map::new();
        if let Some(id) = id {
            out.insert("id".into(), id);
        }
        match result {
            Ok(body) => {
                out.insert("ok".into(), Value::Bool(true));
                if let Some(c) = cmd {
                    out.insert("cmd".into(), Value::String(c));
                }
                out.extend(body);
            }
            Err(e) => {
                out.insert("ok".into(), Value::Bool(false));
                if let Some(c) = cmd {
                    out.insert("cmd".into(), Value::String(c));
                }
                out.insert(
                    "error".into(),
                    serde_json::to_value(ErrorBody {
                        code: e.code.name(),
                        message: &e.message,
                    })
                    .expect("error serializes"),
                );
            }
        }
        (Value::Object(out).to_string(), flow)
    }

    fn dispatch(&mut self, cmd: &str, req: &Map<String, Value>) -> Reply {
        match cmd {
            "reset" => self.reset(req),
            "step" => self.step(req),
            "render" => {
                let ep = self.live()?;
                Ok(obj([("lines", json(&ep.render()))]))
            }
            "info" => {
                let ep = self.live()?;
                Ok(obj([
                    ("session", Value::from(self.id)),
                    ("config", config_json(ep.config())),
                    ("grid", Value::from(ep.size())),
                    ("t", Value::from(ep.step_count())),
                    ("done", Value::Bool(ep.is_done())),
                ]))
            }
            "transcript" => {
                let ep = self.live()?;
                Ok(obj([("text", Value::String(ep.transcript().to_text()))]))
            }
            "close" => {
                self.episode = None;
                Ok(Map::new())
            }
            other => Err(ProtocolError::new(
                ErrorCode::UnknownCommand,
                format!("unknown command `{other}`"),
            )),
        }
    }

    fn live(&self) -> Result<&Episode, ProtocolError> {
        self.episode
            .as_ref()
            .ok_or_else(|| ProtocolError::new(ErrorCode::NoEpisode, "no episode; send reset first"))
    }

    fn reset(&mut self, req: &Map<String, Value>) -> Reply {
        let config = reset_config(req)?;
        let ep = Episode::new(config).map_err(|e| ProtocolError::new(ErrorCode::BadConfig, e.to_string()))?;
        let manual = ep.manual();
        let body = obj([
            ("config", config_json(ep.config())),
            ("grid", Value::from(ep.size())),
            ("t", Value::from(0u32)),
            ("observations", observations_json(&ep)),
            ("manual", json(&manual.sentences())),
            ("goal", Value::String(manual.goal_text().to_owned())),
        ]);
        self.episode = Some(ep);
        Ok(body)
    }

    fn step(&mut self, req: &Map<String, Value>) -> Reply {
        let n = self.live()?.n_agents();
        if self.live()?.is_done() {
            return Err(ProtocolError::new(ErrorCode::EpisodeDone, "episode is finished; send reset"));
        }
        let actions = parse_step_actions(req.get("actions"), n)?;
        let ep = self.episode.as_mut().expect("checked above");
        let r = ep.step(&actions).map_err(|e| match e {
            Error::EpisodeDone => ProtocolError::new(ErrorCode::EpisodeDone, e.to_string()),
            other => ProtocolError::new(ErrorCode::BadActions, other.to_string()),
        })?;
        let events: Vec<String> = r.events.iter().map(|e| e.to_string()).collect();
        Ok(obj([
            ("t", Value::from(ep.step_count())),
            ("observations", observations_json(ep)),
            ("rewards", json(&r.rewards)),
            ("done", Value::Bool(r.done)),
            ("win", Value::Bool(r.win)),
            ("events", json(&events)),
        ]))
    }
}

fn parse_request(line: &str) -> Result<Request, ProtocolError> {
    let value: Value = serde_json::from_str(line.trim())
        .map_err(|e| ProtocolError::new(ErrorCode::ParseError, format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(ProtocolError::new(ErrorCode::ParseError, "request must be a JSON object"));
    };
    let id = map.remove("id");
    let cmd = match map.remove("cmd") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(ProtocolError::new(ErrorCode::ParseError, "`cmd` must be a string")),
        None => return Err(ProtocolError::new(ErrorCode::ParseError, "missing `cmd`")),
    };
    Ok((cmd, id, map))
}

fn bad_config(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::new(ErrorCode::BadConfig, msg)
}

fn text_field<'a>(req: &'a Map<String, Value>, key: &str, default: &'a str) -> Result<&'a str, ProtocolError> {
    match req.get(key) {
        None => Ok(default),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(bad_config(format!("`{key}` must be a string"))),
    }
}

fn int_field(req: &Map<String, Value>, key: &str, default: u64) -> Result<u64, ProtocolError> {
    match req.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| bad_config(format!("`{key}` must be a non-negative integer"))),
    }
}

/// Reads `env`, `stage`, `split`, `seed` and `n_agents`, with defaults
/// `rtfm`, `S1`, `train`, 0 and 2.
pub fn reset_config(req: &Map<String, Value>) -> Result<EpisodeConfig, ProtocolError> {
    let env: EnvKind = text_field(req, "env", "rtfm")?
        .parse()
        .map_err(|e: Error| bad_config(e.to_string()))?;
    let stage: Stage = text_field(req, "stage", "S1")?
        .parse()
        .map_err(|e: Error| bad_config(e.to_string()))?;
    let split: Split = text_field(req, "split", "train")?
        .parse()
        .map_err(|e: Error| bad_config(e.to_string()))?;
    let seed = int_field(req, "seed", 0)?;
    let n_agents = usize::try_from(int_field(req, "n_agents", DEFAULT_AGENTS as u64)?)
        .map_err(|_| bad_config("`n_agents` is too large"))?;
    let config = EpisodeConfig::new(env, stage, split, seed, n_agents);
    config.validate().map_err(|e| bad_config(e.to_string()))?;
    Ok(config)
}

/// Accepts action names (`"up"`), indices (`0..5`) or one comma-separated
/// string (`"up,stay"`).
fn parse_step_actions(value: Option<&Value>, n: usize) -> Result<Vec<Action>, ProtocolError> {
    let bad = |msg: String| ProtocolError::new(ErrorCode::BadActions, msg);
    let actions = match value {
        None => return Err(bad("missing `actions`".into())),
        Some(Value::String(s)) => crate::episode::parse_actions(s).map_err(|e| bad(e.to_string()))?,
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => s.parse::<Action>().map_err(|e| bad(e.to_string())),
                Value::Number(_) => v
                    .as_u64()
                    .and_then(|i| Action::from_index(i as usize))
                    .ok_or_else(|| bad(format!("action index {v} is not in 0..5"))),
                other => Err(bad(format!("bad action {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(other) => return Err(bad(format!("`actions` must be a list, got {other}"))),
    };
    if actions.len() != n {
        return Err(bad(format!("expected {n} actions, got {}", actions.len())));
    }
    Ok(actions)
}

fn json<T: Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("protocol values serialize")
}

fn obj<const N: usize>(fields: [(&str, Value); N]) -> Map<String, Value> {
    fields.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

fn config_json(c: &EpisodeConfig) -> Value {
    Value::Object(obj([
        ("env", Value::String(c.env.to_string())),
        ("stage", Value::String(c.stage.to_string())),
        ("split", Value::String(c.split.name().to_owned())),
        ("seed", Value::from(c.seed)),
        ("n_agents", Value::from(c.n_agents)),
    ]))
}

fn observations_json(ep: &Episode) -> Value {
    let obs: Vec<Observation> = ep.observations();
    json(&obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_have_stable_names() {
        let v = serde_json::to_value(ErrorCode::BadActions).unwrap();
        assert_eq!(v, Value::String(ErrorCode::BadActions.name().into()));
    }

    #[test]
    fn request_id_is_echoed() {
        let mut s = Session::new(1);
        let (resp, _) = s.handle_line(r#"{"cmd":"info","id":42}"#);
        let v: Value = serde_json::from_str(&resp).unwrap();
        assert_eq!(v["id"], 42);
        assert_eq!(v["error"]["code"], "no_episode");
    }
}
