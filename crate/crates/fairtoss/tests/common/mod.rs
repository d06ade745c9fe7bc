//! In-process HTTP client and a reference model of the session protocol.

#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fairtoss::service::{router, SessionManager, TOKEN_HEADER};
use fairtoss_core::{ProtocolRng, Transcript};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Client {
    app: Router,
}

impl Default for Client {
    fn default() -> Self {
        Self::new()
    }
}

impl Client {
    pub fn new() -> Self {
        Self {
            app: router(Arc::new(SessionManager::in_memory())),
        }
    }

    pub async fn call(&self, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (u16, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(TOKEN_HEADER, t);
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status().as_u16();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    /// A fresh AUS v NZL session: `(id, aus_token, nzl_token)`.
    pub async fn create(&self) -> (String, String, String) {
        let (status, body) = self
            .call("POST", "/sessions", None, Some(json!({"teams": ["AUS", "NZL"]})))
            .await;
        assert_eq!(status, StatusCode::CREATED.as_u16(), "{body}");
        (
            body["session"]["id"].as_str().unwrap().to_string(),
            body["tokens"]["AUS"].as_str().unwrap().to_string(),
            body["tokens"]["NZL"].as_str().unwrap().to_string(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Created,
    Tossed,
    Proposed,
    Complete,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Created, Phase::Tossed, Phase::Proposed, Phase::Complete];

    pub fn wire(self) -> &'static str {
        match self {
            Phase::Created => "created",
            Phase::Tossed => "tossed",
            Phase::Proposed => "proposed",
            Phase::Complete => "complete",
        }
    }
}

/// Who sends a request, relative to the session's toss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Lucky,
    Unlucky,
    /// No token at all.
    Anonymous,
    /// A valid token for a different session.
    Stranger,
}

impl Actor {
    pub const ALL: [Actor; 4] = [Actor::Lucky, Actor::Unlucky, Actor::Anonymous, Actor::Stranger];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Toss,
    Proposal,
    Choice,
    WhatIf,
    Get,
}

impl Endpoint {
    pub const ALL: [Endpoint; 5] = [Endpoint::Toss, Endpoint::Proposal, Endpoint::Choice, Endpoint::WhatIf, Endpoint::Get];
}

#[derive(Debug, Clone, Copy)]
pub struct Action {
    pub endpoint: Endpoint,
    pub actor: Actor,
    /// Bonus for proposals, candidate bonus for what-if.
    pub b: f64,
    pub option: i64,
}

/// Status the service must return for `action` in `phase`.
pub fn expected_status(phase: Phase, action: &Action) -> u16 {
    if matches!(action.actor, Actor::Anonymous | Actor::Stranger) {
        return 401;
    }
    let tossed = phase != Phase::Created;
    match action.endpoint {
        Endpoint::Get => 200,
        Endpoint::Toss => {
            if tossed {
                409
            } else {
                200
            }
        }
        Endpoint::WhatIf => {
            if !tossed {
                409
            } else if action.b < 0.0 {
                422
            } else {
                200
            }
        }
        Endpoint::Proposal => {
            if !tossed {
                409
            } else if action.actor != Actor::Unlucky {
                403
            } else if phase != Phase::Tossed {
                409
            } else if action.b < 0.0 {
                422
            } else {
                200
            }
        }
        Endpoint::Choice => {
            if !tossed {
                409
            } else if action.actor != Actor::Lucky {
                403
            } else if phase != Phase::Proposed {
                409
            } else if !(1..=2).contains(&action.option) {
                422
            } else {
                200
            }
        }
    }
}

pub fn expected_code(status: u16) -> Option<&'static str> {
    match status {
        401 => Some("unauthorized"),
        403 => Some("wrong_role"),
        409 => Some("wrong_phase"),
        422 => Some("validation_failed"),
        _ => None,
    }
}

/// A session plus everything needed to act in it.
pub struct Live {
    pub id: String,
    pub aus: String,
    pub nzl: String,
    pub stranger: String,
    /// Team label of the lucky captain, once tossed.
    pub lucky: Option<String>,
}

impl Live {
    pub async fn new(client: &Client) -> Self {
        let (id, aus, nzl) = client.create().await;
        let (_, stranger, _) = client.create().await;
        Self {
            id,
            aus,
            nzl,
            stranger,
            lucky: None,
        }
    }

    /// Token for `actor`. Before the toss, `Lucky` means AUS.
    pub fn token(&self, actor: Actor) -> Option<&str> {
        let lucky_is_aus = self.lucky.as_deref().is_none_or(|l| l == "AUS");
        match (actor, lucky_is_aus) {
            (Actor::Lucky, true) | (Actor::Unlucky, false) => Some(&self.aus),
            (Actor::Lucky, false) | (Actor::Unlucky, true) => Some(&self.nzl),
            (Actor::Anonymous, _) => None,
            (Actor::Stranger, _) => Some(&self.stranger),
        }
    }

    pub async fn send(&self, client: &Client, action: &Action, seed: u64) -> (u16, Value) {
        let token = self.token(action.actor);
        let base = format!("/sessions/{}", self.id);
        match action.endpoint {
            Endpoint::Toss => client.call("POST", &format!("{base}/toss"), token, Some(json!({"seed": seed}))).await,
            Endpoint::Proposal => {
                client
                    .call(
                        "POST",
                        &format!("{base}/proposal"),
                        token,
                        Some(json!({"b": action.b, "advantageous_turn": "bowl_first"})),
                    )
                    .await
            }
            Endpoint::Choice => {
                client
                    .call("POST", &format!("{base}/choice"), token, Some(json!({"option": action.option})))
                    .await
            }
            Endpoint::WhatIf => {
                client
                    .call("GET", &format!("{base}/whatif?candidate_b={}&a_hat=-50", action.b), token, None)
                    .await
            }
            Endpoint::Get => client.call("GET", &base, token, None).await,
        }
    }

    pub async fn snapshot(&self, client: &Client) -> Value {
        let (status, mut body) = client.call("GET", &format!("/sessions/{}", self.id), Some(&self.aus), None).await;
        assert_eq!(status, 200);
        body.as_object_mut().unwrap().remove("viewer");
        body
    }
}

/// Drive a session to `phase` along the legal path.
pub async fn advance(client: &Client, live: &mut Live, phase: Phase, seed: u64) {
    let steps = [
        (Phase::Tossed, Endpoint::Toss, Actor::Lucky),
        (Phase::Proposed, Endpoint::Proposal, Actor::Unlucky),
        (Phase::Complete, Endpoint::Choice, Actor::Lucky),
    ];
    for (reached, endpoint, actor) in steps {
        if Phase::ALL.iter().position(|p| *p == reached) > Phase::ALL.iter().position(|p| *p == phase) {
            break;
        }
        let action = Action {
            endpoint,
            actor,
            b: 50.0,
            option: 1,
        };
        let (status, body) = live.send(client, &action, seed).await;
        assert_eq!(status, 200, "{body}");
        if endpoint == Endpoint::Toss {
            live.lucky = Some(body["toss"]["lucky"].as_str().unwrap().to_string());
        }
    }
}

/// Check every (actor, endpoint, phase) triple. Returns `(illegal, legal)`
/// counts, or a description of the first mismatch.
pub async fn role_matrix() -> Result<(usize, usize), String> {
    let client = Client::new();
    let (mut illegal, mut legal) = (0, 0);
    for phase in Phase::ALL {
        for endpoint in Endpoint::ALL {
            for actor in Actor::ALL {
                let mut live = Live::new(&client).await;
                advance(&client, &mut live, phase, 5).await;
                let before = live.snapshot(&client).await;
                let action = Action {
                    endpoint,
                    actor,
                    b: 50.0,
                    option: 1,
                };
                let want = expected_status(phase, &action);
                let (status, body) = live.send(&client, &action, 6).await;
                let context = format!("{actor:?} {endpoint:?} in {phase:?}");
                if status != want {
                    return Err(format!("{context}: expected {want}, got {status} {body}"));
                }
                if want == 200 {
                    legal += 1;
                    continue;
                }
                illegal += 1;
                if body["code"] != expected_code(want).unwrap() {
                    return Err(format!("{context}: wrong error code {body}"));
                }
                if live.snapshot(&client).await != before {
                    return Err(format!("{context}: rejected request changed the session"));
                }
            }
        }
    }
    Ok((illegal, legal))
}

#[derive(Debug, Default)]
pub struct SequenceStats {
    pub sequences: usize,
    pub requests: usize,
    pub completed: usize,
    pub rejected: usize,
}

fn random_action<R: Rng>(rng: &mut R) -> Action {
    let endpoint = match rng.random_range(0..8) {
        0 | 1 => Endpoint::Toss,
        2 | 3 => Endpoint::Proposal,
        4 | 5 => Endpoint::Choice,
        6 => Endpoint::WhatIf,
        _ => Endpoint::Get,
    };
    let actor = match rng.random_range(0..10) {
        0..=3 => Actor::Lucky,
        4..=7 => Actor::Unlucky,
        8 => Actor::Anonymous,
        _ => Actor::Stranger,
    };
    let b = [-5.0, 0.0, 12.5, 50.0, 70.0][rng.random_range(0..5)];
    let option = [0, 1, 2, 3][rng.random_range(0..4)];
    Action {
        endpoint,
        actor,
        b,
        option,
    }
}

/// Run `n` random request sequences against the reference model.
pub async fn random_sequences(n: usize, seed: u64) -> Result<SequenceStats, String> {
    let client = Client::new();
    let mut rng = ProtocolRng::new(seed);
    let mut stats = SequenceStats::default();
    for sequence in 0..n {
        let mut live = Live::new(&client).await;
        let mut phase = Phase::Created;
        let mut accepted = Vec::new();
        let length = rng.random_range(1..=14);
        for _ in 0..length {
            let action = random_action(&mut rng);
            let want = expected_status(phase, &action);
            let before = if want != 200 { Some(live.snapshot(&client).await) } else { None };
            let (status, body) = live.send(&client, &action, rng.random()).await;
            stats.requests += 1;
            if status != want {
                return Err(format!("sequence {sequence}: {action:?} in {phase:?}: expected {want}, got {status} {body}"));
            }
            if let Some(before) = before {
                stats.rejected += 1;
                if live.snapshot(&client).await != before {
                    return Err(format!("sequence {sequence}: rejected {action:?} changed the session"));
                }
                continue;
            }
            let next = match action.endpoint {
                Endpoint::Toss => {
                    live.lucky = Some(body["toss"]["lucky"].as_str().unwrap().to_string());
                    Phase::Tossed
                }
                Endpoint::Proposal => Phase::Proposed,
                Endpoint::Choice => Phase::Complete,
                Endpoint::WhatIf | Endpoint::Get => phase,
            };
            if next != phase {
                accepted.push(action.endpoint);
            }
            phase = next;
            if matches!(action.endpoint, Endpoint::Toss | Endpoint::Proposal | Endpoint::Choice | Endpoint::Get)
                && body["phase"] != phase.wire()
            {
                return Err(format!("sequence {sequence}: service reports {} but model is {phase:?}", body["phase"]));
            }
        }
        let snapshot = live.snapshot(&client).await;
        if snapshot["phase"] != phase.wire() {
            return Err(format!("sequence {sequence}: final phase {} vs model {phase:?}", snapshot["phase"]));
        }
        if phase == Phase::Complete {
            if accepted != [Endpoint::Toss, Endpoint::Proposal, Endpoint::Choice] {
                return Err(format!("sequence {sequence}: completed via {accepted:?}"));
            }
            let transcript: Transcript =
                serde_json::from_value(snapshot["transcript"].clone()).map_err(|e| format!("sequence {sequence}: {e}"))?;
            if transcript.events.len() != 3 || snapshot["events"] != serde_json::to_value(&transcript.events).unwrap() {
                return Err(format!("sequence {sequence}: transcript does not match the event log"));
            }
            transcript
                .replay()
                .map_err(|e| format!("sequence {sequence}: transcript does not replay: {e}"))?;
            stats.completed += 1;
        } else if !snapshot["transcript"].is_null() {
            return Err(format!("sequence {sequence}: transcript present before completion"));
        }
        stats.sequences += 1;
    }
    Ok(stats)
}
