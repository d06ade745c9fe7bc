//! Live protocol sessions for two captains.
//!
//! Each session hands out one capability token per captain at creation.
//! Only SHA-256 digests of the tokens are kept. A request's token names the
//! calling team; after the toss the team's role decides what it may do.
//!
//! Checks run in a fixed order: session exists (404), token valid (401),
//! role allowed (403, once roles exist), phase allows the step (409),
//! request values valid (422).
//!
//! Mutations on one session are serialized by a per-session mutex, and
//! the new state is persisted before it becomes visible.

mod http;
mod store;

pub use http::{router, serve, TOKEN_HEADER};
pub use store::Store;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use fairtoss_core::mechanism::Role;
use fairtoss_core::sim::config::{ModelKind, ValuationConfig};
use fairtoss_core::valuation::{indifference_bonus, DEFAULT_SOLVER_TOLERANCE};
use fairtoss_core::{
    build_proposal, Allocation, Event, OptionBundle, OptionIndex, Phase, Proposal, ProtocolRng, TeamId,
    TossOutcome, TpcRun, Transcript, Turn, ValuationModel, ValuationView,
};
use rand::TryRngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Unauthorized,
    Forbidden,
    NotFound,
    Conflict,
    Validation,
    Internal,
}

impl ErrorKind {
    pub fn status(self) -> u16 {
        match self {
            ErrorKind::Unauthorized => 401,
            ErrorKind::Forbidden => 403,
            ErrorKind::NotFound => 404,
            ErrorKind::Conflict => 409,
            ErrorKind::Validation => 422,
            ErrorKind::Internal => 500,
        }
    }
}

/// Error body: `{code, message, field?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub kind: Option<ErrorKind>,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        Self {
            kind: Some(kind),
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, "validation_failed", message).with_field(field)
    }

    pub fn status(&self) -> u16 {
        self.kind.unwrap_or(ErrorKind::Internal).status()
    }
}

impl From<fairtoss_core::Error> for ApiError {
    fn from(e: fairtoss_core::Error) -> Self {
        use fairtoss_core::Error as E;
        let message = e.to_string();
        match e {
            E::OutOfOrder { .. } => ApiError::new(ErrorKind::Conflict, "wrong_phase", message),
            E::WrongRole { .. } => ApiError::new(ErrorKind::Forbidden, "wrong_role", message),
            E::UnknownTeam(_) => ApiError::new(ErrorKind::Unauthorized, "unauthorized", message),
            E::InvalidProposal(_) => ApiError::validation("b", message),
            E::InvalidMatch(_) => ApiError::validation("teams", message),
            E::InvalidModel(_) | E::InvalidParameters(_) | E::SolverFailure(_) => {
                ApiError::new(ErrorKind::Validation, "validation_failed", message)
            }
            E::Config { path, .. } => ApiError::validation(&path, message),
            _ => ApiError::new(ErrorKind::Internal, "internal", message),
        }
    }
}

impl From<crate::Error> for ApiError {
    fn from(e: crate::Error) -> Self {
        ApiError::new(ErrorKind::Internal, "storage", e.to_string())
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

/// A session as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub run: TpcRun,
    /// Hex SHA-256 of each team's token, aligned with the run's teams.
    pub token_digests: [String; 2],
    pub valuation: Option<ValuationModel>,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewer {
    pub team: TeamId,
    pub role: Option<Role>,
}

/// A session as returned to a captain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub phase: Phase,
    pub teams: [TeamId; 2],
    pub toss: Option<TossOutcome>,
    pub proposal: Option<Proposal>,
    pub allocation: Option<Allocation>,
    pub events: Vec<Event>,
    pub transcript: Option<Transcript>,
    pub valuation: Option<ValuationModel>,
    pub viewer: Option<Viewer>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl SessionView {
    fn of(record: &SessionRecord, viewer: Option<&TeamId>) -> Self {
        let run = &record.run;
        Self {
            id: record.id.clone(),
            phase: run.phase(),
            teams: run.teams().clone(),
            toss: run.toss_outcome().cloned(),
            proposal: run.proposal().cloned(),
            allocation: run.allocation().cloned(),
            events: run.events().to_vec(),
            transcript: run.transcript(),
            valuation: record.valuation,
            viewer: viewer.map(|team| Viewer {
                team: team.clone(),
                role: run.role_of(team),
            }),
            created_at: record.created_at,
            updated_at: record.updated_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session: SessionView,
    /// Capability token per team label. Shown once.
    pub tokens: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub teams: [String; 2],
    #[serde(default)]
    pub valuation: Option<ValuationModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TossRequest {
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRequest {
    pub b: f64,
    pub advantageous_turn: Turn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceRequest {
    pub option: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfQuery {
    pub candidate_b: f64,
    pub a_hat: f64,
    #[serde(default)]
    pub kind: Option<ModelKind>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuedBundle {
    #[serde(flatten)]
    pub bundle: OptionBundle,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub candidate_b: f64,
    pub a_hat: f64,
    pub model: ValuationModel,
    pub advantageous_turn: Turn,
    pub option1: ValuedBundle,
    pub option2: ValuedBundle,
    pub indifference_bonus: f64,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn fresh_token() -> ApiResult<String> {
    let mut bytes = [0u8; 32];
    rand::rngs::OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|e| ApiError::new(ErrorKind::Internal, "entropy", e.to_string()))?;
    Ok(hex::encode(bytes))
}

fn entropy_seed() -> ApiResult<u64> {
    rand::rngs::OsRng
        .try_next_u64()
        .map_err(|e| ApiError::new(ErrorKind::Internal, "entropy", e.to_string()))
}

type Shared = Arc<Mutex<SessionRecord>>;

pub struct SessionManager {
    store: Store,
    sessions: RwLock<HashMap<String, Shared>>,
}

impl SessionManager {
    /// Open a manager, loading any sessions already in `store`.
    pub fn open(store: Store) -> Result<Self> {
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|(id, record)| (id, Arc::new(Mutex::new(record))))
            .collect();
        Ok(Self {
            store,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn in_memory() -> Self {
        Self {
            store: Store::Memory,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session table lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, request: CreateRequest) -> ApiResult<CreatedSession> {
        let [a, b] = request.teams;
        for (i, label) in [&a, &b].into_iter().enumerate() {
            if label.trim().is_empty() {
                return Err(ApiError::validation(&format!("teams[{i}]"), "team label must not be empty"));
            }
        }
        if let Some(model) = &request.valuation {
            model.validate().map_err(|e| ApiError::from(e).with_field("valuation"))?;
        }
        let run = TpcRun::new(TeamId::new(a.clone()), TeamId::new(b.clone()))?;
        let tokens = [fresh_token()?, fresh_token()?];
        let now = now_millis();
        let record = SessionRecord {
            id: uuid::Uuid::new_v4().to_string(),
            run,
            token_digests: [digest(&tokens[0]), digest(&tokens[1])],
            valuation: request.valuation,
            created_at: now,
            updated_at: now,
        };
        self.store.save(&record)?;
        let created = CreatedSession {
            session: SessionView::of(&record, None),
            tokens: [(a, tokens[0].clone()), (b, tokens[1].clone())].into_iter().collect(),
        };
        self.sessions
            .write()
            .expect("session table lock")
            .insert(record.id.clone(), Arc::new(Mutex::new(record)));
        log::info!("created session {}", created.session.id);
        Ok(created)
    }

    fn shared(&self, id: &str) -> ApiResult<Shared> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorKind::NotFound, "not_found", format!("no session `{id}`")))
    }

    fn caller(record: &SessionRecord, token: Option<&str>) -> ApiResult<TeamId> {
        let unauthorized = || ApiError::new(ErrorKind::Unauthorized, "unauthorized", "missing or unknown captain token");
        let presented = digest(token.ok_or_else(unauthorized)?);
        record
            .token_digests
            .iter()
            .position(|d| *d == presented)
            .map(|i| record.run.teams()[i].clone())
            .ok_or_else(unauthorized)
    }

    /// Role check then phase check, for a step only `role` may take in `phase`.
    fn check_step(run: &TpcRun, team: &TeamId, action: &'static str, role: Role, phase: Phase) -> ApiResult<()> {
        if let Some(actual) = run.role_of(team) {
            if actual != role {
                return Err(fairtoss_core::Error::WrongRole { action, expected: role }.into());
            }
        }
        if run.phase() != phase {
            return Err(fairtoss_core::Error::OutOfOrder {
                action,
                phase: run.phase(),
            }
            .into());
        }
        Ok(())
    }

    /// Apply `step` to a copy of the session, persist it, then publish it.
    fn mutate<F>(&self, id: &str, token: Option<&str>, step: F) -> ApiResult<SessionView>
    where
        F: FnOnce(&mut TpcRun, &TeamId) -> ApiResult<()>,
    {
        let shared = self.shared(id)?;
        let mut guard = shared.lock().expect("session lock");
        let team = Self::caller(&guard, token)?;
        let mut next = guard.clone();
        step(&mut next.run, &team)?;
        next.updated_at = now_millis().max(guard.updated_at);
        self.store.save(&next)?;
        *guard = next;
        Ok(SessionView::of(&guard, Some(&team)))
    }

    pub fn toss(&self, id: &str, token: Option<&str>, request: TossRequest) -> ApiResult<SessionView> {
        self.mutate(id, token, |run, _| {
            if run.phase() != Phase::Created {
                return Err(fairtoss_core::Error::OutOfOrder {
                    action: "toss",
                    phase: run.phase(),
                }
                .into());
            }
            let seed = match request.seed {
                Some(seed) => seed,
                None => entropy_seed()?,
            };
            run.toss(&mut ProtocolRng::new(seed))?;
            Ok(())
        })
    }

    pub fn propose(&self, id: &str, token: Option<&str>, request: ProposalRequest) -> ApiResult<SessionView> {
        self.mutate(id, token, |run, team| {
            Self::check_step(run, team, "propose", Role::Unlucky, Phase::Tossed)?;
            if !(request.b.is_finite() && request.b >= 0.0) {
                return Err(ApiError::validation("b", format!("bonus must be a non-negative number of runs, got {}", request.b)));
            }
            run.propose(team, request.b, request.advantageous_turn, None)?;
            Ok(())
        })
    }

    pub fn choose(&self, id: &str, token: Option<&str>, request: ChoiceRequest) -> ApiResult<SessionView> {
        self.mutate(id, token, |run, team| {
            Self::check_step(run, team, "choose", Role::Lucky, Phase::Proposed)?;
            let option = u8::try_from(request.option)
                .ok()
                .and_then(|o| OptionIndex::try_from(o).ok())
                .ok_or_else(|| ApiError::validation("option", format!("option must be 1 or 2, got {}", request.option)))?;
            run.choose(team, option)?;
            Ok(())
        })
    }

    pub fn get(&self, id: &str, token: Option<&str>) -> ApiResult<SessionView> {
        let shared = self.shared(id)?;
        let guard = shared.lock().expect("session lock");
        let team = Self::caller(&guard, token)?;
        Ok(SessionView::of(&guard, Some(&team)))
    }

    /// Utilities of both bundles at `candidate_b` for the supplied view,
    /// plus the indifference bonus. Never changes the session.
    pub fn whatif(&self, id: &str, token: Option<&str>, query: &WhatIfQuery) -> ApiResult<WhatIfResponse> {
        let (team, default_model) = {
            let shared = self.shared(id)?;
            let guard = shared.lock().expect("session lock");
            let team = Self::caller(&guard, token)?;
            if guard.run.phase() == Phase::Created {
                return Err(ApiError::new(
                    ErrorKind::Conflict,
                    "wrong_phase",
                    "what-if queries open once the toss has happened",
                ));
            }
            (team, guard.valuation)
        };
        evaluate_whatif(team, default_model, query)
    }

    /// Digest of the session's persisted state.
    pub fn state_digest(&self, id: &str) -> ApiResult<String> {
        let shared = self.shared(id)?;
        let guard = shared.lock().expect("session lock");
        Ok(digest(&crate::io::to_canonical_json(&*guard)))
    }
}

fn evaluate_whatif(team: TeamId, default_model: Option<ValuationModel>, query: &WhatIfQuery) -> ApiResult<WhatIfResponse> {
    if !(query.candidate_b.is_finite() && query.candidate_b >= 0.0) {
        return Err(ApiError::validation("candidate_b", "candidate_b must be a non-negative number of runs"));
    }
    if !query.a_hat.is_finite() {
        return Err(ApiError::validation("a_hat", "a_hat must be a finite number of runs"));
    }
    let model = match query.kind {
        Some(ModelKind::ScoreSimulation) if query.sigma.is_none() => {
            return Err(ApiError::validation("sigma", "score_simulation needs sigma, the score standard deviation"));
        }
        Some(kind) => ValuationConfig {
            kind,
            sigma: query.sigma,
            noise_sd: 0.0,
        }
        .model(0.0),
        None => match (default_model, query.sigma) {
            (Some(model), None) => model,
            (_, sigma) => ValuationConfig {
                sigma,
                ..ValuationConfig::default()
            }
            .model(0.0),
        },
    };
    model.validate().map_err(|e| ApiError::from(e).with_field("sigma"))?;

    let view = ValuationView::new(team, query.a_hat, model);
    let turn = view.advantageous_turn();
    let proposal = build_proposal(query.candidate_b, turn)?;
    let valued = |bundle: &OptionBundle| -> ApiResult<ValuedBundle> {
        Ok(ValuedBundle {
            bundle: *bundle,
            utility: view.utility(bundle)?,
        })
    };
    Ok(WhatIfResponse {
        candidate_b: query.candidate_b,
        a_hat: query.a_hat,
        model,
        advantageous_turn: turn,
        option1: valued(&proposal.option1)?,
        option2: valued(&proposal.option2)?,
        indifference_bonus: indifference_bonus(&view, DEFAULT_SOLVER_TOLERANCE)?.bonus,
    })
}
