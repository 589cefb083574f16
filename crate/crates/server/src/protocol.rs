//! Wire format: each frame is a 4-byte big-endian length followed by that
//! many bytes of UTF-8 JSON holding one [`EnvMessage`].

use std::io::{self, Read, Write};

use dogfight_core::machines::MachineId;
use dogfight_core::physics::KineticsMatrix;
use dogfight_core::runtime::{RunMode, TraceHeader, TraceRecord};
use dogfight_core::scenario::ScenarioConfig;
use dogfight_core::world::WorldSnapshot;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;
/// Frames longer than this are refused and the connection is closed.
pub const MAX_FRAME_BYTES: u32 = 16 * 1024 * 1024;

pub type EnvId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvMessage {
    pub version: u32,
    /// Echoed unchanged in the response.
    pub request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_id: Option<EnvId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_slot: Option<usize>,
    #[serde(flatten)]
    pub body: Body,
}

impl EnvMessage {
    pub fn new(request_id: u64, env_id: Option<EnvId>, agent_slot: Option<usize>, body: Body) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            request_id,
            env_id,
            agent_slot,
            body,
        }
    }

    /// A response to `request` with the same correlation fields.
    pub fn reply(request: &EnvMessage, body: Body) -> Self {
        Self::new(request.request_id, request.env_id, request.agent_slot, body)
    }

    pub fn error(request_id: u64, env_id: Option<EnvId>, code: ErrorCode, message: impl Into<String>) -> Self {
        Self::new(
            request_id,
            env_id,
            None,
            Body::Error {
                code,
                message: message.into(),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Body {
    CreateEnv {
        scenario: ScenarioConfig,
        run_mode: RunMode,
        /// Overrides the server-assigned seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    DestroyEnv,
    ListEnvs,
    /// Claims `agent_slot` for this connection.
    AttachAgent,
    Reset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Action for `agent_slot` (slot 0 when absent).
    Step {
        action: Vec<f64>,
    },
    GetState,
    SetCustomPhysics {
        machine: MachineId,
        enabled: bool,
    },
    UpdateKinetics {
        machine: MachineId,
        matrix: KineticsMatrix,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    Ack {
        result: AckResult,
    },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::CreateEnv { .. } => "CreateEnv",
            Body::DestroyEnv => "DestroyEnv",
            Body::ListEnvs => "ListEnvs",
            Body::AttachAgent => "AttachAgent",
            Body::Reset { .. } => "Reset",
            Body::Step { .. } => "Step",
            Body::GetState => "GetState",
            Body::SetCustomPhysics { .. } => "SetCustomPhysics",
            Body::UpdateKinetics { .. } => "UpdateKinetics",
            Body::Error { .. } => "Error",
            Body::Ack { .. } => "Ack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnsupportedVersion,
    UnknownEnv,
    Capacity,
    InvalidScenario,
    InvalidRequest,
    BadAction,
    NotReset,
    EpisodeOver,
    SlotTaken,
    BarrierTimeout,
    EpisodeFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvInfo {
    pub env_id: EnvId,
    pub seed: u64,
    pub run_mode: RunMode,
    pub slots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedEnv {
    pub env_id: EnvId,
    /// Seed the first reset will use unless the reset names its own.
    pub seed: u64,
    pub slots: usize,
    pub action_arity: usize,
    pub observation_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub step: u64,
    pub finished: bool,
    pub snapshot: WorldSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AckResult {
    Created(CreatedEnv),
    Envs { envs: Vec<EnvInfo> },
    Reset { header: Box<TraceHeader> },
    Stepped { record: TraceRecord },
    State(Box<StateView>),
    Done,
}

/// Writes one frame.
pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&n| n <= MAX_FRAME_BYTES)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    let mut buf = Vec::with_capacity(4 + body.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(body);
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_message(w: &mut impl Write, msg: &EnvMessage) -> io::Result<()> {
    let text = serde_json::to_vec(msg).map_err(io::Error::other)?;
    write_frame(w, &text)
}
