//! Blocking client for the environment server.

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};

use dogfight_core::machines::MachineId;
use dogfight_core::physics::KineticsMatrix;
use dogfight_core::runtime::{RunMode, Trace, TraceHeader, TraceRecord};
use dogfight_core::scenario::{Controller, Observation, ScenarioConfig};
use thiserror::Error;

use crate::protocol::{
    read_frame, write_message, AckResult, Body, CreatedEnv, EnvId, EnvInfo, EnvMessage, ErrorCode, StateView,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("undecodable response: {0}")]
    Json(#[from] serde_json::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("server error ({code:?}): {message}")]
    Remote { code: ErrorCode, message: String },
    #[error("unexpected response: {0}")]
    Unexpected(String),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            Self::Remote { code, .. } => Some(*code),
            _ => None,
        }
    }
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    next_id: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            next_id: 1,
        })
    }

    /// Sends a request without waiting and returns its request id.
    pub fn send(&mut self, env_id: Option<EnvId>, slot: Option<usize>, body: Body) -> io::Result<u64> {
        let id = self.next_id;
        self.next_id += 1;
        write_message(&mut self.writer, &EnvMessage::new(id, env_id, slot, body))?;
        Ok(id)
    }

    /// Next response, in whatever order the server completes them.
    pub fn recv(&mut self) -> Result<EnvMessage, ClientError> {
        let bytes = read_frame(&mut self.reader)?.ok_or(ClientError::Closed)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Sends one request and waits for its answer.
    pub fn request(
        &mut self,
        env_id: Option<EnvId>,
        slot: Option<usize>,
        body: Body,
    ) -> Result<AckResult, ClientError> {
        let id = self.send(env_id, slot, body)?;
        let response = self.recv()?;
        if response.request_id != id {
            return Err(ClientError::Unexpected(format!(
                "response to request {} while waiting for {id}",
                response.request_id
            )));
        }
        into_result(response)
    }

    pub fn create_env(
        &mut self,
        scenario: ScenarioConfig,
        run_mode: RunMode,
        seed: Option<u64>,
    ) -> Result<CreatedEnv, ClientError> {
        match self.request(
            None,
            None,
            Body::CreateEnv {
                scenario,
                run_mode,
                seed,
            },
        )? {
            AckResult::Created(c) => Ok(c),
            other => Err(unexpected(&other)),
        }
    }

    pub fn destroy_env(&mut self, env_id: EnvId) -> Result<(), ClientError> {
        self.done(Some(env_id), None, Body::DestroyEnv)
    }

    pub fn list_envs(&mut self) -> Result<Vec<EnvInfo>, ClientError> {
        match self.request(None, None, Body::ListEnvs)? {
            AckResult::Envs { envs } => Ok(envs),
            other => Err(unexpected(&other)),
        }
    }

    pub fn attach(&mut self, env_id: EnvId, slot: usize) -> Result<(), ClientError> {
        self.done(Some(env_id), Some(slot), Body::AttachAgent)
    }

    pub fn reset(&mut self, env_id: EnvId, seed: Option<u64>) -> Result<TraceHeader, ClientError> {
        match self.request(Some(env_id), None, Body::Reset { seed })? {
            AckResult::Reset { header } => Ok(*header),
            other => Err(unexpected(&other)),
        }
    }

    pub fn step(&mut self, env_id: EnvId, slot: usize, action: Vec<f64>) -> Result<TraceRecord, ClientError> {
        match self.request(Some(env_id), Some(slot), Body::Step { action })? {
            AckResult::Stepped { record } => Ok(record),
            other => Err(unexpected(&other)),
        }
    }

    /// Submits actions for several slots at once and waits for the tick
    /// they complete. Every slot receives the same record.
    pub fn step_slots(&mut self, env_id: EnvId, actions: &[(usize, Vec<f64>)]) -> Result<TraceRecord, ClientError> {
        for (slot, action) in actions {
            self.send(Some(env_id), Some(*slot), Body::Step { action: action.clone() })?;
        }
        let mut record = None;
        let mut first_error = None;
        for _ in actions {
            match into_result(self.recv()?) {
                Ok(AckResult::Stepped { record: r }) => record = Some(r),
                Ok(other) => first_error = first_error.or(Some(unexpected(&other))),
                Err(e) => first_error = first_error.or(Some(e)),
            }
        }
        match (first_error, record) {
            (Some(e), _) => Err(e),
            (None, Some(r)) => Ok(r),
            (None, None) => Err(ClientError::Unexpected("no slots submitted".into())),
        }
    }

    pub fn get_state(&mut self, env_id: EnvId) -> Result<StateView, ClientError> {
        match self.request(Some(env_id), None, Body::GetState)? {
            AckResult::State(s) => Ok(*s),
            other => Err(unexpected(&other)),
        }
    }

    pub fn set_custom_physics(&mut self, env_id: EnvId, machine: MachineId, enabled: bool) -> Result<(), ClientError> {
        self.done(Some(env_id), None, Body::SetCustomPhysics { machine, enabled })
    }

    pub fn update_kinetics(
        &mut self,
        env_id: EnvId,
        machine: MachineId,
        matrix: KineticsMatrix,
    ) -> Result<(), ClientError> {
        self.done(Some(env_id), None, Body::UpdateKinetics { machine, matrix })
    }

    fn done(&mut self, env_id: Option<EnvId>, slot: Option<usize>, body: Body) -> Result<(), ClientError> {
        match self.request(env_id, slot, body)? {
            AckResult::Done => Ok(()),
            other => Err(unexpected(&other)),
        }
    }
}

fn into_result(msg: EnvMessage) -> Result<AckResult, ClientError> {
    match msg.body {
        Body::Ack { result } => Ok(result),
        Body::Error { code, message } => Err(ClientError::Remote { code, message }),
        other => Err(ClientError::Unexpected(other.kind().into())),
    }
}

fn unexpected(result: &AckResult) -> ClientError {
    ClientError::Unexpected(format!("{result:?}").chars().take(120).collect())
}

/// Plays one episode on a server-side environment and returns its trace.
///
/// `policy` is asked for every slot's action each step, exactly as for an
/// in-process episode. Only the entries for external slots still flying
/// are sent, so the recorded trace matches an in-process run whose policy
/// leaves the other entries empty.
pub fn record_remote_episode(
    client: &mut Client,
    env_id: EnvId,
    seed: Option<u64>,
    mut policy: impl FnMut(u64, &[Observation]) -> Vec<Vec<f64>>,
) -> Result<Trace, ClientError> {
    let header = client.reset(env_id, seed)?;
    let external: Vec<usize> = header
        .scenario
        .agents
        .iter()
        .filter(|a| a.controller == Controller::External)
        .map(|a| a.slot)
        .collect();
    let mut running = vec![true; header.scenario.agents.len()];
    let mut latest = header.observations.clone();
    let mut records = Vec::new();
    loop {
        let mut submit: Vec<usize> = external.iter().copied().filter(|&s| running[s]).collect();
        if submit.is_empty() {
            // Only autopilots are left; any external slot may advance them.
            submit = external.first().copied().into_iter().collect();
        }
        if submit.is_empty() {
            return Err(ClientError::Unexpected("scenario has no external slots".into()));
        }
        let mut actions = policy(records.len() as u64, &latest);
        let batch: Vec<(usize, Vec<f64>)> = submit.iter().map(|&s| (s, std::mem::take(&mut actions[s]))).collect();
        let record = client.step_slots(env_id, &batch)?;
        for r in &record.results {
            latest[r.slot] = r.observation;
            running[r.slot] = !r.done;
        }
        let finished = running.iter().all(|r| !r);
        records.push(record);
        if finished {
            break;
        }
    }
    Ok(Trace { header, records })
}
