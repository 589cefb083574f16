//! Multi-environment TCP server.
//!
//! Every environment lives on its own actor thread and sees its requests in
//! arrival order, so environments never share mutable state. Each connection
//! has a reader thread that routes requests and a writer thread that sends
//! whatever responses come back, in completion order. A client may therefore
//! pipeline `Step` requests for several slots on one connection.
//!
//! Stepping is a barrier: a tick runs once every external slot that is
//! still flying has submitted an action. Every submitter then receives the
//! same record. If the barrier is not complete within the timeout, the
//! waiting submitters get `barrier_timeout` and the episode is marked
//! failed until the next reset.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use dogfight_core::machines::Catalog;
use dogfight_core::runtime::{Env, RunMode};
use dogfight_core::scenario::{Controller, ScenarioConfig, OBSERVATION_SIZE};
use log::{debug, info, warn};

use crate::protocol::{
    read_frame, write_message, AckResult, Body, CreatedEnv, EnvId, EnvInfo, EnvMessage, ErrorCode, StateView,
    PROTOCOL_VERSION,
};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const DEFAULT_MAX_ENVS: usize = 64;
pub const DEFAULT_BARRIER_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub max_envs: usize,
    /// Environment `i` (counting creations from 0) gets seed `seed_base + i`.
    pub seed_base: u64,
    pub barrier_timeout: Duration,
    pub catalog: Arc<Catalog>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            max_envs: DEFAULT_MAX_ENVS,
            seed_base: 0,
            barrier_timeout: DEFAULT_BARRIER_TIMEOUT,
            catalog: Arc::new(Catalog::builtin()),
        }
    }
}

type ConnId = u64;

enum EnvCommand {
    Request {
        msg: Box<EnvMessage>,
        conn: ConnId,
        reply: Sender<EnvMessage>,
    },
    ConnectionClosed(ConnId),
    Shutdown,
}

struct EnvHandle {
    tx: Sender<EnvCommand>,
    info: EnvInfo,
}

struct Registry {
    config: ServerConfig,
    inner: Mutex<RegistryInner>,
}

#[derive(Default)]
struct RegistryInner {
    created: u64,
    envs: BTreeMap<EnvId, EnvHandle>,
}

impl Registry {
    fn create(
        &self,
        scenario: ScenarioConfig,
        run_mode: RunMode,
        seed: Option<u64>,
    ) -> Result<CreatedEnv, (ErrorCode, String)> {
        let mut inner = self.inner.lock().expect("registry lock");
        if inner.envs.len() >= self.config.max_envs {
            return Err((ErrorCode::Capacity, "capacity".into()));
        }
        let env_id = inner.created;
        let seed = seed.unwrap_or(self.config.seed_base.wrapping_add(env_id));
        let mut scenario = scenario;
        scenario.seed = seed;
        let slots = scenario.agents.len();
        let action_arity = scenario.mode.action_arity();
        let env = Env::new(scenario, Arc::clone(&self.config.catalog), run_mode)
            .map_err(|e| (ErrorCode::InvalidScenario, e.to_string()))?;
        inner.created += 1;

        let (tx, rx) = mpsc::channel();
        let actor = EnvActor::new(env_id, env, self.config.barrier_timeout);
        thread::Builder::new()
            .name(format!("env-{env_id}"))
            .spawn(move || actor.run(rx))
            .map_err(|e| (ErrorCode::Capacity, format!("cannot start environment thread: {e}")))?;
        let info = EnvInfo {
            env_id,
            seed,
            run_mode,
            slots,
        };
        inner.envs.insert(env_id, EnvHandle { tx, info });
        info!("created env {env_id} (seed {seed}, {slots} slots)");
        Ok(CreatedEnv {
            env_id,
            seed,
            slots,
            action_arity,
            observation_size: OBSERVATION_SIZE,
        })
    }

    fn destroy(&self, env_id: EnvId) -> bool {
        let handle = self.inner.lock().expect("registry lock").envs.remove(&env_id);
        match handle {
            Some(h) => {
                let _ = h.tx.send(EnvCommand::Shutdown);
                info!("destroyed env {env_id}");
                true
            }
            None => false,
        }
    }

    fn list(&self) -> Vec<EnvInfo> {
        self.inner
            .lock()
            .expect("registry lock")
            .envs
            .values()
            .map(|h| h.info.clone())
            .collect()
    }

    /// Hands a command to an environment. `false` if it does not exist.
    fn route(&self, env_id: EnvId, cmd: EnvCommand) -> bool {
        let inner = self.inner.lock().expect("registry lock");
        inner.envs.get(&env_id).is_some_and(|h| h.tx.send(cmd).is_ok())
    }

    fn connection_closed(&self, conn: ConnId) {
        let inner = self.inner.lock().expect("registry lock");
        for h in inner.envs.values() {
            let _ = h.tx.send(EnvCommand::ConnectionClosed(conn));
        }
    }

    fn shutdown_all(&self) {
        let mut inner = self.inner.lock().expect("registry lock");
        for (_, h) in std::mem::take(&mut inner.envs) {
            let _ = h.tx.send(EnvCommand::Shutdown);
        }
    }
}

struct Pending {
    request: EnvMessage,
    conn: ConnId,
    action: Vec<f64>,
    reply: Sender<EnvMessage>,
}

struct EnvActor {
    id: EnvId,
    env: Env,
    timeout: Duration,
    ready: bool,
    failed: bool,
    attached: BTreeMap<usize, ConnId>,
    pending: BTreeMap<usize, Pending>,
    deadline: Option<Instant>,
}

impl EnvActor {
    fn new(id: EnvId, env: Env, timeout: Duration) -> Self {
        Self {
            id,
            env,
            timeout,
            ready: false,
            failed: false,
            attached: BTreeMap::new(),
            pending: BTreeMap::new(),
            deadline: None,
        }
    }

    fn run(mut self, rx: Receiver<EnvCommand>) {
        loop {
            let cmd = match self.deadline {
                Some(d) => match rx.recv_timeout(d.saturating_duration_since(Instant::now())) {
                    Ok(cmd) => cmd,
                    Err(RecvTimeoutError::Timeout) => {
                        self.barrier_timed_out();
                        continue;
                    }
                    Err(RecvTimeoutError::Disconnected) => EnvCommand::Shutdown,
                },
                None => rx.recv().unwrap_or(EnvCommand::Shutdown),
            };
            match cmd {
                EnvCommand::Request { msg, conn, reply } => self.handle(*msg, conn, reply),
                EnvCommand::ConnectionClosed(conn) => {
                    self.attached.retain(|_, c| *c != conn);
                    self.pending.retain(|_, p| p.conn != conn);
                    if self.pending.is_empty() {
                        self.deadline = None;
                    }
                }
                EnvCommand::Shutdown => {
                    for (_, p) in std::mem::take(&mut self.pending) {
                        let _ = p
                            .reply
                            .send(error_reply(&p.request, ErrorCode::UnknownEnv, "unknown env"));
                    }
                    debug!("env {} actor stopped", self.id);
                    return;
                }
            }
        }
    }

    fn handle(&mut self, msg: EnvMessage, conn: ConnId, reply: Sender<EnvMessage>) {
        if let Body::Step { action } = &msg.body {
            let action = action.clone();
            self.submit(msg, conn, action, reply);
            return;
        }
        let response = match &msg.body {
            Body::AttachAgent => self.attach(&msg, conn),
            Body::Reset { seed } => {
                for (_, p) in std::mem::take(&mut self.pending) {
                    let _ = p
                        .reply
                        .send(error_reply(&p.request, ErrorCode::EpisodeOver, "environment was reset"));
                }
                self.deadline = None;
                let header = self.env.reset(*seed);
                self.ready = true;
                self.failed = false;
                Ok(AckResult::Reset {
                    header: Box::new(header),
                })
            }
            Body::GetState => Ok(AckResult::State(Box::new(StateView {
                step: self.env.steps(),
                finished: self.env.is_finished(),
                snapshot: self.env.scenario().snapshot(),
            }))),
            Body::SetCustomPhysics { machine, enabled } => self
                .env
                .scenario_mut()
                .world_mut()
                .set_custom_physics_mode(*machine, *enabled)
                .map(|()| AckResult::Done)
                .map_err(|e| (ErrorCode::InvalidRequest, e.to_string())),
            Body::UpdateKinetics { machine, matrix } => self
                .env
                .scenario_mut()
                .world_mut()
                .update_machine_kinetics(*machine, *matrix)
                .map(|()| AckResult::Done)
                .map_err(|e| (ErrorCode::InvalidRequest, e.to_string())),
            other => Err((
                ErrorCode::InvalidRequest,
                format!("{} is not an environment request", other.kind()),
            )),
        };
        let out = match response {
            Ok(result) => EnvMessage::reply(&msg, Body::Ack { result }),
            Err((code, text)) => error_reply(&msg, code, text),
        };
        let _ = reply.send(out);
    }

    fn external_slot(&self, slot: Option<usize>) -> Result<usize, (ErrorCode, String)> {
        let slot = slot.unwrap_or(0);
        match self.env.scenario().config().agents.get(slot) {
            None => Err((ErrorCode::InvalidRequest, format!("no slot {slot}"))),
            Some(a) if a.controller != Controller::External => Err((
                ErrorCode::InvalidRequest,
                format!("slot {slot} is flown by an autopilot"),
            )),
            Some(_) => Ok(slot),
        }
    }

    fn attach(&mut self, msg: &EnvMessage, conn: ConnId) -> Result<AckResult, (ErrorCode, String)> {
        let slot = self.external_slot(msg.agent_slot)?;
        match self.attached.get(&slot) {
            Some(&owner) if owner != conn => Err((
                ErrorCode::SlotTaken,
                format!("slot {slot} is attached to another connection"),
            )),
            _ => {
                self.attached.insert(slot, conn);
                Ok(AckResult::Done)
            }
        }
    }

    /// Slots the barrier waits for.
    fn waiting_for(&self) -> Vec<usize> {
        let scenario = self.env.scenario();
        scenario
            .config()
            .agents
            .iter()
            .filter(|a| a.controller == Controller::External && scenario.outcome(a.slot).is_none())
            .map(|a| a.slot)
            .collect()
    }

    fn submit(&mut self, msg: EnvMessage, conn: ConnId, action: Vec<f64>, reply: Sender<EnvMessage>) {
        let slot = match self.admit(&msg, conn, &action) {
            Ok(s) => s,
            Err((code, text)) => {
                let _ = reply.send(error_reply(&msg, code, text));
                return;
            }
        };
        if self.pending.is_empty() {
            self.deadline = Some(Instant::now() + self.timeout);
        }
        self.pending.insert(
            slot,
            Pending {
                request: msg,
                conn,
                action,
                reply,
            },
        );
        // With no external slot left flying, one submission drives the
        // remaining autopilots.
        if self.waiting_for().iter().all(|s| self.pending.contains_key(s)) {
            self.tick();
        }
    }

    fn admit(&self, msg: &EnvMessage, conn: ConnId, action: &[f64]) -> Result<usize, (ErrorCode, String)> {
        if !self.ready {
            return Err((ErrorCode::NotReset, "environment has not been reset".into()));
        }
        if self.failed {
            return Err((
                ErrorCode::EpisodeFailed,
                "episode failed at a barrier timeout; reset to continue".into(),
            ));
        }
        if self.env.is_finished() {
            return Err((ErrorCode::EpisodeOver, "episode is over".into()));
        }
        let slot = self.external_slot(msg.agent_slot)?;
        if self.env.scenario().outcome(slot).is_some() && !self.waiting_for().is_empty() {
            return Err((ErrorCode::EpisodeOver, format!("slot {slot} is done")));
        }
        if self.attached.get(&slot).is_some_and(|&owner| owner != conn) {
            return Err((
                ErrorCode::SlotTaken,
                format!("slot {slot} is attached to another connection"),
            ));
        }
        let arity = self.env.scenario().config().mode.action_arity();
        if action.len() != arity || action.iter().any(|v| !v.is_finite()) {
            return Err((ErrorCode::BadAction, format!("action must be {arity} finite numbers")));
        }
        if self.pending.contains_key(&slot) {
            return Err((
                ErrorCode::InvalidRequest,
                format!("slot {slot} already submitted this step"),
            ));
        }
        Ok(slot)
    }

    fn tick(&mut self) {
        self.deadline = None;
        let pending = std::mem::take(&mut self.pending);
        let slots = self.env.scenario().agent_count();
        let mut actions = vec![Vec::new(); slots];
        for (slot, p) in &pending {
            actions[*slot] = p.action.clone();
        }
        match self.env.step(&actions) {
            Ok(record) => {
                for p in pending.into_values() {
                    let body = Body::Ack {
                        result: AckResult::Stepped { record: record.clone() },
                    };
                    let _ = p.reply.send(EnvMessage::reply(&p.request, body));
                }
            }
            Err(e) => {
                for p in pending.into_values() {
                    let _ = p
                        .reply
                        .send(error_reply(&p.request, ErrorCode::InvalidRequest, e.to_string()));
                }
            }
        }
    }

    fn barrier_timed_out(&mut self) {
        let missing: Vec<usize> = self
            .waiting_for()
            .into_iter()
            .filter(|s| !self.pending.contains_key(s))
            .collect();
        warn!("env {}: barrier timeout waiting for slots {missing:?}", self.id);
        self.failed = true;
        self.deadline = None;
        for (_, p) in std::mem::take(&mut self.pending) {
            let text = format!("barrier timeout: slots {missing:?} did not submit");
            let _ = p.reply.send(error_reply(&p.request, ErrorCode::BarrierTimeout, text));
        }
    }
}

fn error_reply(request: &EnvMessage, code: ErrorCode, message: impl Into<String>) -> EnvMessage {
    EnvMessage::reply(
        request,
        Body::Error {
            code,
            message: message.into(),
        },
    )
}

/// Pulls a request id out of a frame that failed to parse, if it has one.
fn salvage_request_id(bytes: &[u8]) -> u64 {
    serde_json::from_slice::<serde_json::Value>(bytes)
        .ok()
        .and_then(|v| v.get("request_id").and_then(serde_json::Value::as_u64))
        .unwrap_or(0)
}

fn serve_connection(stream: TcpStream, conn: ConnId, registry: Arc<Registry>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let peer = stream.peer_addr().ok();
    let mut reader = BufReader::new(stream.try_clone()?);
    let (tx, rx) = mpsc::channel::<EnvMessage>();
    let writer = stream;
    thread::Builder::new().name(format!("conn-{conn}-tx")).spawn(move || {
        let mut out = BufWriter::new(writer);
        for msg in rx {
            if write_message(&mut out, &msg).is_err() {
                break;
            }
        }
    })?;
    debug!("connection {conn} from {peer:?}");

    loop {
        let bytes = match read_frame(&mut reader) {
            Ok(Some(b)) => b,
            Ok(None) => break,
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                let _ = tx.send(EnvMessage::error(0, None, ErrorCode::Malformed, e.to_string()));
                break;
            }
            Err(_) => break,
        };
        let msg: EnvMessage = match serde_json::from_slice(&bytes) {
            Ok(m) => m,
            Err(e) => {
                let id = salvage_request_id(&bytes);
                let _ = tx.send(EnvMessage::error(
                    id,
                    None,
                    ErrorCode::Malformed,
                    format!("malformed message: {e}"),
                ));
                continue;
            }
        };
        if msg.version != PROTOCOL_VERSION {
            let text = format!(
                "protocol version {} not supported (server speaks {PROTOCOL_VERSION})",
                msg.version
            );
            let _ = tx.send(error_reply(&msg, ErrorCode::UnsupportedVersion, text));
            continue;
        }
        dispatch(msg, conn, &registry, &tx);
    }
    registry.connection_closed(conn);
    debug!("connection {conn} closed");
    Ok(())
}

fn dispatch(msg: EnvMessage, conn: ConnId, registry: &Registry, tx: &Sender<EnvMessage>) {
    let ack = |result| EnvMessage::reply(&msg, Body::Ack { result });
    let response = match &msg.body {
        Body::CreateEnv {
            scenario,
            run_mode,
            seed,
        } => match registry.create(scenario.clone(), *run_mode, *seed) {
            Ok(created) => {
                let mut out = ack(AckResult::Created(created));
                out.env_id = Some(created.env_id);
                out
            }
            Err((code, text)) => error_reply(&msg, code, text),
        },
        Body::ListEnvs => ack(AckResult::Envs { envs: registry.list() }),
        Body::DestroyEnv => match msg.env_id {
            Some(id) if registry.destroy(id) => ack(AckResult::Done),
            _ => error_reply(&msg, ErrorCode::UnknownEnv, "unknown env"),
        },
        Body::Error { .. } | Body::Ack { .. } => error_reply(
            &msg,
            ErrorCode::InvalidRequest,
            format!("{} is a response, not a request", msg.body.kind()),
        ),
        _ => {
            let Some(env_id) = msg.env_id else {
                let _ = tx.send(error_reply(&msg, ErrorCode::UnknownEnv, "unknown env"));
                return;
            };
            let fallback = error_reply(&msg, ErrorCode::UnknownEnv, "unknown env");
            if registry.route(
                env_id,
                EnvCommand::Request {
                    msg: Box::new(msg),
                    conn,
                    reply: tx.clone(),
                },
            ) {
                return;
            }
            fallback
        }
    };
    let _ = tx.send(response);
}

pub struct Server {
    listener: TcpListener,
    registry: Arc<Registry>,
}

impl Server {
    pub fn bind(config: ServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(&config.bind)?;
        Ok(Self {
            listener,
            registry: Arc::new(Registry {
                config,
                inner: Mutex::new(RegistryInner::default()),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the process ends.
    pub fn serve(self) -> io::Result<()> {
        self.accept_loop(&AtomicBool::new(false))
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::Builder::new().name("accept".into()).spawn(move || {
            let _ = self.accept_loop(&flag);
        })?;
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    fn accept_loop(self, stop: &AtomicBool) -> io::Result<()> {
        info!("listening on {}", self.local_addr()?);
        let ids = AtomicU64::new(0);
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let conn = ids.fetch_add(1, Ordering::Relaxed);
            let registry = Arc::clone(&self.registry);
            thread::Builder::new().name(format!("conn-{conn}")).spawn(move || {
                if let Err(e) = serve_connection(stream, conn, registry) {
                    debug!("connection {conn}: {e}");
                }
            })?;
        }
        self.registry.shutdown_all();
        Ok(())
    }
}

/// A server running on a background thread. Dropping it stops the server.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            if let Some(addr) = self.addr.to_socket_addrs().ok().and_then(|mut a| a.next()) {
                let _ = TcpStream::connect(addr);
            }
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}
