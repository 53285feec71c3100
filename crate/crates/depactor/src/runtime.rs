//! Actor execution substrate: mailboxes, complex-message distribution,
//! receipts and reception tasks, quiescence detection, schedulers, and the
//! event trace.
//!
//! Actors are isolation units: at most one handler per actor runs at a time,
//! and state is confined to the owning actor. Messages are immutable values.
//! A message kind may be registered with distribute/compute conditions; on
//! each delivery the runtime first evaluates the distribute clauses against
//! the receiver (forwarding a copy per satisfied clause), then runs the
//! receiver's handler iff a compute condition holds. Unregistered kinds are
//! direct messages: always computed, never forwarded.
//!
//! Reception tasks track which actors still owe receipts for a forwarded
//! message. Receipts may arrive in any order, so the outstanding set is a
//! signed multiset: a receipt from an actor the initiator has not yet been
//! told about leaves a deficit that the forwarder's own receipt later
//! settles. A task fires exactly once, when every count returns to zero.
//!
//! The deterministic scheduler draws the next delivery uniformly from the
//! enabled set using a seeded generator; given the same inputs and seed the
//! full event trace is byte-identical. The concurrent scheduler runs actors
//! on worker threads under the same contracts, trading reproducible traces
//! for real parallelism.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identity of an actor; unique per run. Id 0 is the system pseudo-actor
/// used as the sender of scheduler-injected messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActorId(pub u64);

pub const SYSTEM: ActorId = ActorId(0);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// One alternative analysis. Message traffic stays inside a reading except
/// for the structure-copying messages of a duplication episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReadingId(pub u32);

impl fmt::Display for ReadingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

pub trait Message: Clone + Send + 'static {
    fn kind(&self) -> &'static str;
    fn digest(&self) -> String;
}

pub trait Actor: Send + Sized + 'static {
    type Msg: Message;
    /// Coordination state shared across actors (behind a lock).
    type Shared: Send;
    /// Continuation note delivered to the driver when a reception task fires.
    type Note: Send;

    fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<Self::Msg>);
}

#[derive(Debug, Clone)]
pub struct Envelope<M> {
    pub seq: u64,
    pub sender: ActorId,
    pub target: ActorId,
    pub initiator: Option<ActorId>,
    pub reading: ReadingId,
    pub task: Option<TaskId>,
    pub payload: M,
}

/// Outgoing message before the runtime stamps it.
pub struct Outgoing<M> {
    pub sender: ActorId,
    pub target: ActorId,
    pub initiator: Option<ActorId>,
    pub reading: ReadingId,
    pub task: Option<TaskId>,
    pub payload: M,
}

pub type Condition<A> = fn(&A, &Envelope<<A as Actor>::Msg>) -> bool;
pub type Resolve<A> = fn(&A, &Envelope<<A as Actor>::Msg>) -> Option<ActorId>;

pub struct DistributeClause<A: Actor> {
    pub condition: Condition<A>,
    /// Acquaintance tag, for the trace.
    pub tag: &'static str,
    pub resolve: Resolve<A>,
}

/// Distribution and computation conditions for one message kind.
pub struct MsgDef<A: Actor> {
    pub kind: &'static str,
    pub pre_distribute: Vec<DistributeClause<A>>,
    pub compute: Vec<Condition<A>>,
    pub post_distribute: Vec<DistributeClause<A>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Send,
    Deliver,
    Spawn,
    Become,
    Receipt,
    TaskFired,
}

impl EventKind {
    fn label(self) -> &'static str {
        match self {
            EventKind::Send => "send",
            EventKind::Deliver => "deliver",
            EventKind::Spawn => "spawn",
            EventKind::Become => "become",
            EventKind::Receipt => "receipt",
            EventKind::TaskFired => "task-fired",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
    pub actor: ActorId,
    pub msg_kind: String,
    pub digest: String,
}

#[derive(Debug, Default)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    /// One event per line, tab-separated:
    /// step, kind, actor id, message kind, payload digest.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.step,
                e.kind.label(),
                e.actor,
                e.msg_kind,
                e.digest
            ));
        }
        out
    }
}

struct ReceptionTask<N> {
    initiator: ActorId,
    #[allow(dead_code)]
    reading: ReadingId,
    label: String,
    counts: BTreeMap<ActorId, i64>,
    fired: bool,
    note: Option<N>,
}

struct ActorCell<A> {
    state: Mutex<Option<A>>,
    spawned: AtomicBool,
}

struct Shared<A: Actor> {
    cells: RwLock<Vec<Arc<ActorCell<A>>>>,
    pending: Mutex<Vec<Envelope<A::Msg>>>,
    tasks: Mutex<BTreeMap<TaskId, ReceptionTask<A::Note>>>,
    fired: Mutex<VecDeque<(TaskId, A::Note)>>,
    trace: Mutex<Trace>,
    faults: Mutex<Vec<String>>,
    shared: Mutex<A::Shared>,
    defs: HashMap<&'static str, MsgDef<A>>,
    next_actor: AtomicU64,
    next_task: AtomicU64,
    next_seq: AtomicU64,
    event_step: AtomicU64,
    tasks_created: AtomicU64,
    tasks_fired: AtomicU64,
    deliveries: AtomicU64,
    in_flight: AtomicU64,
    abort: AtomicBool,
}

impl<A: Actor> Shared<A> {
    fn trace_event(&self, kind: EventKind, actor: ActorId, msg_kind: &str, digest: String) {
        let step = self.event_step.fetch_add(1, Ordering::SeqCst);
        self.trace.lock().unwrap().events.push(Event {
            step,
            kind,
            actor,
            msg_kind: msg_kind.to_string(),
            digest,
        });
    }

    fn fault(&self, msg: impl Into<String>) {
        let msg = msg.into();
        self.trace_event(EventKind::Receipt, SYSTEM, "fault", msg.clone());
        self.faults.lock().unwrap().push(msg);
        self.abort.store(true, Ordering::SeqCst);
    }

    fn cell(&self, id: ActorId) -> Option<Arc<ActorCell<A>>> {
        self.cells.read().unwrap().get(id.0 as usize).cloned()
    }

    fn allocate(&self) -> ActorId {
        let id = ActorId(self.next_actor.fetch_add(1, Ordering::SeqCst));
        let mut cells = self.cells.write().unwrap();
        while cells.len() <= id.0 as usize {
            cells.push(Arc::new(ActorCell {
                state: Mutex::new(None),
                spawned: AtomicBool::new(false),
            }));
        }
        id
    }

    fn spawn_at(&self, id: ActorId, actor: A, kind: &str, digest: String) {
        let Some(cell) = self.cell(id) else {
            self.fault(format!("spawn at unallocated id {id}"));
            return;
        };
        {
            let mut guard = cell.state.lock().unwrap();
            if guard.is_some() {
                self.fault(format!("double spawn at {id}"));
                return;
            }
            *guard = Some(actor);
        }
        cell.spawned.store(true, Ordering::SeqCst);
        self.trace_event(EventKind::Spawn, id, kind, digest);
    }

    fn enqueue(&self, out: Outgoing<A::Msg>) {
        let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
        let env = Envelope {
            seq,
            sender: out.sender,
            target: out.target,
            initiator: out.initiator,
            reading: out.reading,
            task: out.task,
            payload: out.payload,
        };
        self.trace_event(
            EventKind::Send,
            env.sender,
            env.payload.kind(),
            format!("to={} {} {}", env.target, env.reading, env.payload.digest()),
        );
        self.in_flight.fetch_add(1, Ordering::SeqCst);
        self.pending.lock().unwrap().push(env);
    }

    fn queue_task(
        &self,
        initiator: ActorId,
        reading: ReadingId,
        first_target: ActorId,
        label: String,
        note: A::Note,
    ) -> TaskId {
        let id = TaskId(self.next_task.fetch_add(1, Ordering::SeqCst));
        let mut counts = BTreeMap::new();
        counts.insert(first_target, 1);
        self.tasks.lock().unwrap().insert(
            id,
            ReceptionTask {
                initiator,
                reading,
                label,
                counts,
                fired: false,
                note: Some(note),
            },
        );
        self.tasks_created.fetch_add(1, Ordering::SeqCst);
        id
    }

    fn record_receipt(&self, task_id: TaskId, from: ActorId, forwarded: &[ActorId]) {
        let mut tasks = self.tasks.lock().unwrap();
        let Some(task) = tasks.get_mut(&task_id) else {
            drop(tasks);
            self.fault(format!(
                "receipt from {from} for unknown reception task {task_id}"
            ));
            return;
        };
        if task.fired {
            drop(tasks);
            self.fault(format!(
                "receipt from {from} for already-fired reception task {task_id}"
            ));
            return;
        }
        *task.counts.entry(from).or_insert(0) -= 1;
        if task.counts[&from] == 0 {
            task.counts.remove(&from);
        }
        for f in forwarded {
            *task.counts.entry(*f).or_insert(0) += 1;
            if task.counts[f] == 0 {
                task.counts.remove(f);
            }
        }
        let initiator = task.initiator;
        let label = task.label.clone();
        let digest = format!(
            "task={task_id} from={from} fwd=[{}]",
            forwarded
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let fire = if task.counts.is_empty() {
            task.fired = true;
            task.note.take()
        } else {
            None
        };
        drop(tasks);
        self.trace_event(EventKind::Receipt, initiator, &label, digest);
        if let Some(note) = fire {
            self.tasks_fired.fetch_add(1, Ordering::SeqCst);
            self.trace_event(
                EventKind::TaskFired,
                initiator,
                &label,
                format!("task={task_id}"),
            );
            self.fired.lock().unwrap().push_back((task_id, note));
        }
    }

    fn deliver(&self, env: Envelope<A::Msg>) {
        let Some(cell) = self.cell(env.target) else {
            self.fault(format!(
                "message {} to unallocated actor {}",
                env.payload.kind(),
                env.target
            ));
            return;
        };
        self.trace_event(
            EventKind::Deliver,
            env.target,
            env.payload.kind(),
            format!(
                "from={} {} {}",
                env.sender,
                env.reading,
                env.payload.digest()
            ),
        );
        self.deliveries.fetch_add(1, Ordering::SeqCst);
        let mut outbox: Vec<Outgoing<A::Msg>> = Vec::new();
        {
            let mut guard = cell.state.lock().unwrap();
            let Some(actor) = guard.as_mut() else {
                self.fault(format!(
                    "message {} to dead actor {}",
                    env.payload.kind(),
                    env.target
                ));
                return;
            };
            let def = self.defs.get(env.payload.kind());
            let mut forwarded: Vec<ActorId> = Vec::new();
            if let Some(def) = def {
                for clause in &def.pre_distribute {
                    if (clause.condition)(actor, &env) {
                        if let Some(to) = (clause.resolve)(actor, &env) {
                            forwarded.push(to);
                            outbox.push(Outgoing {
                                sender: env.target,
                                target: to,
                                initiator: env.initiator,
                                reading: env.reading,
                                task: env.task,
                                payload: env.payload.clone(),
                            });
                        }
                    }
                }
            }
            let computes = match def {
                None => true, // direct message: always processed at the target
                Some(def) => def.compute.iter().any(|c| c(actor, &env)),
            };
            if computes {
                let mut ctx = Ctx {
                    rt: self,
                    self_id: env.target,
                    forwarded: &forwarded,
                    outbox: &mut outbox,
                };
                actor.on_message(&mut ctx, &env);
            }
            if let Some(def) = def {
                for clause in &def.post_distribute {
                    if (clause.condition)(actor, &env) {
                        if let Some(to) = (clause.resolve)(actor, &env) {
                            outbox.push(Outgoing {
                                sender: env.target,
                                target: to,
                                initiator: env.initiator,
                                reading: env.reading,
                                task: env.task,
                                payload: env.payload.clone(),
                            });
                        }
                    }
                }
            }
        }
        for out in outbox {
            self.enqueue(out);
        }
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Handler-side runtime interface.
pub struct Ctx<'a, A: Actor> {
    rt: &'a Shared<A>,
    self_id: ActorId,
    forwarded: &'a [ActorId],
    outbox: &'a mut Vec<Outgoing<A::Msg>>,
}

impl<'a, A: Actor> Ctx<'a, A> {
    pub fn self_id(&self) -> ActorId {
        self.self_id
    }

    /// Actors the current delivery was forwarded to by its distribute
    /// clauses, in clause order.
    pub fn forwarded(&self) -> &[ActorId] {
        self.forwarded
    }

    /// Queues a message; it is handed to the scheduler when the current
    /// handler returns.
    pub fn send(&mut self, out: Outgoing<A::Msg>) {
        self.outbox.push(out);
    }

    pub fn allocate_actor(&mut self) -> ActorId {
        self.rt.allocate()
    }

    /// Installs an actor at a pre-allocated id. Visible to subsequent sends
    /// from the same handler.
    pub fn spawn_at(&mut self, id: ActorId, actor: A, kind: &str, digest: String) {
        self.rt.spawn_at(id, actor, kind, digest);
    }

    pub fn queue_task(
        &mut self,
        initiator: ActorId,
        reading: ReadingId,
        first_target: ActorId,
        label: String,
        note: A::Note,
    ) -> TaskId {
        self.rt
            .queue_task(initiator, reading, first_target, label, note)
    }

    pub fn record_receipt(&mut self, task: TaskId, from: ActorId, forwarded: &[ActorId]) {
        self.rt.record_receipt(task, from, forwarded);
    }

    /// State replacement notification for the trace.
    pub fn trace_become(&mut self, digest: String) {
        self.rt
            .trace_event(EventKind::Become, self.self_id, "state", digest);
    }

    pub fn shared(&mut self) -> MutexGuard<'_, A::Shared> {
        self.rt.shared.lock().unwrap()
    }

    pub fn fault(&mut self, msg: impl Into<String>) {
        self.rt.fault(msg);
    }
}

/// Driver-side runtime interface, live while the system is quiescent or a
/// task continuation is being delivered.
pub struct SysCtx<'a, A: Actor> {
    rt: &'a Shared<A>,
}

impl<'a, A: Actor> SysCtx<'a, A> {
    pub fn allocate_actor(&mut self) -> ActorId {
        self.rt.allocate()
    }

    pub fn spawn_at(&mut self, id: ActorId, actor: A, kind: &str, digest: String) {
        self.rt.spawn_at(id, actor, kind, digest);
    }

    pub fn send(&mut self, out: Outgoing<A::Msg>) {
        self.rt.enqueue(out);
    }

    pub fn queue_task(
        &mut self,
        initiator: ActorId,
        reading: ReadingId,
        first_target: ActorId,
        label: String,
        note: A::Note,
    ) -> TaskId {
        self.rt
            .queue_task(initiator, reading, first_target, label, note)
    }

    pub fn shared(&mut self) -> MutexGuard<'_, A::Shared> {
        self.rt.shared.lock().unwrap()
    }

    pub fn fault(&mut self, msg: impl Into<String>) {
        self.rt.fault(msg);
    }

    /// Post-run introspection: read an actor's state.
    pub fn with_actor<R>(&self, id: ActorId, f: impl FnOnce(&A) -> R) -> Option<R> {
        let cell = self.rt.cell(id)?;
        let guard = cell.state.lock().unwrap();
        guard.as_ref().map(f)
    }
}

/// Drives the scan between quiescent points.
pub trait Driver<A: Actor> {
    /// Called when no deliveries are enabled and no continuations are
    /// pending. Return false to end the run.
    fn on_quiescent(&mut self, sys: &mut SysCtx<'_, A>) -> bool;

    /// A reception task fired; its continuation note is delivered here.
    fn on_task_fired(&mut self, _sys: &mut SysCtx<'_, A>, _task: TaskId, _note: A::Note) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Seeded single-activity scheduling; byte-identical traces per seed.
    Deterministic,
    /// Worker threads; invariants hold but traces vary run to run.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Quiescent,
    Fault,
    /// The step bound was exhausted before quiescence.
    LivenessFailure,
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub deliveries: u64,
    pub tasks_created: u64,
    pub tasks_fired: u64,
    pub faults: Vec<String>,
    pub trace: Trace,
}

pub struct Runtime<A: Actor> {
    inner: Arc<Shared<A>>,
}

impl<A: Actor> Runtime<A> {
    pub fn new(shared: A::Shared, defs: Vec<MsgDef<A>>) -> Self {
        let defs = defs.into_iter().map(|d| (d.kind, d)).collect();
        Runtime {
            inner: Arc::new(Shared {
                cells: RwLock::new(vec![Arc::new(ActorCell {
                    state: Mutex::new(None),
                    spawned: AtomicBool::new(false),
                })]), // slot 0: system pseudo-actor
                pending: Mutex::new(Vec::new()),
                tasks: Mutex::new(BTreeMap::new()),
                fired: Mutex::new(VecDeque::new()),
                trace: Mutex::new(Trace::default()),
                faults: Mutex::new(Vec::new()),
                shared: Mutex::new(shared),
                defs,
                next_actor: AtomicU64::new(1),
                next_task: AtomicU64::new(1),
                next_seq: AtomicU64::new(1),
                event_step: AtomicU64::new(0),
                tasks_created: AtomicU64::new(0),
                tasks_fired: AtomicU64::new(0),
                deliveries: AtomicU64::new(0),
                in_flight: AtomicU64::new(0),
                abort: AtomicBool::new(false),
            }),
        }
    }

    pub fn sys(&self) -> SysCtx<'_, A> {
        SysCtx { rt: &self.inner }
    }

    pub fn shared(&self) -> MutexGuard<'_, A::Shared> {
        self.inner.shared.lock().unwrap()
    }

    pub fn with_actor<R>(&self, id: ActorId, f: impl FnOnce(&A) -> R) -> Option<R> {
        let cell = self.inner.cell(id)?;
        let guard = cell.state.lock().unwrap();
        guard.as_ref().map(f)
    }

    /// Runs until quiescence, a fault, or the step bound. The driver is
    /// consulted at every quiescent point and may inject further work.
    pub fn run(
        &mut self,
        driver: &mut impl Driver<A>,
        mode: Mode,
        seed: u64,
        step_bound: u64,
    ) -> RunReport {
        match mode {
            Mode::Deterministic => self.run_deterministic(driver, seed, step_bound),
            Mode::Concurrent => self.run_concurrent(driver, step_bound),
        }
    }

    fn drain_fired(&self, driver: &mut impl Driver<A>) {
        loop {
            let next = self.inner.fired.lock().unwrap().pop_front();
            match next {
                Some((task, note)) => {
                    let mut sys = SysCtx { rt: &self.inner };
                    driver.on_task_fired(&mut sys, task, note);
                }
                None => break,
            }
        }
    }

    fn finish(&self, outcome: Outcome) -> RunReport {
        let rt = &self.inner;
        let mut outcome = outcome;
        if outcome == Outcome::Quiescent {
            let tasks = rt.tasks.lock().unwrap();
            let mut residual = Vec::new();
            for (id, t) in tasks.iter() {
                if !t.fired {
                    residual.push(format!(
                        "reception task {id} ({}) never fired; residual {:?}",
                        t.label,
                        t.counts
                            .iter()
                            .map(|(a, c)| (a.to_string(), *c))
                            .collect::<Vec<_>>()
                    ));
                }
            }
            drop(tasks);
            for msg in residual {
                rt.fault(msg);
            }
            let pending = rt.pending.lock().unwrap();
            if !pending.is_empty() {
                let kinds: Vec<_> = pending.iter().map(|e| e.payload.kind()).collect();
                drop(pending);
                rt.fault(format!("undeliverable messages at quiescence: {kinds:?}"));
            }
        }
        let faults = rt.faults.lock().unwrap().clone();
        if !faults.is_empty() && outcome == Outcome::Quiescent {
            outcome = Outcome::Fault;
        }
        RunReport {
            outcome,
            deliveries: rt.deliveries.load(Ordering::SeqCst),
            tasks_created: rt.tasks_created.load(Ordering::SeqCst),
            tasks_fired: rt.tasks_fired.load(Ordering::SeqCst),
            faults,
            trace: std::mem::take(&mut rt.trace.lock().unwrap()),
        }
    }

    fn run_deterministic(
        &mut self,
        driver: &mut impl Driver<A>,
        seed: u64,
        step_bound: u64,
    ) -> RunReport {
        let rt = Arc::clone(&self.inner);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps: u64 = 0;
        loop {
            if rt.abort.load(Ordering::SeqCst) {
                return self.finish(Outcome::Fault);
            }
            self.drain_fired(driver);
            let pick = {
                let pending = rt.pending.lock().unwrap();
                let enabled: Vec<usize> = pending
                    .iter()
                    .enumerate()
                    .filter(|(_, env)| {
                        rt.cell(env.target)
                            .map(|c| c.spawned.load(Ordering::SeqCst))
                            .unwrap_or(false)
                    })
                    .map(|(i, _)| i)
                    .collect();
                if enabled.is_empty() {
                    if !pending.is_empty() {
                        let kinds: Vec<_> = pending.iter().map(|e| e.payload.kind()).collect();
                        drop(pending);
                        rt.fault(format!("messages held for unspawned actors: {kinds:?}"));
                        return self.finish(Outcome::Fault);
                    }
                    None
                } else {
                    Some(enabled[rng.gen_range(0..enabled.len())])
                }
            };
            match pick {
                Some(i) => {
                    if steps >= step_bound {
                        rt.fault(format!(
                            "liveness failure: step bound {step_bound} exhausted"
                        ));
                        return self.finish(Outcome::LivenessFailure);
                    }
                    let env = rt.pending.lock().unwrap().swap_remove(i);
                    rt.deliver(env);
                    steps += 1;
                }
                None => {
                    // quiescent: hand control to the driver
                    let injected = {
                        let mut sys = SysCtx { rt: &rt };
                        driver.on_quiescent(&mut sys)
                    };
                    if !injected && rt.pending.lock().unwrap().is_empty() {
                        self.drain_fired(driver);
                        return self.finish(Outcome::Quiescent);
                    }
                }
            }
        }
    }

    fn run_concurrent(&mut self, driver: &mut impl Driver<A>, step_bound: u64) -> RunReport {
        let rt = Arc::clone(&self.inner);
        let threads = std::thread::available_parallelism()
            .map(|n| n.get().min(4))
            .unwrap_or(2);
        let steps = AtomicU64::new(0);
        loop {
            if rt.abort.load(Ordering::SeqCst) {
                return self.finish(Outcome::Fault);
            }
            self.drain_fired(driver);
            let had_work = !rt.pending.lock().unwrap().is_empty();
            if had_work {
                std::thread::scope(|scope| {
                    for _ in 0..threads {
                        scope.spawn(|| loop {
                            if rt.abort.load(Ordering::SeqCst) {
                                return;
                            }
                            let env = {
                                let mut pending = rt.pending.lock().unwrap();
                                let idx = pending.iter().position(|env| {
                                    rt.cell(env.target)
                                        .map(|c| c.spawned.load(Ordering::SeqCst))
                                        .unwrap_or(false)
                                });
                                idx.map(|i| pending.swap_remove(i))
                            };
                            match env {
                                Some(env) => {
                                    if steps.fetch_add(1, Ordering::SeqCst) >= step_bound {
                                        rt.fault(format!(
                                            "liveness failure: step bound {step_bound} exhausted"
                                        ));
                                        return;
                                    }
                                    rt.deliver(env);
                                }
                                None => {
                                    if rt.in_flight.load(Ordering::SeqCst) == 0 {
                                        return;
                                    }
                                    std::thread::yield_now();
                                }
                            }
                        });
                    }
                });
                if steps.load(Ordering::SeqCst) >= step_bound {
                    return self.finish(Outcome::LivenessFailure);
                }
                if !rt.pending.lock().unwrap().is_empty() && rt.in_flight.load(Ordering::SeqCst) > 0
                {
                    continue;
                }
            }
            self.drain_fired(driver);
            let pending_empty = rt.pending.lock().unwrap().is_empty();
            if pending_empty {
                let injected = {
                    let mut sys = SysCtx { rt: &rt };
                    driver.on_quiescent(&mut sys)
                };
                if !injected && rt.pending.lock().unwrap().is_empty() {
                    self.drain_fired(driver);
                    return self.finish(Outcome::Quiescent);
                }
            } else {
                // messages held for unspawned actors with no active work
                let kinds: Vec<_> = rt
                    .pending
                    .lock()
                    .unwrap()
                    .iter()
                    .map(|e| e.payload.kind())
                    .collect();
                rt.fault(format!("messages held for unspawned actors: {kinds:?}"));
                return self.finish(Outcome::Fault);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    enum TestMsg {
        Ping,
        Relay {
            hops: Vec<ActorId>,
            task: TaskId,
        },
        ReceiptMsg {
            forwarded: Vec<ActorId>,
            task: TaskId,
        },
    }

    impl Message for TestMsg {
        fn kind(&self) -> &'static str {
            match self {
                TestMsg::Ping => "ping",
                TestMsg::Relay { .. } => "relay",
                TestMsg::ReceiptMsg { .. } => "receipt",
            }
        }
        fn digest(&self) -> String {
            match self {
                TestMsg::Ping => String::new(),
                TestMsg::Relay { hops, .. } => format!("hops={}", hops.len()),
                TestMsg::ReceiptMsg { forwarded, .. } => format!("fwd={}", forwarded.len()),
            }
        }
    }

    #[derive(Default)]
    struct TestActor {
        seen: u64,
    }

    impl Actor for TestActor {
        type Msg = TestMsg;
        type Shared = ();
        type Note = &'static str;

        fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<TestMsg>) {
            match &env.payload {
                TestMsg::Ping => {
                    self.seen += 1;
                }
                TestMsg::Relay { hops, task } => {
                    // forward down the chain, receipting the initiator
                    let fwd: Vec<ActorId> = hops.first().copied().into_iter().collect();
                    if let Some(&next) = hops.first() {
                        ctx.send(Outgoing {
                            sender: ctx.self_id(),
                            target: next,
                            initiator: env.initiator,
                            reading: env.reading,
                            task: Some(*task),
                            payload: TestMsg::Relay {
                                hops: hops[1..].to_vec(),
                                task: *task,
                            },
                        });
                    }
                    ctx.send(Outgoing {
                        sender: ctx.self_id(),
                        target: env.initiator.unwrap(),
                        initiator: env.initiator,
                        reading: env.reading,
                        task: Some(*task),
                        payload: TestMsg::ReceiptMsg {
                            forwarded: fwd,
                            task: *task,
                        },
                    });
                }
                TestMsg::ReceiptMsg { forwarded, task } => {
                    ctx.record_receipt(*task, env.sender, forwarded);
                }
            }
        }
    }

    struct NoopDriver;
    impl Driver<TestActor> for NoopDriver {
        fn on_quiescent(&mut self, _sys: &mut SysCtx<'_, TestActor>) -> bool {
            false
        }
    }

    fn new_rt() -> Runtime<TestActor> {
        Runtime::new((), Vec::new())
    }

    #[test]
    fn empty_system_is_immediately_quiescent() {
        let mut rt = new_rt();
        let report = rt.run(&mut NoopDriver, Mode::Deterministic, 0, 1000);
        assert_eq!(report.outcome, Outcome::Quiescent);
        assert!(report.trace.events.is_empty());
    }

    #[test]
    fn spawns_get_distinct_ids() {
        let rt = new_rt();
        let mut sys = rt.sys();
        let a = sys.allocate_actor();
        let b = sys.allocate_actor();
        assert_ne!(a, b);
        sys.spawn_at(a, TestActor::default(), "test", String::new());
        sys.spawn_at(b, TestActor::default(), "test", String::new());
    }

    #[test]
    fn exactly_once_delivery() {
        let mut rt = new_rt();
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            sys.spawn_at(a, TestActor::default(), "test", String::new());
            for _ in 0..10 {
                sys.send(Outgoing {
                    sender: SYSTEM,
                    target: a,
                    initiator: None,
                    reading: ReadingId(0),
                    task: None,
                    payload: TestMsg::Ping,
                });
            }
        }
        let report = rt.run(&mut NoopDriver, Mode::Deterministic, 7, 1000);
        assert_eq!(report.outcome, Outcome::Quiescent);
        let sends = report
            .trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Send)
            .count();
        let delivers = report
            .trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Deliver)
            .count();
        assert_eq!(sends, 10);
        assert_eq!(delivers, 10);
    }

    /// Receipts along a relay chain may arrive in any order; the task must
    /// fire exactly once in all of them.
    #[test]
    fn receipt_chain_terminates_in_every_arrival_order() {
        for seed in 0..24u64 {
            let mut rt = new_rt();
            {
                let mut sys = rt.sys();
                let init = sys.allocate_actor();
                let a = sys.allocate_actor();
                let b = sys.allocate_actor();
                let c = sys.allocate_actor();
                for id in [init, a, b, c] {
                    sys.spawn_at(id, TestActor::default(), "test", String::new());
                }
                let task = sys.queue_task(init, ReadingId(0), a, "relay".into(), "done");
                sys.send(Outgoing {
                    sender: init,
                    target: a,
                    initiator: Some(init),
                    reading: ReadingId(0),
                    task: Some(task),
                    payload: TestMsg::Relay {
                        hops: vec![b, c],
                        task,
                    },
                });
            }
            let report = rt.run(&mut NoopDriver, Mode::Deterministic, seed, 1000);
            assert_eq!(
                report.outcome,
                Outcome::Quiescent,
                "seed {seed}: {:?}",
                report.faults
            );
            assert_eq!(report.tasks_created, 1);
            assert_eq!(report.tasks_fired, 1);
        }
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let run = |seed| {
            let mut rt = new_rt();
            {
                let mut sys = rt.sys();
                let a = sys.allocate_actor();
                let b = sys.allocate_actor();
                sys.spawn_at(a, TestActor::default(), "test", String::new());
                sys.spawn_at(b, TestActor::default(), "test", String::new());
                for i in 0..6 {
                    sys.send(Outgoing {
                        sender: SYSTEM,
                        target: if i % 2 == 0 { a } else { b },
                        initiator: None,
                        reading: ReadingId(0),
                        task: None,
                        payload: TestMsg::Ping,
                    });
                }
            }
            rt.run(&mut NoopDriver, Mode::Deterministic, seed, 1000)
                .trace
                .render()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(1), run(2)); // different interleavings are explored
    }

    /// An actor spawned inside a handler is deliverable by sends queued in
    /// the same handler.
    #[test]
    fn spawn_inside_handler_is_visible_to_its_sends() {
        struct Spawner;
        #[derive(Clone)]
        enum M {
            Go,
            Hi,
        }
        impl Message for M {
            fn kind(&self) -> &'static str {
                match self {
                    M::Go => "go",
                    M::Hi => "hi",
                }
            }
            fn digest(&self) -> String {
                String::new()
            }
        }
        impl Actor for Spawner {
            type Msg = M;
            type Shared = ();
            type Note = ();
            fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<M>) {
                if let M::Go = env.payload {
                    let child = ctx.allocate_actor();
                    ctx.spawn_at(child, Spawner, "spawner", String::new());
                    ctx.send(Outgoing {
                        sender: ctx.self_id(),
                        target: child,
                        initiator: None,
                        reading: env.reading,
                        task: None,
                        payload: M::Hi,
                    });
                }
            }
        }
        struct D;
        impl Driver<Spawner> for D {
            fn on_quiescent(&mut self, _sys: &mut SysCtx<'_, Spawner>) -> bool {
                false
            }
        }
        let mut rt: Runtime<Spawner> = Runtime::new((), Vec::new());
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            sys.spawn_at(a, Spawner, "spawner", String::new());
            sys.send(Outgoing {
                sender: SYSTEM,
                target: a,
                initiator: None,
                reading: ReadingId(0),
                task: None,
                payload: M::Go,
            });
        }
        let report = rt.run(&mut D, Mode::Deterministic, 0, 100);
        assert_eq!(report.outcome, Outcome::Quiescent, "{:?}", report.faults);
        // spawn precedes the child's delivery in the trace
        let spawn2 = report
            .trace
            .events
            .iter()
            .position(|e| e.kind == EventKind::Spawn && e.actor == ActorId(2));
        let deliver = report
            .trace
            .events
            .iter()
            .position(|e| e.kind == EventKind::Deliver && e.actor == ActorId(2));
        assert!(spawn2.unwrap() < deliver.unwrap());
    }

    #[test]
    fn receipt_for_unknown_task_is_a_fault() {
        let mut rt = new_rt();
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            sys.spawn_at(a, TestActor::default(), "test", String::new());
            sys.send(Outgoing {
                sender: SYSTEM,
                target: a,
                initiator: None,
                reading: ReadingId(0),
                task: None,
                payload: TestMsg::ReceiptMsg {
                    forwarded: vec![],
                    task: TaskId(99),
                },
            });
        }
        let report = rt.run(&mut NoopDriver, Mode::Deterministic, 0, 1000);
        assert_eq!(report.outcome, Outcome::Fault);
        assert!(report.faults[0].contains("unknown reception task"));
    }

    #[test]
    fn unfired_task_at_quiescence_is_a_fault() {
        let mut rt = new_rt();
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            sys.spawn_at(a, TestActor::default(), "test", String::new());
            sys.queue_task(a, ReadingId(0), a, "never".into(), "x");
        }
        let report = rt.run(&mut NoopDriver, Mode::Deterministic, 0, 1000);
        assert_eq!(report.outcome, Outcome::Fault);
        assert!(report.faults[0].contains("never fired"));
    }

    #[test]
    fn message_to_unspawned_actor_is_a_fault_at_quiescence() {
        let mut rt = new_rt();
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            let _ = a;
            sys.send(Outgoing {
                sender: SYSTEM,
                target: a,
                initiator: None,
                reading: ReadingId(0),
                task: None,
                payload: TestMsg::Ping,
            });
        }
        let report = rt.run(&mut NoopDriver, Mode::Deterministic, 0, 1000);
        assert_eq!(report.outcome, Outcome::Fault);
    }

    #[test]
    fn step_bound_reports_liveness_failure() {
        #[derive(Default)]
        struct Bouncer;
        #[derive(Clone)]
        struct Ball(ActorId);
        impl Message for Ball {
            fn kind(&self) -> &'static str {
                "ball"
            }
            fn digest(&self) -> String {
                String::new()
            }
        }
        impl Actor for Bouncer {
            type Msg = Ball;
            type Shared = ();
            type Note = ();
            fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<Ball>) {
                ctx.send(Outgoing {
                    sender: ctx.self_id(),
                    target: env.payload.0,
                    initiator: None,
                    reading: env.reading,
                    task: None,
                    payload: Ball(env.target),
                });
            }
        }
        struct D;
        impl Driver<Bouncer> for D {
            fn on_quiescent(&mut self, _sys: &mut SysCtx<'_, Bouncer>) -> bool {
                false
            }
        }
        let mut rt: Runtime<Bouncer> = Runtime::new((), Vec::new());
        {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            let b = sys.allocate_actor();
            sys.spawn_at(a, Bouncer, "bouncer", String::new());
            sys.spawn_at(b, Bouncer, "bouncer", String::new());
            sys.send(Outgoing {
                sender: SYSTEM,
                target: a,
                initiator: None,
                reading: ReadingId(0),
                task: None,
                payload: Ball(b),
            });
        }
        let report = rt.run(&mut D, Mode::Deterministic, 0, 50);
        assert_eq!(report.outcome, Outcome::LivenessFailure);
    }

    /// Handlers never observe a half-updated record: mutation happens under
    /// the per-actor lock, so concurrent deliveries serialize.
    #[test]
    fn concurrent_mode_serializes_per_actor() {
        let mut rt = new_rt();
        let a = {
            let mut sys = rt.sys();
            let a = sys.allocate_actor();
            sys.spawn_at(a, TestActor::default(), "test", String::new());
            for _ in 0..200 {
                sys.send(Outgoing {
                    sender: SYSTEM,
                    target: a,
                    initiator: None,
                    reading: ReadingId(0),
                    task: None,
                    payload: TestMsg::Ping,
                });
            }
            a
        };
        let report = rt.run(&mut NoopDriver, Mode::Concurrent, 0, 10_000);
        assert_eq!(report.outcome, Outcome::Quiescent);
        assert_eq!(rt.with_actor(a, |actor| actor.seen), Some(200));
    }
}
