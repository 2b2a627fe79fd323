//! The event loop: node runtimes, wire envelopes, delays, adversary
//! interception, and the drivers that turn scenario input into a trace.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::auth;
use crate::codec::{sha256, Digest32, Enc};
use crate::consensus::{
    ConsensusMsg, ConsensusTimer, Instance, InstanceConfig, InstanceEvent, Outbox, Proposal,
    Superblock,
};
use crate::governance::{ElectionSchedule, GovernanceState, NodeIdentity};
use crate::ledger::{Block, LedgerState, Transaction, TxKind};
use crate::rng::SimRng;
use crate::sim::monitors::Monitors;
use crate::sim::trace::{NodeMeta, TraceEvent};
use crate::sim::{
    Behavior, EpochRow, ReconfigRecord, Role, RunOutput, Scenario, ScenarioError, Summary,
};

const US_PER_MS: u64 = 1_000;

/// Instance budget before undelivered slots are voted down: twice the
/// reliable-delivery bound, which is three message hops.
fn flip_budget(sc: &Scenario) -> u64 {
    2 * 3 * sc.delay.post_gst_max_ms * US_PER_MS
}

/// Base coordinator wait per binary round; doubles with the round number.
fn round_budget(sc: &Scenario) -> u64 {
    2 * sc.delay.post_gst_max_ms * US_PER_MS
}

/// Consensus fault bound for a committee of `n`.
fn committee_fault_bound(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) / 3
    }
}

// ---------------------------------------------------------------- wire --

#[derive(Clone, Debug)]
enum NetMsg {
    Consensus { instance: u64, msg: ConsensusMsg },
    TxForward { tx: Transaction },
    SbSync { superblock: Superblock },
}

impl NetMsg {
    fn auth_bytes(&self, from_pk: &str) -> Vec<u8> {
        let enc = Enc::new().str("envelope").str(from_pk);
        match self {
            NetMsg::Consensus { instance, msg } => enc
                .u64(0)
                .u64(*instance)
                .digest(&msg.payload_digest())
                .finish(),
            NetMsg::TxForward { tx } => enc.u64(1).digest(&tx.digest()).finish(),
            NetMsg::SbSync { superblock } => enc.u64(2).digest(&superblock.digest()).finish(),
        }
    }
}

#[derive(Clone, Debug)]
struct Envelope {
    from: usize,
    msg: NetMsg,
    auth: Digest32,
}

// -------------------------------------------------------------- events --

#[derive(Clone, Debug, PartialEq, Eq)]
enum TimerKind {
    Consensus { instance: u64, timer: ConsensusTimer },
    Proposal { instance: u64 },
    Heartbeat,
    Restart { epoch: u64 },
    CastBallot { epoch: u64 },
    Snapshot,
}

#[derive(Debug)]
enum EventBody {
    Deliver { to: usize, env: Envelope },
    Timer { node: usize, kind: TimerKind },
    Submit { target: usize, tx: Transaction },
}

// ---------------------------------------------------------- node state --

#[derive(Clone, Debug)]
struct EpochInfo {
    first_instance: u64,
    member_ix: Vec<usize>,
    fault_bound: usize,
}

impl EpochInfo {
    fn slot_of(&self, ix: usize) -> Option<usize> {
        self.member_ix.iter().position(|&m| m == ix)
    }
}

struct NodeRt {
    ix: usize,
    id: String,
    role: Role,
    byzantine: bool,
    ledger: LedgerState,
    gov: GovernanceState,
    epochs: Vec<EpochInfo>,
    instances: BTreeMap<u64, Instance>,
    /// Next instance to execute; also the instance this node participates in.
    next_exec: u64,
    proposed: BTreeSet<u64>,
    timer_armed: BTreeSet<u64>,
    decided: BTreeMap<u64, Superblock>,
    sync_votes: BTreeMap<u64, BTreeMap<Digest32, (BTreeSet<usize>, Superblock)>>,
    inbox_future: BTreeMap<u64, Vec<(usize, ConsensusMsg)>>,
    running: bool,
    own_nonce_next: u64,
    ballots_cast: BTreeSet<u64>,
}

impl NodeRt {
    fn epoch_info_for(&self, instance: u64) -> Option<&EpochInfo> {
        self.epochs
            .iter()
            .rev()
            .find(|e| e.first_instance <= instance)
    }

    fn current_info(&self) -> &EpochInfo {
        self.epochs.last().unwrap()
    }

    fn is_current_member(&self) -> bool {
        self.current_info().slot_of(self.ix).is_some()
    }

    fn next_own_nonce(&mut self) -> u64 {
        let committed = self
            .ledger
            .accounts
            .get(&self.id)
            .map_or(0, |a| a.next_nonce);
        let nonce = self.own_nonce_next.max(committed);
        self.own_nonce_next = nonce + 1;
        nonce
    }
}

// ---------------------------------------------------------- simulation --

struct Simulation<'a> {
    sc: &'a Scenario,
    horizon_us: u64,
    gst_us: u64,
    nodes: Vec<NodeRt>,
    queue: BinaryHeap<Reverse<(u64, usize, u64)>>,
    bodies: Vec<Option<EventBody>>,
    now: u64,
    delay_rng: SimRng,
    adversary_rng: SimRng,
    workload_rng: SimRng,
    trace: Vec<TraceEvent>,
    monitors: Monitors,
    emitted_bodies: BTreeSet<u64>,
    events_processed: u64,
    stale_drops: u64,
    halted: bool,
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let mut sim = Simulation::new(scenario);
    sim.init();
    sim.run_loop()?;
    Ok(sim.finish())
}

impl<'a> Simulation<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let mut root = SimRng::new(sc.seed);
        let delay_rng = root.fork("delays");
        let adversary_rng = root.fork("adversary");
        let workload_rng = root.fork("workload");

        let genesis: BTreeMap<String, u64> = sc
            .nodes
            .iter()
            .map(|n| (n.id.clone(), sc.genesis_balance))
            .collect();
        let governor_idents: Vec<NodeIdentity> = sc
            .nodes
            .iter()
            .filter(|n| n.role == Role::Governor)
            .map(|n| NodeIdentity {
                public_key: n.id.clone(),
                net_id: alloc::format!("sim://{}", n.id),
            })
            .collect();
        let pool: Vec<NodeIdentity> = sc
            .nodes
            .iter()
            .filter(|n| n.role != Role::Client)
            .map(|n| NodeIdentity {
                public_key: n.id.clone(),
                net_id: alloc::format!("sim://{}", n.id),
            })
            .collect();
        let schedule: Vec<ElectionSchedule> = sc.governance.elections.clone();

        let member_ix: Vec<usize> = sc
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == Role::Governor)
            .map(|(i, _)| i)
            .collect();
        let epoch0 = EpochInfo {
            first_instance: 1,
            member_ix,
            fault_bound: committee_fault_bound(governor_idents.len()),
        };

        let nodes: Vec<NodeRt> = sc
            .nodes
            .iter()
            .enumerate()
            .map(|(ix, spec)| NodeRt {
                ix,
                id: spec.id.clone(),
                role: spec.role,
                byzantine: spec.byzantine,
                ledger: LedgerState::genesis(genesis.clone(), sc.ledger.gas_limit),
                gov: GovernanceState::new(
                    governor_idents.clone(),
                    pool.clone(),
                    sc.governance.x,
                    schedule.clone(),
                    sc.governance.quota,
                ),
                epochs: alloc::vec![epoch0.clone()],
                instances: BTreeMap::new(),
                next_exec: 1,
                proposed: BTreeSet::new(),
                timer_armed: BTreeSet::new(),
                decided: BTreeMap::new(),
                sync_votes: BTreeMap::new(),
                inbox_future: BTreeMap::new(),
                running: spec.role == Role::Governor,
                own_nonce_next: 0,
                ballots_cast: BTreeSet::new(),
            })
            .collect();

        let metas: Vec<NodeMeta> = sc
            .nodes
            .iter()
            .map(|n| NodeMeta {
                id: n.id.clone(),
                role: match n.role {
                    Role::Governor => "governor".to_string(),
                    Role::Candidate => "candidate".to_string(),
                    Role::Client => "client".to_string(),
                },
                byzantine: n.byzantine,
            })
            .collect();
        let monitors = Monitors::new(&metas, &genesis, sc.liveness_bound);
        let trace = alloc::vec![TraceEvent::Meta {
            seed: sc.seed,
            gst_us: sc.gst_ms * US_PER_MS,
            liveness_bound: sc.liveness_bound,
            nodes: metas,
            genesis,
        }];

        Simulation {
            sc,
            horizon_us: sc.horizon_ms * US_PER_MS,
            gst_us: sc.gst_ms * US_PER_MS,
            nodes,
            queue: BinaryHeap::new(),
            bodies: Vec::new(),
            now: 0,
            delay_rng,
            adversary_rng,
            workload_rng,
            trace,
            monitors,
            emitted_bodies: BTreeSet::new(),
            events_processed: 0,
            stale_drops: 0,
            halted: false,
        }
    }

    fn push_at(&mut self, time: u64, actor: usize, body: EventBody) {
        let seq = self.bodies.len() as u64;
        self.bodies.push(Some(body));
        self.queue.push(Reverse((time, actor, seq)));
    }

    fn init(&mut self) {
        // Recurring heartbeats for every chain-following node.
        if self.sc.governance.heartbeat_ms > 0 {
            for ix in 0..self.nodes.len() {
                if self.nodes[ix].role != Role::Client {
                    self.push_at(
                        self.sc.governance.heartbeat_ms * US_PER_MS,
                        ix,
                        EventBody::Timer {
                            node: ix,
                            kind: TimerKind::Heartbeat,
                        },
                    );
                }
            }
        }
        if let Some(interval) = self.sc.snapshot_interval_ms {
            for ix in 0..self.nodes.len() {
                if self.nodes[ix].role != Role::Client {
                    self.push_at(
                        interval * US_PER_MS,
                        ix,
                        EventBody::Timer {
                            node: ix,
                            kind: TimerKind::Snapshot,
                        },
                    );
                }
            }
        }
        // Client workload: pre-scheduled submissions with drawn targets.
        let clients: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Client)
            .map(|n| n.ix)
            .collect();
        let governors: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Governor)
            .map(|n| n.ix)
            .collect();
        // Each transfer goes to t+1 distinct governors so at least one
        // correct node receives it; liveness binds only those.
        let submit_fanout = committee_fault_bound(governors.len()) + 1;
        let mut client_nonces: BTreeMap<usize, u64> = BTreeMap::new();
        for j in 0..self.sc.workload.client_txs {
            let client = clients[(j % clients.len() as u64) as usize];
            let recipient = clients[self.workload_rng.range_usize(0, clients.len())];
            let nonce = client_nonces.entry(client).or_insert(0);
            let tx = Transaction::signed(
                self.nodes[client].id.clone(),
                *nonce,
                TxKind::Transfer {
                    to: self.nodes[recipient].id.clone(),
                    amount: self.sc.workload.amount,
                },
            );
            *nonce += 1;
            let at = (self.sc.workload.start_ms + j * self.sc.workload.interval_ms) * US_PER_MS;
            let mut pool = governors.clone();
            for k in 0..submit_fanout.min(pool.len()) {
                let r = self.workload_rng.range_usize(k, pool.len());
                pool.swap(k, r);
            }
            for &target in &pool[..submit_fanout.min(pool.len())] {
                self.push_at(
                    at,
                    client,
                    EventBody::Submit {
                        target,
                        tx: tx.clone(),
                    },
                );
            }
        }
        // Every governor opens instance 1 through its proposal path.
        for ix in 0..self.nodes.len() {
            if self.nodes[ix].role == Role::Governor {
                self.try_propose(ix);
            }
        }
    }

    fn run_loop(&mut self) -> Result<(), ScenarioError> {
        while let Some(Reverse((time, _, seq))) = self.queue.pop() {
            if time > self.horizon_us || self.halted {
                break;
            }
            self.events_processed += 1;
            if self.events_processed > self.sc.max_events {
                return Err(ScenarioError::Runaway(self.sc.max_events));
            }
            self.now = time;
            let body = self.bodies[seq as usize].take().expect("event consumed twice");
            match body {
                EventBody::Deliver { to, env } => self.on_deliver(to, env),
                EventBody::Timer { node, kind } => self.on_timer(node, kind),
                EventBody::Submit { target, tx } => {
                    let client = self
                        .nodes
                        .iter()
                        .find(|n| n.id == tx.issuer)
                        .map(|n| n.id.clone())
                        .unwrap_or_default();
                    self.trace_event(TraceEvent::ClientSubmit {
                        t: self.now,
                        node: client,
                        tx: tx.digest(),
                    });
                    self.receive_tx(target, tx)
                }
            }
            if self.monitors.violation().is_some() && !self.halted {
                self.halted = true;
                let description = self.monitors.violation().unwrap();
                self.trace.push(TraceEvent::Violation {
                    t: self.now,
                    at_event: self.events_processed,
                    description: alloc::format!(
                        "{}: {}",
                        description.monitor,
                        description.description
                    ),
                });
            }
        }
        Ok(())
    }

    fn trace_event(&mut self, event: TraceEvent) {
        self.monitors.on_trace_event(&event);
        self.trace.push(event);
    }

    // ------------------------------------------------------- adversary --

    fn behaviors_active(&self, ix: usize) -> Vec<Behavior> {
        let id = &self.nodes[ix].id;
        let now_ms = self.now / US_PER_MS;
        self.sc
            .adversary
            .iter()
            .filter(|e| {
                &e.node == id
                    && e.from_ms <= now_ms
                    && e.to_ms.map_or(true, |to| now_ms < to)
            })
            .map(|e| e.behavior.clone())
            .collect()
    }

    fn net_delay(&mut self) -> u64 {
        if self.now < self.gst_us {
            let ms = self.delay_rng.log_normal_capped(
                self.sc.delay.pre_gst_mu,
                self.sc.delay.pre_gst_sigma,
                1.0,
                self.sc.delay.pre_gst_cap_ms as f64,
            );
            (ms * US_PER_MS as f64) as u64
        } else {
            self.delay_rng
                .range_u64(US_PER_MS, self.sc.delay.post_gst_max_ms * US_PER_MS + 1)
        }
    }

    /// Send a consensus message to the committee of its instance's epoch,
    /// applying the sender's scripted behaviors.
    fn broadcast_consensus(&mut self, from: usize, instance: u64, msg: ConsensusMsg) {
        let info = self.nodes[from]
            .epoch_info_for(instance)
            .expect("broadcast into unknown epoch")
            .clone();
        let behaviors = self.behaviors_active(from);
        let silent = behaviors.iter().any(|b| matches!(b, Behavior::Silent));
        let extra_delay: u64 = behaviors
            .iter()
            .filter_map(|b| match b {
                Behavior::Delay { ms } => Some(ms * US_PER_MS),
                _ => None,
            })
            .sum();
        let drop_bin = behaviors.iter().find_map(|b| match b {
            Behavior::DropBinMsgs { percent } => Some(*percent),
            _ => None,
        });
        let equivocate = behaviors
            .iter()
            .any(|b| matches!(b, Behavior::EquivocateRb))
            && matches!(&msg, ConsensusMsg::RbSend { slot, .. } if info.slot_of(from) == Some(*slot));
        let equivocate_bin = behaviors
            .iter()
            .any(|b| matches!(b, Behavior::EquivocateBin))
            && msg.is_binary();

        // A different payload for part of the committee.
        let twin = if equivocate {
            match &msg {
                ConsensusMsg::RbSend { slot, prop } => {
                    let mut other = prop.clone();
                    other.timestamp += 1;
                    Some(ConsensusMsg::RbSend {
                        slot: *slot,
                        prop: other,
                    })
                }
                _ => None,
            }
        } else if equivocate_bin {
            match &msg {
                ConsensusMsg::BinEst { slot, round, value } => Some(ConsensusMsg::BinEst {
                    slot: *slot,
                    round: *round,
                    value: !*value,
                }),
                ConsensusMsg::BinCoord { slot, round, value } => Some(ConsensusMsg::BinCoord {
                    slot: *slot,
                    round: *round,
                    value: !*value,
                }),
                ConsensusMsg::BinAux { slot, round, values } => values.sole().map(|v| {
                    ConsensusMsg::BinAux {
                        slot: *slot,
                        round: *round,
                        values: crate::consensus::BinSet::singleton(!v),
                    }
                }),
                _ => None,
            }
        } else {
            None
        };

        let from_pk = self.nodes[from].id.clone();
        let auth_main = auth::sign(&from_pk, &NetMsg::Consensus { instance, msg: msg.clone() }.auth_bytes(&from_pk));
        let auth_twin = twin.as_ref().map(|m| {
            auth::sign(
                &from_pk,
                &NetMsg::Consensus {
                    instance,
                    msg: m.clone(),
                }
                .auth_bytes(&from_pk),
            )
        });

        let half = info.member_ix.len() / 2;
        for (pos, &to) in info.member_ix.iter().enumerate() {
            let is_self = to == from;
            if !is_self {
                if silent {
                    continue;
                }
                if let Some(percent) = drop_bin {
                    if msg.is_binary() && self.adversary_rng.percent(percent) {
                        continue;
                    }
                }
            }
            // RB equivocation splits the committee in half; binary
            // equivocation alternates, which separates adjacent correct
            // nodes.
            let twinned = if equivocate_bin {
                pos % 2 == 1
            } else {
                pos >= half
            };
            let (send_msg, send_auth) = match (&twin, &auth_twin) {
                (Some(tw), Some(ta)) if twinned && !is_self => (tw.clone(), *ta),
                _ => (msg.clone(), auth_main),
            };
            let delay = if is_self { 0 } else { self.net_delay() + extra_delay };
            self.push_at(
                self.now + delay,
                from,
                EventBody::Deliver {
                    to,
                    env: Envelope {
                        from,
                        msg: NetMsg::Consensus {
                            instance,
                            msg: send_msg,
                        },
                        auth: send_auth,
                    },
                },
            );
        }
    }

    /// Point-to-point sends (forwards and chain sync) under the same
    /// behavior filters.
    fn send_direct(&mut self, from: usize, to: usize, msg: NetMsg) {
        let behaviors = self.behaviors_active(from);
        if behaviors.iter().any(|b| matches!(b, Behavior::Silent)) && to != from {
            return;
        }
        let extra: u64 = behaviors
            .iter()
            .filter_map(|b| match b {
                Behavior::Delay { ms } => Some(ms * US_PER_MS),
                _ => None,
            })
            .sum();
        let from_pk = self.nodes[from].id.clone();
        let auth = auth::sign(&from_pk, &msg.auth_bytes(&from_pk));
        let delay = if to == from { 0 } else { self.net_delay() + extra };
        self.push_at(
            self.now + delay,
            from,
            EventBody::Deliver {
                to,
                env: Envelope { from, msg, auth },
            },
        );
    }

    // -------------------------------------------------------- delivery --

    fn on_deliver(&mut self, to: usize, env: Envelope) {
        let from_pk = self.nodes[env.from].id.clone();
        if !auth::verify(&from_pk, &env.msg.auth_bytes(&from_pk), &env.auth) {
            self.stale_drops += 1;
            return;
        }
        match env.msg {
            NetMsg::Consensus { instance, msg } => {
                self.on_consensus_msg(to, env.from, instance, msg)
            }
            NetMsg::TxForward { tx } => self.receive_tx(to, tx),
            NetMsg::SbSync { superblock } => self.on_sync(to, env.from, superblock),
        }
    }

    fn on_consensus_msg(&mut self, to: usize, from: usize, instance: u64, msg: ConsensusMsg) {
        let node = &mut self.nodes[to];
        if instance > node.next_exec {
            node.inbox_future.entry(instance).or_default().push((from, msg));
            return;
        }
        if instance == node.next_exec {
            let info = node.epoch_info_for(instance).cloned().expect("current epoch known");
            if info.slot_of(from).is_none() {
                // Sender is not a member of this instance's committee:
                // a stale or demoted node's message is discarded.
                self.stale_drops += 1;
                return;
            }
            if info.slot_of(to).is_none() {
                return;
            }
            if !node.running {
                node.inbox_future.entry(instance).or_default().push((from, msg));
                return;
            }
            self.route_to_instance(to, instance, from, msg);
            self.drain_exec(to);
            return;
        }
        // Older instance: keep helping stragglers on retained state.
        let Some(info) = self.nodes[to].epoch_info_for(instance).cloned() else {
            return;
        };
        if info.slot_of(from).is_none() {
            self.stale_drops += 1;
            return;
        }
        if self.nodes[to].instances.contains_key(&instance) {
            self.route_to_instance(to, instance, from, msg);
            self.drain_exec(to);
        }
    }

    /// Deliver into the instance state machine, creating it on first
    /// activity, and fan out whatever it emits.
    fn route_to_instance(&mut self, ix: usize, instance: u64, from: usize, msg: ConsensusMsg) {
        let mut out = Outbox::default();
        {
            let node = &mut self.nodes[ix];
            let info = node
                .epoch_info_for(instance)
                .cloned()
                .expect("instance epoch known");
            let from_slot = info.slot_of(from).expect("sender checked");
            let inst = match node.instances.get_mut(&instance) {
                Some(inst) => inst,
                None => {
                    let cfg = InstanceConfig {
                        instance,
                        n: info.member_ix.len(),
                        t: info.fault_bound,
                        my_slot: info.slot_of(ix),
                        flip_timeout: flip_budget(self.sc),
                        round_timeout: round_budget(self.sc),
                    };
                    node.instances.insert(instance, Instance::new(cfg, &mut out));
                    node.instances.get_mut(&instance).unwrap()
                }
            };
            inst.on_msg(from_slot, msg, &mut out);
        }
        self.absorb(ix, instance, out);
    }

    fn absorb(&mut self, ix: usize, instance: u64, out: Outbox) {
        let node_id = self.nodes[ix].id.clone();
        for (timer, delay) in out.timers {
            self.push_at(
                self.now + delay,
                ix,
                EventBody::Timer {
                    node: ix,
                    kind: TimerKind::Consensus { instance, timer },
                },
            );
        }
        for event in out.events {
            match event {
                InstanceEvent::RbDelivered { slot, digest } => {
                    self.trace_event(TraceEvent::RbDelivered {
                        t: self.now,
                        node: node_id.clone(),
                        instance,
                        slot,
                        digest,
                    });
                }
                InstanceEvent::BinDecided { slot, value } => {
                    self.trace_event(TraceEvent::BinDecided {
                        t: self.now,
                        node: node_id.clone(),
                        instance,
                        slot,
                        value,
                    });
                }
                InstanceEvent::Decided(sb) => {
                    let bits = self.nodes[ix]
                        .instances
                        .get(&instance)
                        .map(|i| i.bitmask_string())
                        .unwrap_or_default();
                    self.trace_event(TraceEvent::SuperblockDecided {
                        t: self.now,
                        node: node_id.clone(),
                        instance,
                        digest: sb.digest(),
                        bits,
                    });
                    self.nodes[ix].decided.insert(instance, sb);
                }
            }
        }
        for msg in out.broadcasts {
            self.broadcast_consensus(ix, instance, msg);
        }
    }

    // ------------------------------------------------------- admission --

    fn receive_tx(&mut self, to: usize, tx: Transaction) {
        if self.nodes[to].role == Role::Client {
            return;
        }
        let digest = tx.digest();
        let node_id = self.nodes[to].id.clone();
        let result = self.nodes[to].ledger.receive_tx(tx.clone());
        match result {
            Ok(()) => {
                let instance = self.nodes[to].next_exec;
                self.trace_event(TraceEvent::TxAdmitted {
                    t: self.now,
                    node: node_id,
                    tx: digest,
                    instance,
                });
                let node = &self.nodes[to];
                if node.is_current_member() {
                    self.try_propose(to);
                } else if !node.byzantine {
                    // State-only nodes relay to the committee so liveness
                    // does not depend on who the client happened to reach.
                    let members = self.nodes[to].current_info().member_ix.clone();
                    for m in members {
                        self.send_direct(to, m, NetMsg::TxForward { tx: tx.clone() });
                    }
                }
            }
            Err(err) => {
                self.trace_event(TraceEvent::TxRejected {
                    t: self.now,
                    node: node_id,
                    tx: digest,
                    reason: err.to_string(),
                });
            }
        }
    }

    // ------------------------------------------------------- proposals --

    fn try_propose(&mut self, ix: usize) {
        let node = &self.nodes[ix];
        let instance = node.next_exec;
        if !node.running
            || !node.is_current_member()
            || node.proposed.contains(&instance)
        {
            return;
        }
        if node.ledger.mempool_len() >= self.sc.ledger.proposal_threshold {
            self.do_propose(ix, instance);
        } else if !node.timer_armed.contains(&instance) {
            self.nodes[ix].timer_armed.insert(instance);
            self.push_at(
                self.now + self.sc.ledger.proposal_timer_ms * US_PER_MS,
                ix,
                EventBody::Timer {
                    node: ix,
                    kind: TimerKind::Proposal { instance },
                },
            );
        }
    }

    fn do_propose(&mut self, ix: usize, instance: u64) {
        let mut out = Outbox::default();
        let (digest, tx_count, node_id) = {
            let node = &mut self.nodes[ix];
            let mut txs = node.ledger.drain_mempool(self.sc.ledger.batch_cap);
            if txs.is_empty() {
                // Timer expiry with nothing pending: a self-issued no-op
                // keeps block production (and epoch triggers) moving.
                let nonce = node.next_own_nonce();
                txs.push(Transaction::signed(node.id.clone(), nonce, TxKind::Noop));
            }
            let prop = Proposal {
                proposer: node.id.clone(),
                txs,
                timestamp: self.now,
            };
            let info = node.current_info().clone();
            let inst = match node.instances.get_mut(&instance) {
                Some(inst) => inst,
                None => {
                    let cfg = InstanceConfig {
                        instance,
                        n: info.member_ix.len(),
                        t: info.fault_bound,
                        my_slot: info.slot_of(ix),
                        flip_timeout: flip_budget(self.sc),
                        round_timeout: round_budget(self.sc),
                    };
                    node.instances.insert(instance, Instance::new(cfg, &mut out));
                    node.instances.get_mut(&instance).unwrap()
                }
            };
            let tx_count = prop.txs.len() as u64;
            let digest = prop.digest();
            inst.propose(prop, &mut out);
            node.proposed.insert(instance);
            (digest, tx_count, node.id.clone())
        };
        self.trace_event(TraceEvent::ProposalBuilt {
            t: self.now,
            node: node_id,
            instance,
            digest,
            txs: tx_count,
        });
        self.absorb(ix, instance, out);
    }

    // ------------------------------------------------------ chain sync --

    fn on_sync(&mut self, to: usize, from: usize, sb: Superblock) {
        let node = &mut self.nodes[to];
        let instance = sb.instance;
        if instance < node.next_exec {
            return;
        }
        if node
            .epoch_info_for(instance)
            .is_some_and(|i| i.slot_of(to).is_some())
        {
            // Members decide for themselves.
            return;
        }
        let digest = sb.digest();
        let entry = node
            .sync_votes
            .entry(instance)
            .or_default()
            .entry(digest)
            .or_insert_with(|| (BTreeSet::new(), sb));
        entry.0.insert(from);
        self.drain_exec(to);
    }

    fn take_sync_quorum(node: &mut NodeRt) -> Option<Superblock> {
        let instance = node.next_exec;
        let info = node.epoch_info_for(instance)?.clone();
        let votes = node.sync_votes.get(&instance)?;
        let quorum = info.fault_bound + 1;
        let mut chosen: Option<Digest32> = None;
        for (digest, (senders, _)) in votes {
            let member_votes = senders
                .iter()
                .filter(|s| info.slot_of(**s).is_some())
                .count();
            if member_votes >= quorum {
                chosen = Some(*digest);
                break;
            }
        }
        let digest = chosen?;
        let (_, sb) = node.sync_votes.get_mut(&instance).unwrap().remove(&digest).unwrap();
        node.sync_votes.remove(&instance);
        Some(sb)
    }

    // ------------------------------------------------------- execution --

    fn drain_exec(&mut self, ix: usize) {
        loop {
            let instance = self.nodes[ix].next_exec;
            let sb = {
                let node = &mut self.nodes[ix];
                node.decided
                    .remove(&instance)
                    .or_else(|| Self::take_sync_quorum(node))
            };
            let Some(sb) = sb else { break };
            self.exec_superblock(ix, instance, &sb);
            if self.halted {
                break;
            }
            // Replay anything buffered for the instance we just entered.
            let next = self.nodes[ix].next_exec;
            let buffered = self.nodes[ix].inbox_future.remove(&next);
            if let Some(buffered) = buffered {
                if self.nodes[ix].running {
                    for (from, msg) in buffered {
                        self.on_consensus_msg(ix, from, next, msg);
                    }
                } else {
                    self.nodes[ix].inbox_future.insert(next, buffered);
                }
            }
        }
        self.try_propose(ix);
    }

    fn exec_superblock(&mut self, ix: usize, instance: u64, sb: &Superblock) {
        let was_member;
        let outcome;
        let node_id = self.nodes[ix].id.clone();
        {
            let node = &mut self.nodes[ix];
            was_member = node
                .epoch_info_for(instance)
                .is_some_and(|i| i.slot_of(ix).is_some());
            outcome = node.ledger.exec_superblock(sb, &mut node.gov);
        }
        if let Some(err) = self.nodes[ix].gov.poisoned().cloned() {
            // A scheduled election that cannot be configured is a scenario
            // defect; surfacing it beats silently skipping governance.
            self.trace_event(TraceEvent::Violation {
                t: self.now,
                at_event: self.events_processed,
                description: alloc::format!("election schedule unsatisfiable: {err}"),
            });
            self.halted = true;
            return;
        }

        let correct = !self.nodes[ix].byzantine;
        for &height in &outcome.appended {
            let block = self.nodes[ix].ledger.chain[height as usize].clone();
            let digest = block.digest();
            self.trace_event(TraceEvent::BlockAppended {
                t: self.now,
                node: node_id.clone(),
                height,
                instance,
                digest,
            });
            if correct && self.emitted_bodies.insert(height) {
                self.trace_event(TraceEvent::BlockBody {
                    t: self.now,
                    height,
                    instance,
                    block,
                });
            }
        }
        for (tx, disposition) in &outcome.ballots {
            use crate::governance::BallotDisposition as D;
            let (accepted, detail) = match disposition {
                D::Accepted => (true, String::new()),
                D::Decided(result) => (true, alloc::format!("decided:{}", result.members.len())),
                D::Refused(reason) => (false, reason.clone()),
                D::NotABallot => continue,
            };
            self.trace_event(TraceEvent::BallotExecuted {
                t: self.now,
                node: node_id.clone(),
                tx: *tx,
                accepted,
                detail,
            });
            if let D::Decided(result) = disposition {
                let epoch = self.nodes[ix].gov.pending().map(|p| p.epoch).unwrap_or(0);
                self.trace_event(TraceEvent::ElectionDecided {
                    t: self.now,
                    node: node_id.clone(),
                    epoch,
                    members: result.members.clone(),
                    rounds: result.rounds_used,
                });
            }
        }

        // Re-queue our own proposal's transactions that did not commit.
        let own_txs: Option<Vec<Transaction>> = self.nodes[ix]
            .instances
            .get(&instance)
            .and_then(|i| i.my_proposal())
            .map(|p| p.txs.clone());
        if let Some(txs) = own_txs {
            self.nodes[ix].ledger.requeue(txs);
        }

        // Hand the executed superblock to nodes outside this committee.
        if was_member {
            let targets: Vec<usize> = self
                .nodes
                .iter()
                .filter(|n| n.role != Role::Client)
                .map(|n| n.ix)
                .filter(|&t| {
                    t != ix
                        && self.nodes[ix]
                            .epoch_info_for(instance)
                            .is_some_and(|i| i.slot_of(t).is_none())
                })
                .collect();
            for t in targets {
                self.send_direct(
                    ix,
                    t,
                    NetMsg::SbSync {
                        superblock: sb.clone(),
                    },
                );
            }
        }

        // Committee swap, after the triggering instance fully executed.
        if self.nodes[ix].gov.pending().is_some() {
            self.apply_reconfig(ix, instance, was_member);
        }

        self.nodes[ix].next_exec = instance + 1;

        // A fresh election may have opened at a trigger height.
        self.maybe_cast_ballot(ix);
    }

    fn apply_reconfig(&mut self, ix: usize, instance: u64, was_member: bool) {
        let node_id = self.nodes[ix].id.clone();
        let (epoch_desc, running_before) = {
            let node = &mut self.nodes[ix];
            let height = node.ledger.height();
            let desc = node.gov.complete_reconfig(height).expect("pending checked");
            (desc, node.running)
        };
        if was_member && running_before {
            self.trace_event(TraceEvent::ReconfigStop {
                t: self.now,
                node: node_id.clone(),
                epoch: epoch_desc.epoch - 1,
            });
        }
        let keys: Vec<String> = epoch_desc
            .members
            .iter()
            .map(|m| m.public_key.clone())
            .collect();
        let member_ix: Vec<usize> = keys
            .iter()
            .map(|k| {
                self.nodes
                    .iter()
                    .position(|n| &n.id == k)
                    .expect("member registered")
            })
            .collect();
        let info = EpochInfo {
            first_instance: instance + 1,
            member_ix,
            fault_bound: committee_fault_bound(keys.len()),
        };
        let is_new_member = info.slot_of(ix).is_some();
        self.nodes[ix].epochs.push(info);
        self.nodes[ix].running = false;
        self.trace_event(TraceEvent::EpochStarted {
            t: self.now,
            node: node_id.clone(),
            epoch: epoch_desc.epoch,
            start_height: epoch_desc.start_height,
            members: keys,
        });
        if is_new_member {
            self.push_at(
                self.now + self.sc.governance.restart_delay_ms * US_PER_MS,
                ix,
                EventBody::Timer {
                    node: ix,
                    kind: TimerKind::Restart {
                        epoch: epoch_desc.epoch,
                    },
                },
            );
        } else if !self.nodes[ix].byzantine {
            // Demoted to state service: hand pending load to the new
            // committee so client transactions survive the swap.
            let pending: Vec<Transaction> = {
                let node = &mut self.nodes[ix];
                let txs = node.ledger.drain_mempool(usize::MAX);
                node.ledger.requeue(txs.clone());
                txs
            };
            let members = self.nodes[ix].current_info().member_ix.clone();
            for tx in pending {
                for &m in &members {
                    self.send_direct(ix, m, NetMsg::TxForward { tx: tx.clone() });
                }
            }
        }
    }

    // -------------------------------------------------------- ballots --

    fn maybe_cast_ballot(&mut self, ix: usize) {
        let Some((for_epoch, candidates)) = self.nodes[ix].gov.open_election_info() else {
            return;
        };
        let node = &self.nodes[ix];
        if node.ballots_cast.contains(&for_epoch) || !node.is_current_member() {
            return;
        }
        self.nodes[ix].ballots_cast.insert(for_epoch);

        let behaviors = self.behaviors_active(ix);
        if behaviors.iter().any(|b| matches!(b, Behavior::Silent)) {
            return;
        }
        let late = behaviors.iter().find_map(|b| match b {
            Behavior::VoteLate { by_ms } => Some(*by_ms),
            _ => None,
        });
        if let Some(by_ms) = late {
            self.push_at(
                self.now + by_ms * US_PER_MS,
                ix,
                EventBody::Timer {
                    node: ix,
                    kind: TimerKind::CastBallot { epoch: for_epoch },
                },
            );
            return;
        }
        self.cast_ballot_now(ix, for_epoch, candidates);
    }

    fn ballot_prefs(&self, ix: usize, for_epoch: u64, candidates: &[String]) -> Vec<String> {
        let behaviors = self.behaviors_active(ix);
        if let Some(prefs) = behaviors.iter().find_map(|b| match b {
            Behavior::StuffBallots { prefs } => Some(prefs.clone()),
            _ => None,
        }) {
            return prefs;
        }
        let seed = sha256(
            &Enc::new()
                .u64(self.sc.seed)
                .str("ballot")
                .u64(for_epoch)
                .str(&self.nodes[ix].id)
                .finish(),
        )
        .prefix_u64();
        let mut rng = SimRng::new(seed);
        let mut prefs = candidates.to_vec();
        rng.shuffle(&mut prefs);
        prefs
    }

    fn cast_ballot_now(&mut self, ix: usize, for_epoch: u64, candidates: Vec<String>) {
        let prefs = self.ballot_prefs(ix, for_epoch, &candidates);
        let stuffing = self
            .behaviors_active(ix)
            .iter()
            .any(|b| matches!(b, Behavior::StuffBallots { .. }));
        let (id, nonce) = {
            let node = &mut self.nodes[ix];
            (node.id.clone(), node.next_own_nonce())
        };
        let tx = Transaction::signed(
            id.clone(),
            nonce,
            TxKind::Ballot {
                ballot: crate::election::Ballot {
                    voter: id.clone(),
                    prefs: prefs.clone(),
                },
            },
        );
        self.receive_tx(ix, tx);
        if stuffing {
            // Second ballot from the same voter: exercises the double-vote
            // guard; it will consume a nonce and be refused by the count.
            let nonce = self.nodes[ix].next_own_nonce();
            let tx = Transaction::signed(
                id.clone(),
                nonce,
                TxKind::Ballot {
                    ballot: crate::election::Ballot {
                        voter: id,
                        prefs,
                    },
                },
            );
            self.receive_tx(ix, tx);
        }
    }

    // ---------------------------------------------------------- timers --

    fn on_timer(&mut self, ix: usize, kind: TimerKind) {
        match kind {
            TimerKind::Consensus { instance, timer } => {
                if self.nodes[ix].instances.contains_key(&instance) {
                    let mut out = Outbox::default();
                    self.nodes[ix]
                        .instances
                        .get_mut(&instance)
                        .unwrap()
                        .on_timer(timer, &mut out);
                    self.absorb(ix, instance, out);
                    self.drain_exec(ix);
                }
            }
            TimerKind::Proposal { instance } => {
                self.nodes[ix].timer_armed.remove(&instance);
                if self.nodes[ix].next_exec == instance {
                    let node = &self.nodes[ix];
                    if node.running
                        && node.is_current_member()
                        && !node.proposed.contains(&instance)
                    {
                        self.do_propose(ix, instance);
                    }
                }
            }
            TimerKind::Heartbeat => {
                self.push_at(
                    self.now + self.sc.governance.heartbeat_ms * US_PER_MS,
                    ix,
                    EventBody::Timer {
                        node: ix,
                        kind: TimerKind::Heartbeat,
                    },
                );
                let node = &mut self.nodes[ix];
                if node.running && node.is_current_member() && node.ledger.mempool_len() == 0 {
                    let nonce = node.next_own_nonce();
                    let tx = Transaction::signed(node.id.clone(), nonce, TxKind::Noop);
                    self.receive_tx(ix, tx);
                }
            }
            TimerKind::Restart { epoch } => {
                let node = &mut self.nodes[ix];
                if node.gov.epoch() == epoch && node.is_current_member() {
                    node.running = true;
                    let id = node.id.clone();
                    self.trace_event(TraceEvent::ReconfigRestart {
                        t: self.now,
                        node: id,
                        epoch,
                    });
                    let next = self.nodes[ix].next_exec;
                    if let Some(buffered) = self.nodes[ix].inbox_future.remove(&next) {
                        for (from, msg) in buffered {
                            self.on_consensus_msg(ix, from, next, msg);
                        }
                    }
                    self.drain_exec(ix);
                }
            }
            TimerKind::CastBallot { epoch } => {
                if let Some((for_epoch, candidates)) = self.nodes[ix].gov.open_election_info() {
                    if for_epoch == epoch {
                        self.cast_ballot_now(ix, for_epoch, candidates);
                    }
                }
            }
            TimerKind::Snapshot => {
                let interval = self.sc.snapshot_interval_ms.unwrap_or(0);
                if interval > 0 {
                    self.push_at(
                        self.now + interval * US_PER_MS,
                        ix,
                        EventBody::Timer {
                            node: ix,
                            kind: TimerKind::Snapshot,
                        },
                    );
                }
                let node = &self.nodes[ix];
                let (height, tip, id) = (node.ledger.height(), node.ledger.tip_digest(), node.id.clone());
                self.trace_event(TraceEvent::ChainSnapshot {
                    t: self.now,
                    node: id,
                    height,
                    tip,
                });
            }
        }
    }

    // ---------------------------------------------------------- output --

    fn finish(mut self) -> RunOutput {
        let final_instance = self
            .nodes
            .iter()
            .filter(|n| !n.byzantine && n.role != Role::Client)
            .map(|n| n.next_exec.saturating_sub(1))
            .max()
            .unwrap_or(0);
        if !self.halted {
            self.monitors.finish(final_instance);
            if let Some(v) = self.monitors.violation() {
                let description = alloc::format!("{}: {}", v.monitor, v.description);
                self.trace.push(TraceEvent::Violation {
                    t: self.now,
                    at_event: self.events_processed,
                    description,
                });
            }
        }

        let chains: BTreeMap<String, Vec<Block>> = self
            .nodes
            .iter()
            .filter(|n| n.role != Role::Client)
            .map(|n| (n.id.clone(), n.ledger.chain.clone()))
            .collect();

        let (epoch_rows, reconfigs) = metrics_from_trace(&self.trace);
        let blocks = self.emitted_bodies.len() as u64;
        let txs_committed = self
            .trace
            .iter()
            .filter(|e| matches!(e, TraceEvent::BlockBody { .. }))
            .map(|e| match e {
                TraceEvent::BlockBody { block, .. } => block.txs.len() as u64,
                _ => 0,
            })
            .sum();
        let summary = Summary {
            blocks,
            txs_committed,
            epochs_completed: reconfigs.len() as u64,
            downtimes_us: reconfigs.iter().filter_map(|r| r.downtime_us).collect(),
            events_processed: self.events_processed,
            final_time_us: self.now,
            stale_sender_drops: self.stale_drops,
        };
        let violation = self.monitors.violation().cloned();
        RunOutput {
            trace: self.trace,
            chains,
            epoch_rows,
            reconfigs,
            summary,
            violation,
        }
    }
}

/// Epoch metrics assembled from the recorded trace: start/stop instants,
/// block and transaction counts per committee tenure.
pub(crate) fn metrics_from_trace(trace: &[TraceEvent]) -> (Vec<EpochRow>, Vec<ReconfigRecord>) {
    let mut epoch_start_height: BTreeMap<u64, (u64, usize, u64)> = BTreeMap::new();
    let mut first_epoch_instance: BTreeMap<u64, u64> = BTreeMap::new();
    for e in trace {
        if let TraceEvent::EpochStarted {
            t,
            epoch,
            start_height,
            members,
            ..
        } = e
        {
            epoch_start_height
                .entry(*epoch)
                .or_insert((*start_height, members.len(), *t));
        }
        if let TraceEvent::SuperblockDecided { instance, .. } = e {
            // Tracks the minimum instance seen per run; epoch boundaries
            // are derived from proposals below.
            let _ = instance;
        }
    }
    // Epoch 0 committee size: members of the first proposal-era; derive
    // from Meta governor count.
    let mut epoch0_size = 0usize;
    if let Some(TraceEvent::Meta { nodes, .. }) = trace.first() {
        epoch0_size = nodes.iter().filter(|n| n.role == "governor").count();
    }

    // First instance per epoch: epoch e starts right after the trigger, so
    // take the first ProposalBuilt time at-or-after the EpochStarted time
    // from any new-epoch member.
    let mut reconfigs: Vec<ReconfigRecord> = Vec::new();
    for (&epoch, &(start_height, size, stop_t)) in &epoch_start_height {
        let members: Vec<String> = trace
            .iter()
            .find_map(|e| match e {
                TraceEvent::EpochStarted {
                    epoch: ev_epoch,
                    members,
                    ..
                } if *ev_epoch == epoch => Some(members.clone()),
                _ => None,
            })
            .unwrap_or_default();
        let restart = trace
            .iter()
            .find_map(|e| match e {
                TraceEvent::ProposalBuilt { t, node, .. }
                    if *t >= stop_t && members.contains(node) =>
                {
                    Some(*t)
                }
                _ => None,
            });
        let first_inst = trace
            .iter()
            .find_map(|e| match e {
                TraceEvent::ProposalBuilt {
                    t,
                    node,
                    instance,
                    ..
                } if *t >= stop_t && members.contains(node) => Some(*instance),
                _ => None,
            })
            .unwrap_or(0);
        first_epoch_instance.insert(epoch, first_inst);
        reconfigs.push(ReconfigRecord {
            epoch,
            start_height,
            committee_size: size,
            stop_time_us: stop_t,
            restart_time_us: restart,
            downtime_us: restart.map(|r| r.saturating_sub(stop_t)),
        });
    }

    // Blocks and transactions per epoch from the unique bodies.
    let mut boundaries: Vec<(u64, u64)> = epoch_start_height
        .iter()
        .map(|(&e, &(h, _, _))| (h, e))
        .collect();
    boundaries.sort_unstable();
    let epoch_of_height = |height: u64| -> u64 {
        let mut current = 0;
        for &(start, epoch) in &boundaries {
            if height > start {
                current = epoch;
            }
        }
        current
    };
    let mut blocks_per: BTreeMap<u64, u64> = BTreeMap::new();
    let mut txs_per: BTreeMap<u64, u64> = BTreeMap::new();
    for e in trace {
        if let TraceEvent::BlockBody { height, block, .. } = e {
            let epoch = epoch_of_height(*height);
            *blocks_per.entry(epoch).or_insert(0) += 1;
            *txs_per.entry(epoch).or_insert(0) += block.txs.len() as u64;
        }
    }
    let mut rows: Vec<EpochRow> = Vec::new();
    let mut epochs: BTreeSet<u64> = blocks_per.keys().copied().collect();
    epochs.extend(epoch_start_height.keys().copied());
    epochs.insert(0);
    for epoch in epochs {
        let (start_height, committee_size, _) = epoch_start_height
            .get(&epoch)
            .copied()
            .unwrap_or((0, epoch0_size, 0));
        let downtime = reconfigs
            .iter()
            .find(|r| r.epoch == epoch)
            .and_then(|r| r.downtime_us)
            .unwrap_or(0);
        rows.push(EpochRow {
            epoch,
            start_height,
            committee_size,
            downtime_us: downtime,
            blocks_in_epoch: blocks_per.get(&epoch).copied().unwrap_or(0),
            txs_committed: txs_per.get(&epoch).copied().unwrap_or(0),
        });
    }
    (rows, reconfigs)
}
