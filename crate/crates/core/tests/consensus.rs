//! Drives a committee of instance state machines through a deterministic
//! in-test router: fault-free agreement, silent and equivocating senders,
//! and mixed-input binary races caused by skewed delivery.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use govsim_core::consensus::{
    ConsensusMsg, ConsensusTimer, Instance, InstanceConfig, InstanceEvent, Outbox, Proposal,
    Superblock,
};
use govsim_core::codec::Digest32;

const FLIP: u64 = 1_000;
const ROUND: u64 = 400;

fn cfg(instance: u64, n: usize, t: usize, slot: usize) -> InstanceConfig {
    InstanceConfig {
        instance,
        n,
        t,
        my_slot: Some(slot),
        flip_timeout: FLIP,
        round_timeout: ROUND,
    }
}

fn proposal(name: &str) -> Proposal {
    Proposal {
        proposer: name.to_string(),
        txs: Vec::new(),
        timestamp: 1,
    }
}

enum Item {
    Msg { to: usize, from_slot: usize, msg: ConsensusMsg },
    Timer { node: usize, timer: ConsensusTimer },
}

/// Deterministic router: messages and timers fire in (time, seq) order.
/// `delay(from, to)` returning `None` drops the edge.
struct Router<F: FnMut(usize, usize, &ConsensusMsg) -> Option<u64>> {
    nodes: Vec<Instance>,
    queue: BinaryHeap<Reverse<(u64, u64, usize)>>,
    items: Vec<Item>,
    time: u64,
    silent: Vec<bool>,
    delay: F,
    delivered: Vec<Vec<(usize, Digest32)>>,
    superblocks: Vec<Option<Superblock>>,
}

impl<F: FnMut(usize, usize, &ConsensusMsg) -> Option<u64>> Router<F> {
    fn new(n: usize, t: usize, delay: F) -> Self {
        let mut nodes = Vec::new();
        let mut boxes = Vec::new();
        for slot in 0..n {
            let mut out = Outbox::default();
            nodes.push(Instance::new(cfg(1, n, t, slot), &mut out));
            boxes.push(out);
        }
        let mut router = Router {
            nodes,
            queue: BinaryHeap::new(),
            items: Vec::new(),
            time: 0,
            silent: vec![false; n],
            delay,
            delivered: vec![Vec::new(); n],
            superblocks: vec![None; n],
        };
        for (node, out) in boxes.into_iter().enumerate() {
            router.absorb(node, out);
        }
        router
    }

    fn push(&mut self, at: u64, item: Item) {
        let seq = self.items.len() as u64;
        self.items.push(item);
        self.queue.push(Reverse((at, seq, 0)));
    }

    fn absorb(&mut self, node: usize, out: Outbox) {
        let n = self.nodes.len();
        for msg in out.broadcasts {
            if self.silent[node] {
                continue;
            }
            for to in 0..n {
                if let Some(d) = (self.delay)(node, to, &msg) {
                    let at = self.time + d;
                    self.push(at, Item::Msg { to, from_slot: node, msg: msg.clone() });
                }
            }
        }
        for (timer, delay) in out.timers {
            let at = self.time + delay;
            self.push(at, Item::Timer { node, timer });
        }
        for event in out.events {
            match event {
                InstanceEvent::RbDelivered { slot, digest } => {
                    self.delivered[node].push((slot, digest));
                }
                InstanceEvent::Decided(sb) => self.superblocks[node] = Some(sb),
                InstanceEvent::BinDecided { .. } => {}
            }
        }
    }

    fn propose(&mut self, node: usize, prop: Proposal) {
        let mut out = Outbox::default();
        self.nodes[node].propose(prop, &mut out);
        self.absorb(node, out);
    }

    fn send_to(&mut self, from_slot: usize, to: usize, msg: ConsensusMsg) {
        self.push(self.time + 1, Item::Msg { to, from_slot, msg });
    }

    fn run(&mut self) {
        let mut guard = 0u64;
        while let Some(Reverse((at, seq, _))) = self.queue.pop() {
            guard += 1;
            assert!(guard < 2_000_000, "router runaway");
            self.time = self.time.max(at);
            let mut out = Outbox::default();
            match &self.items[seq as usize] {
                Item::Msg { to, from_slot, msg } => {
                    let (to, from_slot, msg) = (*to, *from_slot, msg.clone());
                    self.nodes[to].on_msg(from_slot, msg, &mut out);
                    self.absorb(to, out);
                }
                Item::Timer { node, timer } => {
                    let (node, timer) = (*node, *timer);
                    if self.silent[node] {
                        continue;
                    }
                    self.nodes[node].on_timer(timer, &mut out);
                    self.absorb(node, out);
                }
            }
        }
    }
}

fn uniform(d: u64) -> impl FnMut(usize, usize, &ConsensusMsg) -> Option<u64> {
    move |_, _, _| Some(d)
}

#[test]
fn fault_free_committee_agrees_on_full_superblock() {
    let mut net = Router::new(4, 1, uniform(10));
    for slot in 0..4 {
        net.propose(slot, proposal(&format!("node-{slot}")));
    }
    net.run();
    let first = net.superblocks[0].clone().expect("node 0 complete");
    assert_eq!(first.entries.len(), 4);
    for node in 0..4 {
        let sb = net.superblocks[node].as_ref().expect("complete");
        assert_eq!(sb, &first, "superblock mismatch at node {node}");
        assert_eq!(net.nodes[node].bitmask_string(), "1111");
    }
}

#[test]
fn silent_sender_slot_decides_zero() {
    let mut net = Router::new(4, 1, uniform(10));
    net.silent[3] = true;
    for slot in 0..3 {
        net.propose(slot, proposal(&format!("node-{slot}")));
    }
    net.run();
    let first = net.superblocks[0].clone().expect("node 0 complete");
    let slots: Vec<usize> = first.entries.iter().map(|(s, _)| *s).collect();
    assert_eq!(slots, vec![0, 1, 2]);
    for node in 0..3 {
        assert_eq!(net.superblocks[node].as_ref(), Some(&first));
        assert_eq!(net.nodes[node].bitmask_string(), "1110");
        // No correct node delivered anything for the silent slot.
        assert!(net.delivered[node].iter().all(|(s, _)| *s != 3));
    }
}

#[test]
fn equivocating_sender_delivers_at_most_one_payload() {
    // Node 0 sends p to nodes 1 and 2, p' to node 3, and echoes p itself.
    // The echo quorum (3 of 4) can only form for p; every correct node
    // must deliver p or nothing for slot 0.
    let mut net = Router::new(4, 1, uniform(10));
    net.silent[0] = true; // byzantine: hand-crafted messages only
    for slot in 1..4 {
        net.propose(slot, proposal(&format!("node-{slot}")));
    }
    let p = proposal("two-faced-a");
    let p2 = proposal("two-faced-b");
    for to in [1, 2] {
        net.send_to(0, to, ConsensusMsg::RbSend { slot: 0, prop: p.clone() });
    }
    net.send_to(0, 3, ConsensusMsg::RbSend { slot: 0, prop: p2.clone() });
    for to in 1..4 {
        net.send_to(0, to, ConsensusMsg::RbEcho { slot: 0, prop: p.clone() });
    }
    net.run();

    let expected = p.digest();
    let mut delivered_any = false;
    for node in 1..4 {
        for (slot, digest) in &net.delivered[node] {
            if *slot == 0 {
                assert_eq!(digest, &expected, "conflicting delivery at node {node}");
                delivered_any = true;
            }
        }
    }
    assert!(delivered_any, "p gathered an echo quorum and should deliver");
    let first = net.superblocks[1].clone().expect("complete");
    for node in 1..4 {
        assert_eq!(net.superblocks[node].as_ref(), Some(&first));
    }
}

#[test]
fn skewed_delivery_still_agrees() {
    // Slot 3's broadcast reaches nodes 0 and 1 promptly but nodes 2 and 3
    // only long after their budgets expire, so inputs for slot 3 are
    // genuinely mixed; the binary layer must still agree, and if it
    // decides 1 the laggards wait for the late delivery before assembling.
    let delay = |from: usize, to: usize, msg: &ConsensusMsg| -> Option<u64> {
        let slot3_payload = matches!(
            msg,
            ConsensusMsg::RbSend { slot: 3, .. }
                | ConsensusMsg::RbEcho { slot: 3, .. }
                | ConsensusMsg::RbReady { slot: 3, .. }
        );
        if slot3_payload && (to == 2 || to == 3) && from != to {
            Some(FLIP * 3)
        } else {
            Some(10)
        }
    };
    let mut net = Router::new(4, 1, delay);
    for slot in 0..4 {
        net.propose(slot, proposal(&format!("node-{slot}")));
    }
    net.run();
    let first = net.superblocks[0].clone().expect("complete");
    for node in 0..4 {
        assert_eq!(
            net.superblocks[node].as_ref(),
            Some(&first),
            "disagreement at node {node}"
        );
    }
    // Slots 0..2 were prompt everywhere and must all be included.
    let slots: Vec<usize> = first.entries.iter().map(|(s, _)| *s).collect();
    for s in 0..3 {
        assert!(slots.contains(&s), "prompt slot {s} censored");
    }
}

#[test]
fn unanimous_delivery_before_votes_is_never_censored() {
    // Every proposal reaches every node well before any budget expires:
    // validity of the per-slot binary consensus forces all-ones.
    let mut net = Router::new(7, 2, uniform(5));
    for slot in 0..7 {
        net.propose(slot, proposal(&format!("node-{slot}")));
    }
    net.run();
    for node in 0..7 {
        let sb = net.superblocks[node].as_ref().expect("complete");
        assert_eq!(sb.entries.len(), 7, "censored entry at node {node}");
    }
}
