use govsim_core::sim::*;

fn main() {
    let mut nodes: Vec<NodeSpec> = (0..4).map(|i| NodeSpec { id: format!("g{i}"), role: Role::Governor, byzantine: false }).collect();
    nodes.extend((0..2).map(|i| NodeSpec { id: format!("client{i}"), role: Role::Client, byzantine: false }));
    let mut sc = Scenario {
        name: "t".into(), seed: 31, horizon_ms: 20_000, gst_ms: 0,
        delay: Default::default(), nodes, adversary: vec![],
        workload: Workload { client_txs: 20, start_ms: 50, interval_ms: 20, amount: 1 },
        ledger: Default::default(),
        governance: GovernanceParams { x: 1_000_000, heartbeat_ms: 200, restart_delay_ms: 300, elections: vec![], quota: Default::default() },
        genesis_balance: 1000, liveness_bound: 10, allow_fault_budget_breach: false,
        snapshot_interval_ms: None, max_events: 5_000_000,
    };
    sc.nodes[1].byzantine = true;
    sc.adversary.push(AdversaryEntry { node: "g1".into(), behavior: Behavior::EquivocateBin, from_ms: 0, to_ms: None });
    sc.adversary.push(AdversaryEntry { node: "g1".into(), behavior: Behavior::EquivocateRb, from_ms: 0, to_ms: None });
    let out = run(&sc).expect("run");
    println!("violation: {:?}", out.violation);
    println!("summary events={} final_t={}ms blocks={}", out.summary.events_processed, out.summary.final_time_us/1000, out.summary.blocks);
    // per-instance superblock completion spread
    let mut per_inst: std::collections::BTreeMap<u64, Vec<(u64, String, String)>> = Default::default();
    for e in &out.trace {
        if let TraceEvent::SuperblockDecided{t, node, instance, bits, ..} = e {
            per_inst.entry(*instance).or_default().push((*t/1000, node.clone(), bits.clone()));
        }
    }
    for (i, v) in &per_inst {
        let min = v.iter().map(|x| x.0).min().unwrap();
        let max = v.iter().map(|x| x.0).max().unwrap();
        println!("instance {i}: {} deciders, t=[{min}..{max}]ms bits={}", v.len(), v[0].2);
    }
    let target = "848ded06cdc991ede2b019c5b366347b33f1ed2e034bce5c1c94806c71d39905";
    for e in &out.trace {
        match e {
            TraceEvent::TxAdmitted{t, node, tx, instance} if tx.to_hex() == target =>
                println!("{}ms ADMIT at {node} inst {instance}", t/1000),
            _ => {}
        }
    }
}
