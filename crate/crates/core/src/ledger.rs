//! State service: mempool admission, proposal building, and superblock
//! execution into hash-linked blocks.
//!
//! Three transaction kinds are interpreted natively: asset transfers,
//! no-ops (nonce bumps that keep block production alive), and ballots
//! (which feed the open election). Blocks carry flat SHA-256 digests over
//! the post-state, the transaction list and the receipt list; gas fields
//! ride along as constants for header-format fidelity only.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::auth;
use crate::codec::{Digest32, Enc};
use crate::consensus::Superblock;
use crate::election::Ballot;
use crate::governance::{BallotDisposition, GovernanceState};

pub type AccountId = String;

/// How many nonces ahead of the committed counter the mempool will hold.
pub const NONCE_WINDOW: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TxKind {
    Transfer { to: AccountId, amount: u64 },
    Noop,
    Ballot { ballot: Ballot },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub issuer: AccountId,
    pub nonce: u64,
    #[serde(flatten)]
    pub kind: TxKind,
    pub signature: Digest32,
}

impl Transaction {
    /// Canonical bytes the signature covers.
    pub fn signing_bytes(issuer: &str, nonce: u64, kind: &TxKind) -> Vec<u8> {
        let enc = Enc::new().str("tx").str(issuer).u64(nonce);
        let enc = match kind {
            TxKind::Transfer { to, amount } => enc.u64(0).str(to).u64(*amount),
            TxKind::Noop => enc.u64(1),
            TxKind::Ballot { ballot } => {
                let mut e = enc.u64(2).str(&ballot.voter).u64(ballot.prefs.len() as u64);
                for p in &ballot.prefs {
                    e = e.str(p);
                }
                e
            }
        };
        enc.finish()
    }

    pub fn signed(issuer: AccountId, nonce: u64, kind: TxKind) -> Transaction {
        let signature = auth::sign(&issuer, &Self::signing_bytes(&issuer, nonce, &kind));
        Transaction {
            issuer,
            nonce,
            kind,
            signature,
        }
    }

    pub fn verify_signature(&self) -> bool {
        auth::verify(
            &self.issuer,
            &Self::signing_bytes(&self.issuer, self.nonce, &self.kind),
            &self.signature,
        )
    }

    /// Digest over the full transaction, signature included.
    pub fn digest(&self) -> Digest32 {
        Enc::new()
            .bytes(&Self::signing_bytes(&self.issuer, self.nonce, &self.kind))
            .digest(&self.signature)
            .into_digest()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiptStatus {
    Applied,
    /// The transaction consumed its nonce but its effect was refused
    /// (a ballot the election would not accept).
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx: Digest32,
    pub status: ReceiptStatus,
    /// Issuer balance after execution, a cheap state snapshot reference.
    pub post_balance: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub parent: Digest32,
    pub state_digest: Digest32,
    pub tx_digest: Digest32,
    pub receipt_digest: Digest32,
    pub gas_used: u64,
    pub gas_limit: u64,
    pub nonce: u64,
    pub timestamp: u64,
}

impl BlockHeader {
    pub fn digest(&self) -> Digest32 {
        Enc::new()
            .str("header")
            .digest(&self.parent)
            .digest(&self.state_digest)
            .digest(&self.tx_digest)
            .digest(&self.receipt_digest)
            .u64(self.gas_used)
            .u64(self.gas_limit)
            .u64(self.nonce)
            .u64(self.timestamp)
            .into_digest()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
}

impl Block {
    pub fn digest(&self) -> Digest32 {
        self.header.digest()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: u64,
    pub next_nonce: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TxRejected {
    #[error("bad signature")]
    BadSignature,
    #[error("nonce {got} below committed counter {expected}")]
    StaleNonce { got: u64, expected: u64 },
    #[error("nonce {got} beyond admission window end {window_end}")]
    NonceBeyondWindow { got: u64, window_end: u64 },
    #[error("already pending")]
    AlreadyPending,
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
}

/// Per-node chain and account state plus the admission-ordered mempool.
#[derive(Clone, Debug)]
pub struct LedgerState {
    pub accounts: BTreeMap<AccountId, Account>,
    pub chain: Vec<Block>,
    mempool: VecDeque<Transaction>,
    pending_keys: BTreeSet<(AccountId, u64)>,
    pub gas_limit: u64,
}

/// What executing one superblock produced.
#[derive(Clone, Debug, Default)]
pub struct ExecOutcome {
    /// Heights of the blocks appended, in order.
    pub appended: Vec<u64>,
    /// Digests of committed (applied or rejected-ballot) transactions.
    pub committed: Vec<Digest32>,
    /// Ballot dispositions in execution order.
    pub ballots: Vec<(Digest32, BallotDisposition)>,
}

impl LedgerState {
    /// Build the shared genesis block over the initial account map.
    pub fn genesis(accounts: BTreeMap<AccountId, u64>, gas_limit: u64) -> Self {
        let accounts: BTreeMap<AccountId, Account> = accounts
            .into_iter()
            .map(|(id, balance)| {
                (
                    id,
                    Account {
                        balance,
                        next_nonce: 0,
                    },
                )
            })
            .collect();
        let header = BlockHeader {
            parent: Digest32::ZERO,
            state_digest: state_digest(&accounts),
            tx_digest: txs_digest(&[]),
            receipt_digest: receipts_digest(&[]),
            gas_used: 0,
            gas_limit,
            nonce: 0,
            timestamp: 0,
        };
        LedgerState {
            accounts,
            chain: alloc::vec![Block {
                header,
                txs: Vec::new(),
                receipts: Vec::new(),
            }],
            mempool: VecDeque::new(),
            pending_keys: BTreeSet::new(),
            gas_limit,
        }
    }

    /// Height of the newest block; genesis sits at height 0.
    pub fn height(&self) -> u64 {
        (self.chain.len() - 1) as u64
    }

    pub fn tip_digest(&self) -> Digest32 {
        self.chain.last().unwrap().digest()
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    pub fn total_balance(&self) -> u128 {
        self.accounts.values().map(|a| a.balance as u128).sum()
    }

    /// Admit a transaction into the mempool: valid signature, plausible
    /// nonce, known issuer, not already pending or committed.
    pub fn receive_tx(&mut self, tx: Transaction) -> Result<(), TxRejected> {
        if !tx.verify_signature() {
            return Err(TxRejected::BadSignature);
        }
        let account = self
            .accounts
            .get(&tx.issuer)
            .ok_or_else(|| TxRejected::UnknownAccount(tx.issuer.clone()))?;
        if tx.nonce < account.next_nonce {
            return Err(TxRejected::StaleNonce {
                got: tx.nonce,
                expected: account.next_nonce,
            });
        }
        let window_end = account.next_nonce + NONCE_WINDOW;
        if tx.nonce > window_end {
            return Err(TxRejected::NonceBeyondWindow {
                got: tx.nonce,
                window_end,
            });
        }
        let key = (tx.issuer.clone(), tx.nonce);
        if self.pending_keys.contains(&key) {
            return Err(TxRejected::AlreadyPending);
        }
        self.pending_keys.insert(key);
        self.mempool.push_back(tx);
        Ok(())
    }

    /// Drain up to `batch_cap` transactions in admission order.
    pub fn drain_mempool(&mut self, batch_cap: usize) -> Vec<Transaction> {
        let take = self.mempool.len().min(batch_cap);
        let mut out = Vec::with_capacity(take);
        for _ in 0..take {
            let tx = self.mempool.pop_front().unwrap();
            self.pending_keys.remove(&(tx.issuer.clone(), tx.nonce));
            out.push(tx);
        }
        out
    }

    /// Return unexecuted transactions to the front of the mempool, oldest
    /// first, skipping any whose nonce has been consumed meanwhile.
    pub fn requeue(&mut self, txs: Vec<Transaction>) {
        for tx in txs.into_iter().rev() {
            let committed = self
                .accounts
                .get(&tx.issuer)
                .is_some_and(|a| tx.nonce < a.next_nonce);
            let key = (tx.issuer.clone(), tx.nonce);
            if committed || self.pending_keys.contains(&key) {
                continue;
            }
            self.pending_keys.insert(key);
            self.mempool.push_front(tx);
        }
    }

    /// Drop pending transactions whose nonce was consumed by committed
    /// blocks (typically duplicates proposed by another node).
    pub fn evict_committed(&mut self) {
        let accounts = &self.accounts;
        let pending = &mut self.pending_keys;
        self.mempool.retain(|tx| {
            let stale = accounts
                .get(&tx.issuer)
                .is_some_and(|a| tx.nonce < a.next_nonce);
            if stale {
                pending.remove(&(tx.issuer.clone(), tx.nonce));
            }
            !stale
        });
    }

    /// Exec-time validation: exact nonce, funds available, signature.
    fn valid_now(&self, tx: &Transaction) -> bool {
        let Some(account) = self.accounts.get(&tx.issuer) else {
            return false;
        };
        if tx.nonce != account.next_nonce || !tx.verify_signature() {
            return false;
        }
        match &tx.kind {
            TxKind::Transfer { to, amount } => {
                account.balance >= *amount && self.accounts.contains_key(to)
            }
            TxKind::Noop | TxKind::Ballot { .. } => true,
        }
    }

    /// Run one validated transaction, returning its receipt.
    fn run_tx(
        &mut self,
        tx: &Transaction,
        gov: &mut GovernanceState,
    ) -> (Receipt, BallotDisposition) {
        let mut disposition = BallotDisposition::NotABallot;
        let status = match &tx.kind {
            TxKind::Transfer { to, amount } => {
                self.accounts.get_mut(&tx.issuer).unwrap().balance -= amount;
                self.accounts.get_mut(to).unwrap().balance += amount;
                ReceiptStatus::Applied
            }
            TxKind::Noop => ReceiptStatus::Applied,
            TxKind::Ballot { ballot } => {
                disposition = gov.cast_ballot(ballot.clone());
                match disposition {
                    BallotDisposition::Refused(_) => ReceiptStatus::Rejected,
                    _ => ReceiptStatus::Applied,
                }
            }
        };
        let issuer = self.accounts.get_mut(&tx.issuer).unwrap();
        issuer.next_nonce += 1;
        let post_balance = issuer.balance;
        (
            Receipt {
                tx: tx.digest(),
                status,
                post_balance,
            },
            disposition,
        )
    }

    /// Execute a decided superblock: one block per proposal in slot order,
    /// re-validating each transaction against the evolving state. Invalid
    /// transactions are skipped without receipts; a proposal whose
    /// transactions are all invalid still yields an empty block so slot
    /// accounting stays uniform.
    pub fn exec_superblock(&mut self, sb: &Superblock, gov: &mut GovernanceState) -> ExecOutcome {
        let mut outcome = ExecOutcome::default();
        for (_, proposal) in &sb.entries {
            let mut val = Vec::new();
            let mut receipts = Vec::new();
            for tx in &proposal.txs {
                if !self.valid_now(tx) {
                    continue;
                }
                let (receipt, disposition) = self.run_tx(tx, gov);
                outcome.committed.push(receipt.tx);
                if !matches!(disposition, BallotDisposition::NotABallot) {
                    outcome.ballots.push((receipt.tx, disposition.clone()));
                }
                receipts.push(receipt);
                val.push(tx.clone());
            }
            let header = BlockHeader {
                parent: self.tip_digest(),
                state_digest: state_digest(&self.accounts),
                tx_digest: txs_digest(&val),
                receipt_digest: receipts_digest(&receipts),
                gas_used: 0,
                gas_limit: self.gas_limit,
                nonce: 0,
                timestamp: proposal.timestamp,
            };
            self.chain.push(Block {
                header,
                txs: val,
                receipts,
            });
            let height = self.height();
            outcome.appended.push(height);
            gov.on_block_appended(height);
        }
        self.evict_committed();
        outcome
    }
}

pub fn state_digest(accounts: &BTreeMap<AccountId, Account>) -> Digest32 {
    let mut enc = Enc::new().str("state").u64(accounts.len() as u64);
    for (id, account) in accounts {
        enc = enc.str(id).u64(account.balance).u64(account.next_nonce);
    }
    enc.into_digest()
}

pub fn txs_digest(txs: &[Transaction]) -> Digest32 {
    let mut enc = Enc::new().str("txs").u64(txs.len() as u64);
    for tx in txs {
        enc = enc.digest(&tx.digest());
    }
    enc.into_digest()
}

pub fn receipts_digest(receipts: &[Receipt]) -> Digest32 {
    let mut enc = Enc::new().str("receipts").u64(receipts.len() as u64);
    for r in receipts {
        enc = enc.digest(&r.tx).u64(match r.status {
            ReceiptStatus::Applied => 1,
            ReceiptStatus::Rejected => 0,
        });
        enc = enc.u64(r.post_balance);
    }
    enc.into_digest()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::Proposal;

    fn genesis_two_accounts() -> LedgerState {
        let mut accounts = BTreeMap::new();
        accounts.insert(String::from("alice"), 10);
        accounts.insert(String::from("bob"), 0);
        LedgerState::genesis(accounts, 30_000_000)
    }

    fn transfer(from: &str, to: &str, amount: u64, nonce: u64) -> Transaction {
        Transaction::signed(
            String::from(from),
            nonce,
            TxKind::Transfer {
                to: String::from(to),
                amount,
            },
        )
    }

    #[test]
    fn admission_accepts_fresh_and_rejects_bad_signature() {
        let mut ledger = genesis_two_accounts();
        let tx = transfer("alice", "bob", 5, 0);
        ledger.receive_tx(tx.clone()).unwrap();
        assert_eq!(ledger.mempool_len(), 1);

        let mut forged = transfer("alice", "bob", 5, 1);
        forged.signature.0[3] ^= 0xff;
        assert_eq!(ledger.receive_tx(forged), Err(TxRejected::BadSignature));

        // Same (issuer, nonce) pending twice.
        assert_eq!(ledger.receive_tx(tx), Err(TxRejected::AlreadyPending));
    }

    #[test]
    fn nonce_window_enforced() {
        let mut ledger = genesis_two_accounts();
        let too_far = transfer("alice", "bob", 1, NONCE_WINDOW + 1);
        assert!(matches!(
            ledger.receive_tx(too_far),
            Err(TxRejected::NonceBeyondWindow { .. })
        ));
    }

    fn exec_one(ledger: &mut LedgerState, txs: Vec<Transaction>) -> ExecOutcome {
        let sb = Superblock {
            instance: 1,
            entries: alloc::vec![(
                0,
                Proposal {
                    proposer: String::from("node-0"),
                    txs,
                    timestamp: 7,
                }
            )],
        };
        let mut gov = GovernanceState::disabled();
        ledger.exec_superblock(&sb, &mut gov)
    }

    #[test]
    fn transfer_moves_funds_and_links_blocks() {
        let mut ledger = genesis_two_accounts();
        let parent = ledger.tip_digest();
        let outcome = exec_one(&mut ledger, alloc::vec![transfer("alice", "bob", 5, 0)]);
        assert_eq!(outcome.appended, alloc::vec![1]);
        assert_eq!(ledger.accounts["alice"].balance, 5);
        assert_eq!(ledger.accounts["bob"].balance, 5);
        assert_eq!(ledger.accounts["alice"].next_nonce, 1);
        assert_eq!(ledger.chain[1].header.parent, parent);
        assert_eq!(ledger.chain[1].header.timestamp, 7);
        assert_eq!(ledger.total_balance(), 10);
    }

    #[test]
    fn overspend_skipped_without_receipt() {
        let mut ledger = genesis_two_accounts();
        let outcome = exec_one(&mut ledger, alloc::vec![transfer("alice", "bob", 11, 0)]);
        // One block still appended, empty.
        assert_eq!(outcome.appended.len(), 1);
        assert!(ledger.chain[1].txs.is_empty());
        assert!(ledger.chain[1].receipts.is_empty());
        assert_eq!(ledger.accounts["alice"].balance, 10);
        assert_eq!(ledger.accounts["alice"].next_nonce, 0);
    }

    #[test]
    fn replayed_nonce_rejected_after_commit() {
        let mut ledger = genesis_two_accounts();
        let tx = transfer("alice", "bob", 2, 0);
        exec_one(&mut ledger, alloc::vec![tx.clone()]);
        assert!(matches!(
            ledger.receive_tx(tx),
            Err(TxRejected::StaleNonce { .. })
        ));
    }

    #[test]
    fn duplicate_across_slots_applies_once() {
        let mut ledger = genesis_two_accounts();
        let tx = transfer("alice", "bob", 2, 0);
        let mk = |slot: usize| Proposal {
            proposer: alloc::format!("node-{slot}"),
            txs: alloc::vec![tx.clone()],
            timestamp: 1,
        };
        let sb = Superblock {
            instance: 1,
            entries: alloc::vec![(2, mk(2)), (5, mk(5))],
        };
        let mut gov = GovernanceState::disabled();
        let outcome = ledger.exec_superblock(&sb, &mut gov);
        assert_eq!(outcome.appended.len(), 2);
        assert_eq!(ledger.chain[1].txs.len(), 1);
        assert!(ledger.chain[2].txs.is_empty(), "second copy skipped");
        assert_eq!(ledger.accounts["bob"].balance, 2);
    }

    #[test]
    fn noop_bumps_nonce_only() {
        let mut ledger = genesis_two_accounts();
        let noop = Transaction::signed(String::from("alice"), 0, TxKind::Noop);
        exec_one(&mut ledger, alloc::vec![noop]);
        assert_eq!(ledger.accounts["alice"].balance, 10);
        assert_eq!(ledger.accounts["alice"].next_nonce, 1);
    }

    #[test]
    fn deterministic_digests_across_nodes() {
        let run = || {
            let mut ledger = genesis_two_accounts();
            exec_one(&mut ledger, alloc::vec![transfer("alice", "bob", 5, 0)]);
            ledger.tip_digest()
        };
        assert_eq!(run(), run());
    }
}
