//! The per-validator state machine: on a new header it draws a section and
//! a sampled subtree, registers interests, decodes its subtree layer by
//! layer (broadcasting every symbol it recovers), validates its section's
//! transactions, and settles on a verdict.

use crate::engine::{Ctx, NodeBehavior};
use crate::message::{Envelope, Payload};
use cover::cmt::{
    build_proof, sample_subtree, verify_coding_fraud_proof, CmtContext, CodingFraudProof,
    SampledSubtree, SymbolId, SymbolProof,
};
use cover::hash::{derive_seed, symbol_hash, Digest};
use cover::ledger::{
    check_sorted, is_valid_fraud_proof, is_valid_txn, section_of, verify_sorting_fraud_proof,
    ChainParams, CommittedTxn, FraudProof, Header, HeaderChain, InvalidClass, SortingFraudProof,
    SpentEntry, SpentTxoTable, Transaction, TxValidity,
};
use cover::ldpc::xor_into;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

#[derive(Debug, Clone)]
pub struct ValidatorConfig {
    pub chain_params: ChainParams,
    /// Bottom-layer sample count; None derives c = len / k.
    pub c: Option<usize>,
    /// No-progress window before a layer is declared stalled.
    pub t_stall: u64,
    /// Seed driving this node's section and subtree draws.
    pub node_seed: u64,
    /// Redraw the section every this many blocks; None keeps it fixed.
    pub section_epoch: Option<u64>,
    /// Scripted scenarios with hand-crafted layer codes supply the exact
    /// tree context here; normally it is derived from the chain params.
    pub cmt_override: Option<Rc<CmtContext>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    TxFraud(Box<FraudProof>),
    SortFraud(Box<SortingFraudProof>),
    CodingFraud(Box<CodingFraudProof>),
    Unavailable(u16),
    Timeout,
}

impl RejectReason {
    pub fn label(&self) -> &'static str {
        match self {
            RejectReason::TxFraud(_) => "tx_fraud",
            RejectReason::SortFraud(_) => "sort_fraud",
            RejectReason::CodingFraud(_) => "coding_fraud",
            RejectReason::Unavailable(_) => "unavailable",
            RejectReason::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub height: u64,
    pub decision: Decision,
    pub at_tick: u64,
}

#[derive(Debug, Clone)]
struct StoredSymbol {
    bytes: Vec<u8>,
    proof: Option<SymbolProof>,
}

struct RoundState {
    header: Header,
    ctx: Rc<CmtContext>,
    subtree: SampledSubtree,
    interests: BTreeSet<SymbolId>,
    /// known[layer-1]: every symbol currently held at that layer.
    known: Vec<BTreeMap<u32, StoredSymbol>>,
    /// Parity equations attached to at least one desired symbol, per layer.
    needed_parities: Vec<BTreeSet<u32>>,
    /// Committed hashes of desired positions, populated as layers complete.
    hashes: Vec<BTreeMap<u32, Digest>>,
    current_layer: u16,
    decode_done: bool,
    last_progress: u64,
    /// Own section's position range and the one-position overlap used for
    /// the sorting window.
    own_range: (u32, u32),
    window_range: (u32, u32),
    section_txs: BTreeMap<u32, (Transaction, SymbolProof)>,
    section_checked: bool,
    neighbor_interests: BTreeMap<usize, BTreeSet<SymbolId>>,
    sent_symbols: BTreeSet<(usize, SymbolId)>,
    seen_gossip: BTreeSet<Digest>,
    verdict: Option<Verdict>,
}

pub struct ValidatorNode {
    pub id: usize,
    pub cfg: ValidatorConfig,
    pub chain: HeaderChain,
    pub table: SpentTxoTable,
    pub section: u32,
    /// Heights below this bound are warm-up for a freshly joined section:
    /// record spends, do not judge double spends.
    warmup_until: u64,
    round: Option<RoundState>,
    /// Fraud proofs received before the header; verified once it arrives.
    pending_fraud: Vec<Rc<Envelope>>,
    pub verdicts: Vec<Verdict>,
    pub hash_ops: u64,
    pub symbols_stored: usize,
    /// Unresolved desired positions at finalize, for diagnostics.
    pub last_missing: Vec<SymbolId>,
    /// Interest set size registered for the most recent round.
    pub last_interest_count: usize,
}

impl ValidatorNode {
    pub fn new(id: usize, cfg: ValidatorConfig, chain: HeaderChain, table: SpentTxoTable) -> Self {
        let k = cfg.chain_params.k;
        let node_seed = cfg.node_seed;
        let epoch_len = cfg.section_epoch;
        let height = chain.len();
        let mut v = ValidatorNode {
            id,
            cfg,
            chain,
            table,
            section: 0,
            warmup_until: 0,
            round: None,
            pending_fraud: Vec::new(),
            verdicts: Vec::new(),
            hash_ops: 0,
            symbols_stored: 0,
            last_missing: Vec::new(),
            last_interest_count: 0,
        };
        v.section = v.draw_section(k, node_seed, epoch_len, height);
        v
    }

    fn draw_section(&self, k: u32, node_seed: u64, epoch: Option<u64>, height: u64) -> u32 {
        let epoch_index = epoch.map(|e| height / e.max(1)).unwrap_or(0);
        (derive_seed(node_seed, 0x5EC0 + epoch_index) % k as u64) as u32
    }

    /// Assign a section directly; the caller vouches that `table` history
    /// matches (used when wiring up scripted scenarios).
    pub fn with_section(mut self, section: u32) -> Self {
        self.section = section;
        self
    }

    /// Join a new section at `start_height`: the table restarts and double
    /// spends are not judged until tau blocks of history have been recorded.
    pub fn switch_section(&mut self, new_section: u32, start_height: u64) {
        self.section = new_section;
        self.table = SpentTxoTable::new();
        let tau = self.cfg.chain_params.tau;
        self.warmup_until = if tau == u64::MAX {
            u64::MAX
        } else {
            start_height + tau
        };
    }

    pub fn current_verdict(&self) -> Option<&Verdict> {
        self.round.as_ref().and_then(|r| r.verdict.as_ref())
    }

    pub fn last_verdict(&self) -> Option<&Verdict> {
        self.verdicts.last()
    }

    /// Interest set registered for the current round.
    pub fn interests(&self) -> Option<&BTreeSet<SymbolId>> {
        self.round.as_ref().map(|r| &r.interests)
    }

    fn set_verdict(&mut self, decision: Decision, now: u64) {
        let Some(rs) = self.round.as_mut() else { return };
        if rs.verdict.is_some() {
            return; // immutable once set
        }
        rs.verdict = Some(Verdict {
            height: rs.header.height,
            decision,
            at_tick: now,
        });
    }

    // ---- header handling ---------------------------------------------

    fn start_round(&mut self, ctx: &mut Ctx, header: &Header, env: &Rc<Envelope>) {
        let k = self.cfg.chain_params.k;
        let cmt_params = self.cfg.chain_params.cmt;
        let height = header.height;
        if let Some(epoch) = self.cfg.section_epoch {
            if height.is_multiple_of(epoch.max(1)) {
                let new = self.draw_section(k, self.cfg.node_seed, Some(epoch), height);
                if new != self.section {
                    self.switch_section(new, height);
                }
            }
        }

        let len = header.len.max(1) as usize;
        let cmt_ctx = match &self.cfg.cmt_override {
            Some(ctx) => ctx.clone(),
            None => match CmtContext::new(cmt_params, len) {
                Ok(c) => Rc::new(c),
                Err(_) => return,
            },
        };
        let c = self.cfg.c.unwrap_or_else(|| (len / k as usize).max(1));
        let subtree = sample_subtree(&cmt_ctx.layout, c, derive_seed(self.cfg.node_seed, height));

        let depth = cmt_ctx.depth() as usize;
        let mut interests: BTreeSet<SymbolId> = subtree.ids().collect();
        let mut needed_parities = vec![BTreeSet::new(); depth];
        for layer in 2..=cmt_ctx.depth() {
            let code = cmt_ctx.code(layer);
            let mut parities = BTreeSet::new();
            for &idx in subtree.desired(layer) {
                for &check in code.checks_of(idx) {
                    parities.insert(check);
                }
            }
            for &check in &parities {
                for &member in code.check_members(check) {
                    interests.insert(SymbolId::new(layer, member));
                }
            }
            needed_parities[layer as usize - 1] = parities;
        }

        // Section transactions, with one position of overlap on each side
        // so cross-boundary sorting inversions are visible.
        let len32 = header.len as u32;
        let lo = (self.section as u64 * header.len / k as u64) as u32;
        let hi = ((self.section as u64 + 1) * header.len / k as u64) as u32;
        let window = (lo.saturating_sub(1), (hi + 1).min(len32));
        let bottom = cmt_ctx.depth();
        for pos in window.0..window.1 {
            interests.insert(SymbolId::new(bottom, pos));
        }

        let rs = RoundState {
            header: header.clone(),
            ctx: cmt_ctx,
            subtree,
            interests,
            known: vec![BTreeMap::new(); depth],
            needed_parities,
            hashes: vec![BTreeMap::new(); depth],
            current_layer: 1,
            decode_done: false,
            last_progress: ctx.now,
            own_range: (lo, hi.min(len32)),
            window_range: window,
            section_txs: BTreeMap::new(),
            section_checked: false,
            neighbor_interests: BTreeMap::new(),
            sent_symbols: BTreeSet::new(),
            seen_gossip: BTreeSet::new(),
            verdict: None,
        };
        self.last_interest_count = rs.interests.len();
        self.round = Some(rs);

        // Gossip the header on, register interests with every neighbor.
        ctx.broadcast(env);
        let rs = self.round.as_ref().unwrap();
        let interests = Envelope::new(Payload::Interests {
            node: self.id,
            symbols: rs.interests.clone(),
        });
        ctx.broadcast(&interests);

        let pending = std::mem::take(&mut self.pending_fraud);
        for env in pending {
            self.handle_fraud(ctx, &env);
        }
    }

    // ---- symbol ingestion ---------------------------------------------

    fn handle_symbol(&mut self, ctx: &mut Ctx, env: &Rc<Envelope>) {
        let Payload::Symbol { id, bytes, proof } = &env.payload else {
            return;
        };
        let Some(rs) = self.round.as_mut() else { return };
        if rs.verdict.is_some() {
            return;
        }
        let id = *id;
        if !rs.interests.contains(&id) {
            return;
        }
        if rs.known[id.layer as usize - 1].contains_key(&id.index) {
            return;
        }
        let layout = rs.ctx.layout.clone();
        self.hash_ops += proof.ancestors.len() as u64 + 2;
        if proof.id != id || !proof.verify(&rs.header.root, &layout, bytes) {
            return;
        }

        // Store, harvest the root-bound ancestors, relay to interested
        // neighbors. Each harvested ancestor keeps the suffix of the proof
        // chain so it can later prove itself (fraud proofs may cite it).
        Self::store_symbol(rs, id, bytes.clone(), Some(proof.clone()));
        let mut cur = id;
        for (i, parent_bytes) in proof.ancestors.iter().enumerate() {
            let (parent, _) = layout.parent_slot(cur);
            let suffix = SymbolProof {
                id: parent,
                ancestors: proof.ancestors[i + 1..].to_vec(),
                top_others: proof.top_others.clone(),
            };
            Self::store_symbol(rs, parent, parent_bytes.clone(), Some(suffix));
            cur = parent;
        }
        // cur is now the proof's top-layer ancestor (the symbol itself for
        // layer-1 receipts); together with top_others it completes the top.
        let anchor = proof.ancestors.last().cloned().unwrap_or_else(|| bytes.clone());
        for (index, top_bytes) in &proof.top_others {
            let mut others: Vec<(u32, Vec<u8>)> = proof
                .top_others
                .iter()
                .filter(|(j, _)| j != index)
                .cloned()
                .collect();
            others.push((cur.index, anchor.clone()));
            others.sort_by_key(|(j, _)| *j);
            let top_proof = SymbolProof {
                id: SymbolId::new(1, *index),
                ancestors: vec![],
                top_others: others,
            };
            Self::store_symbol(rs, SymbolId::new(1, *index), top_bytes.clone(), Some(top_proof));
        }
        rs.last_progress = ctx.now;
        self.relay_symbol(ctx, id, env.clone());
        self.progress(ctx);
    }

    fn store_symbol(rs: &mut RoundState, id: SymbolId, bytes: Vec<u8>, proof: Option<SymbolProof>) {
        let layer_map = &mut rs.known[id.layer as usize - 1];
        layer_map.entry(id.index).or_insert(StoredSymbol { bytes, proof });
        // Bottom symbols inside the section window double as transactions.
        if id.layer == rs.ctx.depth() {
            Self::note_section_position(rs, id.index);
        }
    }

    fn note_section_position(rs: &mut RoundState, pos: u32) {
        let (lo, hi) = rs.window_range;
        if pos < lo || pos >= hi || rs.section_txs.contains_key(&pos) {
            return;
        }
        let bottom = rs.ctx.depth();
        let Some(stored) = rs.known[bottom as usize - 1].get(&pos) else {
            return;
        };
        let Ok(tx) = Transaction::from_padded_symbol(&stored.bytes) else {
            // Committed bytes that do not parse as a transaction cannot be
            // judged by the transaction rules; the round times out instead.
            return;
        };
        let proof = match &stored.proof {
            Some(p) => p.clone(),
            None => {
                let layout = &rs.ctx.layout;
                let known = &rs.known;
                match build_proof(layout, SymbolId::new(bottom, pos), |pid| {
                    known[pid.layer as usize - 1].get(&pid.index).map(|s| s.bytes.clone())
                }) {
                    Some(p) => p,
                    None => return, // ancestors incomplete; retried on layer completion
                }
            }
        };
        rs.section_txs.insert(pos, (tx, proof));
    }

    fn relay_symbol(&mut self, ctx: &mut Ctx, id: SymbolId, env: Rc<Envelope>) {
        let Some(rs) = self.round.as_mut() else { return };
        let targets: Vec<usize> = rs
            .neighbor_interests
            .iter()
            .filter(|(to, wants)| wants.contains(&id) && !rs.sent_symbols.contains(&(**to, id)))
            .map(|(to, _)| *to)
            .collect();
        for to in targets {
            rs.sent_symbols.insert((to, id));
            ctx.send(to, env.clone());
        }
    }

    fn offer_held_to(&mut self, ctx: &mut Ctx, neighbor: usize) {
        let Some(rs) = self.round.as_mut() else { return };
        let Some(wants) = rs.neighbor_interests.get(&neighbor) else {
            return;
        };
        let mut to_send: Vec<(SymbolId, Rc<Envelope>)> = Vec::new();
        for (layer_idx, layer_map) in rs.known.iter().enumerate() {
            let layer = layer_idx as u16 + 1;
            for (&index, stored) in layer_map {
                let id = SymbolId::new(layer, index);
                if !wants.contains(&id) || rs.sent_symbols.contains(&(neighbor, id)) {
                    continue;
                }
                let proof = match &stored.proof {
                    Some(p) => p.clone(),
                    None => {
                        let known = &rs.known;
                        match build_proof(&rs.ctx.layout, id, |pid| {
                            known[pid.layer as usize - 1].get(&pid.index).map(|s| s.bytes.clone())
                        }) {
                            Some(p) => p,
                            None => continue,
                        }
                    }
                };
                to_send.push((
                    id,
                    Envelope::new(Payload::Symbol {
                        id,
                        bytes: stored.bytes.clone(),
                        proof,
                    }),
                ));
            }
        }
        for (id, env) in to_send {
            rs.sent_symbols.insert((neighbor, id));
            ctx.send(neighbor, env);
        }
    }

    // ---- decoding -------------------------------------------------------

    fn layer_complete(rs: &RoundState, layer: u16) -> bool {
        let desired = rs.subtree.desired(layer);
        let known = &rs.known[layer as usize - 1];
        desired.iter().all(|i| known.contains_key(i))
    }

    fn populate_hashes(&mut self, layer: u16) {
        let rs = self.round.as_mut().unwrap();
        if !rs.hashes[layer as usize - 1].is_empty() {
            return;
        }
        let layout = rs.ctx.layout.clone();
        let mut entries = Vec::new();
        for &idx in rs.subtree.desired(layer) {
            let id = SymbolId::new(layer, idx);
            let (parent, slot) = layout.parent_slot(id);
            if let Some(parent_sym) = rs.known[parent.layer as usize - 1].get(&parent.index) {
                let d = Digest::from_slice(&parent_sym.bytes[slot * 32..(slot + 1) * 32]).unwrap();
                entries.push((idx, d));
            }
        }
        rs.hashes[layer as usize - 1].extend(entries);
    }

    /// Peel degree-one needed parities whose single unknown is a desired
    /// symbol; hash-check each recovery; broadcast what it decodes.
    /// Returns decoded symbol envelopes to relay.
    fn peel_layer(&mut self, ctx: &mut Ctx, layer: u16) {
        loop {
            let Some(rs) = self.round.as_mut() else { return };
            if rs.verdict.is_some() {
                return;
            }
            let code = rs.ctx.code(layer);
            let desired = rs.subtree.desired(layer);
            let known = &rs.known[layer as usize - 1];
            let mut action: Option<(u32, u32)> = None; // (check, target)
            for &check in &rs.needed_parities[layer as usize - 1] {
                let members = code.check_members(check);
                let mut unknown = members.iter().filter(|s| !known.contains_key(s));
                match (unknown.next(), unknown.next()) {
                    (Some(&target), None) if desired.contains(&target) => {
                        action = Some((check, target));
                        break;
                    }
                    _ => {}
                }
            }
            let Some((check, target)) = action else { return };
            self.recover_symbol(ctx, layer, check, target);
        }
    }

    fn recover_symbol(&mut self, ctx: &mut Ctx, layer: u16, check: u32, target: u32) {
        let rs = self.round.as_mut().unwrap();
        let code = rs.ctx.code(layer);
        let width = rs.ctx.layout.symbol_size(layer, rs.ctx.params.symbol_size);
        let known = &rs.known[layer as usize - 1];
        let mut acc = vec![0u8; width];
        for &s in code.check_members(check) {
            if s != target {
                xor_into(&mut acc, &known[&s].bytes);
            }
        }
        self.hash_ops += 1;
        let committed = rs.hashes[layer as usize - 1][&target];
        if symbol_hash(&acc) != committed {
            let proof = self.build_coding_fraud(layer, check, target, acc, committed);
            self.emit_coding_fraud(ctx, proof);
            return;
        }
        let rs = self.round.as_mut().unwrap();
        Self::store_symbol(rs, SymbolId::new(layer, target), acc.clone(), None);
        rs.last_progress = ctx.now;

        // Broadcast the recovery with a constructed membership proof.
        let id = SymbolId::new(layer, target);
        let known = &rs.known;
        let proof = build_proof(&rs.ctx.layout, id, |pid| {
            known[pid.layer as usize - 1].get(&pid.index).map(|s| s.bytes.clone())
        })
        .expect("upper subtree layers decoded before this layer");
        let env = Envelope::new(Payload::Symbol {
            id,
            bytes: acc,
            proof,
        });
        self.relay_symbol(ctx, id, env);
    }

    fn build_coding_fraud(
        &mut self,
        layer: u16,
        check: u32,
        target: u32,
        decoded: Vec<u8>,
        committed: Digest,
    ) -> CodingFraudProof {
        let rs = self.round.as_ref().unwrap();
        let layout = &rs.ctx.layout;
        let known = &rs.known;
        let get = |pid: SymbolId| known[pid.layer as usize - 1].get(&pid.index).map(|s| s.bytes.clone());
        let hash_proof =
            build_proof(layout, SymbolId::new(layer, target), get).expect("ancestors decoded");
        let members: Vec<u32> = rs
            .ctx
            .code(layer)
            .check_members(check)
            .iter()
            .copied()
            .filter(|&s| s != target)
            .collect();
        let mut known_syms = Vec::with_capacity(members.len());
        for s in members {
            let stored = &rs.known[layer as usize - 1][&s];
            let proof = match &stored.proof {
                Some(p) => p.clone(),
                None => build_proof(layout, SymbolId::new(layer, s), get)
                    .expect("peeled symbols have decoded ancestors"),
            };
            known_syms.push((stored.bytes.clone(), proof));
        }
        self.hash_ops += known_syms.len() as u64 + 1;
        CodingFraudProof {
            decoded,
            committed,
            hash_proof,
            known: known_syms,
            check,
            layer,
        }
    }

    fn emit_coding_fraud(&mut self, ctx: &mut Ctx, proof: CodingFraudProof) {
        let env = Envelope::new(Payload::CodingFraud(proof.clone()));
        if let Some(rs) = self.round.as_mut() {
            rs.seen_gossip.insert(env.key);
        }
        ctx.broadcast(&env);
        self.set_verdict(Decision::Reject(RejectReason::CodingFraud(Box::new(proof))), ctx.now);
    }

    /// After a layer fully decodes, audit every needed parity that is fully
    /// known; a violated one yields a coding fraud proof.
    fn end_layer_checks(&mut self, ctx: &mut Ctx, layer: u16) -> bool {
        let rs = self.round.as_ref().unwrap();
        let code = rs.ctx.code(layer);
        let width = rs.ctx.layout.symbol_size(layer, rs.ctx.params.symbol_size);
        let mut violated: Option<(u32, u32, Vec<u8>)> = None;
        for &check in &rs.needed_parities[layer as usize - 1] {
            let members = code.check_members(check);
            let known = &rs.known[layer as usize - 1];
            if !members.iter().all(|s| known.contains_key(s)) {
                continue;
            }
            let mut acc = vec![0u8; width];
            for &s in members {
                xor_into(&mut acc, &known[&s].bytes);
            }
            self.hash_ops += 1;
            if acc.iter().any(|&b| b != 0) {
                let rs = self.round.as_ref().unwrap();
                let desired = rs.subtree.desired(layer);
                let target = *members
                    .iter()
                    .find(|s| desired.contains(s))
                    .expect("needed parities touch a desired symbol");
                let mut decoded = vec![0u8; width];
                let known = &rs.known[layer as usize - 1];
                for &s in members {
                    if s != target {
                        xor_into(&mut decoded, &known[&s].bytes);
                    }
                }
                violated = Some((check, target, decoded));
                break;
            }
        }
        if let Some((check, target, decoded)) = violated {
            let committed = self.round.as_ref().unwrap().hashes[layer as usize - 1][&target];
            let proof = self.build_coding_fraud(layer, check, target, decoded, committed);
            self.emit_coding_fraud(ctx, proof);
            return false;
        }
        true
    }

    /// Decoded layers keep only their desired data symbols (plus section
    /// transactions at the bottom); coded symbols are dropped.
    fn discard_after_complete(&mut self, layer: u16) {
        let rs = self.round.as_mut().unwrap();
        let layout = rs.ctx.layout.clone();
        let desired = rs.subtree.desired(layer).clone();
        let (wlo, whi) = rs.window_range;
        let bottom = layout.bottom();
        let keep = |idx: u32| {
            let id = SymbolId::new(layer, idx);
            let keep_data = layout.is_data(id) && desired.contains(&idx);
            let keep_section = layer == bottom && idx >= wlo && idx < whi;
            keep_data || keep_section
        };
        rs.known[layer as usize - 1].retain(|&idx, _| keep(idx));
        // Stop accepting (and re-storing) what was dropped.
        rs.interests
            .retain(|id| id.layer != layer || keep(id.index));
    }

    fn progress(&mut self, ctx: &mut Ctx) {
        loop {
            let Some(rs) = self.round.as_ref() else { return };
            if rs.verdict.is_some() {
                return;
            }
            let layer = rs.current_layer;
            let depth = rs.ctx.depth();
            if layer > depth {
                break;
            }
            if layer >= 2 {
                // Reaching this layer means the one above completed, so the
                // committed hashes of every desired position are on hand.
                self.populate_hashes(layer);
                self.peel_layer(ctx, layer);
                let Some(rs) = self.round.as_ref() else { return };
                if rs.verdict.is_some() {
                    return;
                }
            }
            let rs = self.round.as_ref().unwrap();
            if !Self::layer_complete(rs, layer) {
                return;
            }
            if layer >= 2 && !self.end_layer_checks(ctx, layer) {
                return;
            }
            self.discard_after_complete(layer);
            let rs = self.round.as_mut().unwrap();
            rs.current_layer += 1;
            rs.last_progress = ctx.now;
            if rs.current_layer > depth {
                rs.decode_done = true;
                // Bottom proofs may have become constructible for peeled
                // section positions.
                let (lo, hi) = rs.window_range;
                for pos in lo..hi {
                    Self::note_section_position(rs, pos);
                }
            }
        }
        self.try_validate_section(ctx);
    }

    // ---- section validation ----------------------------------------------

    fn try_validate_section(&mut self, ctx: &mut Ctx) {
        let Some(rs) = self.round.as_ref() else { return };
        if rs.section_checked || rs.verdict.is_some() {
            return;
        }
        let (lo, hi) = rs.window_range;
        if (lo..hi).any(|p| !rs.section_txs.contains_key(&p)) {
            return;
        }
        let header = rs.header.clone();
        let k = self.cfg.chain_params.k;

        // Sorting over the visible window.
        let window: Vec<(u32, &Transaction)> = rs
            .section_txs
            .range(lo..hi)
            .map(|(p, (tx, _))| (*p, tx))
            .collect();
        if let Err((i, j)) = check_sorted(&window, k) {
            let make = |idx: usize| {
                let (pos, _) = window[idx];
                let (tx, proof) = &rs.section_txs[&pos];
                CommittedTxn {
                    txn: tx.clone(),
                    height: header.height,
                    proof: proof.clone(),
                }
            };
            let proof = SortingFraudProof {
                first: make(i),
                second: make(j),
            };
            self.hash_ops += 4;
            let env = Envelope::new(Payload::SortFraud(proof.clone()));
            ctx.broadcast(&env);
            self.set_verdict(Decision::Reject(RejectReason::SortFraud(Box::new(proof))), ctx.now);
            return;
        }

        // Validate own-section transactions in block order; first failure
        // produces the fraud proof.
        let own = rs.own_range;
        let height = header.height;
        let entries: Vec<(u32, Transaction, SymbolProof)> = rs
            .section_txs
            .range(own.0..own.1)
            .map(|(p, (tx, proof))| (*p, tx.clone(), proof.clone()))
            .collect();
        let judge_doubles = height >= self.warmup_until || self.warmup_until == 0;
        let mut pending: BTreeMap<(Digest, u16), (u32, Transaction, SymbolProof)> = BTreeMap::new();
        for (pos, tx, proof) in entries {
            if section_of(&tx.sender, k) != self.section {
                continue; // foreign sender in a misaligned block
            }
            self.hash_ops += 2 + 3 * tx.inputs.len() as u64;
            let verdict = if judge_doubles {
                is_valid_txn(&tx, height, &self.chain, &self.table, &self.cfg.chain_params)
            } else {
                cover::ledger::validate_txn_stateless(&tx, height, &self.chain, &self.cfg.chain_params)
            };
            let verdict = match verdict {
                Ok(v) => v,
                Err(_) => return, // chain too short to judge; leave pending
            };
            // Within-block double spends: check this block's earlier spends.
            let verdict = if verdict.is_valid() && judge_doubles {
                tx.inputs
                    .iter()
                    .find_map(|i| pending.get(&(i.txid, i.output_index)))
                    .map(|(ppos, ptx, pproof)| {
                        debug_assert!(*ppos < pos);
                        TxValidity::Invalid {
                            class: InvalidClass::DoubleSpend,
                            past: Some(SpentEntry {
                                spender: ptx.clone(),
                                proof: pproof.clone(),
                                height,
                            }),
                        }
                    })
                    .unwrap_or(TxValidity::Valid)
            } else {
                verdict
            };
            match verdict {
                TxValidity::Valid => {
                    for input in &tx.inputs {
                        pending.insert((input.txid, input.output_index), (pos, tx.clone(), proof.clone()));
                    }
                }
                TxValidity::Invalid { past, .. } => {
                    let fp = FraudProof {
                        invalid: CommittedTxn {
                            txn: tx,
                            height,
                            proof,
                        },
                        past: past.map(|e| CommittedTxn {
                            txn: e.spender,
                            height: e.height,
                            proof: e.proof,
                        }),
                    };
                    let env = Envelope::new(Payload::TxFraud(fp.clone()));
                    ctx.broadcast(&env);
                    self.set_verdict(Decision::Reject(RejectReason::TxFraud(Box::new(fp))), ctx.now);
                    return;
                }
            }
        }
        let rs = self.round.as_mut().unwrap();
        rs.section_checked = true;
        rs.last_progress = ctx.now;
    }

    // ---- fraud proofs received over gossip --------------------------------

    fn handle_fraud(&mut self, ctx: &mut Ctx, env: &Rc<Envelope>) {
        let Some(rs) = self.round.as_mut() else {
            self.pending_fraud.push(env.clone());
            return;
        };
        if rs.seen_gossip.contains(&env.key) {
            return;
        }
        rs.seen_gossip.insert(env.key);
        let params = &self.cfg.chain_params;
        let valid = match &env.payload {
            Payload::TxFraud(fp) => {
                self.hash_ops += 8;
                // The chain including the disputed block itself: fraud can
                // reference the header under judgment.
                let mut chain = self.chain.clone();
                chain.push(rs.header.clone());
                is_valid_fraud_proof(fp, &chain, params)
            }
            Payload::SortFraud(sp) => {
                self.hash_ops += 4;
                let mut chain = self.chain.clone();
                chain.push(rs.header.clone());
                verify_sorting_fraud_proof(sp, &chain, params)
            }
            Payload::CodingFraud(cp) => {
                self.hash_ops += cp.known.len() as u64 + 2;
                verify_coding_fraud_proof(&rs.ctx, &rs.header.root, cp)
            }
            _ => false,
        };
        if !valid {
            return;
        }
        ctx.broadcast(env);
        let reason = match &env.payload {
            Payload::TxFraud(fp) => RejectReason::TxFraud(Box::new(fp.clone())),
            Payload::SortFraud(sp) => RejectReason::SortFraud(Box::new(sp.clone())),
            Payload::CodingFraud(cp) => RejectReason::CodingFraud(Box::new(cp.clone())),
            _ => unreachable!(),
        };
        self.set_verdict(Decision::Reject(reason), ctx.now);
    }

    // ---- finalization ------------------------------------------------------

    /// Settle the round: any verified fraud or stall already rejected;
    /// otherwise accept iff the subtree decoded and the section validated.
    pub fn finalize(&mut self, now: u64) {
        let Some(rs) = self.round.as_ref() else { return };
        if rs.verdict.is_none() {
            let decision = if rs.decode_done && rs.section_checked {
                Decision::Accept
            } else if !rs.decode_done {
                // The subtree never finished: whatever prevented the current
                // layer from decoding was unavailable.
                Decision::Reject(RejectReason::Unavailable(rs.current_layer.min(rs.ctx.depth())))
            } else {
                Decision::Reject(RejectReason::Timeout)
            };
            self.set_verdict(decision, now);
        }
        let rs = self.round.as_mut().unwrap();
        self.symbols_stored = rs.known.iter().map(|m| m.len()).sum();
        self.last_missing = if rs.decode_done {
            Vec::new()
        } else {
            (1..=rs.ctx.depth())
            .flat_map(|l| {
                let known = &rs.known[l as usize - 1];
                rs.subtree
                    .desired(l)
                    .iter()
                    .filter(|i| !known.contains_key(i))
                    .map(move |&i| SymbolId::new(l, i))
                    .collect::<Vec<_>>()
            })
            .collect()
        };
        let verdict = rs.verdict.clone().unwrap();
        let accept = matches!(verdict.decision, Decision::Accept);
        if accept {
            let header = rs.header.clone();
            let own = rs.own_range;
            let height = header.height;
            let entries: Vec<(Transaction, SymbolProof)> = rs
                .section_txs
                .range(own.0..own.1)
                .map(|(_, (tx, proof))| (tx.clone(), proof.clone()))
                .collect();
            self.chain.push(header);
            let k = self.cfg.chain_params.k;
            for (tx, proof) in entries {
                if section_of(&tx.sender, k) == self.section {
                    let _ = self.table.update_state(&tx, &proof, height);
                }
            }
            let tau = self.cfg.chain_params.tau;
            self.table.prune_expired(height, tau);
        }
        self.verdicts.push(verdict);
        self.round = None;
    }
}

impl NodeBehavior for ValidatorNode {
    fn on_start(&mut self, _ctx: &mut Ctx) {}

    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>) {
        match &msg.payload {
            Payload::Header(header) => {
                if self.round.is_some() {
                    return; // gossip duplicate
                }
                let extends = header.height == self.chain.len()
                    && self
                        .chain
                        .tip()
                        .map(|t| t.hash() == header.prev_hash)
                        .unwrap_or(header.prev_hash == Digest::default());
                if extends {
                    self.start_round(ctx, &header.clone(), msg);
                }
            }
            Payload::Interests { symbols, .. } => {
                if let Some(rs) = self.round.as_mut() {
                    rs.neighbor_interests.insert(from, symbols.clone());
                    self.offer_held_to(ctx, from);
                }
            }
            Payload::Symbol { .. } => self.handle_symbol(ctx, msg),
            Payload::TxFraud(_) | Payload::SortFraud(_) | Payload::CodingFraud(_) => {
                self.handle_fraud(ctx, msg)
            }
        }
    }

    fn on_tick_end(&mut self, ctx: &mut Ctx) {
        let Some(rs) = self.round.as_ref() else { return };
        if rs.verdict.is_some() {
            return;
        }
        let stalled = ctx.now.saturating_sub(rs.last_progress) > self.cfg.t_stall;
        if stalled && !(rs.decode_done && rs.section_checked) {
            let layer = rs.current_layer.min(rs.ctx.depth());
            self.set_verdict(Decision::Reject(RejectReason::Unavailable(layer)), ctx.now);
        }
    }

    fn on_finish(&mut self, now: u64) {
        self.finalize(now);
    }
}
