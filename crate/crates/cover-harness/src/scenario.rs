//! Deterministic scenario state: accounts per section, a funded chain of
//! history blocks, transaction generation for each round, and the full
//! simulated strategy round with per-trial metrics.

use crate::config::{
    ByzantineConfig, InvalidClassConfig, MinerStrategyConfig, ScenarioConfig,
};
use cover::cmt::{sample_subtree, CmtContext, SymbolId};
use cover::hash::derive_seed;
use cover::ledger::{
    section_of, transaction_base_symbols, Block, ChainParams, CommittedTxn, Header, HeaderChain,
    InputProof, KeyPair, SpentTxoTable, Transaction, TxInputRef, TxOutput,
};
use cover_sim::byzantine::ByzantineStrategy;
use cover_sim::graph::{generate_graph, interest_subgraph_connected, NetworkGraph};
use cover_sim::miner::{produce_block, BlockBundle, MinerStrategy};
use cover_sim::round::{default_t_stall, run_round, sample_miner_peers, RoundSpec};
use cover_sim::validator::{Decision, RejectReason, ValidatorConfig, ValidatorNode};
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

/// A funded chain: genesis mints per-slot outputs, then `rounds - 1`
/// honest history blocks. Each block keeps one transaction slot per
/// account, sorted by section and sender.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub params: ChainParams,
    pub chain: HeaderChain,
    pub blocks: Vec<Block>,
    ctxs: Vec<Rc<CmtContext>>,
    trees: Vec<cover::cmt::CodedMerkleTree>,
    /// accounts[slot] owns that block position in every round.
    accounts: Vec<KeyPair>,
    /// Which genesis output each slot spends next (funding straight from
    /// genesis keeps embedded proofs shallow).
    next_genesis_output: Vec<u16>,
    /// Input spent in the most recent history round per slot, with its
    /// funding block height: the double-spend materials.
    last_spent: Vec<Option<(TxInputRef, u64)>>,
}

impl Scenario {
    /// Build genesis plus `cfg.rounds - 1` history blocks.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Scenario {
        let params = cfg.chain_params();
        let k = cfg.k;
        let l = cfg.l as usize;
        let slots_per_section = l / k as usize;

        // One account per slot, ordered by sender inside each section so
        // generated blocks are sorted.
        let mut accounts = Vec::with_capacity(l);
        for s in 0..k {
            let mut section_accounts: Vec<KeyPair> = (0..slots_per_section)
                .map(|j| {
                    KeyPair::generate_in_section(
                        params.scheme,
                        k,
                        s,
                        derive_seed(seed, 0xACC),
                        (s as u64) << 32 | j as u64,
                    )
                })
                .collect();
            section_accounts.sort_by_key(|kp| kp.account.0);
            accounts.extend(section_accounts);
        }

        let mut sc = Scenario {
            cfg: cfg.clone(),
            params,
            chain: HeaderChain::new(),
            blocks: Vec::new(),
            ctxs: Vec::new(),
            trees: Vec::new(),
            accounts,
            next_genesis_output: vec![0; l],
            last_spent: vec![None; l],
        };
        sc.push_genesis(seed);
        for r in 1..cfg.rounds {
            let txs = sc.round_txs(r);
            sc.push_block(txs);
        }
        sc
    }

    fn treasury(&self, seed: u64) -> KeyPair {
        KeyPair::generate(self.params.scheme, derive_seed(seed, 0xFEE), 0)
    }

    fn push_genesis(&mut self, seed: u64) {
        let treasury = self.treasury(seed);
        // Slot p's genesis transaction mints one 100-unit output per future
        // round to the slot account.
        let mints: Vec<Transaction> = (0..self.cfg.l as usize)
            .map(|p| {
                let owner = self.accounts[p].account;
                let mut tx = Transaction {
                    sender: treasury.account,
                    signature: vec![],
                    outputs: (0..self.cfg.rounds.max(2) as usize + 2)
                        .map(|_| TxOutput {
                            recipient: owner,
                            amount: 100,
                        })
                        .collect(),
                    inputs: vec![],
                    input_proofs: vec![],
                };
                tx.sign_with(&treasury);
                tx
            })
            .collect();
        self.push_block(mints);
    }

    fn push_block(&mut self, txs: Vec<Transaction>) {
        let height = self.chain.len();
        let base = transaction_base_symbols(&txs, self.params.cmt.symbol_size)
            .expect("scenario transactions fit the symbol size");
        let ctx = if let Some(prev) = self.ctxs.last() {
            prev.clone() // every block has the same length
        } else {
            Rc::new(CmtContext::new(self.params.cmt, txs.len()).unwrap())
        };
        let tree = cover::cmt::build_tree(&ctx, &base).unwrap();
        let header = Header {
            prev_hash: self.chain.tip().map(|h| h.hash()).unwrap_or_default(),
            root: tree.root(),
            len: txs.len() as u64,
            height,
            other: vec![],
        };
        assert!(self.chain.push(header.clone()));
        self.blocks.push(Block { header, txs });
        self.trees.push(tree);
        self.ctxs.push(ctx);
    }

    pub fn committed(&self, height: u64, position: u32) -> CommittedTxn {
        let ctx = &self.ctxs[height as usize];
        CommittedTxn {
            txn: self.blocks[height as usize].txs[position as usize].clone(),
            height,
            proof: self.trees[height as usize]
                .symbol_proof(&ctx.layout, SymbolId::new(ctx.depth(), position)),
        }
    }

    /// Honest transactions for round `r`. With expiry disabled every slot
    /// spends its next genesis output (embedded funding proofs stay one
    /// level deep); with finite tau each slot spends the output it minted
    /// in the previous block, so nothing ever goes stale.
    pub fn round_txs(&mut self, r: u64) -> Vec<Transaction> {
        let l = self.cfg.l as usize;
        let finite_tau = self.params.tau != u64::MAX;
        let mut txs = Vec::with_capacity(l);
        for p in 0..l {
            let key = self.accounts[p].clone();
            let funding = if finite_tau && r > 1 {
                self.committed(r - 1, p as u32)
            } else {
                self.committed(0, p as u32)
            };
            let output_index = if finite_tau {
                0
            } else {
                let idx = self.next_genesis_output[p];
                self.next_genesis_output[p] += 1;
                idx
            };
            let input = TxInputRef {
                txid: funding.txn.txid(),
                output_index,
            };
            let amount = funding.txn.outputs[output_index as usize].amount;
            let mut tx = Transaction {
                sender: key.account,
                signature: vec![],
                outputs: vec![TxOutput {
                    recipient: key.account,
                    amount,
                }],
                inputs: vec![input],
                input_proofs: vec![InputProof {
                    height: funding.height,
                    funding: Box::new(funding.txn),
                    proof: funding.proof,
                }],
            };
            tx.sign_with(&key);
            self.last_spent[p] = Some((input, funding.height));
            txs.push(tx);
        }
        txs
    }

    /// A prepared invalid transaction of the given class, and the slot it
    /// replaces.
    pub fn invalid_replacement(&mut self, class: InvalidClassConfig, seed: u64) -> (u32, Transaction) {
        let l = self.cfg.l as usize;
        let position = (derive_seed(seed, 0xBAD) % l as u64) as u32;
        let p = position as usize;
        let key = self.accounts[p].clone();
        let genesis = self.committed(0, position);

        let honest = |output_index: u16, sc: &Scenario| -> Transaction {
            let mut tx = Transaction {
                sender: key.account,
                signature: vec![],
                outputs: vec![TxOutput {
                    recipient: key.account,
                    amount: 100,
                }],
                inputs: vec![TxInputRef {
                    txid: genesis.txn.txid(),
                    output_index,
                }],
                input_proofs: vec![InputProof {
                    height: 0,
                    funding: Box::new(sc.committed(0, position).txn),
                    proof: sc.committed(0, position).proof,
                }],
            };
            tx.sign_with(&key);
            tx
        };

        let fresh_output = self.next_genesis_output[p];
        match class {
            InvalidClassConfig::BadSig => {
                let mut tx = honest(fresh_output, self);
                tx.signature[0] ^= 0xff;
                (position, tx)
            }
            InvalidClassConfig::BadSum => {
                let mut tx = honest(fresh_output, self);
                tx.outputs[0].amount += 1;
                tx.sign_with(&key); // properly signed over the wrong sums
                (position, tx)
            }
            InvalidClassConfig::BadInputProof => {
                let mut tx = honest(fresh_output, self);
                tx.input_proofs[0].proof.ancestors[0][0] ^= 1;
                (position, tx)
            }
            InvalidClassConfig::DoubleSpend => {
                // Re-spend what this slot spent in the last history round,
                // embedding the true funding transaction.
                let (past, funding_height) =
                    self.last_spent[p].expect("at least one history round");
                let funding = self.committed(funding_height, position);
                debug_assert_eq!(funding.txn.txid(), past.txid);
                let mut tx = Transaction {
                    sender: key.account,
                    signature: vec![],
                    outputs: vec![TxOutput {
                        recipient: key.account,
                        amount: funding.txn.outputs[past.output_index as usize].amount,
                    }],
                    inputs: vec![past],
                    input_proofs: vec![InputProof {
                        height: funding_height,
                        funding: Box::new(funding.txn),
                        proof: funding.proof,
                    }],
                };
                tx.sign_with(&key);
                (position, tx)
            }
            InvalidClassConfig::Expired => {
                // A stale genesis output: valid in shape, but the strategy
                // round sits more than tau blocks past height zero. Output
                // index 1 is reserved for this (finite-tau rounds spend
                // index 0 of their recent funding).
                debug_assert!(self.params.tau != u64::MAX);
                debug_assert!(self.strategy_height() > self.params.tau);
                (position, honest(1, self))
            }
        }
    }

    /// The strategy block's height.
    pub fn strategy_height(&self) -> u64 {
        self.chain.len()
    }

    /// Table of one section's spends over the whole history.
    pub fn section_table(&self, section: u32) -> SpentTxoTable {
        let mut table = SpentTxoTable::new();
        for b in 1..self.chain.len() {
            for p in 0..self.blocks[b as usize].txs.len() as u32 {
                let tx = &self.blocks[b as usize].txs[p as usize];
                if section_of(&tx.sender, self.cfg.k) == section {
                    let c = self.committed(b, p);
                    table.update_state(&c.txn, &c.proof, b).unwrap();
                }
            }
        }
        table
    }

    /// Resolve the configured miner strategy against this scenario.
    pub fn miner_strategy(&mut self, seed: u64) -> Result<MinerStrategy, String> {
        let ctx = self.ctxs[0].clone();
        Ok(match self.cfg.miner_strategy.clone() {
            MinerStrategyConfig::Honest => MinerStrategy::Honest,
            MinerStrategyConfig::HideStoppingSet { layer } => {
                let layer = layer.unwrap_or_else(|| smallest_scannable_layer(&ctx));
                let set = minimum_stopping_set(&ctx, layer, seed)
                    .ok_or("no stopping set found for layer")?;
                MinerStrategy::HideStoppingSet { layer, set }
            }
            MinerStrategyConfig::CodingFraud { layer, check } => {
                let layer = layer.unwrap_or(ctx.depth());
                let checks = ctx.code(layer).check_count() as u32;
                MinerStrategy::CodingFraud {
                    layer,
                    check: check % checks,
                    delta: 0x01,
                }
            }
            MinerStrategyConfig::InvalidTxn { class } => {
                let (position, replacement) = self.invalid_replacement(class, seed);
                MinerStrategy::InvalidTxn {
                    position,
                    replacement: Box::new(replacement),
                }
            }
            MinerStrategyConfig::Unsorted => {
                // Swap across the first section boundary.
                let boundary = (self.cfg.l / self.cfg.k as u64).max(1) as u32;
                MinerStrategy::UnsortedSwap {
                    position: boundary - 1,
                }
            }
            MinerStrategyConfig::WithholdRandom { fraction } => MinerStrategy::WithholdRandom {
                fraction,
                seed: derive_seed(seed, 0x3D),
            },
        })
    }
}

/// The smallest coded layer admitting the exhaustive stopping-set scan.
pub fn smallest_scannable_layer(ctx: &CmtContext) -> u16 {
    for layer in (2..=ctx.depth()).rev() {
        if ctx.layout.total_width(layer) <= 24 {
            return layer;
        }
    }
    2
}

/// A verified minimum stopping set: exhaustive when the layer is small,
/// otherwise the smallest sampled peel-failure witness.
pub fn minimum_stopping_set(ctx: &CmtContext, layer: u16, seed: u64) -> Option<BTreeSet<u32>> {
    let code = ctx.code(layer);
    match code.stopping_sets_exhaustive() {
        Ok(report) => report.minimal.into_iter().next(),
        Err(_) => code.find_stopping_set_sampled(seed, 512, 0.35),
    }
}

// ---------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrialMetrics {
    pub trial: u64,
    /// Every section drawn by at least one honest validator.
    pub coverage: bool,
    /// Every tree symbol desired by at least one honest validator.
    pub tree_coverage: bool,
    /// Every symbol's honest interest subgraph connected, with the miner
    /// adjacent to it.
    pub connectivity: bool,
    pub unanimous_accept: bool,
    pub unanimous_reject: bool,
    pub ticks_to_unanimity: u64,
    /// Per honest validator: (node, height, decision, reason, at_tick).
    pub verdicts: Vec<(usize, u64, &'static str, &'static str, u64)>,
    pub bytes_down: Vec<u64>,
    pub bytes_up: Vec<u64>,
    pub interest_bytes_up: Vec<u64>,
    pub hash_ops: Vec<u64>,
    pub symbols_stored: Vec<usize>,
    pub neighbor_counts: Vec<usize>,
    pub ticks: u64,
}

pub fn decision_strings(d: &Decision) -> (&'static str, &'static str) {
    match d {
        Decision::Accept => ("accept", "valid"),
        Decision::Reject(r) => (
            "reject",
            match r {
                RejectReason::TxFraud(_) => "tx_fraud",
                RejectReason::SortFraud(_) => "sort_fraud",
                RejectReason::CodingFraud(_) => "coding_fraud",
                RejectReason::Unavailable(_) => "unavailable",
                RejectReason::Timeout => "timeout",
            },
        ),
    }
}

/// Run one full trial: scenario history, then the simulated strategy round.
pub fn run_trial(cfg: &ScenarioConfig, trial: u64) -> Result<TrialMetrics, String> {
    let seed = derive_seed(cfg.master_seed, trial);
    let mut scenario = Scenario::new(cfg, derive_seed(seed, 0x5C));
    let strategy = scenario.miner_strategy(derive_seed(seed, 0x57))?;
    run_prepared_trial(cfg, &mut scenario, &strategy, trial)
}

/// Run the strategy round against an already-built scenario.
pub fn run_prepared_trial(
    cfg: &ScenarioConfig,
    scenario: &mut Scenario,
    strategy: &MinerStrategy,
    trial: u64,
) -> Result<TrialMetrics, String> {
    let seed = derive_seed(cfg.master_seed, trial);
    let n = cfg.total_nodes();
    let p = cfg.effective_p();
    let graph = generate_graph(n, p, derive_seed(seed, 0x61), cfg.alpha, derive_seed(seed, 0x62));
    let miner_peers = sample_miner_peers(n, p, derive_seed(seed, 0x63));

    let height = scenario.strategy_height();
    let txs = scenario.round_txs(height);
    let prev = scenario.chain.tip().cloned();
    let bundle = produce_block(strategy, txs, prev.as_ref(), &scenario.params, height)
        .map_err(|e| e.to_string())?;

    let t_stall = default_t_stall(cfg.delta, n + 1);
    let deadline = t_stall * (bundle.ctx.depth() as u64 + 4);
    let validators: Vec<ValidatorNode> = (0..n)
        .map(|i| {
            let vcfg = ValidatorConfig {
                chain_params: scenario.params.clone(),
                c: Some(cfg.effective_c() as usize),
                t_stall,
                node_seed: derive_seed(seed, 0x100 + i as u64),
                section_epoch: None,
                cmt_override: None,
            };
            let mut v = ValidatorNode::new(i, vcfg, scenario.chain.clone(), SpentTxoTable::new());
            v.table = scenario.section_table(v.section);
            v
        })
        .collect();

    // Pre-round analysis: coverage and connectivity conditions.
    let honest_ids: Vec<usize> = (0..n).filter(|&i| graph.honest[i]).collect();
    let byz_map = assign_byzantine(cfg, &graph);
    let active: Vec<usize> = honest_ids
        .iter()
        .copied()
        .filter(|i| !byz_map.contains_key(i))
        .collect();

    let mut sections_covered: BTreeSet<u32> = BTreeSet::new();
    let mut desired_union: BTreeMap<u16, BTreeSet<u32>> = BTreeMap::new();
    let mut interests: Vec<BTreeSet<SymbolId>> = vec![BTreeSet::new(); n];
    for &i in &active {
        let v = &validators[i];
        sections_covered.insert(v.section);
        let sub = sample_subtree(
            &bundle.ctx.layout,
            cfg.effective_c() as usize,
            derive_seed(v.cfg.node_seed, height),
        );
        for id in sub.ids() {
            desired_union.entry(id.layer).or_default().insert(id.index);
            interests[i].insert(id);
        }
        for layer in 2..=bundle.ctx.depth() {
            let code = bundle.ctx.code(layer);
            let desired = sub.desired(layer).clone();
            for &idx in &desired {
                for &check in code.checks_of(idx) {
                    for &m in code.check_members(check) {
                        interests[i].insert(SymbolId::new(layer, m));
                    }
                }
            }
        }
        let lo = v.section as u64 * bundle.header.len / cfg.k as u64;
        let hi = (v.section as u64 + 1) * bundle.header.len / cfg.k as u64;
        let bottom = bundle.ctx.depth();
        for pos in lo.saturating_sub(1)..(hi + 1).min(bundle.header.len) {
            interests[i].insert(SymbolId::new(bottom, pos as u32));
        }
    }
    let coverage = sections_covered.len() == cfg.k as usize;
    let tree_coverage = (1..=bundle.ctx.depth()).all(|layer| {
        desired_union
            .get(&layer)
            .is_some_and(|set| set.len() == bundle.ctx.layout.total_width(layer))
    });
    let connectivity = check_connectivity(&graph, &interests, &miner_peers, &bundle);

    let spec = RoundSpec {
        delta: cfg.delta,
        deadline,
        engine_seed: derive_seed(seed, 0x64),
        record_trace: false,
    };
    let (validators, report) = run_round(&graph, &miner_peers, &bundle, validators, &byz_map, spec);

    let verdicts: Vec<(usize, u64, &'static str, &'static str, u64)> = report
        .verdicts
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().map(|v| (i, v)))
        .map(|(i, v)| {
            let (d, r) = decision_strings(&v.decision);
            (i, v.height, d, r, v.at_tick)
        })
        .collect();

    Ok(TrialMetrics {
        trial,
        coverage,
        tree_coverage,
        connectivity,
        unanimous_accept: report.unanimous_accept(),
        unanimous_reject: report.unanimous_reject(),
        ticks_to_unanimity: report.ticks_to_unanimity(),
        verdicts,
        bytes_down: active.iter().map(|&i| report.counters[i].bytes_in).collect(),
        bytes_up: active.iter().map(|&i| report.counters[i].bytes_out).collect(),
        interest_bytes_up: active
            .iter()
            .map(|&i| report.counters[i].interest_bytes_out)
            .collect(),
        hash_ops: active.iter().map(|&i| validators[i].hash_ops).collect(),
        symbols_stored: active.iter().map(|&i| validators[i].symbols_stored).collect(),
        neighbor_counts: active.iter().map(|&i| graph.neighbors(i).len()).collect(),
        ticks: report.ticks,
    })
}

fn assign_byzantine(cfg: &ScenarioConfig, graph: &NetworkGraph) -> BTreeMap<usize, ByzantineStrategy> {
    let mut out = BTreeMap::new();
    let mut dishonest: Vec<usize> = (0..graph.n).filter(|&i| !graph.honest[i]).collect();
    for b in &cfg.byzantine {
        for _ in 0..b.count() {
            let Some(node) = dishonest.pop() else { break };
            let strategy = match b {
                ByzantineConfig::Silent { .. } => ByzantineStrategy::Silent,
                ByzantineConfig::DropSymbols { .. } => ByzantineStrategy::DropSymbols { layer: None },
                ByzantineConfig::FakeSymbolSpam { per_tick, .. } => {
                    ByzantineStrategy::FakeSymbolSpam { per_tick: *per_tick }
                }
                ByzantineConfig::FakeFraudSpam { per_tick, .. } => {
                    ByzantineStrategy::FakeFraudSpam { per_tick: *per_tick }
                }
            };
            out.insert(node, strategy);
        }
    }
    out
}

/// Connectivity precondition for one trial: every symbol wanted by some
/// honest node has a connected honest interest subgraph, and the miner is
/// adjacent to it (the miner serves symbols only to interested neighbors).
fn check_connectivity(
    graph: &NetworkGraph,
    interests: &[BTreeSet<SymbolId>],
    miner_peers: &[usize],
    bundle: &BlockBundle,
) -> bool {
    let peer_set: BTreeSet<usize> = miner_peers.iter().copied().collect();
    let mut symbols: BTreeSet<SymbolId> = BTreeSet::new();
    for set in interests {
        symbols.extend(set.iter().copied());
    }
    let _ = bundle;
    symbols.iter().all(|&s| {
        if !interest_subgraph_connected(graph, interests, s) {
            return false;
        }
        let wanted_by: Vec<usize> = (0..graph.n)
            .filter(|&i| graph.honest[i] && interests[i].contains(&s))
            .collect();
        wanted_by.is_empty() || wanted_by.iter().any(|i| peer_set.contains(i))
    })
}

/// A full scenario run: `trials` independent trials plus a summary.
pub struct ScenarioReport {
    pub trials: Vec<TrialMetrics>,
    pub strategy_label: &'static str,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, String> {
    cfg.validate().map_err(|e| e.join("; "))?;
    let mut trials = Vec::with_capacity(cfg.trials as usize);
    let mut label = "honest";
    for t in 0..cfg.trials {
        let seed = derive_seed(cfg.master_seed, t);
        let mut scenario = Scenario::new(cfg, derive_seed(seed, 0x5C));
        let strategy = scenario.miner_strategy(derive_seed(seed, 0x57))?;
        label = strategy.label();
        trials.push(run_prepared_trial(cfg, &mut scenario, &strategy, t)?);
    }
    Ok(ScenarioReport {
        trials,
        strategy_label: label,
    })
}
