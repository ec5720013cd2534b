//! Hand-crafted instances used across the test suites and the simulator:
//! a six-symbol toy code, a three-layer tree with a single mis-encoded
//! parity, and a small double-spend chain. These are executable versions of
//! worked examples; the tests pin their exact shapes.

use crate::cmt::{self, build_tree, CmtContext, CmtParams, CodedMerkleTree, SymbolId};
use crate::ldpc::LdpcCode;
use crate::ledger::{
    transaction_base_symbols, AccountId, Block, ChainParams, CommittedTxn, FraudProof, Header,
    HeaderChain, InputProof, KeyPair, SigScheme, SpentTxoTable, Transaction, TxInputRef, TxOutput,
};
use std::collections::BTreeMap;

/// Six-symbol toy code: three data symbols (X0..X2), three coded (X3..X5),
/// three checks, the first being X0 + X2 + X4. With X0 and X2 known, the
/// first check is the first singleton and recovers X4 = X0 XOR X2.
pub fn toy_code() -> LdpcCode {
    let edges = [
        (0, 0),
        (0, 2),
        (0, 4), // check 0: X0 + X2 + X4
        (1, 1),
        (1, 2),
        (1, 5), // check 1: X1 + X2 + X5
        (2, 0),
        (2, 3),
        (2, 5), // check 2: X0 + X3 + X5
    ];
    LdpcCode::from_edges(3, 2, 3, 0, &edges).expect("toy graph is valid")
}

/// Layer-3 code of the three-layer fraud scenario: four data symbols, four
/// coded, with check 0 covering exactly positions {0, 2, 4} — in the global
/// breadth-first numbering of the scenario tree, symbols 6, 8 and 10.
pub fn fraud_scenario_bottom_code() -> LdpcCode {
    let edges = [
        (0, 0),
        (0, 2),
        (0, 4), // check 0: the parity that will be violated
        (1, 1),
        (1, 3),
        (1, 4),
        (1, 5), // check 1: peels symbol 10 from published symbols
        (2, 2),
        (2, 3),
        (2, 5),
        (2, 6), // check 2: peels symbol 8 from published symbols
        (3, 1),
        (3, 7), // check 3: completes the accumulator; avoids symbol 6
    ];
    LdpcCode::from_edges(4, 2, 4, 0, &edges).expect("scenario graph is valid")
}

/// The three-layer coding-fraud scenario.
///
/// Tree shape: root width 1, four base symbols. Layer 1 = global symbol 1,
/// layer 2 = symbols 2..=5 (two data, two coded), layer 3 = symbols 6..=13
/// (four data, four coded). The bottom code's check 0 covers symbols
/// {6, 8, 10} and is the only violated parity: the coded symbols solving
/// A_coded*d = e_0 are corrupted and the upper layers recommitted, so every
/// corrupted symbol keeps a valid path to the (fraudulent) root.
pub struct FraudScenario {
    pub ctx: CmtContext,
    /// The committed (corrupted) tree. `honest_root` differs from its root.
    pub tree: CodedMerkleTree,
    pub honest_root: crate::hash::Digest,
    /// Bottom-layer positions withheld in the collaborative variant:
    /// symbols 6, 8 and 10 (indices 0, 2, 4).
    pub withheld: Vec<u32>,
}

pub fn fraud_scenario(symbol_size: usize) -> FraudScenario {
    let params = CmtParams {
        symbol_size,
        root_width: 1,
        code_seed: 0xB00,
        d_l: 3,
        d_r: 6,
    };
    let mut overrides = BTreeMap::new();
    overrides.insert(3u16, fraud_scenario_bottom_code());
    let ctx = CmtContext::with_code_overrides(params, 4, overrides).unwrap();
    assert_eq!(ctx.depth(), 3);

    let base: Vec<Vec<u8>> = (0u8..4).map(|i| vec![0x11 * (i + 1); symbol_size]).collect();
    let honest = build_tree(&ctx, &base).unwrap();
    let mut tree = honest.clone();
    let pattern = ctx.code(3).single_check_corruption(0).expect("encodable");
    tree.corrupt_and_recommit(&ctx, 3, &pattern, &[0x01]);
    FraudScenario {
        ctx,
        honest_root: honest.root(),
        tree,
        withheld: vec![0, 2, 4],
    }
}

/// Global 1-based breadth-first numbering of the scenario's symbols:
/// 1; 2..=5; 6..=13.
pub fn global_symbol_number(ctx: &CmtContext, id: SymbolId) -> u32 {
    let mut n = 1;
    for layer in 1..id.layer {
        n += ctx.layout.total_width(layer) as u32;
    }
    n + id.index
}

/// Inverse of [`global_symbol_number`].
pub fn symbol_from_global(ctx: &CmtContext, mut n: u32) -> SymbolId {
    n -= 1;
    for layer in 1..=ctx.depth() {
        let w = ctx.layout.total_width(layer) as u32;
        if n < w {
            return SymbolId::new(layer, n);
        }
        n -= w;
    }
    panic!("global symbol number out of range");
}

/// The classical-decode variant of the scenario: publish everything except
/// symbol 6, so the decoder must peel it through the violated parity.
pub fn fraud_scenario_publication(
    sc: &FraudScenario,
    withhold: &[u32],
) -> Vec<(SymbolId, Vec<u8>, cmt::SymbolProof)> {
    sc.tree
        .all_ids()
        .filter(|id| !(id.layer == 3 && withhold.contains(&id.index)))
        .map(|id| {
            (
                id,
                sc.tree.symbol(id).to_vec(),
                sc.tree.symbol_proof(&sc.ctx.layout, id),
            )
        })
        .collect()
}

/// An eleven-block chain (heights 0..=10) with a planted double spend.
///
/// Block 8, position 5 holds the funding transaction: its first output pays
/// 10 units to the spender account. Block 9, position 3 spends that output;
/// block 10, position 2 spends it again. A validator covering the spender's
/// section holds the first spend in its table when block 10 arrives and
/// produces the double-spend fraud proof.
pub struct DoubleSpendChain {
    pub params: ChainParams,
    pub chain: HeaderChain,
    pub blocks: Vec<Block>,
    pub trees: Vec<CodedMerkleTree>,
    /// One context serves all blocks: every block has the same length.
    pub ctx: CmtContext,
    pub spender: KeyPair,
    pub funding: CommittedTxn,
    pub first_spend: CommittedTxn,
    pub double_spend: CommittedTxn,
    /// The disputed output: (funding txid, output index 0).
    pub disputed: TxInputRef,
    /// Spent table of a validator covering the spender's section, after
    /// processing blocks 1..=9.
    pub table_after_9: SpentTxoTable,
    pub fraud: FraudProof,
}

/// Transactions per block in the double-spend chain.
pub const CHAIN_BLOCK_LEN: usize = 8;

pub fn double_spend_chain(scheme: SigScheme) -> DoubleSpendChain {
    let params = ChainParams {
        scheme,
        cmt: CmtParams {
            symbol_size: 4096,
            root_width: 4,
            code_seed: 0xC0DE,
            d_l: 3,
            d_r: 6,
        },
        k: 4,
        tau: u64::MAX,
    };
    let k = params.k;
    let treasury = KeyPair::generate(scheme, 0xFEE, 0);
    // Position p of any block belongs to section p/2; keys are drawn inside
    // that section so every block is section-sorted.
    let slot_key =
        |b: u64, p: u32| KeyPair::generate_in_section(scheme, k, p / 2, 0xACC0 + b, p as u64);
    let spender = KeyPair::generate_in_section(scheme, k, 1, 0xACC8, 99); // positions 2 and 3
    let payer = KeyPair::generate_in_section(scheme, k, 2, 0xACC10, 55); // position 5
    let friend_a = KeyPair::generate(scheme, 0xACC3, 0);
    let friend_b = KeyPair::generate(scheme, 0xACC4, 0);

    let ctx = CmtContext::new(params.cmt, CHAIN_BLOCK_LEN).unwrap();
    let mut chain = HeaderChain::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut trees: Vec<CodedMerkleTree> = Vec::new();

    let push_block = |txs: Vec<Transaction>,
                          chain: &mut HeaderChain,
                          blocks: &mut Vec<Block>,
                          trees: &mut Vec<CodedMerkleTree>| {
        let height = chain.len();
        let base = transaction_base_symbols(&txs, params.cmt.symbol_size).unwrap();
        let tree = build_tree(&ctx, &base).unwrap();
        let header = Header {
            prev_hash: chain.tip().map(|h| h.hash()).unwrap_or_default(),
            root: tree.root(),
            len: txs.len() as u64,
            height,
            other: vec![],
        };
        assert!(chain.push(header.clone()));
        blocks.push(Block { header, txs });
        trees.push(tree);
    };

    // Genesis: position p mints one 30-unit output per later block to that
    // block's slot key.
    let genesis_txs: Vec<Transaction> = (0..CHAIN_BLOCK_LEN as u32)
        .map(|p| {
            let mut tx = Transaction {
                sender: treasury.account,
                signature: vec![],
                outputs: (1..=10u64)
                    .map(|b| TxOutput {
                        recipient: slot_key(b, p).account,
                        amount: 30,
                    })
                    .collect(),
                inputs: vec![],
                input_proofs: vec![],
            };
            tx.sign_with(&treasury);
            tx
        })
        .collect();
    push_block(genesis_txs, &mut chain, &mut blocks, &mut trees);

    let committed = |blocks: &[Block], trees: &[CodedMerkleTree], b: u64, p: u32| -> CommittedTxn {
        CommittedTxn {
            txn: blocks[b as usize].txs[p as usize].clone(),
            height: b,
            proof: trees[b as usize].symbol_proof(&ctx.layout, SymbolId::new(ctx.depth(), p)),
        }
    };

    // A slot transaction spending its genesis mint back to itself.
    let filler = |blocks: &[Block], trees: &[CodedMerkleTree], b: u64, p: u32| -> Transaction {
        let key = slot_key(b, p);
        let genesis = committed(blocks, trees, 0, p);
        let mut tx = Transaction {
            sender: key.account,
            signature: vec![],
            outputs: vec![TxOutput {
                recipient: key.account,
                amount: 30,
            }],
            inputs: vec![TxInputRef {
                txid: genesis.txn.txid(),
                output_index: (b - 1) as u16,
            }],
            input_proofs: vec![InputProof {
                height: 0,
                funding: Box::new(genesis.txn),
                proof: genesis.proof,
            }],
        };
        tx.sign_with(&key);
        tx
    };

    for b in 1..=10u64 {
        let mut txs: Vec<Transaction> = (0..CHAIN_BLOCK_LEN as u32)
            .map(|p| filler(&blocks, &trees, b, p))
            .collect();
        match b {
            5 => {
                // The payer's funding source: output 3 (index 2) pays 18.
                let key = slot_key(5, 2);
                let genesis = committed(&blocks, &trees, 0, 2);
                let mut tx = Transaction {
                    sender: key.account,
                    signature: vec![],
                    outputs: vec![
                        TxOutput { recipient: key.account, amount: 6 },
                        TxOutput { recipient: key.account, amount: 6 },
                        TxOutput { recipient: payer.account, amount: 18 },
                    ],
                    inputs: vec![TxInputRef {
                        txid: genesis.txn.txid(),
                        output_index: 4,
                    }],
                    input_proofs: vec![InputProof {
                        height: 0,
                        funding: Box::new(genesis.txn),
                        proof: genesis.proof,
                    }],
                };
                tx.sign_with(&key);
                txs[2] = tx;
            }
            8 => {
                // Funding transaction: output 1 (index 0) pays 10 to the
                // spender, output 2 pays 8 elsewhere.
                let source = committed(&blocks, &trees, 5, 2);
                let mut tx = Transaction {
                    sender: payer.account,
                    signature: vec![],
                    outputs: vec![
                        TxOutput { recipient: spender.account, amount: 10 },
                        TxOutput { recipient: friend_a.account, amount: 8 },
                    ],
                    inputs: vec![TxInputRef {
                        txid: source.txn.txid(),
                        output_index: 2,
                    }],
                    input_proofs: vec![InputProof {
                        height: 5,
                        funding: Box::new(source.txn),
                        proof: source.proof,
                    }],
                };
                tx.sign_with(&payer);
                txs[5] = tx;
            }
            9 => {
                // First spend of the disputed output.
                let funding = committed(&blocks, &trees, 8, 5);
                let mut tx = Transaction {
                    sender: spender.account,
                    signature: vec![],
                    outputs: vec![
                        TxOutput { recipient: friend_b.account, amount: 5 },
                        TxOutput { recipient: spender.account, amount: 5 },
                    ],
                    inputs: vec![TxInputRef {
                        txid: funding.txn.txid(),
                        output_index: 0,
                    }],
                    input_proofs: vec![InputProof {
                        height: 8,
                        funding: Box::new(funding.txn),
                        proof: funding.proof,
                    }],
                };
                tx.sign_with(&spender);
                txs[3] = tx;
            }
            10 => {
                // Second spend of the same output.
                let funding = committed(&blocks, &trees, 8, 5);
                let mut tx = Transaction {
                    sender: spender.account,
                    signature: vec![],
                    outputs: vec![TxOutput {
                        recipient: friend_a.account,
                        amount: 10,
                    }],
                    inputs: vec![TxInputRef {
                        txid: funding.txn.txid(),
                        output_index: 0,
                    }],
                    input_proofs: vec![InputProof {
                        height: 8,
                        funding: Box::new(funding.txn),
                        proof: funding.proof,
                    }],
                };
                tx.sign_with(&spender);
                txs[2] = tx;
            }
            _ => {}
        }
        push_block(txs, &mut chain, &mut blocks, &mut trees);
    }

    let funding = committed(&blocks, &trees, 8, 5);
    let first_spend = committed(&blocks, &trees, 9, 3);
    let double_spend = committed(&blocks, &trees, 10, 2);
    let disputed = TxInputRef {
        txid: funding.txn.txid(),
        output_index: 0,
    };

    // Section-1 validator's table after blocks 1..=9.
    let section = crate::ledger::section_of(&spender.account, k);
    let mut table_after_9 = SpentTxoTable::new();
    for b in 1..=9u64 {
        for p in 0..CHAIN_BLOCK_LEN as u32 {
            let c = committed(&blocks, &trees, b, p);
            if crate::ledger::section_of(&c.txn.sender, k) == section {
                table_after_9.update_state(&c.txn, &c.proof, b).unwrap();
            }
        }
    }

    let fraud = FraudProof {
        invalid: double_spend.clone(),
        past: Some(first_spend.clone()),
    };

    DoubleSpendChain {
        params,
        chain,
        blocks,
        trees,
        ctx,
        spender,
        funding,
        first_spend,
        double_spend,
        disputed,
        table_after_9,
        fraud,
    }
}

/// Mint transactions for ad-hoc tests: zero inputs, signed, valid only in
/// a genesis block.
pub fn mint_txn(key: &KeyPair, outputs: Vec<(AccountId, u64)>) -> Transaction {
    let mut tx = Transaction {
        sender: key.account,
        signature: vec![],
        outputs: outputs
            .into_iter()
            .map(|(recipient, amount)| TxOutput { recipient, amount })
            .collect(),
        inputs: vec![],
        input_proofs: vec![],
    };
    tx.sign_with(key);
    tx
}
