//! End-to-end ledger behavior over the planted double-spend chain.

use cover::fixtures::{double_spend_chain, CHAIN_BLOCK_LEN};
use cover::ledger::{
    is_valid_fraud_proof, is_valid_txn, section_of, verify_sorting_fraud_proof, Block, ChainParams,
    CommittedTxn, FraudProof, InvalidClass, SigScheme, SortingFraudProof, SpentTxoTable,
    TxValidity,
};

#[test]
fn first_spend_is_valid_before_the_table_knows_it() {
    let fx = double_spend_chain(SigScheme::Mock);
    // The table as it stood before block 9: rebuilt from blocks 1..=8.
    let mut table = SpentTxoTable::new();
    for b in 1..=8u64 {
        for p in 0..CHAIN_BLOCK_LEN as u32 {
            let tx = &fx.blocks[b as usize].txs[p as usize];
            if section_of(&tx.sender, fx.params.k) == section_of(&fx.spender.account, fx.params.k) {
                let proof = fx.trees[b as usize]
                    .symbol_proof(&fx.ctx.layout, cover::cmt::SymbolId::new(fx.ctx.depth(), p));
                table.update_state(tx, &proof, b).unwrap();
            }
        }
    }
    assert!(table.lookup(&fx.disputed.txid, 0).is_none());
    let verdict = is_valid_txn(&fx.first_spend.txn, 9, &fx.chain, &table, &fx.params).unwrap();
    assert_eq!(verdict, TxValidity::Valid);
}

#[test]
fn double_spend_is_caught_with_the_past_transaction() {
    let fx = double_spend_chain(SigScheme::Mock);
    let entry = fx.table_after_9.lookup(&fx.disputed.txid, 0).expect("first spend recorded");
    assert_eq!(entry.spender.txid(), fx.first_spend.txn.txid());
    assert_eq!(entry.height, 9);

    let verdict = is_valid_txn(&fx.double_spend.txn, 10, &fx.chain, &fx.table_after_9, &fx.params).unwrap();
    match verdict {
        TxValidity::Invalid {
            class: InvalidClass::DoubleSpend,
            past: Some(past),
        } => assert_eq!(past.spender.txid(), fx.first_spend.txn.txid()),
        other => panic!("expected double spend, got {other:?}"),
    }
}

#[test]
fn unbalanced_sums_are_invalid() {
    let fx = double_spend_chain(SigScheme::Mock);
    let mut tx = fx.first_spend.txn.clone();
    tx.outputs[0].amount -= 1;
    tx.sign_with(&fx.spender);
    let verdict = is_valid_txn(&tx, 9, &fx.chain, &SpentTxoTable::new(), &fx.params).unwrap();
    assert_eq!(
        verdict,
        TxValidity::Invalid {
            class: InvalidClass::BadSums,
            past: None
        }
    );
}

#[test]
fn planted_double_spend_fraud_proof_verifies() {
    let fx = double_spend_chain(SigScheme::Mock);
    assert!(is_valid_fraud_proof(&fx.fraud, &fx.chain, &fx.params));
}

#[test]
fn fraud_proof_against_valid_txn_with_disjoint_past_fails() {
    let fx = double_spend_chain(SigScheme::Mock);
    // first_spend is valid, and the funding transaction's inputs are
    // disjoint from it.
    let fp = FraudProof {
        invalid: fx.first_spend.clone(),
        past: Some(fx.funding.clone()),
    };
    assert!(!is_valid_fraud_proof(&fp, &fx.chain, &fx.params));
}

#[test]
fn fraud_proof_with_broken_inclusion_proof_fails() {
    let fx = double_spend_chain(SigScheme::Mock);
    let mut fp = fx.fraud.clone();
    fp.invalid.proof.ancestors[0][5] ^= 1;
    assert!(!is_valid_fraud_proof(&fp, &fx.chain, &fx.params));
}

#[test]
fn expired_input_detected_under_finite_tau() {
    let fx = double_spend_chain(SigScheme::Mock);
    let mut params = fx.params.clone();
    params.tau = 5;
    // Block 7's fillers spend genesis outputs: 7 - 0 > 5.
    let tx = &fx.blocks[7].txs[0];
    let verdict = is_valid_txn(tx, 7, &fx.chain, &SpentTxoTable::new(), &params).unwrap();
    assert_eq!(
        verdict,
        TxValidity::Invalid {
            class: InvalidClass::Expired,
            past: None
        }
    );
    // The expiry fraud proof needs no past transaction.
    let proof = fx.trees[7].symbol_proof(&fx.ctx.layout, cover::cmt::SymbolId::new(fx.ctx.depth(), 0));
    let fp = FraudProof {
        invalid: CommittedTxn {
            txn: tx.clone(),
            height: 7,
            proof,
        },
        past: None,
    };
    assert!(is_valid_fraud_proof(&fp, &fx.chain, &params));
}

#[test]
fn bad_signature_and_bad_proof_classes_yield_verifying_fraud_proofs() {
    let fx = double_spend_chain(SigScheme::Mock);
    // These mutations cannot be committed into the fixture chain after the
    // fact, so exercise the stateless classifier directly on mutated
    // transactions, then the fraud path via the chain-only checks.
    let mut bad_sig = fx.first_spend.txn.clone();
    bad_sig.signature[0] ^= 1;
    let verdict = is_valid_txn(&bad_sig, 9, &fx.chain, &SpentTxoTable::new(), &fx.params).unwrap();
    assert_eq!(
        verdict,
        TxValidity::Invalid {
            class: InvalidClass::BadSignature,
            past: None
        }
    );

    let mut bad_proof = fx.first_spend.txn.clone();
    bad_proof.input_proofs[0].proof.ancestors[0][0] ^= 1;
    let verdict = is_valid_txn(&bad_proof, 9, &fx.chain, &SpentTxoTable::new(), &fx.params).unwrap();
    assert_eq!(
        verdict,
        TxValidity::Invalid {
            class: InvalidClass::BadInputProof,
            past: None
        }
    );
}

#[test]
fn sorting_fraud_proof_round_trip() {
    let fx = double_spend_chain(SigScheme::Mock);
    // Positions 2 and 5 of block 9 are section 1 and section 2: in order.
    let a = CommittedTxn {
        txn: fx.blocks[9].txs[2].clone(),
        height: 9,
        proof: fx.trees[9].symbol_proof(&fx.ctx.layout, cover::cmt::SymbolId::new(fx.ctx.depth(), 2)),
    };
    let b = CommittedTxn {
        txn: fx.blocks[9].txs[5].clone(),
        height: 9,
        proof: fx.trees[9].symbol_proof(&fx.ctx.layout, cover::cmt::SymbolId::new(fx.ctx.depth(), 5)),
    };
    let ordered = SortingFraudProof {
        first: a.clone(),
        second: b.clone(),
    };
    assert!(!verify_sorting_fraud_proof(&ordered, &fx.chain, &fx.params));
    // The inverted claim: positions must stay ordered, so swapping the
    // transactions cannot forge a proof either (positions then invert).
    let swapped = SortingFraudProof { first: b, second: a };
    assert!(!verify_sorting_fraud_proof(&swapped, &fx.chain, &fx.params));
    let decoded = SortingFraudProof::from_bytes(&ordered.to_bytes()).unwrap();
    assert_eq!(decoded, ordered);
}

#[test]
fn state_is_deterministic_across_validators() {
    let fx = double_spend_chain(SigScheme::Mock);
    let build_table = || {
        let mut table = SpentTxoTable::new();
        for b in 1..=9u64 {
            for p in 0..CHAIN_BLOCK_LEN as u32 {
                let tx = &fx.blocks[b as usize].txs[p as usize];
                if section_of(&tx.sender, fx.params.k) == 1 {
                    let proof = fx.trees[b as usize]
                        .symbol_proof(&fx.ctx.layout, cover::cmt::SymbolId::new(fx.ctx.depth(), p));
                    table.update_state(tx, &proof, b).unwrap();
                }
            }
        }
        table
    };
    let a = build_table();
    let b = build_table();
    assert_eq!(a.len(), b.len());
    assert_eq!(a.lookup(&fx.disputed.txid, 0), b.lookup(&fx.disputed.txid, 0));
}

#[test]
fn blocks_round_trip_through_binary_files() {
    let fx = double_spend_chain(SigScheme::Mock);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("block10.bin");
    std::fs::write(&path, fx.blocks[10].to_bytes()).unwrap();
    let decoded = Block::from_bytes(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(decoded, fx.blocks[10]);
    assert_eq!(decoded.header.root, fx.trees[10].root());
}

#[test]
fn ed25519_chain_behaves_identically() {
    let fx = double_spend_chain(SigScheme::Ed25519);
    let verdict = is_valid_txn(&fx.double_spend.txn, 10, &fx.chain, &fx.table_after_9, &fx.params).unwrap();
    assert!(matches!(
        verdict,
        TxValidity::Invalid {
            class: InvalidClass::DoubleSpend,
            ..
        }
    ));
    assert!(is_valid_fraud_proof(&fx.fraud, &fx.chain, &fx.params));
}

#[test]
fn insufficient_chain_is_an_error_not_a_verdict() {
    let fx = double_spend_chain(SigScheme::Mock);
    let mut short = cover::ledger::HeaderChain::new();
    for h in 0..=7u64 {
        short.push(fx.chain.get(h).unwrap().clone());
    }
    let err = is_valid_txn(&fx.first_spend.txn, 9, &short, &SpentTxoTable::new(), &fx.params).unwrap_err();
    assert_eq!(err, cover::ledger::LedgerError::InsufficientChain(8));
}

#[test]
fn chain_params_default_is_permissive() {
    let p = ChainParams::default();
    assert_eq!(p.tau, u64::MAX);
    assert_eq!(p.k, 1);
}
