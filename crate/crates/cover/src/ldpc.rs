//! Rate-1/2 LDPC erasure code over opaque equal-length byte-string symbols.
//!
//! A code over `n` data symbols has `2n` symbols total (indices `[0, n)` are
//! data, `[n, 2n)` are coded) and `n` parity checks; each check constrains
//! the bytewise XOR of its attached symbols to zero. Construction is seeded
//! edge sampling targeting (d_L, d_R)-regularity with repair passes, and is
//! exactly reproducible from `(n, d_L, d_R, seed)`.

use crate::gf2::{self, BitMatrix};
use crate::wire::{Reader, WireError, Writer};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LdpcError {
    #[error("degree sequence infeasible")]
    DegreeInfeasible,
    #[error("code not systematically encodable")]
    NotEncodable,
    #[error("instance too large for exhaustive scan: use sampled estimate")]
    UseSampledEstimate,
    #[error("symbols must have equal length")]
    LengthMismatch,
    #[error("invalid code graph: {0}")]
    InvalidGraph(&'static str),
    #[error("descriptor decode failed: {0}")]
    Wire(#[from] WireError),
}

/// One peeling step: which check was solved and which symbol it recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeelStep {
    pub check: u32,
    pub symbol: u32,
}

/// Result of peeling decoding from a set of known symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeelOutcome {
    /// All 2n symbols recovered; every parity equation XORs to zero.
    Success {
        symbols: Vec<Vec<u8>>,
        log: Vec<PeelStep>,
    },
    /// No degree-one check remains. The unknown set contains a stopping set
    /// (it *is* one: no check touches it exactly once).
    Stuck {
        known: BTreeMap<u32, Vec<u8>>,
        unknown: BTreeSet<u32>,
        log: Vec<PeelStep>,
    },
    /// A fully-known check does not XOR to zero. Feeds coding-fraud
    /// detection.
    ParityViolated { check: u32 },
}

#[derive(Clone)]
struct Encoder {
    /// For each coded symbol, the set of data symbol indices to XOR.
    rows: Vec<Vec<usize>>,
}

/// A rate-1/2 LDPC code instance.
#[derive(Clone)]
pub struct LdpcCode {
    n: usize,
    d_l: usize,
    d_r: usize,
    seed: u64,
    /// check id -> sorted attached symbol indices in [0, 2n)
    checks: Vec<Vec<u32>>,
    /// symbol index -> sorted attached check ids
    symbol_checks: Vec<Vec<u32>>,
    encoder: Option<Encoder>,
}

impl std::fmt::Debug for LdpcCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LdpcCode")
            .field("n", &self.n)
            .field("d_l", &self.d_l)
            .field("d_r", &self.d_r)
            .field("seed", &self.seed)
            .field("encodable", &self.encoder.is_some())
            .finish()
    }
}

/// Construct a seeded pseudo-random near-(d_L, d_R)-regular code.
///
/// If the coded-symbol submatrix of the sampled graph is singular the
/// construction retries with seed+1, up to 16 times.
pub fn construct_code(n: usize, d_l: usize, d_r: usize, seed: u64) -> Result<LdpcCode, LdpcError> {
    if n < 2 || d_l < 1 || d_r < 2 || d_r > 2 * n {
        return Err(LdpcError::DegreeInfeasible);
    }
    for attempt in 0..16u64 {
        let s = seed.wrapping_add(attempt);
        let checks = sample_graph(n, d_l, d_r, s);
        if let Some(encoder) = compute_encoder(n, &checks) {
            return Ok(LdpcCode::assemble(n, d_l, d_r, seed, checks, Some(encoder)));
        }
    }
    Err(LdpcError::NotEncodable)
}

/// Sample the parity graph. The coded side is an accumulator chain (check i
/// holds coded symbols i-1 and i), which keeps the coded submatrix
/// invertible at every size; an unstructured sparse sample is singular with
/// probability approaching one as n grows. Data symbols then attach d_L
/// edges to distinct checks, capped so no check exceeds max(d_R, d_L + 2).
fn sample_graph(n: usize, d_l: usize, d_r: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edge_set: BTreeSet<(u32, u32)> = BTreeSet::new();
    edge_set.insert((0, n as u32));
    for i in 1..n as u32 {
        edge_set.insert((i, n as u32 + i - 1));
        edge_set.insert((i, n as u32 + i));
    }

    let cap = d_r.max(d_l + 2);
    let mut open: Vec<u32> = (0..n as u32).collect(); // checks with data capacity left
    let mut data_degree = vec![0usize; n];
    for s in 0..n as u32 {
        let mut attached: Vec<u32> = Vec::with_capacity(d_l);
        for _ in 0..d_l {
            if open.is_empty() {
                break;
            }
            // pick a non-full check not already linked to this symbol
            let mut tries = 0;
            loop {
                let pick = rng.random_range(0..open.len());
                let c = open[pick];
                if !attached.contains(&c) {
                    attached.push(c);
                    edge_set.insert((c, s));
                    data_degree[c as usize] += 1;
                    if data_degree[c as usize] >= cap - 2 {
                        open.swap_remove(pick);
                    }
                    break;
                }
                tries += 1;
                if tries > 4 * open.len() {
                    break; // only full or already-linked checks remain
                }
            }
        }
    }

    // Repair: check 0 carries a single coded symbol and may have no data.
    let mut degrees = vec![0usize; n];
    for (c, _) in &edge_set {
        degrees[*c as usize] += 1;
    }
    for c in 0..n as u32 {
        while degrees[c as usize] < 2 {
            let s = rng.random_range(0..n as u32);
            if edge_set.insert((c, s)) {
                degrees[c as usize] += 1;
            }
        }
    }
    let mut checks = vec![Vec::new(); n];
    for (c, s) in edge_set {
        checks[c as usize].push(s);
    }
    checks
}

fn compute_encoder(n: usize, checks: &[Vec<u32>]) -> Option<Encoder> {
    let mut a_coded = BitMatrix::zero(n, n);
    let mut a_data = BitMatrix::zero(n, n);
    for (c, members) in checks.iter().enumerate() {
        for &s in members {
            if (s as usize) < n {
                a_data.set(c, s as usize, true);
            } else {
                a_coded.set(c, s as usize - n, true);
            }
        }
    }
    let m = gf2::solve(&a_coded, &a_data)?;
    Some(Encoder {
        rows: (0..n).map(|i| m.row_bits(i)).collect(),
    })
}

impl LdpcCode {
    fn assemble(
        n: usize,
        d_l: usize,
        d_r: usize,
        seed: u64,
        checks: Vec<Vec<u32>>,
        encoder: Option<Encoder>,
    ) -> Self {
        let mut symbol_checks = vec![Vec::new(); 2 * n];
        for (c, members) in checks.iter().enumerate() {
            for &s in members {
                symbol_checks[s as usize].push(c as u32);
            }
        }
        LdpcCode {
            n,
            d_l,
            d_r,
            seed,
            checks,
            symbol_checks,
            encoder,
        }
    }

    /// Load a code from an explicit edge list (hand-crafted instances).
    pub fn from_edges(
        n: usize,
        d_l: usize,
        d_r: usize,
        seed: u64,
        edges: &[(u32, u32)],
    ) -> Result<Self, LdpcError> {
        if n < 2 {
            return Err(LdpcError::DegreeInfeasible);
        }
        let mut checks = vec![BTreeSet::new(); n];
        for &(c, s) in edges {
            if c as usize >= n || s as usize >= 2 * n {
                return Err(LdpcError::InvalidGraph("edge index out of range"));
            }
            checks[c as usize].insert(s);
        }
        if checks.iter().any(|m| m.len() < 2) {
            return Err(LdpcError::InvalidGraph("check degree below 2"));
        }
        let checks: Vec<Vec<u32>> = checks.into_iter().map(|m| m.into_iter().collect()).collect();
        let encoder = compute_encoder(n, &checks);
        Ok(LdpcCode::assemble(n, d_l, d_r, seed, checks, encoder))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total symbol count, 2n.
    pub fn total(&self) -> usize {
        2 * self.n
    }

    pub fn d_l(&self) -> usize {
        self.d_l
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn check_count(&self) -> usize {
        self.checks.len()
    }

    /// Symbols attached to a check, sorted ascending.
    pub fn check_members(&self, check: u32) -> &[u32] {
        &self.checks[check as usize]
    }

    /// Checks attached to a symbol, sorted ascending.
    pub fn checks_of(&self, symbol: u32) -> &[u32] {
        &self.symbol_checks[symbol as usize]
    }

    pub fn is_encodable(&self) -> bool {
        self.encoder.is_some()
    }

    /// Systematic encoding: output[0..n) is `data`, output[n..2n) solves all
    /// parity equations.
    pub fn encode(&self, data: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, LdpcError> {
        if data.len() != self.n {
            return Err(LdpcError::InvalidGraph("data symbol count mismatch"));
        }
        let len = data[0].len();
        if data.iter().any(|d| d.len() != len) {
            return Err(LdpcError::LengthMismatch);
        }
        let encoder = self.encoder.as_ref().ok_or(LdpcError::NotEncodable)?;
        let mut out = data.to_vec();
        for row in &encoder.rows {
            let mut acc = vec![0u8; len];
            for &j in row {
                xor_into(&mut acc, &data[j]);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Peeling decoder: repeatedly solve checks with exactly one unknown
    /// symbol, lowest check id first.
    pub fn peel_decode(&self, known: &BTreeMap<u32, Vec<u8>>) -> Result<PeelOutcome, LdpcError> {
        let total = self.total();
        let mut values: Vec<Option<Vec<u8>>> = vec![None; total];
        let mut len: Option<usize> = None;
        for (&i, v) in known {
            if i as usize >= total {
                return Err(LdpcError::InvalidGraph("known symbol index out of range"));
            }
            match len {
                None => len = Some(v.len()),
                Some(l) if l != v.len() => return Err(LdpcError::LengthMismatch),
                _ => {}
            }
            values[i as usize] = Some(v.clone());
        }

        let mut unknown_degree: Vec<usize> = self
            .checks
            .iter()
            .map(|members| members.iter().filter(|&&s| values[s as usize].is_none()).count())
            .collect();
        let mut worklist: BTreeSet<u32> = BTreeSet::new();
        for (c, &deg) in unknown_degree.iter().enumerate() {
            match deg {
                0 => {
                    if !self.check_xors_to_zero(c as u32, &values) {
                        return Ok(PeelOutcome::ParityViolated { check: c as u32 });
                    }
                }
                1 => {
                    worklist.insert(c as u32);
                }
                _ => {}
            }
        }

        let mut log = Vec::new();
        while let Some(c) = worklist.pop_first() {
            if unknown_degree[c as usize] != 1 {
                continue; // resolved by an earlier peel
            }
            let members = &self.checks[c as usize];
            let target = *members.iter().find(|&&s| values[s as usize].is_none()).unwrap();
            let mut acc = vec![0u8; len.unwrap_or(0)];
            for &s in members {
                if s != target {
                    xor_into(&mut acc, values[s as usize].as_ref().unwrap());
                }
            }
            values[target as usize] = Some(acc);
            log.push(PeelStep { check: c, symbol: target });
            for &c2 in &self.symbol_checks[target as usize] {
                unknown_degree[c2 as usize] -= 1;
                match unknown_degree[c2 as usize] {
                    0 => {
                        worklist.remove(&c2);
                        if !self.check_xors_to_zero(c2, &values) {
                            return Ok(PeelOutcome::ParityViolated { check: c2 });
                        }
                    }
                    1 => {
                        worklist.insert(c2);
                    }
                    _ => {}
                }
            }
        }

        if values.iter().all(|v| v.is_some()) {
            Ok(PeelOutcome::Success {
                symbols: values.into_iter().map(|v| v.unwrap()).collect(),
                log,
            })
        } else {
            let mut known_out = BTreeMap::new();
            let mut unknown = BTreeSet::new();
            for (i, v) in values.into_iter().enumerate() {
                match v {
                    Some(v) => {
                        known_out.insert(i as u32, v);
                    }
                    None => {
                        unknown.insert(i as u32);
                    }
                }
            }
            Ok(PeelOutcome::Stuck {
                known: known_out,
                unknown,
                log,
            })
        }
    }

    fn check_xors_to_zero(&self, check: u32, values: &[Option<Vec<u8>>]) -> bool {
        let members = &self.checks[check as usize];
        let len = members
            .iter()
            .filter_map(|&s| values[s as usize].as_ref().map(|v| v.len()))
            .next()
            .unwrap_or(0);
        let mut acc = vec![0u8; len];
        for &s in members {
            match values[s as usize].as_ref() {
                Some(v) => xor_into(&mut acc, v),
                None => return false,
            }
        }
        acc.iter().all(|&b| b == 0)
    }

    /// Structural peeling: which of the `hidden` symbols remain unrecoverable
    /// when everything else is known. The returned remainder, if nonempty,
    /// is a stopping set.
    pub fn peel_remainder(&self, hidden: &BTreeSet<u32>) -> BTreeSet<u32> {
        let mut unknown: Vec<bool> = vec![false; self.total()];
        for &s in hidden {
            unknown[s as usize] = true;
        }
        let mut degree: Vec<usize> = self
            .checks
            .iter()
            .map(|members| members.iter().filter(|&&s| unknown[s as usize]).count())
            .collect();
        let mut worklist: BTreeSet<u32> = degree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 1)
            .map(|(c, _)| c as u32)
            .collect();
        while let Some(c) = worklist.pop_first() {
            if degree[c as usize] != 1 {
                continue;
            }
            let target = *self.checks[c as usize]
                .iter()
                .find(|&&s| unknown[s as usize])
                .unwrap();
            unknown[target as usize] = false;
            for &c2 in &self.symbol_checks[target as usize] {
                degree[c2 as usize] -= 1;
                if degree[c2 as usize] == 1 {
                    worklist.insert(c2);
                }
            }
        }
        (0..self.total() as u32).filter(|&s| unknown[s as usize]).collect()
    }

    /// Definitional stopping-set test: nonempty, and every check touches the
    /// set zero times or at least twice.
    pub fn is_stopping_set(&self, set: &BTreeSet<u32>) -> bool {
        if set.is_empty() {
            return false;
        }
        self.checks.iter().all(|members| {
            let hits = members.iter().filter(|s| set.contains(s)).count();
            hits != 1
        })
    }

    /// Exhaustively enumerate minimal stopping sets (2n <= 24 only).
    /// Returns the minimum fraction f_min = |smallest| / 2n and every
    /// stopping set of that size.
    pub fn stopping_sets_exhaustive(&self) -> Result<StoppingSetReport, LdpcError> {
        let total = self.total();
        if total > 24 {
            return Err(LdpcError::UseSampledEstimate);
        }
        let check_masks: Vec<u32> = self
            .checks
            .iter()
            .map(|members| members.iter().fold(0u32, |m, &s| m | 1 << s))
            .collect();
        for size in 1..=total {
            let mut found = Vec::new();
            let mut mask: u32 = (1u32 << size) - 1;
            let limit: u32 = 1u32 << total;
            while mask < limit {
                if check_masks.iter().all(|&cm| (cm & mask).count_ones() != 1) {
                    found.push((0..total as u32).filter(|&s| mask >> s & 1 == 1).collect());
                }
                // Gosper's hack: next mask with the same popcount.
                let c = mask & mask.wrapping_neg();
                let r = mask + c;
                if r >= limit || c == 0 {
                    break;
                }
                mask = (((r ^ mask) >> 2) / c) | r;
            }
            if !found.is_empty() {
                return Ok(StoppingSetReport {
                    f_min: size as f64 / total as f64,
                    minimal: found,
                });
            }
        }
        unreachable!("the full symbol set is always a stopping set");
    }

    /// Find some verified stopping set by hiding a random fraction and
    /// peeling; for instances too large for the exhaustive scan.
    pub fn find_stopping_set_sampled(
        &self,
        seed: u64,
        attempts: usize,
        hide_fraction: f64,
    ) -> Option<BTreeSet<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = self.total();
        let hide = ((total as f64 * hide_fraction).ceil() as usize).clamp(1, total);
        let mut best: Option<BTreeSet<u32>> = None;
        for _ in 0..attempts {
            let idx = rand::seq::index::sample(&mut rng, total, hide);
            let hidden: BTreeSet<u32> = idx.iter().map(|i| i as u32).collect();
            let rem = self.peel_remainder(&hidden);
            if !rem.is_empty() && best.as_ref().is_none_or(|b| rem.len() < b.len()) {
                debug_assert!(self.is_stopping_set(&rem));
                best = Some(rem);
            }
        }
        best
    }

    /// Coded symbol indices such that XORing a common nonzero delta into all
    /// of them violates exactly this one parity equation and no other.
    /// Solves A_coded * d = e_check over GF(2); always solvable when the
    /// code is systematically encodable.
    pub fn single_check_corruption(&self, check: u32) -> Option<Vec<u32>> {
        if check as usize >= self.checks.len() {
            return None;
        }
        let n = self.n;
        let mut a_coded = BitMatrix::zero(n, n);
        for (c, members) in self.checks.iter().enumerate() {
            for &s in members {
                if s as usize >= n {
                    a_coded.set(c, s as usize - n, true);
                }
            }
        }
        let mut e = BitMatrix::zero(n, 1);
        e.set(check as usize, 0, true);
        let d = gf2::solve(&a_coded, &e)?;
        Some((0..n).filter(|&i| d.get(i, 0)).map(|i| (n + i) as u32).collect())
    }

    /// Code descriptor: header (n, d_L, d_R, seed) then the explicit edge
    /// list as (check id u32, symbol id u32) pairs.
    pub fn to_descriptor(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(self.n as u32);
        w.put_u16(self.d_l as u16);
        w.put_u16(self.d_r as u16);
        w.put_u64(self.seed);
        let edge_count: usize = self.checks.iter().map(|m| m.len()).sum();
        w.put_u32(edge_count as u32);
        for (c, members) in self.checks.iter().enumerate() {
            for &s in members {
                w.put_u32(c as u32);
                w.put_u32(s);
            }
        }
        w.finish()
    }

    pub fn from_descriptor(bytes: &[u8]) -> Result<Self, LdpcError> {
        let mut r = Reader::new(bytes);
        let n = r.get_u32("n")? as usize;
        let d_l = r.get_u16("d_l")? as usize;
        let d_r = r.get_u16("d_r")? as usize;
        let seed = r.get_u64("seed")?;
        let edge_count = r.get_u32("edge count")? as usize;
        let mut edges = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let c = r.get_u32("check id")?;
            let s = r.get_u32("symbol id")?;
            edges.push((c, s));
        }
        r.expect_end().map_err(LdpcError::Wire)?;
        LdpcCode::from_edges(n, d_l, d_r, seed, &edges)
    }
}

#[derive(Debug, Clone)]
pub struct StoppingSetReport {
    /// |smallest stopping set| / 2n
    pub f_min: f64,
    /// All stopping sets of the minimum size.
    pub minimal: Vec<BTreeSet<u32>>,
}

/// Bytewise XOR accumulate; the GF(2) sum over symbol payloads.
pub fn xor_into(acc: &mut [u8], src: &[u8]) {
    debug_assert_eq!(acc.len(), src.len());
    for (a, b) in acc.iter_mut().zip(src) {
        *a ^= b;
    }
}
