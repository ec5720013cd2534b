//! Scenario configuration: every protocol and experiment parameter in one
//! structure that round-trips losslessly through its TOML file format.

use cover::cmt::CmtParams;
use cover::ledger::{ChainParams, SigScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transactions per block.
    pub l: u64,
    /// Number of account sections.
    pub k: u32,
    /// Bottom-layer sample count; 0 derives c = L / k.
    pub c: u64,
    /// Honest validator count.
    pub n_h: u64,
    /// Dishonest fraction of the total pool.
    pub alpha: f64,
    /// Edge probability; 0 derives the prescribed connectivity value.
    pub p: f64,
    /// Maximum per-hop delay in ticks.
    pub delta: u64,
    /// Expiry window in blocks; 0 disables expiry.
    pub tau: u64,
    /// Security parameter (natural-log scale).
    pub lambda: f64,
    pub d_l: usize,
    pub d_r: usize,
    pub symbol_size: usize,
    pub root_width: usize,
    pub code_seed: u64,
    /// History rounds before the strategy round.
    pub rounds: u64,
    pub master_seed: u64,
    pub trials: u64,
    pub miner_strategy: MinerStrategyConfig,
    pub byzantine: Vec<ByzantineConfig>,
    pub sig_scheme: SigSchemeConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            l: 64,
            k: 4,
            c: 0,
            n_h: 26,
            alpha: 0.0,
            p: 0.0,
            delta: 2,
            tau: 0,
            lambda: 2.0,
            d_l: 3,
            d_r: 6,
            symbol_size: 4096,
            root_width: 4,
            code_seed: 0xC0DE,
            rounds: 2,
            master_seed: 1,
            trials: 500,
            miner_strategy: MinerStrategyConfig::Honest,
            byzantine: Vec::new(),
            sig_scheme: SigSchemeConfig::Mock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigSchemeConfig {
    Mock,
    Ed25519,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinerStrategyConfig {
    Honest,
    /// Hide a verified minimum stopping set of the given layer (the
    /// smallest exhaustively scannable layer when absent).
    HideStoppingSet { layer: Option<u16> },
    CodingFraud { layer: Option<u16>, check: u32 },
    InvalidTxn { class: InvalidClassConfig },
    Unsorted,
    WithholdRandom { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidClassConfig {
    BadSig,
    BadSum,
    BadInputProof,
    DoubleSpend,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ByzantineConfig {
    Silent { count: u64 },
    DropSymbols { count: u64 },
    FakeSymbolSpam { count: u64, per_tick: u32 },
    FakeFraudSpam { count: u64, per_tick: u32 },
}

impl ByzantineConfig {
    pub fn count(&self) -> u64 {
        match self {
            ByzantineConfig::Silent { count }
            | ByzantineConfig::DropSymbols { count }
            | ByzantineConfig::FakeSymbolSpam { count, .. }
            | ByzantineConfig::FakeFraudSpam { count, .. } => *count,
        }
    }
}

impl ScenarioConfig {
    /// Effective availability sample count.
    pub fn effective_c(&self) -> u64 {
        if self.c == 0 {
            (self.l / self.k as u64).max(1)
        } else {
            self.c
        }
    }

    /// Effective expiry window.
    pub fn effective_tau(&self) -> u64 {
        if self.tau == 0 {
            u64::MAX
        } else {
            self.tau
        }
    }

    /// Effective edge probability: the prescribed connectivity value when
    /// unset, clamped into (0, 1].
    pub fn effective_p(&self) -> f64 {
        if self.p > 0.0 {
            self.p
        } else {
            crate::bounds::connectivity_required_p(self.n_h, self.l, self.k, self.lambda)
                .unwrap_or(1.0)
                .clamp(0.05, 1.0)
        }
    }

    /// Total pool size: the smallest N with N - floor(alpha N) = N_h.
    pub fn total_nodes(&self) -> usize {
        let mut n = self.n_h as usize;
        while n - (self.alpha * n as f64).floor() as usize != self.n_h as usize {
            n += 1;
        }
        n
    }

    pub fn scheme(&self) -> SigScheme {
        match self.sig_scheme {
            SigSchemeConfig::Mock => SigScheme::Mock,
            SigSchemeConfig::Ed25519 => SigScheme::Ed25519,
        }
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            scheme: self.scheme(),
            cmt: CmtParams {
                symbol_size: self.symbol_size,
                root_width: self.root_width,
                code_seed: self.code_seed,
                d_l: self.d_l,
                d_r: self.d_r,
            },
            k: self.k,
            tau: self.effective_tau(),
        }
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.l < 2 {
            errors.push("l must be at least 2".into());
        }
        if self.k == 0 {
            errors.push("k must be at least 1".into());
        }
        if self.k as u64 > self.l {
            errors.push("k cannot exceed l".into());
        }
        if self.k != 0 && !self.l.is_multiple_of(self.k as u64) {
            errors.push("l must be a multiple of k (balanced section slots)".into());
        }
        if self.n_h == 0 {
            errors.push("n_h must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.alpha) {
            errors.push("alpha must be in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            errors.push("p must be in [0, 1]".into());
        }
        if self.delta == 0 {
            errors.push("delta must be at least 1".into());
        }
        if self.lambda <= 0.0 {
            errors.push("lambda must be positive".into());
        }
        if self.d_l == 0 || self.d_r < 2 {
            errors.push("degrees must satisfy d_l >= 1 and d_r >= 2".into());
        }
        if self.symbol_size < 512 {
            errors.push("symbol_size must be at least 512".into());
        }
        if !self.root_width.is_power_of_two() {
            errors.push("root_width must be a power of two".into());
        }
        if self.rounds == 0 {
            errors.push("rounds must be at least 1".into());
        }
        if self.trials == 0 {
            errors.push("trials must be at least 1".into());
        }
        if self.c != 0 && self.c > 2 * self.l {
            errors.push("c cannot exceed the bottom layer width".into());
        }
        if (0.0..1.0).contains(&self.alpha) && self.n_h > 0 {
            let byz_total: u64 = self.byzantine.iter().map(|b| b.count()).sum();
            let dishonest = (self.total_nodes() - self.n_h as usize) as u64;
            if byz_total > dishonest {
                errors.push(format!(
                    "byzantine counts ({byz_total}) exceed the dishonest pool ({dishonest})"
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig {
            miner_strategy: MinerStrategyConfig::CodingFraud {
                layer: Some(3),
                check: 7,
            },
            byzantine: vec![
                ByzantineConfig::Silent { count: 2 },
                ByzantineConfig::FakeSymbolSpam { count: 1, per_tick: 4 },
            ],
            alpha: 0.2,
            ..ScenarioConfig::default()
        };
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_lists_every_violation() {
        let cfg = ScenarioConfig {
            l: 1,
            k: 0,
            alpha: 1.5,
            delta: 0,
            ..ScenarioConfig::default()
        };
        let errors = cfg.validate().unwrap_err();
        assert!(errors.len() >= 4, "{errors:?}");
    }

    #[test]
    fn derived_parameters() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.effective_c(), 16);
        assert_eq!(cfg.effective_tau(), u64::MAX);
        assert_eq!(cfg.total_nodes(), 26);
        let with_alpha = ScenarioConfig {
            alpha: 0.25,
            n_h: 24,
            ..ScenarioConfig::default()
        };
        let n = with_alpha.total_nodes();
        assert_eq!(n - (0.25 * n as f64).floor() as usize, 24);
    }
}
