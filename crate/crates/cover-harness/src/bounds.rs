//! The closed-form bounds, implemented as pure functions so experiments
//! compare code to code. All logarithms are natural: the proofs close with
//! e^-x throughout.

/// Honest nodes needed to cover every one of k sections with probability
/// at least 1 - e^-lambda: ceil(k (ln k + lambda)).
pub fn coverage_required_nodes(k: u32, lambda: f64) -> u64 {
    ((k as f64) * ((k as f64).ln() + lambda)).ceil() as u64
}

/// The alternative statement with ln L in place of ln k; both are
/// evaluated and reported, labeled by which one an experiment satisfies.
pub fn coverage_required_nodes_ln_l(k: u32, l: u64, lambda: f64) -> u64 {
    ((k as f64) * ((l as f64).ln() + lambda)).ceil() as u64
}

/// Honest nodes needed so that c-sample subtrees cover the whole tree:
/// ceil((L/c)(ln L + lambda)).
pub fn tree_coverage_required_nodes(l: u64, c: u64, lambda: f64) -> u64 {
    ((l as f64 / c as f64) * ((l as f64).ln() + lambda)).ceil() as u64
}

/// Probability that all k sections are covered by n_h uniform draws:
/// at least 1 - k(1 - 1/k)^{n_h}.
pub fn coverage_probability_bound(k: u32, n_h: u64) -> f64 {
    1.0 - k as f64 * (1.0 - 1.0 / k as f64).powi(n_h as i32)
}

/// Chance that c uniform per-layer samples hit a hidden fraction f:
/// 1 - (1 - f)^c.
pub fn detection_probability(f: f64, c: u64) -> f64 {
    assert!((0.0..=1.0).contains(&f));
    1.0 - (1.0 - f).powi(c as i32)
}

/// Fraction of total tree symbols each node downloads, r = ((L/k) ln L)/(4L).
pub fn download_fraction(l: u64, k: u32) -> f64 {
    ((l as f64 / k as f64) * (l as f64).ln()) / (4.0 * l as f64)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BoundError {
    #[error("regime below theorem's validity: r * N_h / 2 <= 1")]
    BelowValidity,
}

/// Edge probability prescribed for selective broadcast:
/// p = 2 lambda ln(r N_h / 2) / (r N_h).
pub fn connectivity_required_p(n_h: u64, l: u64, k: u32, lambda: f64) -> Result<f64, BoundError> {
    let r = download_fraction(l, k);
    let rn = r * n_h as f64;
    if rn / 2.0 <= 1.0 {
        return Err(BoundError::BelowValidity);
    }
    Ok((2.0 * lambda * (rn / 2.0).ln() / rn).min(1.0))
}

/// Neighbors per node at the prescribed p over the full graph of
/// N = N_h / (1 - alpha) nodes.
pub fn connectivity_required_neighbors(
    n_h: u64,
    l: u64,
    k: u32,
    lambda: f64,
    alpha: f64,
) -> Result<f64, BoundError> {
    let p = connectivity_required_p(n_h, l, k, lambda)?;
    Ok(p * n_h as f64 / (1.0 - alpha))
}

/// Probability that all M color subgraphs are connected at the prescribed
/// p: 1 - M (r N_h / 2)^{1 - lambda} - M exp(-r N_h / (8 (1 - r))).
pub fn connectivity_success_bound(m: u64, r: f64, n_h: u64, lambda: f64) -> f64 {
    let rn = r * n_h as f64;
    1.0 - m as f64 * (rn / 2.0).powf(1.0 - lambda) - m as f64 * (-rn / (8.0 * (1.0 - r))).exp()
}

/// End-to-end accept/reject bound for the valid-and-available and the
/// invalid-but-available cases:
/// 1 - e^-lambda - 4L (N_h/(8k))^{1-lambda} - 4L exp(-N_h / (8(4k - 1))).
pub fn theorem_case_accept_bound(l: u64, k: u32, n_h: u64, lambda: f64) -> f64 {
    let l = l as f64;
    let nh = n_h as f64;
    let k = k as f64;
    1.0 - (-lambda).exp() - 4.0 * l * (nh / (8.0 * k)).powf(1.0 - lambda)
        - 4.0 * l * (-nh / (8.0 * (4.0 * k - 1.0))).exp()
}

/// Unavailability rejection bound: 1 - N_h (1 - f)^c.
pub fn theorem_case_unavailable_bound(n_h: u64, f: f64, c: u64) -> f64 {
    1.0 - n_h as f64 * (1.0 - f).powi(c as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_node_requirement_pins_the_worked_numbers() {
        // ceil(8 (ln 8 + 2)) = 33.
        assert_eq!(coverage_required_nodes(8, 2.0), 33);
        assert_eq!(coverage_required_nodes(1, 2.0), 2);
    }

    #[test]
    fn detection_probability_endpoints() {
        assert_eq!(detection_probability(0.0, 4), 0.0);
        assert_eq!(detection_probability(1.0, 1), 1.0);
        let p = detection_probability(0.25, 16);
        assert!((p - 0.98997).abs() < 1e-4, "{p}");
    }

    #[test]
    fn connectivity_regime_guard() {
        assert_eq!(connectivity_required_p(4, 16, 4, 2.0), Err(BoundError::BelowValidity));
        // N_h = 200, L = 256, k = 4: r = (64 ln 256)/1024, rN_h about 69.
        let p = connectivity_required_p(200, 256, 4, 2.0).unwrap();
        assert!(p > 0.15 && p < 0.25, "{p}");
    }

    #[test]
    fn accept_bound_is_vacuous_at_desk_scale_and_tight_for_large_pools() {
        let small = theorem_case_accept_bound(64, 4, 26, 2.0);
        assert!(small < 0.0);
        let large = theorem_case_accept_bound(64, 4, 100_000, 2.0);
        assert!(large > 0.7, "{large}");
    }

    #[test]
    fn unavailable_bound_matches_formula() {
        let b = theorem_case_unavailable_bound(26, 0.1875, 16);
        assert!((b - (1.0 - 26.0 * (0.8125f64).powi(16))).abs() < 1e-12);
    }
}
