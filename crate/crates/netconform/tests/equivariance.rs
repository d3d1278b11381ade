//! Node-relabeling equivariance of every covariate extractor: permuting the
//! nodes (and permuting the split context with them) must permute the output
//! rows and change nothing else.
//!
//! Combinatorial extractors are held to exact equality — their inner sums
//! are accumulated in a relabeling-invariant order by design. The spectral
//! embedding is equivariant only up to eigenvector sign/rotation ambiguity,
//! so it runs behind an eigengap screen and at floating-point tolerance.

mod common;

use common::equivariance_sweep;
use netconform::covariates::{Extractor, Fallback};
use netconform::graphgen::WeightRule;

const PAIRS: usize = 100;

fn assert_exact(extractor: Extractor, seed: u64) {
    let label = format!("{extractor:?}");
    let s = equivariance_sweep(extractor, PAIRS, 0.0, seed);
    assert_eq!(s.skipped, 0, "{label}: combinatorial checks are never screened out");
    assert_eq!(s.checked, PAIRS);
    assert_eq!(s.worst, 0.0, "{label}: worst discrepancy must be exactly zero");
}

#[test]
fn degree_is_exactly_equivariant() {
    assert_exact(Extractor::Degree, 101);
}

#[test]
fn neighborhood_average_is_exactly_equivariant() {
    assert_exact(
        Extractor::NeighborhoodAverage { columns: None, fallback: Fallback::GlobalMean },
        102,
    );
}

#[test]
fn khop_levels_are_exactly_equivariant() {
    assert_exact(
        Extractor::Khop { kmax: 3, columns: Some(vec![0, 1]), fallback: Fallback::Zero },
        103,
    );
}

#[test]
fn split_neighborhood_average_is_exactly_equivariant() {
    assert_exact(
        Extractor::SplitNeighborhoodAverage { columns: None, fallback: Fallback::GlobalMean },
        104,
    );
}

#[test]
fn split_response_average_is_exactly_equivariant() {
    assert_exact(Extractor::SplitResponseAverage { fallback: Fallback::GlobalMean }, 105);
}

#[test]
fn neighbor_weighted_response_is_exactly_equivariant() {
    assert_exact(
        Extractor::NeighborWeightedResponse {
            rule: WeightRule::OneHop,
            fallback: Fallback::GlobalMean,
        },
        106,
    );
    assert_exact(
        Extractor::NeighborWeightedResponse {
            rule: WeightRule::GeometricDecay { gamma: 0.5, kmax: 3 },
            fallback: Fallback::Zero,
        },
        107,
    );
}

#[test]
fn spectral_embedding_is_equivariant_to_1e8_past_the_eigengap_screen() {
    let s = equivariance_sweep(Extractor::Ase { p: 3, q: 0 }, PAIRS, 1e-8, 108);
    assert!(
        s.checked >= PAIRS / 2,
        "eigengap screen rejected too much: {} of {PAIRS} checked",
        s.checked
    );
    assert!(
        s.worst <= 1e-8,
        "worst spectral discrepancy {:.3e} over {} screened pairs",
        s.worst,
        s.checked
    );
}
