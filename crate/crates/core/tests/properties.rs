//! Standalone invariant suites, 1000 randomized cases each.

#[path = "common/props.rs"]
mod props;

const CASES: u32 = 1_000;

#[test]
fn cosine_bounds_and_symmetry() {
    props::cosine_bounds_and_symmetry(CASES);
}

#[test]
fn aggregation_argmax_scale_invariance() {
    props::aggregation_argmax_scale_invariance(CASES);
}

#[test]
fn single_table_aggregation_identity() {
    props::single_table_aggregation_identity(CASES);
}

#[test]
fn scaling_preserves_greedy_sets() {
    props::scaling_preserves_greedy_sets(CASES);
}

#[test]
fn kl_nonnegative_and_zero_on_equal() {
    props::kl_nonnegative_and_zero_on_equal(CASES);
}

#[test]
fn subsample_cardinality_and_subsequence() {
    props::subsample_cardinality_and_subsequence(CASES);
}

#[test]
fn report_permutation_invariance() {
    props::report_permutation_invariance(CASES);
}

#[test]
fn scenario_prefix_equivalence() {
    props::scenario_prefix_equivalence(CASES);
}
