//! Every p-value of the randomness suite against values frozen from an
//! independent numpy/scipy implementation (`reference/nist_reference.py`).

mod common;

#[test]
fn p_values_match_reference_within_1e_6() {
    let cmp = common::compare_with_reference();
    assert!(cmp.mismatches.is_empty(), "{:#?}", cmp.mismatches);
    assert_eq!(cmp.short_cases, 20);
    assert!(cmp.compared >= 20 * 6);
    assert!(cmp.excursion_cases >= 1, "fixture must exercise the excursion tests");
}

#[test]
fn generator_matches_known_splitmix64_output() {
    // first output for seed 0 is 0xE220A8397B1DCDAF
    let bits = common::splitmix64_bits(0, 64);
    let word = bits.iter().enumerate().fold(0u64, |w, (i, &b)| w | ((b as u64) << i));
    assert_eq!(word, 0xE220_A839_7B1D_CDAF);
}
