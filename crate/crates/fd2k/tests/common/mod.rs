#![allow(dead_code)]

use fd2k::randomness::{run_suite, BitSequence, NistTest};
use serde_json::Value;

/// SplitMix64 stream, 64 bits per output, least significant bit first.
pub fn splitmix64_bits(seed: u64, n: usize) -> Vec<u8> {
    let mut state = seed;
    let mut out = Vec::with_capacity(n + 64);
    while out.len() < n {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        out.extend((0..64).map(|i| ((z >> i) & 1) as u8));
    }
    out.truncate(n);
    out
}

pub struct ReferenceComparison {
    pub cases: usize,
    pub short_cases: usize,
    pub compared: usize,
    pub excursion_cases: usize,
    pub max_abs_diff: f64,
    pub mismatches: Vec<String>,
}

/// Regenerates every fixture sequence and compares all p-values and
/// applicability flags against the frozen reference values.
pub fn compare_with_reference() -> ReferenceComparison {
    let fx: Value = serde_json::from_str(include_str!("../reference/nist_reference.json")).unwrap();
    let cases = fx["cases"].as_array().unwrap();
    let mut out = ReferenceComparison {
        cases: cases.len(),
        short_cases: cases.iter().filter(|c| c["n"] == 10_000).count(),
        compared: 0,
        excursion_cases: 0,
        max_abs_diff: 0.0,
        mismatches: Vec::new(),
    };
    for case in cases {
        let seed = case["seed"].as_u64().unwrap();
        let n = case["n"].as_u64().unwrap() as usize;
        let bits = splitmix64_bits(seed, n);
        let ones: u64 = bits.iter().map(|&b| b as u64).sum();
        if ones != case["ones"].as_u64().unwrap() {
            out.mismatches.push(format!("seed {seed}: generator drift"));
            continue;
        }
        let reports = run_suite(&BitSequence::new(bits).unwrap());
        for (test, report) in NistTest::ALL.iter().zip(&reports) {
            let expected = &case["p_values"][test.name()];
            if expected.is_null() {
                if report.applicable {
                    out.mismatches.push(format!("seed {seed}: {test} should be inapplicable"));
                }
                continue;
            }
            if !report.applicable {
                out.mismatches.push(format!("seed {seed}: {test} should apply"));
                continue;
            }
            let expected: Vec<f64> = expected.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            if expected.len() != report.p_values.len() {
                out.mismatches.push(format!("seed {seed}: {test} p-value count"));
                continue;
            }
            for (e, a) in expected.iter().zip(&report.p_values) {
                let d = (e - a).abs();
                out.max_abs_diff = out.max_abs_diff.max(d);
                if d > 1e-6 {
                    out.mismatches.push(format!("seed {seed}: {test} p={a} reference={e}"));
                }
                out.compared += 1;
            }
            if *test == NistTest::RandomExcursions {
                out.excursion_cases += 1;
            }
        }
    }
    out
}
