//! Pass rates on output of a well-seeded generator.
//!
//! Rates count only sequences where a test applies. Multi-p tests are rated
//! per p-value: the reported minimum over 8 or 18 states fails far more often
//! than 1 in 100 on random input, by construction. The excursion pair needs
//! 500 cycles and so is rated on longer sequences.

use fd2k::randomness::{random_excursions, random_excursions_variant, run_suite, BitSequence, NistTest, SIGNIFICANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SEQUENCES: usize = 200;
const BITS: usize = 10_000;

fn random_sequence(rng: &mut ChaCha20Rng, n: usize) -> BitSequence {
    BitSequence::new((0..n).map(|_| rng.gen_range(0..2)).collect()).unwrap()
}

#[test]
fn random_sequences_pass_at_the_nominal_rate() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x756e_6966);
    let mut applicable = [0usize; 8];
    let mut passes = [0usize; 8];
    let mut values = [0usize; 8];
    for _ in 0..SEQUENCES {
        let seq = random_sequence(&mut rng, BITS);
        for (i, r) in run_suite(&seq).into_iter().enumerate() {
            if !r.applicable {
                continue;
            }
            applicable[i] += 1;
            values[i] += r.p_values.len();
            passes[i] += r.p_values.iter().filter(|&&p| p >= SIGNIFICANCE).count();
        }
    }
    for (i, test) in NistTest::ALL.iter().enumerate().take(6) {
        let rate = passes[i] as f64 / values[i].max(1) as f64;
        eprintln!("{:<28} applicable {:>3}/{SEQUENCES}  pass rate {rate:.3}", test.name(), applicable[i]);
        assert!(rate >= 0.96, "{} pass rate {rate}", test.name());
    }
    assert!(applicable[..6].iter().all(|&a| a == SEQUENCES));
    assert!(applicable[6..].iter().all(|&a| a == 0));
}

#[test]
fn excursion_tests_pass_at_the_nominal_rate() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x6578_6375);
    let (mut applicable, mut p_values, mut passes) = (0usize, 0usize, [0usize; 2]);
    let mut variant_values = 0usize;
    for _ in 0..60 {
        let seq = random_sequence(&mut rng, 1_000_000);
        let (r, v) = (random_excursions(&seq), random_excursions_variant(&seq));
        assert_eq!(r.applicable, v.applicable);
        if !r.applicable {
            continue;
        }
        applicable += 1;
        p_values += r.p_values.len();
        variant_values += v.p_values.len();
        passes[0] += r.p_values.iter().filter(|&&p| p >= SIGNIFICANCE).count();
        passes[1] += v.p_values.iter().filter(|&&p| p >= SIGNIFICANCE).count();
    }
    assert!(applicable >= 20, "only {applicable} sequences had enough cycles");
    let rates = [passes[0] as f64 / p_values as f64, passes[1] as f64 / variant_values as f64];
    eprintln!("excursion pass rates {rates:?} over {applicable} applicable sequences");
    assert!(rates.iter().all(|&r| r >= 0.96), "{rates:?}");
}
