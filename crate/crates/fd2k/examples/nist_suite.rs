//! Runs the randomness suite on a generator's output and on a biased stream.
//!
//!     cargo run --example nist_suite -- [bitstream.txt]

use fd2k::randomness::{run_suite, write_report_csv, BitSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn report(label: &str, seq: &BitSequence) -> fd2k::Result<()> {
    println!("{label} ({} bits)", seq.len());
    let mut out = Vec::new();
    write_report_csv(&mut out, &run_suite(seq))?;
    print!("{}", String::from_utf8_lossy(&out));
    println!();
    Ok(())
}

fn main() -> fd2k::Result<()> {
    if let Some(path) = std::env::args().nth(1) {
        let seq = BitSequence::from_ascii(&std::fs::read_to_string(path)?)?;
        return report("input", &seq);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let fair = BitSequence::new((0..1_000_000).map(|_| rng.gen_range(0..2)).collect())?;
    report("ChaCha20", &fair)?;
    let biased = BitSequence::new((0..20_000).map(|_| u8::from(rng.gen_bool(0.53))).collect())?;
    report("53% ones", &biased)
}
