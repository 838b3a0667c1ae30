//! Synthesizes one episode of Alice, Bob and Eve pressure readings and shows
//! how closely each pair moves together.
//!
//!     cargo run --example simulate_traces -- [seed] [eve_decorrelation]

use fd2k::signal::{synth_traces, write_traces_to, ScenarioConfig, SynthParams};

fn increments(s: &[f64]) -> Vec<f64> {
    s.windows(2).map(|w| w[1] - w[0]).collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn main() -> fd2k::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let d = args.next().map_or(Ok(1.0), |s| s.parse()).expect("decorrelation must be a number");

    let scenario = ScenarioConfig::default();
    let params = SynthParams {
        eve_decorrelation: d,
        ..SynthParams::default()
    };
    let traces = synth_traces(&scenario, &params, 20, 19, seed)?;
    let [a, b, e] = scenario.nodes().map(|n| &traces[n]);

    // keys come from rises and falls, so correlate increments, not levels
    let (da, db, de) = (increments(a.samples()), increments(b.samples()), increments(e.samples()));
    println!("seed {seed}, eve_decorrelation {d}");
    println!("increment correlation A-B {:+.4}", pearson(&da, &db));
    println!("increment correlation A-E {:+.4}", pearson(&da, &de));
    let agree = |x: &[f64], y: &[f64]| x.iter().zip(y).filter(|(p, q)| (**p >= 0.0) == (**q >= 0.0)).count() as f64 / x.len() as f64;
    println!("rise/fall agreement  A-B {:.4}  A-E {:.4}", agree(&da, &db), agree(&da, &de));

    let mut csv = Vec::new();
    write_traces_to(&mut csv, [a, b, e])?;
    let text = String::from_utf8(csv).expect("csv is utf-8");
    println!("\nfirst rows of the trace file:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
