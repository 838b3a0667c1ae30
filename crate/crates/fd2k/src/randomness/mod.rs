//! Eight statistical randomness tests following NIST SP 800-22, applied to
//! key streams. Each test yields one or more p-values; a test passes when its
//! smallest p-value is at least [`SIGNIFICANCE`].

pub mod special;

use std::fmt;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use special::{erfc, igamc, normal_cdf};

pub const SIGNIFICANCE: f64 = 0.01;
/// Shortest sequence accepted by the frequency-style tests.
pub const MIN_BITS: usize = 100;
/// Fewest zero-return cycles for the excursion tests.
pub const MIN_CYCLES: usize = 500;
pub const DEFAULT_TEMPLATE: &str = "000000001";
const TEMPLATE_BLOCKS: usize = 8;
const APEN_BLOCK: usize = 2;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<u8>,
}

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::config("bit sequence may only hold 0 and 1"));
        }
        Ok(Self { bits })
    }

    /// Parses ASCII `0`/`1`, ignoring whitespace.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let bits = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::config(format!("unexpected character `{other}` in bit stream"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
    }

    pub fn to_ascii(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn extend_from_slice(&mut self, bits: &[u8]) {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        self.bits.extend_from_slice(bits);
    }

    fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    fn partial_sums(&self) -> impl Iterator<Item = i64> + '_ {
        self.bits.iter().scan(0i64, |s, &b| {
            *s += if b == 1 { 1 } else { -1 };
            Some(*s)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NistTest {
    Monobit,
    Runs,
    Dft,
    NonOverlappingTemplate,
    ApproximateEntropy,
    CumulativeSums,
    RandomExcursions,
    RandomExcursionsVariant,
}

impl NistTest {
    pub const ALL: [NistTest; 8] = [
        NistTest::Monobit,
        NistTest::Runs,
        NistTest::Dft,
        NistTest::NonOverlappingTemplate,
        NistTest::ApproximateEntropy,
        NistTest::CumulativeSums,
        NistTest::RandomExcursions,
        NistTest::RandomExcursionsVariant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NistTest::Monobit => "Monobit Frequency",
            NistTest::Runs => "Runs",
            NistTest::Dft => "Discrete Fourier Transform",
            NistTest::NonOverlappingTemplate => "Non Overlapping Template",
            NistTest::ApproximateEntropy => "Approximate Entropy",
            NistTest::CumulativeSums => "Cumulative Sums",
            NistTest::RandomExcursions => "Random Excursion",
            NistTest::RandomExcursionsVariant => "Random Excursion Variant",
        }
    }

    pub fn run(self, seq: &BitSequence) -> TestReport {
        match self {
            NistTest::Monobit => monobit_frequency(seq),
            NistTest::Runs => runs(seq),
            NistTest::Dft => dft_spectral(seq),
            NistTest::NonOverlappingTemplate => non_overlapping_template(seq, DEFAULT_TEMPLATE),
            NistTest::ApproximateEntropy => approximate_entropy(seq, APEN_BLOCK),
            NistTest::CumulativeSums => cumulative_sums(seq),
            NistTest::RandomExcursions => random_excursions(seq),
            NistTest::RandomExcursionsVariant => random_excursions_variant(seq),
        }
    }
}

impl fmt::Display for NistTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub test: NistTest,
    pub p_values: Vec<f64>,
    /// Smallest p-value; `None` when the test does not apply.
    pub reported_p: Option<f64>,
    pub pass: bool,
    pub applicable: bool,
    pub reason: Option<String>,
}

impl TestReport {
    fn from_p_values(test: NistTest, p_values: Vec<f64>) -> Self {
        let p_values: Vec<f64> = p_values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let reported = p_values.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            test,
            pass: reported >= SIGNIFICANCE,
            reported_p: Some(reported),
            p_values,
            applicable: true,
            reason: None,
        }
    }

    fn inapplicable(test: NistTest, reason: impl Into<String>) -> Self {
        Self {
            test,
            p_values: Vec::new(),
            reported_p: None,
            pass: false,
            applicable: false,
            reason: Some(reason.into()),
        }
    }

    fn too_short(test: NistTest, n: usize, min: usize) -> Self {
        Self::inapplicable(test, format!("sequence has {n} bits, test needs at least {min}"))
    }

    pub fn csv_row(&self) -> String {
        let p = self.reported_p.map(|p| format!("{p:.6}")).unwrap_or_default();
        format!("{},{},{},{}", self.test.name(), p, self.pass, self.applicable)
    }
}

pub const REPORT_CSV_HEADER: &str = "test,p_value,pass,applicable";

/// All eight tests in table order.
pub fn run_suite(seq: &BitSequence) -> Vec<TestReport> {
    NistTest::ALL.iter().map(|t| t.run(seq)).collect()
}

/// Zero when no test applies; otherwise whether every applicable test passed.
pub fn suite_passes(reports: &[TestReport]) -> bool {
    reports.iter().any(|r| r.applicable) && reports.iter().filter(|r| r.applicable).all(|r| r.pass)
}

pub fn write_report_csv<W: std::io::Write>(mut w: W, reports: &[TestReport]) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn monobit_frequency(seq: &BitSequence) -> TestReport {
    let n = seq.len();
    if n < MIN_BITS {
        return TestReport::too_short(NistTest::Monobit, n, MIN_BITS);
    }
    let sum = 2 * seq.ones() as i64 - n as i64;
    let s_obs = sum.unsigned_abs() as f64 / (n as f64).sqrt();
    TestReport::from_p_values(NistTest::Monobit, vec![erfc(s_obs / std::f64::consts::SQRT_2)])
}

pub fn runs(seq: &BitSequence) -> TestReport {
    let n = seq.len();
    if n < MIN_BITS {
        return TestReport::too_short(NistTest::Runs, n, MIN_BITS);
    }
    let nf = n as f64;
    let pi = seq.ones() as f64 / nf;
    let tau = 2.0 / nf.sqrt();
    if (pi - 0.5).abs() >= tau {
        return TestReport::inapplicable(
            NistTest::Runs,
            format!("frequency prerequisite failed: proportion of ones {pi:.4}"),
        );
    }
    let bits = seq.bits();
    let v_obs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let expected = 2.0 * nf * pi * (1.0 - pi);
    let p = erfc((v_obs as f64 - expected).abs() / (2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi)));
    TestReport::from_p_values(NistTest::Runs, vec![p])
}

pub fn dft_spectral(seq: &BitSequence) -> TestReport {
    let n = seq.len() & !1;
    if n < MIN_BITS {
        return TestReport::too_short(NistTest::Dft, seq.len(), MIN_BITS);
    }
    let mut buf: Vec<Complex<f64>> = seq.bits()[..n]
        .iter()
        .map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let below = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let expected = 0.95 * nf / 2.0;
    let d = (below - expected) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    let p = erfc(d.abs() / std::f64::consts::SQRT_2);
    TestReport::from_p_values(NistTest::Dft, vec![p])
}

/// Template hits per block, counted without overlap, over 8 blocks.
pub fn non_overlapping_template(seq: &BitSequence, template: &str) -> TestReport {
    let test = NistTest::NonOverlappingTemplate;
    let tpl = match BitSequence::from_ascii(template) {
        Ok(t) if !t.is_empty() => t,
        _ => return TestReport::inapplicable(test, format!("invalid template `{template}`")),
    };
    let m = tpl.len();
    let n = seq.len();
    let min = MIN_BITS.max(TEMPLATE_BLOCKS * (m + 1));
    if n < min {
        return TestReport::too_short(test, n, min);
    }
    let block = n / TEMPLATE_BLOCKS;
    let mf = block as f64;
    let mu = (mf - m as f64 + 1.0) / 2f64.powi(m as i32);
    let sigma2 = mf * (1.0 / 2f64.powi(m as i32) - (2.0 * m as f64 - 1.0) / 2f64.powi(2 * m as i32));
    let bits = seq.bits();
    let tpl = tpl.bits();
    let chi2: f64 = (0..TEMPLATE_BLOCKS)
        .map(|j| {
            let blk = &bits[j * block..(j + 1) * block];
            let mut hits = 0usize;
            let mut i = 0;
            while i + m <= block {
                if &blk[i..i + m] == tpl {
                    hits += 1;
                    i += m;
                } else {
                    i += 1;
                }
            }
            (hits as f64 - mu).powi(2) / sigma2
        })
        .sum();
    TestReport::from_p_values(test, vec![igamc(TEMPLATE_BLOCKS as f64 / 2.0, chi2 / 2.0)])
}

/// Template chi-square statistic for a sequence with zero hits in every block.
pub fn template_chi2_without_hits(n: usize, m: usize) -> f64 {
    let mf = (n / TEMPLATE_BLOCKS) as f64;
    let mu = (mf - m as f64 + 1.0) / 2f64.powi(m as i32);
    let sigma2 = mf * (1.0 / 2f64.powi(m as i32) - (2.0 * m as f64 - 1.0) / 2f64.powi(2 * m as i32));
    TEMPLATE_BLOCKS as f64 * mu * mu / sigma2
}

/// ApEn statistic and its chi-square p-value.
pub fn approximate_entropy_statistic(seq: &BitSequence, m: usize) -> Option<(f64, f64)> {
    let n = seq.len();
    if n < MIN_BITS || m == 0 || m >= 16 {
        return None;
    }
    let phi = |len: usize| -> f64 {
        let bits = seq.bits();
        let mut counts = vec![0usize; 1 << len];
        for i in 0..n {
            let mut idx = 0usize;
            for k in 0..len {
                idx = (idx << 1) | bits[(i + k) % n] as usize;
            }
            counts[idx] += 1;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi(m) - phi(m + 1);
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - apen);
    let p = igamc(2f64.powi(m as i32 - 1), chi2 / 2.0);
    Some((apen, p))
}

pub fn approximate_entropy(seq: &BitSequence, m: usize) -> TestReport {
    match approximate_entropy_statistic(seq, m) {
        Some((_, p)) => TestReport::from_p_values(NistTest::ApproximateEntropy, vec![p]),
        None => TestReport::too_short(NistTest::ApproximateEntropy, seq.len(), MIN_BITS),
    }
}

/// Forward and backward cumulative sums; p-values in that order.
pub fn cumulative_sums(seq: &BitSequence) -> TestReport {
    let n = seq.len();
    if n < MIN_BITS {
        return TestReport::too_short(NistTest::CumulativeSums, n, MIN_BITS);
    }
    let forward = seq.partial_sums().map(i64::abs).max().unwrap_or(0);
    let mut s = 0i64;
    let mut backward = 0i64;
    for &b in seq.bits().iter().rev() {
        s += if b == 1 { 1 } else { -1 };
        backward = backward.max(s.abs());
    }
    let p = [forward, backward].map(|z| cusum_p_value(n as i64, z));
    TestReport::from_p_values(NistTest::CumulativeSums, p.to_vec())
}

fn cusum_p_value(n: i64, z: i64) -> f64 {
    // summation bounds use truncating integer division
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * kf - 1.0) * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n);
        k += 1;
    }
    1.0 - sum1 + sum2
}

/// Number of zero-return cycles of the ±1 random walk.
pub fn excursion_cycles(seq: &BitSequence) -> usize {
    let mut zeros = 0;
    let mut last = 0;
    for s in seq.partial_sums() {
        if s == 0 {
            zeros += 1;
        }
        last = s;
    }
    zeros + usize::from(last != 0 && !seq.is_empty())
}

pub const EXCURSION_STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
pub const VARIANT_STATES: [i64; 18] = [-9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9];

fn excursion_precheck(test: NistTest, seq: &BitSequence) -> std::result::Result<usize, TestReport> {
    let j = excursion_cycles(seq);
    if j < MIN_CYCLES {
        return Err(TestReport::inapplicable(
            test,
            format!("walk has {j} cycles, test needs at least {MIN_CYCLES}"),
        ));
    }
    Ok(j)
}

/// Per-state p-values for states -4..-1, 1..4.
pub fn random_excursions(seq: &BitSequence) -> TestReport {
    let test = NistTest::RandomExcursions;
    let j = match excursion_precheck(test, seq) {
        Ok(j) => j,
        Err(r) => return r,
    };
    // nu[state][k]: cycles visiting the state exactly k times (k >= 5 lumped)
    let mut nu = [[0usize; 6]; 8];
    let mut visits = [0usize; 8];
    let mut close_cycle = |visits: &mut [usize; 8]| {
        for (s, v) in visits.iter_mut().enumerate() {
            nu[s][(*v).min(5)] += 1;
            *v = 0;
        }
    };
    let mut last = 0;
    for s in seq.partial_sums() {
        if s == 0 {
            close_cycle(&mut visits);
        } else if (-4..=4).contains(&s) {
            let idx = if s < 0 { (s + 4) as usize } else { (s + 3) as usize };
            visits[idx] += 1;
        }
        last = s;
    }
    if last != 0 {
        close_cycle(&mut visits);
    }
    let jf = j as f64;
    let p_values = EXCURSION_STATES
        .iter()
        .enumerate()
        .map(|(idx, &x)| {
            let probs = excursion_probabilities(x);
            let chi2: f64 = (0..6)
                .map(|k| {
                    let expected = jf * probs[k];
                    (nu[idx][k] as f64 - expected).powi(2) / expected
                })
                .sum();
            igamc(2.5, chi2 / 2.0)
        })
        .collect();
    TestReport::from_p_values(test, p_values)
}

/// Probability that a cycle visits state `x` exactly k times, k = 0..4, and
/// at least 5 times.
pub fn excursion_probabilities(x: i64) -> [f64; 6] {
    let ax = x.unsigned_abs() as f64;
    let q = 1.0 - 1.0 / (2.0 * ax);
    let mut p = [0.0; 6];
    p[0] = q;
    for (k, pk) in p.iter_mut().enumerate().take(5).skip(1) {
        *pk = 1.0 / (4.0 * ax * ax) * q.powi(k as i32 - 1);
    }
    p[5] = 1.0 / (2.0 * ax) * q.powi(4);
    p
}

/// Per-state p-values for states -9..-1, 1..9.
pub fn random_excursions_variant(seq: &BitSequence) -> TestReport {
    let test = NistTest::RandomExcursionsVariant;
    let j = match excursion_precheck(test, seq) {
        Ok(j) => j,
        Err(r) => return r,
    };
    let mut counts = [0usize; 19];
    for s in seq.partial_sums() {
        if (-9..=9).contains(&s) {
            counts[(s + 9) as usize] += 1;
        }
    }
    let jf = j as f64;
    let p_values = VARIANT_STATES
        .iter()
        .map(|&x| {
            let xi = counts[(x + 9) as usize] as f64;
            let denom = (2.0 * jf * (4.0 * x.unsigned_abs() as f64 - 2.0)).sqrt();
            erfc((xi - jf).abs() / denom)
        })
        .collect();
    TestReport::from_p_values(test, p_values)
}
