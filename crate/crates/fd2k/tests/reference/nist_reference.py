"""Reference p-values for the eight randomness tests.

Straight transcription of the SP 800-22 test descriptions on top of numpy and
scipy.special. Writes nist_reference.json next to this file; the Rust test
suite regenerates the same bit sequences and compares every p-value.

    python3 nist_reference.py
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

MASK = (1 << 64) - 1


def splitmix64_bits(seed, n):
    """n bits, least significant bit of each 64-bit output first."""
    state = seed & MASK
    out = []
    while len(out) < n:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.extend((z >> i) & 1 for i in range(64))
    return np.array(out[:n], dtype=np.int64)


def monobit(e):
    n = len(e)
    s = abs(np.sum(2 * e - 1)) / math.sqrt(n)
    return [erfc(s / math.sqrt(2))]


def runs(e):
    n = len(e)
    pi = e.mean()
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return None
    v = 1 + int(np.count_nonzero(e[1:] != e[:-1]))
    return [erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))]


def dft(e):
    n = len(e) - len(e) % 2
    x = 2.0 * e[:n] - 1.0
    mod = np.abs(np.fft.fft(x))[: n // 2]
    threshold = math.sqrt(math.log(1 / 0.05) * n)
    n0 = 0.95 * n / 2
    n1 = np.count_nonzero(mod < threshold)
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    return [erfc(abs(d) / math.sqrt(2))]


def non_overlapping_template(e, template=(0, 0, 0, 0, 0, 0, 0, 0, 1), blocks=8):
    m = len(template)
    big_m = len(e) // blocks
    mu = (big_m - m + 1) / 2**m
    var = big_m * (1 / 2**m - (2 * m - 1) / 2 ** (2 * m))
    tpl = list(template)
    chi2 = 0.0
    for j in range(blocks):
        block = list(e[j * big_m : (j + 1) * big_m])
        w, i = 0, 0
        while i <= big_m - m:
            if block[i : i + m] == tpl:
                w += 1
                i += m
            else:
                i += 1
        chi2 += (w - mu) ** 2 / var
    return [gammaincc(blocks / 2, chi2 / 2)]


def approximate_entropy(e, m=2):
    n = len(e)

    def phi(k):
        ext = np.concatenate([e, e[: k - 1]]) if k > 1 else e
        codes = np.zeros(n, dtype=np.int64)
        for j in range(k):
            codes = codes * 2 + ext[j : j + n]
        counts = np.bincount(codes, minlength=2**k)
        c = counts[counts > 0] / n
        return float(np.sum(c * np.log(c)))

    apen = phi(m) - phi(m + 1)
    chi2 = 2 * n * (math.log(2) - apen)
    return [gammaincc(2 ** (m - 1), chi2 / 2)]


def tdiv(a, b):
    """C integer division (truncates toward zero)."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def cusum_p(n, z):
    sqn = math.sqrt(n)
    s1 = sum(
        norm.cdf((4 * k + 1) * z / sqn) - norm.cdf((4 * k - 1) * z / sqn)
        for k in range(tdiv(tdiv(-n, z) + 1, 4), tdiv(tdiv(n, z) - 1, 4) + 1)
    )
    s2 = sum(
        norm.cdf((4 * k + 3) * z / sqn) - norm.cdf((4 * k + 1) * z / sqn)
        for k in range(tdiv(tdiv(-n, z) - 3, 4), tdiv(tdiv(n, z) - 1, 4) + 1)
    )
    return 1 - s1 + s2


def cumulative_sums(e):
    x = 2 * e - 1
    n = len(e)
    fwd = int(np.max(np.abs(np.cumsum(x))))
    bwd = int(np.max(np.abs(np.cumsum(x[::-1]))))
    return [cusum_p(n, fwd), cusum_p(n, bwd)]


def cycles(e):
    s = np.concatenate([[0], np.cumsum(2 * e - 1), [0]])
    zeros = np.flatnonzero(s == 0)
    return [s[a + 1 : b] for a, b in zip(zeros[:-1], zeros[1:])]


def random_excursions(e):
    cyc = cycles(e)
    j = len(cyc)
    if j < 500:
        return None
    out = []
    for x in (-4, -3, -2, -1, 1, 2, 3, 4):
        ax = abs(x)
        probs = [1 - 1 / (2 * ax)]
        probs += [1 / (4 * ax * ax) * (1 - 1 / (2 * ax)) ** (k - 1) for k in range(1, 5)]
        probs.append(1 / (2 * ax) * (1 - 1 / (2 * ax)) ** 4)
        visits = [int(np.count_nonzero(c == x)) for c in cyc]
        nu = [sum(1 for v in visits if v == k) for k in range(5)] + [sum(1 for v in visits if v >= 5)]
        chi2 = sum((nu[k] - j * probs[k]) ** 2 / (j * probs[k]) for k in range(6))
        out.append(gammaincc(2.5, chi2 / 2))
    return out


def random_excursions_variant(e):
    s = np.cumsum(2 * e - 1)
    j = len(cycles(e))
    if j < 500:
        return None
    out = []
    for x in list(range(-9, 0)) + list(range(1, 10)):
        xi = int(np.count_nonzero(s == x))
        out.append(erfc(abs(xi - j) / math.sqrt(2 * j * (4 * abs(x) - 2))))
    return out


TESTS = [
    ("Monobit Frequency", monobit),
    ("Runs", runs),
    ("Discrete Fourier Transform", dft),
    ("Non Overlapping Template", non_overlapping_template),
    ("Approximate Entropy", approximate_entropy),
    ("Cumulative Sums", cumulative_sums),
    ("Random Excursion", random_excursions),
    ("Random Excursion Variant", random_excursions_variant),
]

CASES = [(seed, 10_000) for seed in range(1, 21)] + [(seed, 1_000_000) for seed in (101, 102, 103)]


def main():
    cases = []
    for seed, n in CASES:
        e = splitmix64_bits(seed, n)
        results = {}
        for name, fn in TESTS:
            p = fn(e)
            results[name] = None if p is None else [float(v) for v in p]
        cases.append({"seed": seed, "n": n, "ones": int(e.sum()), "p_values": results})
    path = Path(__file__).with_name("nist_reference.json")
    path.write_text(json.dumps({"generator": "splitmix64, lsb first", "cases": cases}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {path}")


if __name__ == "__main__":
    main()
