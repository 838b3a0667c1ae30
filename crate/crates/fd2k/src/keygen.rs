//! Feature masks, differential key bits, key agreement and the step reward.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::signal::SignalFrame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

impl Party {
    pub fn code(self) -> char {
        match self {
            Party::Alice => 'A',
            Party::Bob => 'B',
            Party::Eve => 'E',
        }
    }

    pub fn from_code(c: &str) -> Result<Self> {
        match c {
            "A" => Ok(Party::Alice),
            "B" => Ok(Party::Bob),
            "E" => Ok(Party::Eve),
            other => Err(Error::config(format!("unknown key owner `{other}`"))),
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Binary mask marking which samples of a frame feed key bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMask {
    bits: Vec<u8>,
}

impl FeatureMask {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::config("mask bits must be 0 or 1"));
        }
        Ok(Self { bits })
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

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Key {
    pub bits: Vec<u8>,
    pub owner: Party,
    pub ts_index: usize,
}

impl Key {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }
}

/// `owner,ts_index,bits`, e.g. `A,3,0110`.
impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.owner, self.ts_index, self.bit_string())
    }
}

impl FromStr for Key {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut parts = line.trim().splitn(3, ',');
        let (Some(owner), Some(ts), Some(bits)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::config(format!("malformed key line `{line}`")));
        };
        let ts_index = ts
            .parse()
            .map_err(|_| Error::config(format!("bad time step `{ts}` in key line")))?;
        let bits = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::config(format!("bad key bit `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Key {
            bits,
            owner: Party::from_code(owner)?,
            ts_index,
        })
    }
}

/// Bit `m` is set iff `action[m] >= lambda`.
pub fn binarize(action: &[f64], lambda: f64) -> FeatureMask {
    FeatureMask {
        bits: action.iter().map(|&a| u8::from(a >= lambda)).collect(),
    }
}

/// Differential key bits of one time step.
///
/// Bit `m` is 1 iff the mask selects `m` and the signal did not fall,
/// `P(m) >= P(m - 1)`. For the first sample the predecessor is `prev_sample`,
/// the last sample of the previous time step; without one (first time step)
/// the sample is compared with itself and the comparison holds.
pub fn generate_key(
    frame: &SignalFrame,
    mask: &FeatureMask,
    prev_sample: Option<f64>,
    owner: Party,
) -> Result<Key> {
    check_len("feature mask", frame.len(), mask.len())?;
    let values = &frame.values;
    let bits = values
        .iter()
        .enumerate()
        .zip(mask.bits())
        .map(|((m, &p), &selected)| {
            let before = if m == 0 {
                prev_sample.unwrap_or(p)
            } else {
                values[m - 1]
            };
            u8::from(selected == 1 && p >= before)
        })
        .collect();
    Ok(Key {
        bits,
        owner,
        ts_index: frame.ts_index,
    })
}

/// Fraction of positions where the two bit strings agree.
pub fn kar_bits(x: &[u8], y: &[u8]) -> Result<f64> {
    check_len("key", x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::config("cannot compare empty keys"));
    }
    let differing = x.iter().zip(y).filter(|(a, b)| a != b).count();
    Ok(1.0 - differing as f64 / x.len() as f64)
}

pub fn kar(x: &Key, y: &Key) -> Result<f64> {
    kar_bits(&x.bits, &y.bits)
}

/// Step reward: KAR plus, only when the keys agree completely, the mean mask
/// utilization of both parties. Lies in `[0, 2]`.
pub fn reward(key_a: &Key, key_b: &Key, mask_a: &FeatureMask, mask_b: &FeatureMask) -> Result<f64> {
    let m = key_a.len();
    check_len("key", m, key_b.len())?;
    check_len("feature mask", m, mask_a.len())?;
    check_len("feature mask", m, mask_b.len())?;
    let agreement = kar(key_a, key_b)?;
    let bonus = if agreement == 1.0 {
        (mask_a.ones() + mask_b.ones()) as f64 / (2 * m) as f64
    } else {
        0.0
    };
    Ok(agreement + bonus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: &[f64]) -> SignalFrame {
        SignalFrame {
            ts_index: 1,
            values: values.to_vec(),
        }
    }

    fn mask(bits: &[u8]) -> FeatureMask {
        FeatureMask::from_bits(bits.to_vec()).unwrap()
    }

    fn key(bits: &[u8]) -> Key {
        Key {
            bits: bits.to_vec(),
            owner: Party::Alice,
            ts_index: 1,
        }
    }

    #[test]
    fn binarize_includes_threshold() {
        assert_eq!(binarize(&[0.5, 0.49], 0.5).bits(), &[1, 0]);
        assert_eq!(binarize(&[0.0; 4], 0.5).bits(), &[0; 4]);
        assert_eq!(binarize(&[1.0; 4], 0.5).bits(), &[1; 4]);
    }

    #[test]
    fn first_step_compares_first_sample_with_itself() {
        let k = generate_key(&frame(&[1.0, 2.0, 3.0]), &mask(&[1, 1, 1]), None, Party::Alice).unwrap();
        assert_eq!(k.bits, vec![1, 1, 1]);
    }

    #[test]
    fn previous_sample_feeds_first_bit() {
        let k = generate_key(&frame(&[3.0, 2.0, 5.0]), &mask(&[1, 1, 1]), Some(4.0), Party::Bob).unwrap();
        assert_eq!(k.bits, vec![0, 0, 1]);
    }

    #[test]
    fn empty_mask_gives_zero_key() {
        let k = generate_key(&frame(&[1.0, 5.0, 9.0]), &mask(&[0, 0, 0]), Some(0.0), Party::Alice).unwrap();
        assert_eq!(k.bits, vec![0, 0, 0]);
    }

    #[test]
    fn ties_yield_one() {
        let k = generate_key(&frame(&[2.0, 2.0]), &mask(&[1, 1]), Some(2.0), Party::Alice).unwrap();
        assert_eq!(k.bits, vec![1, 1]);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(generate_key(&frame(&[1.0, 2.0]), &mask(&[1]), None, Party::Alice).is_err());
        assert!(kar(&key(&[1, 0]), &key(&[1])).is_err());
    }

    #[test]
    fn kar_cases() {
        assert_eq!(kar(&key(&[1, 0, 1, 1]), &key(&[1, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(kar(&key(&[1, 0, 1, 1]), &key(&[0, 1, 0, 0])).unwrap(), 0.0);
        assert_eq!(kar(&key(&[1, 0, 1, 1]), &key(&[1, 0, 0, 1])).unwrap(), 0.75);
    }

    #[test]
    fn reward_cases() {
        let k = key(&[1, 0, 1, 0]);
        let r = reward(&k, &k, &mask(&[1, 1, 0, 0]), &mask(&[1, 0, 0, 0])).unwrap();
        assert_eq!(r, 1.375);

        let r = reward(&k, &key(&[1, 0, 1, 1]), &mask(&[1; 4]), &mask(&[1; 4])).unwrap();
        assert_eq!(r, 0.75);

        let r = reward(&k, &k, &mask(&[1; 4]), &mask(&[1; 4])).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn key_line_round_trip() {
        let k = Key {
            bits: vec![0, 1, 1, 0],
            owner: Party::Eve,
            ts_index: 17,
        };
        assert_eq!(k.to_string(), "E,17,0110");
        assert_eq!("E,17,0110".parse::<Key>().unwrap(), k);
        assert!("Z,1,01".parse::<Key>().is_err());
        assert!("A,1,012".parse::<Key>().is_err());
    }
}
