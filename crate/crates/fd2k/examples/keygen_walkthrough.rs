//! One time step of key generation by hand: actor outputs become a feature
//! mask, the mask selects samples, and each selected sample yields 1 when it
//! did not fall.

use fd2k::keygen::{binarize, generate_key, kar, reward, Party};
use fd2k::signal::SignalFrame;

fn main() -> fd2k::Result<()> {
    let alice = SignalFrame {
        ts_index: 2,
        values: vec![51.2, 51.5, 51.4, 51.4, 51.9, 51.7, 51.8, 52.0],
    };
    // Bob reads the same dynamics with his own offset and gain
    let bob = SignalFrame {
        ts_index: 2,
        values: alice.values.iter().map(|v| 0.8 * v - 3.0).collect(),
    };
    let (prev_a, prev_b) = (51.0, 0.8 * 51.0 - 3.0);

    let out_a = [0.91, 0.62, 0.48, 0.77, 0.55, 0.12, 0.93, 0.50];
    let out_b = [0.88, 0.71, 0.52, 0.69, 0.60, 0.08, 0.97, 0.49];
    let (mask_a, mask_b) = (binarize(&out_a, 0.5), binarize(&out_b, 0.5));
    let key_a = generate_key(&alice, &mask_a, Some(prev_a), Party::Alice)?;
    let key_b = generate_key(&bob, &mask_b, Some(prev_b), Party::Bob)?;

    let show = |b: &[u8]| b.iter().map(|x| char::from(b'0' + x)).collect::<String>();
    println!("mask A  {}", show(mask_a.bits()));
    println!("mask B  {}", show(mask_b.bits()));
    println!("key  A  {}", key_a.bit_string());
    println!("key  B  {}", key_b.bit_string());
    println!("KAR {:.3}  reward {:.3}", kar(&key_a, &key_b)?, reward(&key_a, &key_b, &mask_a, &mask_b)?);

    // agreeing on every position and selecting all of them earns the maximum of 2
    let all = binarize(&[1.0; 8], 0.5);
    let ka = generate_key(&alice, &all, Some(prev_a), Party::Alice)?;
    let kb = generate_key(&bob, &all, Some(prev_b), Party::Bob)?;
    println!("full masks: key {}  reward {:.3}", ka.bit_string(), reward(&ka, &kb, &all, &all)?);
    Ok(())
}
