//! Trains Alice's and Bob's agents with actor averaging every `E` epochs and
//! saves the actors.
//!
//!     cargo run --example train_federated -- [epochs] [out_dir]
//!
//! A few hundred epochs are enough to watch the reward climb; the full
//! schedule is 3000.

use fd2k::config::RunConfig;
use fd2k::training::Trainer;

fn main() -> fd2k::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(Ok(200), |s| s.parse()).expect("epochs must be an integer");
    let out = args.next().unwrap_or_else(|| "fd2k-out/models".into());

    let mut cfg = RunConfig::default();
    cfg.train.e_max = epochs;
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.build_env()?, cfg.seed)?;
    println!("epoch  reward/step  KAR    mask   noise");
    let metrics = trainer.train(|m, _| {
        if m.epoch % 20 == 0 || m.epoch == 1 {
            println!(
                "{:>5}  {:>11.3}  {:.3}  {:.3}  {:.3}",
                m.epoch,
                m.mean_reward(),
                m.mean_kar,
                m.mask_utilization,
                m.noise_scale
            );
        }
        Ok(())
    })?;
    let window = metrics.len().min(20);
    let tail = &metrics[metrics.len() - window..];
    println!(
        "mean reward/step over the last {window} epochs: {:.3}",
        tail.iter().map(|m| m.mean_reward()).sum::<f64>() / window as f64
    );
    println!("{} federated rounds", trainer.controller().round());
    trainer.save_checkpoint(&out)?;
    println!("actors saved to {out}");
    Ok(())
}
