//! Generates keys on fresh readings with trained actors and compares Alice's
//! agreement with Bob against an eavesdropper who holds Bob's actor but not
//! his signal.
//!
//!     cargo run --example evaluate_keys -- [models_dir] [episodes]
//!
//! Without a models directory, trains briefly first.

use fd2k::config::RunConfig;
use fd2k::eval::{summarize, Evaluator};
use fd2k::nn::Mlp;
use fd2k::training::Trainer;

fn main() -> fd2k::Result<()> {
    let mut args = std::env::args().skip(1);
    let models = args.next();
    let episodes: usize = args.next().map_or(Ok(5), |s| s.parse()).expect("episodes must be an integer");
    let cfg = RunConfig::default();

    let (alice_actor, bob_actor) = match models {
        Some(dir) => (
            Mlp::load(format!("{dir}/actor_A.bin"))?,
            Mlp::load(format!("{dir}/actor_B.bin"))?,
        ),
        None => {
            println!("no models given; training 150 epochs");
            let mut train = cfg.train.clone();
            train.e_max = 150;
            let mut trainer = Trainer::new(train, cfg.build_env()?, cfg.seed)?;
            trainer.train(|_, _| Ok(()))?;
            let [a, b] = trainer.agents();
            (a.actor.clone(), b.actor.clone())
        }
    };

    let evaluator = Evaluator {
        alice_actor,
        bob_actor,
        scenario: cfg.scenario.clone(),
        config: cfg.eval_config(),
    };
    let reports = evaluator.synthetic_episodes(&cfg.synth, 1000, episodes)?;
    let s = summarize(&reports)?;
    println!("episodes {}", s.episodes);
    println!("ts   KAR(A,B)  KAR(A,E)");
    for (t, (ab, ae)) in s.kar_ab.iter().zip(&s.kar_ae).enumerate() {
        println!("{:>2}   {ab:.3}     {ae:.3}", t + 1);
    }
    println!("mean gap {:.3}, mean KAR(A,B) {:.3}", s.mean_gap, s.mean_kar_ab);
    println!("mask utilization A {:.3} B {:.3}", s.mask_utilization.alice, s.mask_utilization.bob);
    println!("first keys of episode 1:");
    for (a, e) in reports[0].keys_of(fd2k::keygen::Party::Alice).iter().zip(reports[0].keys_of(fd2k::keygen::Party::Eve)).take(3) {
        println!("  A {}\n  E {}", a.bit_string(), e.bit_string());
    }
    Ok(())
}
