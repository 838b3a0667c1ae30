//! Runs the actor exchange through files, the way two devices and a
//! controller would share a directory, and lists what crossed.

use fd2k::config::RunConfig;
use fd2k::federated::SpoolDirExchange;
use fd2k::nn::Mlp;
use fd2k::training::Trainer;

fn main() -> fd2k::Result<()> {
    let spool = std::env::temp_dir().join(format!("fd2k-spool-{}", std::process::id()));
    let mut cfg = RunConfig::default();
    cfg.train.e_max = 10;
    let mut trainer =
        Trainer::new(cfg.train.clone(), cfg.build_env()?, cfg.seed)?.with_exchange(Box::new(SpoolDirExchange::new(&spool)?));
    trainer.train(|_, _| Ok(()))?;

    let mut entries: Vec<_> = std::fs::read_dir(&spool)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    println!("{}", spool.display());
    for entry in &entries {
        let net = Mlp::load(entry.path())?;
        println!(
            "  {:<22} {:>7} bytes  dims {:?}",
            entry.file_name().to_string_lossy(),
            entry.metadata()?.len(),
            net.dims()
        );
    }
    // training ends on a round, so both agents hold the last published actor
    let global = Mlp::load(entries.last().expect("spool not empty").path())?;
    let [a, b] = trainer.agents();
    println!("both actors equal the last global: {}", a.actor == global && b.actor == global);
    std::fs::remove_dir_all(&spool)?;
    Ok(())
}
