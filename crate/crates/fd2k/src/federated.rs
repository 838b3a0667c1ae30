//! The controller: hands out the initial global actor, and every `E` epochs
//! averages the uploaded actors and sends the result back.
//!
//! Actors cross the boundary only as serialized model files through a
//! [`ModelExchange`]; critics and replay memories have no way across.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::keygen::Party;
use crate::nn::{Activation, Mlp};

#[derive(Clone, Debug)]
pub struct Controller {
    global_actor: Mlp,
    round: u64,
    every: usize,
}

/// Creates the global actor from `seed` and returns the controller together
/// with independent copies for Alice and Bob.
pub fn init_and_distribute(actor_dims: &[usize], seed: u64, every: usize) -> Result<(Controller, Mlp, Mlp)> {
    if every == 0 {
        return Err(Error::config("aggregation interval E must be >= 1"));
    }
    let global = Mlp::new(actor_dims, Activation::Sigmoid, seed)?;
    let (a, b) = (global.clone(), global.clone());
    Ok((
        Controller {
            global_actor: global,
            round: 0,
            every,
        },
        a,
        b,
    ))
}

/// Whether epoch `epoch` (1-based) ends with an aggregation round.
pub fn should_aggregate(epoch: usize, every: usize) -> bool {
    every > 0 && epoch % every == 0
}

/// Elementwise mean of two actors.
pub fn aggregate(a: &Mlp, b: &Mlp) -> Result<Mlp> {
    if !a.congruent(b) {
        return Err(Error::Shape(format!(
            "cannot average actors with dims {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let mut out = a.clone();
    for (o, (x, y)) in out.params_mut().zip(a.params().zip(b.params())) {
        *o = (x + y) / 2.0;
    }
    Ok(out)
}

impl Controller {
    pub fn restore(global_actor: Mlp, round: u64, every: usize) -> Self {
        Self {
            global_actor,
            round,
            every,
        }
    }

    pub fn global_actor(&self) -> &Mlp {
        &self.global_actor
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn every(&self) -> usize {
        self.every
    }

    /// One aggregation round. Each party uploads its actor; the controller
    /// averages the uploads and publishes the new global actor, which both
    /// parties download in place of their online actors.
    pub fn run_round(&mut self, exchange: &mut dyn ModelExchange, alice: &mut Mlp, bob: &mut Mlp) -> Result<()> {
        let round = self.round + 1;
        exchange.upload(Party::Alice, round, &alice.to_bytes())?;
        exchange.upload(Party::Bob, round, &bob.to_bytes())?;

        let [ua, ub] = exchange.fetch_uploads(round)?;
        let (ua, ub) = (Mlp::from_bytes(&ua)?, Mlp::from_bytes(&ub)?);
        if !ua.congruent(&self.global_actor) || !ub.congruent(&self.global_actor) {
            return Err(Error::Shape("uploaded actor does not match the global actor".into()));
        }
        self.global_actor = aggregate(&ua, &ub)?;
        exchange.publish_global(round, &self.global_actor.to_bytes())?;

        *alice = Mlp::from_bytes(&exchange.download_global(Party::Alice, round)?)?;
        *bob = Mlp::from_bytes(&exchange.download_global(Party::Bob, round)?)?;
        self.round = round;
        Ok(())
    }
}

/// Transport for serialized actor models between parties and controller.
pub trait ModelExchange {
    fn upload(&mut self, from: Party, round: u64, model: &[u8]) -> Result<()>;
    fn fetch_uploads(&mut self, round: u64) -> Result<[Vec<u8>; 2]>;
    fn publish_global(&mut self, round: u64, model: &[u8]) -> Result<()>;
    fn download_global(&mut self, to: Party, round: u64) -> Result<Vec<u8>>;
}

fn party_slot(p: Party) -> Result<usize> {
    match p {
        Party::Alice => Ok(0),
        Party::Bob => Ok(1),
        Party::Eve => Err(Error::config("Eve does not take part in federation")),
    }
}

#[derive(Debug, Default)]
pub struct InMemoryExchange {
    uploads: HashMap<u64, [Option<Vec<u8>>; 2]>,
    globals: HashMap<u64, Vec<u8>>,
}

impl ModelExchange for InMemoryExchange {
    fn upload(&mut self, from: Party, round: u64, model: &[u8]) -> Result<()> {
        self.uploads.entry(round).or_default()[party_slot(from)?] = Some(model.to_vec());
        Ok(())
    }

    fn fetch_uploads(&mut self, round: u64) -> Result<[Vec<u8>; 2]> {
        match self.uploads.remove(&round) {
            Some([Some(a), Some(b)]) => Ok([a, b]),
            _ => Err(Error::config(format!("round {round}: both uploads required"))),
        }
    }

    fn publish_global(&mut self, round: u64, model: &[u8]) -> Result<()> {
        // only the latest global is kept
        self.globals.clear();
        self.globals.insert(round, model.to_vec());
        Ok(())
    }

    fn download_global(&mut self, _to: Party, round: u64) -> Result<Vec<u8>> {
        self.globals
            .get(&round)
            .cloned()
            .ok_or_else(|| Error::config(format!("no global model for round {round}")))
    }
}

/// Exchanges models through files in a spool directory:
/// `actor_{A|B}_round{k}.bin` for uploads and `global_round{k}.bin` for the
/// aggregated model.
#[derive(Debug, Clone)]
pub struct SpoolDirExchange {
    dir: PathBuf,
}

impl SpoolDirExchange {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn upload_path(&self, from: Party, round: u64) -> PathBuf {
        self.dir.join(format!("actor_{}_round{round}.bin", from.code()))
    }

    pub fn global_path(&self, round: u64) -> PathBuf {
        self.dir.join(format!("global_round{round}.bin"))
    }
}

impl ModelExchange for SpoolDirExchange {
    fn upload(&mut self, from: Party, round: u64, model: &[u8]) -> Result<()> {
        party_slot(from)?;
        std::fs::write(self.upload_path(from, round), model)?;
        Ok(())
    }

    fn fetch_uploads(&mut self, round: u64) -> Result<[Vec<u8>; 2]> {
        Ok([
            std::fs::read(self.upload_path(Party::Alice, round))?,
            std::fs::read(self.upload_path(Party::Bob, round))?,
        ])
    }

    fn publish_global(&mut self, round: u64, model: &[u8]) -> Result<()> {
        std::fs::write(self.global_path(round), model)?;
        Ok(())
    }

    fn download_global(&mut self, to: Party, round: u64) -> Result<Vec<u8>> {
        party_slot(to)?;
        Ok(std::fs::read(self.global_path(round))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mlp {
        let mut net = Mlp::new(&[1, 1], Activation::Sigmoid, 0).unwrap();
        net.params_mut().for_each(|p| *p = v);
        net
    }

    #[test]
    fn aggregation_schedule() {
        assert!(should_aggregate(5, 5));
        assert!(!should_aggregate(4, 5));
        assert!((1..20).all(|e| should_aggregate(e, 1)));
    }

    #[test]
    fn aggregate_is_mean() {
        assert_eq!(aggregate(&scalar(0.0), &scalar(2.0)).unwrap().to_flat(), vec![1.0, 1.0]);
        let x = Mlp::new(&[3, 4, 3], Activation::Sigmoid, 3).unwrap();
        assert_eq!(aggregate(&x, &x).unwrap(), x);
        assert_eq!(aggregate(&x, &aggregate(&x, &x).unwrap()).unwrap(), x);
    }

    #[test]
    fn aggregate_rejects_mismatched_shapes() {
        let a = Mlp::new(&[3, 3], Activation::Sigmoid, 0).unwrap();
        let b = Mlp::new(&[3, 4, 3], Activation::Sigmoid, 0).unwrap();
        assert!(aggregate(&a, &b).is_err());
    }

    #[test]
    fn distributed_copies_are_identical_and_independent() {
        let (ctl, mut a, b) = init_and_distribute(&[4, 5, 4], 42, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a, ctl.global_actor());
        let (_, a2, _) = init_and_distribute(&[4, 5, 4], 42, 5).unwrap();
        assert_eq!(a, a2);
        a.params_mut().for_each(|p| *p += 1.0);
        assert_ne!(a, b);
        assert_eq!(&b, ctl.global_actor());
    }

    #[test]
    fn in_memory_round_replaces_both_actors() {
        let (mut ctl, _, _) = init_and_distribute(&[1, 1], 0, 5).unwrap();
        let (mut a, mut b) = (scalar(0.0), scalar(2.0));
        ctl.run_round(&mut InMemoryExchange::default(), &mut a, &mut b).unwrap();
        assert_eq!(a, scalar(1.0));
        assert_eq!(b, scalar(1.0));
        assert_eq!(ctl.round(), 1);
    }

    #[test]
    fn spool_round_writes_named_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = SpoolDirExchange::new(dir.path()).unwrap();
        let (mut ctl, _, _) = init_and_distribute(&[1, 1], 0, 5).unwrap();
        let (mut a, mut b) = (scalar(0.0), scalar(4.0));
        ctl.run_round(&mut ex, &mut a, &mut b).unwrap();
        assert!(dir.path().join("actor_A_round1.bin").exists());
        assert!(dir.path().join("actor_B_round1.bin").exists());
        assert!(dir.path().join("global_round1.bin").exists());
        assert_eq!(a, scalar(2.0));
        assert_eq!(Mlp::load(dir.path().join("actor_B_round1.bin")).unwrap(), scalar(4.0));
    }
}
