//! Name-indexed strategies, so the CLI can pick an algorithm at run time.

use crate::chain::{ChainMode, DiagonalSandpileMode, FullSandpileMode, StabilizationEstimator};
use crate::engine::{RoundQueue, Shuffled, StackSingle, ToppleSchedule};
use crate::error::{Error, Result};

type Factory<T> = Box<dyn Fn(u64) -> Box<T> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Factory<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers `make` under `name`; the argument is a seed for strategies
    /// that need one. A later registration under the same name wins.
    pub fn register(
        &mut self,
        name: &'static str,
        make: impl Fn(u64) -> Box<T> + Send + Sync + 'static,
    ) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, Box::new(make)));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn create(&self, name: &str, seed: u64) -> Result<Box<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, make)| make(seed))
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown {} {name:?}; known: {}",
                    self.kind,
                    self.names().join(", ")
                ))
            })
    }
}

pub fn estimators() -> Registry<dyn StabilizationEstimator> {
    let mut r: Registry<dyn StabilizationEstimator> = Registry::new("mode");
    r.register("chain", |_| Box::new(ChainMode));
    r.register("sandpile", |_| Box::new(DiagonalSandpileMode));
    r.register("sandpile-full", |_| Box::new(FullSandpileMode));
    r
}

pub fn schedules() -> Registry<dyn ToppleSchedule> {
    let mut r: Registry<dyn ToppleSchedule> = Registry::new("schedule");
    r.register("rounds", |_| Box::new(RoundQueue));
    r.register("stack", |_| Box::new(StackSingle));
    r.register("shuffled", |seed| Box::new(Shuffled { seed }));
    r
}
