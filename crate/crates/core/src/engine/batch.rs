use std::sync::Arc;

use rayon::prelude::*;

use super::Simulation;
use crate::error::{Result, SimError};
use crate::map::MapContext;
use crate::metrics::{Aggregate, MetricsReport};
use crate::routing::RouterKind;
use crate::scenario::{ScenarioConfig, SweepParam};

/// A validated scenario with its map built once for all seeds.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    config: ScenarioConfig,
    map: Arc<MapContext>,
}

impl PreparedScenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let map = Arc::new(config.map.build(config.mobility.office_area)?);
        Ok(PreparedScenario { config, map })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn map(&self) -> &Arc<MapContext> {
        &self.map
    }

    /// Same map, different router.
    pub fn with_router(&self, router: RouterKind) -> Self {
        let mut config = self.config.clone();
        config.routing.router = router;
        PreparedScenario {
            config,
            map: Arc::clone(&self.map),
        }
    }

    pub fn simulation(&self, seed: u64) -> Result<Simulation> {
        Simulation::from_config(&self.config, Arc::clone(&self.map), seed)
    }

    pub fn run(&self, seed: u64) -> Result<MetricsReport> {
        self.simulation(seed)?.run().map_err(|e| SimError::RunFailed {
            seed,
            source: Box::new(e),
        })
    }

    /// Runs every seed; results keep the order of `seeds`.
    pub fn run_batch(&self, seeds: &[u64], parallel: bool) -> Result<BatchResult> {
        if seeds.is_empty() {
            return Err(SimError::config("engine.seeds", "needs at least one seed"));
        }
        let one = |&seed: &u64| {
            self.run(seed).map_err(|e| match e {
                e @ SimError::RunFailed { .. } => e,
                other => SimError::RunFailed {
                    seed,
                    source: Box::new(other),
                },
            })
        };
        let reports: Vec<MetricsReport> = if parallel {
            seeds.par_iter().map(one).collect::<Result<_>>()?
        } else {
            seeds.iter().map(one).collect::<Result<_>>()?
        };
        Ok(BatchResult::new(reports))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub reports: Vec<MetricsReport>,
    pub aggregate: Aggregate,
}

impl BatchResult {
    pub fn new(reports: Vec<MetricsReport>) -> Self {
        let aggregate = Aggregate::from_reports(&reports);
        BatchResult { reports, aggregate }
    }
}

/// One run of `config` with `seed`.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<MetricsReport> {
    PreparedScenario::new(config.clone())?.run(seed)
}

/// All configured seeds of `config`.
pub fn run_batch(config: &ScenarioConfig, seeds: &[u64]) -> Result<BatchResult> {
    PreparedScenario::new(config.clone())?.run_batch(seeds, config.engine.parallel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub router: RouterKind,
    pub batch: BatchResult,
}

/// One batch per (value, router); other parameters stay at `base`.
pub fn sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[String],
    routers: &[RouterKind],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(SimError::config("sweep.values", "needs at least one value"));
    }
    if routers.is_empty() {
        return Err(SimError::config("sweep.routers", "needs at least one router"));
    }
    let mut rows = Vec::with_capacity(values.len() * routers.len());
    for value in values {
        let cfg = param.apply(base, value)?;
        let prepared = PreparedScenario::new(cfg)?;
        for &router in routers {
            let batch = prepared
                .with_router(router)
                .run_batch(seeds, base.engine.parallel)?;
            rows.push(SweepRow {
                value: value.clone(),
                router,
                batch,
            });
        }
    }
    Ok(rows)
}
