use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{cross_validate, TrainConfig};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::eval::TaskSpec;
use crate::model::{bounds, LayerSpec, ModelConfig};
use crate::rng::{Prng, Stream};

/// Inclusive integer range sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub const fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: usize) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut Prng) -> usize {
        rng.int_inclusive(self.lo, self.hi)
    }

    fn within(&self, outer: &core::ops::RangeInclusive<usize>) -> bool {
        self.lo <= self.hi && outer.contains(&self.lo) && outer.contains(&self.hi)
    }
}

/// Topology ranges. Per-layer lists give the range for each conv or hidden
/// dense position; positions past the end reuse the last entry. Convs use
/// stride 1; a 2x2/2 max-pool follows every conv when pooling is chosen;
/// hidden dense layers carry dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub conv_layers: IntRange,
    pub use_maxpool: Vec<bool>,
    pub filters: Vec<IntRange>,
    pub kernel: Vec<IntRange>,
    pub fc_layers: IntRange,
    pub fc_size: Vec<IntRange>,
    pub input_size: IntRange,
    /// Candidates with more trainable parameters are rejected.
    pub max_params: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let r = |b: core::ops::RangeInclusive<usize>| IntRange::new(*b.start(), *b.end());
        Self {
            conv_layers: r(bounds::CONV_LAYERS),
            use_maxpool: vec![false, true],
            filters: vec![r(bounds::FILTERS)],
            kernel: vec![r(bounds::KERNEL)],
            fc_layers: r(bounds::FC_LAYERS),
            fc_size: vec![r(bounds::FC_SIZE)],
            input_size: r(bounds::INPUT_SIZE),
            max_params: 50_000_000,
        }
    }
}

fn at(list: &[IntRange], i: usize) -> IntRange {
    list[i.min(list.len() - 1)]
}

impl SearchSpace {
    /// A space containing exactly one topology, the one of `config`, which
    /// must follow the search grammar.
    pub fn pinned(config: &ModelConfig) -> Result<Self> {
        config.check_search_bounds()?;
        let mut filters = Vec::new();
        let mut kernel = Vec::new();
        let mut fc_size = Vec::new();
        let mut pools = 0;
        let last = config.layers.len() - 1;
        for (i, l) in config.layers.iter().enumerate() {
            match *l {
                LayerSpec::Conv {
                    filters: f,
                    kernel: k,
                    stride: 1,
                } => {
                    filters.push(IntRange::fixed(f));
                    kernel.push(IntRange::fixed(k));
                }
                LayerSpec::MaxPool {
                    window: 2,
                    stride: 2,
                } => pools += 1,
                LayerSpec::Flatten => {}
                LayerSpec::Dense {
                    units,
                    dropout: true,
                } if i != last => fc_size.push(IntRange::fixed(units)),
                LayerSpec::Dense { .. } if i == last => {}
                other => {
                    return Err(Error::Search(format!(
                        "layer {i} ({other}) is outside the search grammar"
                    )))
                }
            }
        }
        if pools != 0 && pools != filters.len() {
            return Err(Error::Search(
                "pooling must follow every conv layer or none".into(),
            ));
        }
        let space = Self {
            conv_layers: IntRange::fixed(filters.len()),
            use_maxpool: vec![pools != 0],
            filters,
            kernel,
            fc_layers: IntRange::fixed(fc_size.len()),
            fc_size,
            input_size: IntRange::fixed(config.input_size),
            max_params: usize::MAX,
        };
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.conv_layers.within(&bounds::CONV_LAYERS)
            && self.fc_layers.within(&bounds::FC_LAYERS)
            && self.input_size.within(&bounds::INPUT_SIZE)
            && !self.use_maxpool.is_empty()
            && !self.filters.is_empty()
            && self.filters.iter().all(|r| r.within(&bounds::FILTERS))
            && !self.kernel.is_empty()
            && self.kernel.iter().all(|r| r.within(&bounds::KERNEL))
            && !self.fc_size.is_empty()
            && self.fc_size.iter().all(|r| r.within(&bounds::FC_SIZE));
        if ok {
            Ok(())
        } else {
            Err(Error::Search(
                "search space exceeds the admissible ranges or is empty".into(),
            ))
        }
    }
}

/// Draws one configuration uniformly from `space`. The result may still have
/// an invalid shape chain or too many parameters; [`topology_search`]
/// rejects those.
pub fn sample_config(
    space: &SearchSpace,
    num_classes: usize,
    rng: &mut Prng,
) -> Result<ModelConfig> {
    space.validate()?;
    let input_size = space.input_size.sample(rng);
    let convs = space.conv_layers.sample(rng);
    let pool = space.use_maxpool[rng.below(space.use_maxpool.len())];
    let mut layers = Vec::new();
    for i in 0..convs {
        let filters = at(&space.filters, i).sample(rng);
        let kernel = at(&space.kernel, i).sample(rng);
        layers.push(LayerSpec::Conv {
            filters,
            kernel,
            stride: 1,
        });
        if pool {
            layers.push(LayerSpec::MaxPool {
                window: 2,
                stride: 2,
            });
        }
    }
    layers.push(LayerSpec::Flatten);
    for i in 0..space.fc_layers.sample(rng) {
        layers.push(LayerSpec::Dense {
            units: at(&space.fc_size, i).sample(rng),
            dropout: true,
        });
    }
    layers.push(LayerSpec::Dense {
        units: num_classes,
        dropout: false,
    });
    Ok(ModelConfig {
        input_size,
        layers,
        num_classes,
        seed: 0,
        sharpen: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub config: ModelConfig,
    pub params: usize,
    pub mean: f64,
    pub folds: Vec<f64>,
}

/// Rejected draws allowed per requested candidate.
const REJECTION_LIMIT: usize = 1000;

/// Samples `budget` admissible topologies, scores each by k-fold
/// cross-validation with `tc` held fixed and returns them best first; equal
/// scores are ordered by parameter count, smaller first.
pub fn topology_search(
    space: &SearchSpace,
    tc: &TrainConfig,
    samples: &[Sample],
    task: TaskSpec,
    budget: usize,
    seed: u64,
    k: usize,
) -> Result<Vec<SearchResult>> {
    if budget == 0 {
        return Err(Error::Search("budget must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = Prng::substream(seed, Stream::Search, 0);
    let mut results = Vec::with_capacity(budget);
    for candidate in 0..budget {
        let mut tries = 0;
        let (config, params) = loop {
            if tries == REJECTION_LIMIT {
                return Err(Error::Search(format!(
                    "no admissible topology found in {REJECTION_LIMIT} draws"
                )));
            }
            tries += 1;
            let cfg = sample_config(space, task.num_classes(), &mut rng)?
                .with_seed(seed.wrapping_add(candidate as u64));
            if cfg.check_search_bounds().is_err() {
                continue;
            }
            match cfg.param_count() {
                Ok(n) if n <= space.max_params => break (cfg, n),
                _ => continue,
            }
        };
        let cv = cross_validate(&config, tc, samples, task, k)?;
        results.push(SearchResult {
            config,
            params,
            mean: cv.mean,
            folds: cv.folds,
        });
    }
    results.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.params.cmp(&b.params)));
    Ok(results)
}
