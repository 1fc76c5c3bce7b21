//! Simulation-in-the-loop adaptive genetic algorithm.
//!
//! Crossover and mutation probabilities shrink for pairs whose fitness is
//! above the generation average, so good individuals are disturbed less
//! while weak ones keep exploring.

mod ga;
mod operators;
mod space;

pub use ga::{run_saga, GenerationRecord, PairRecord, SagaConfig, SagaResult};
pub use operators::{
    adaptive_probability, crossover, crossover_at, mutation, selection, selection_probabilities,
};
pub use space::{ParameterBounds, ParameterCombination, ParameterSpace};
