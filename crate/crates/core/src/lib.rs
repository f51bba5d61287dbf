//! Minute-ventilation estimation workbench: a synthetic wearable-signal
//! cohort, a small reverse-mode autodiff engine, VGG-style 1-D regressors,
//! one-shot magnitude pruning with sparse skip rewiring, and the statistics
//! used to compare the dense and pruned models.

pub mod autodiff;
pub mod graph;
pub mod pruning;
pub mod stats;
pub mod synth;
pub mod trainer;

pub(crate) mod crc;
pub mod kv;
