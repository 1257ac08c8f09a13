//! Tabular two-player zero-sum average-reward stochastic games: exact
//! evaluation, maximin planning, optimistic learning with confidence regions,
//! opponent strategies, structural diagnostics and instance generation.

pub mod confidence;
pub mod diagnostics;
pub mod envgen;
pub mod exec;
pub mod matgame;
pub mod opponents;
pub mod planning;
pub mod sg;
pub mod ucsg;
