//! Experiment runner.
