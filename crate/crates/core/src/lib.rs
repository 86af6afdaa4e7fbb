//! Simulation and control of energy-harvesting virtualized small cells
//! that switch between functional splits (PHY-RF, MAC-PHY) or turn off.
//!
//! * [`env`] steps the network one slot at a time.
//! * [`nn`] is the dense Q-network and its SGD-with-momentum trainer.
//! * [`agents`] holds the per-cell DQN agent and the tabular Q-learning benchmark.
//! * [`bound`] computes the offline dynamic-programming bound.
//! * [`harness`] runs training, evaluation and the cost analysis.

pub mod agents;
pub mod bound;
pub mod env;
pub mod harness;
pub mod nn;
pub mod rng;
