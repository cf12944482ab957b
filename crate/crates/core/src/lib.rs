#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;

pub mod ambiguity;
pub mod backtest;
pub mod bayes;
pub mod error;
pub mod learning;
pub mod model;
pub mod numerics;
pub mod precommit;
pub mod twopoint;

pub use error::{Error, Result};
pub use model::{FractionResult, MarketModel, Preferences, StrategyQuery};
pub use twopoint::TwoPointModel;
