//! Stable matching games with friendship utilities and unequal reward sharing,
//! together with the convex contribution games built on top of them.
//!
//! Everything is computed in exact rational arithmetic. Exhaustive oracles
//! (optimum, stable-set enumeration, price of anarchy and stability) provide
//! ground truth for instances of desk scale.

pub mod ccg;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod generators;
pub mod instance;
pub mod matching;
pub mod oracle;
pub mod rational;
pub mod roommates;

pub use error::{Error, Result};
pub use instance::{EdgeId, FriendshipVector, GameInstance, Graph, NodeId, SharingRule};
pub use matching::{Deviation, DeviationKind, Matching};
pub use rational::{rat, Rational};
