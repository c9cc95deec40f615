//! Core algorithms for all-or-nothing (simultaneous-progressing) link
//! arbitration on real-time network-on-chips.
//!
//! A *flow* periodically injects messages of `C` flits that must traverse a
//! fixed path of `eta` directed links. Under the SP² discipline a message
//! transmits on **every** link of its path in a cycle or on **none** of them,
//! which pins the per-message pipeline latency to `C + eta - 1` cycles and
//! turns indirect link contention into self-suspension, analyzable with
//! uniprocessor response-time techniques.
//!
//! The crate is split along those lines:
//!
//! * [`topology`] — mesh construction and dimension-ordered routing,
//! * [`flowset`] — flows, contention sets (`share`, `share¹`, suspension set),
//! * [`progression`] — exhaustive buffer-state oracle for a single message,
//! * [`sim`] — cycle-accurate fixed-priority SP² simulator and trace checker,
//! * [`rta`] — suspension-aware and baseline response-time analyses.
//!
//! Everything here is `no_std` (with `alloc`) and pure: all inputs are
//! immutable values, all randomness is seeded explicitly.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod flowset;
pub mod progression;
pub mod rta;
pub mod sim;
pub mod topology;

pub use flowset::{Flow, FlowId, FlowSet};
pub use topology::{Link, LinkId, NodeId, Path, Topology};
