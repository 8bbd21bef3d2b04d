//! Decoy-augmented protein-ligand corpus construction and contrastive
//! pretraining of a small invariant graph encoder.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod element;
pub mod encoder;
pub mod geometry;
pub mod gradcheck;
pub mod graph;
pub mod objective;
pub mod trainer;
pub mod rng;
pub mod store;
pub mod autodiff;
pub mod curation;
pub mod decoys;
pub mod structure;
pub mod synthetic;
