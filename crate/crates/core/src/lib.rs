//! Typed area-of-interest extraction and behavioral enrichment for SERP
//! eye-tracking trials.
//!
//! Geometry comes from the screenshot raster (segmentation), labels come
//! from the saved HTML (labeler), and the two are joined by document order
//! (binder). The gap-fill flavor extends adjacent organics to their shared
//! midpoint. Clicks and fixations are attributed against the resulting boxes
//! and rolled up into corpus-level inventories and audits.

pub mod attribution;
pub mod binder;
pub mod config;
pub mod emit;
pub mod error;
pub mod gapfill;
pub mod ingest;
pub mod inventory;
pub mod labeler;
pub mod model;
pub mod pipeline;
pub mod rules;
pub mod segmentation;
pub mod synth;
pub mod trial;

pub use error::{Error, Result};
