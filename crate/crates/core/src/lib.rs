//! Food-plate analysis and personalized recipe recommendation.
//!
//! The crate is organised along the processing pipeline:
//!
//! * [`reference`] finds the reference coin in an overhead photo and derives the
//!   millimeter-per-pixel calibration.
//! * [`detections`] ingests detector output and scores it against ground truth.
//! * [`catalog`] holds the per-100 g nutrition table and the recipe catalog.
//! * [`quantify`] turns calibrated boxes into volumes, grams and nutrients.
//! * [`recommender`] ranks recipes with TF-IDF content matching, an ALS factor
//!   model, BMI and meal-history adjustments, and threshold warnings.
//! * [`store`] is the append-only event log behind profiles, meals and feedback.
//! * [`engine`] ties the store, catalogs and fitted models together for the
//!   service and the CLI.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod catalog;
pub mod config;
pub mod detections;
pub mod engine;
pub mod error;
pub mod quantify;
pub mod recommender;
pub mod reference;
pub mod store;

pub use catalog::{Catalog, DietTag, FoodClassSpec, NutrientProfile, Recipe, RecipeBook};
pub use config::Config;
pub use detections::{BoundingBox, Detection, GroundTruthBox};
pub use engine::Engine;
pub use error::ErrorCode;
pub use quantify::{PlateReport, QuantifiedFood, QuantifierConfig};
pub use reference::{HsvRange, ReferenceMeasurement, ReferenceSpec, RgbImage};
