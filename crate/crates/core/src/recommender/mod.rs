//! Personalized recipe recommendation.
//!
//! Ranking blends two signals: TF-IDF cosine similarity between a user's
//! health history and recipe descriptions ([`text`]), and an ALS matrix
//! factorization of the user x recipe rating matrix ([`factors`]). The blend
//! is then adjusted for BMI category, recent macro deficits and recently
//! skipped recipes, and every result carries sugar/carbohydrate warnings
//! ([`ranking`]).

pub mod bmi;
pub mod factors;
pub mod feedback;
pub mod ranking;
pub mod text;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::DietTag;
use crate::quantify::PlateReport;

pub use bmi::{compute_bmi, BmiCategory, BmiResult};
pub use factors::{fit_factors, FactorModel, FactorParams, RatingMatrix};
pub use feedback::ingest_feedback;
pub use ranking::{apply_warnings, hybrid_scores, recommend, warnings_for, HybridModel, Recommendation, RecommendInput, Warning};
pub use text::{cosine, tokenize, SparseVector, TfIdfModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,
    #[error("cannot fit a factor model without ratings")]
    EmptyRatings,
    #[error("no recipe satisfies the user's diet preference")]
    NoEligibleRecipes,
    #[error("height and weight must be positive (height {height_m} m, weight {weight_kg} kg)")]
    InvalidAnthropometrics { height_m: f64, weight_kg: f64 },
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("unknown recipe '{0}'")]
    UnknownRecipe(String),
    #[error("invalid rating: {0}")]
    InvalidRating(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Female => "female",
            Self::Male => "male",
            Self::Other => "other",
        })
    }
}

/// Star rating, 1 to 5 inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub const MIN: f64 = 1.0;
    pub const MAX: f64 = 5.0;

    pub fn new(value: i64) -> Result<Self, RecommendError> {
        if (1..=5).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(RecommendError::InvalidRating(format!("{value} is outside 1..=5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for Rating {
    type Error = RecommendError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

/// The editable part of a user profile. Meal history is appended separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileUpsert {
    pub user_id: String,
    pub height_m: f64,
    pub weight_kg: f64,
    pub gender: Gender,
    pub diet_pref: DietTag,
    #[serde(default)]
    pub health_history: String,
    pub sugar_limit_g: f64,
    pub carb_limit_g: f64,
}

impl ProfileUpsert {
    pub fn validate(&self) -> Result<(), RecommendError> {
        let bad = |m: &str| Err(RecommendError::InvalidProfile(m.to_string()));
        if self.user_id.trim().is_empty() {
            return bad("user_id must not be empty");
        }
        if !(self.height_m > 0.0 && self.height_m.is_finite()) || !(self.weight_kg > 0.0 && self.weight_kg.is_finite()) {
            return Err(RecommendError::InvalidAnthropometrics {
                height_m: self.height_m,
                weight_kg: self.weight_kg,
            });
        }
        if !(self.sugar_limit_g > 0.0) || !(self.carb_limit_g > 0.0) {
            return bad("sugar and carbohydrate limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealEntry {
    pub timestamp: DateTime<Utc>,
    pub report: PlateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub height_m: f64,
    pub weight_kg: f64,
    pub gender: Gender,
    pub diet_pref: DietTag,
    pub health_history: String,
    pub sugar_limit_g: f64,
    pub carb_limit_g: f64,
    #[serde(default)]
    pub meal_log: Vec<MealEntry>,
}

impl UserProfile {
    pub fn from_upsert(p: ProfileUpsert, meal_log: Vec<MealEntry>) -> Self {
        Self {
            user_id: p.user_id,
            height_m: p.height_m,
            weight_kg: p.weight_kg,
            gender: p.gender,
            diet_pref: p.diet_pref,
            health_history: p.health_history,
            sugar_limit_g: p.sugar_limit_g,
            carb_limit_g: p.carb_limit_g,
            meal_log,
        }
    }
}

/// Whether the user cooked a recommended recipe, and how it went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub user_id: String,
    pub recipe_id: String,
    pub tried: bool,
    #[serde(default)]
    pub rating: Option<Rating>,
    pub timestamp: DateTime<Utc>,
}

impl FeedbackEvent {
    pub fn validate(&self) -> Result<(), RecommendError> {
        match (self.tried, self.rating) {
            (true, None) => Err(RecommendError::InvalidRating("a tried recipe needs a rating".into())),
            (false, Some(_)) => Err(RecommendError::InvalidRating("an untried recipe cannot be rated".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub recipe_id: String,
    pub timestamp: DateTime<Utc>,
}

/// Daily macro intake targets in grams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroTargets {
    pub carbohydrates_g: f64,
    pub protein_g: f64,
    pub fat_g: f64,
}

/// Ranking knobs. Every weight is a default, not a measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommenderConfig {
    /// Content weight in the hybrid blend.
    pub alpha: f64,
    /// BMI calorie adjustment weight.
    pub gamma: f64,
    /// Deficiency boost weight.
    pub beta: f64,
    /// Penalty for recently skipped recipes.
    pub delta: f64,
    pub rank_k: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
    pub stop_words: Vec<String>,
    /// Keyed by gender (`female`, `male`, `other`). Placeholder values.
    pub daily_targets: BTreeMap<Gender, MacroTargets>,
    /// Users with fewer ratings get content-only scores.
    pub cold_start_min_ratings: usize,
    pub window_days: i64,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        let daily_targets = BTreeMap::from([
            (
                Gender::Female,
                MacroTargets {
                    carbohydrates_g: 230.0,
                    protein_g: 46.0,
                    fat_g: 60.0,
                },
            ),
            (
                Gender::Male,
                MacroTargets {
                    carbohydrates_g: 300.0,
                    protein_g: 56.0,
                    fat_g: 70.0,
                },
            ),
            (
                Gender::Other,
                MacroTargets {
                    carbohydrates_g: 265.0,
                    protein_g: 51.0,
                    fat_g: 65.0,
                },
            ),
        ]);
        Self {
            alpha: 0.5,
            gamma: 0.2,
            beta: 0.2,
            delta: 0.1,
            rank_k: 8,
            lambda: 0.1,
            iterations: 25,
            seed: 42,
            stop_words: Vec::new(),
            daily_targets,
            cold_start_min_ratings: 3,
            window_days: 7,
        }
    }
}

impl RecommenderConfig {
    pub fn factor_params(&self) -> FactorParams {
        FactorParams {
            rank: self.rank_k,
            lambda: self.lambda,
            iterations: self.iterations,
            seed: self.seed,
        }
    }
}
