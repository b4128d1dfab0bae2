//! Hybrid scoring and the full recommendation pipeline.

use std::cmp::Ordering;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::bmi::{compute_bmi, BmiCategory};
use super::factors::FactorModel;
use super::text::TfIdfModel;
use super::{RecommendError, RecommenderConfig, SkipRecord, UserProfile};
use crate::catalog::{Recipe, RecipeBook};

const RATIONALE_TERMS: usize = 3;

/// Fitted content and collaborative models over one recipe book.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    /// Recipe ids in the order of the TF-IDF documents.
    pub recipe_ids: Vec<String>,
    pub tfidf: TfIdfModel,
    /// `None` until at least one rating exists.
    pub factors: Option<FactorModel>,
}

impl HybridModel {
    pub fn fit_content(recipes: &RecipeBook, cfg: &RecommenderConfig) -> Result<Self, RecommendError> {
        let docs: Vec<&str> = recipes.recipes().iter().map(|r| r.description.as_str()).collect();
        let stop_words = cfg.stop_words.iter().map(|s| s.to_lowercase()).collect();
        Ok(Self {
            recipe_ids: recipes.recipes().iter().map(|r| r.id.clone()).collect(),
            tfidf: TfIdfModel::fit(&docs, &stop_words)?,
            factors: None,
        })
    }

    pub fn with_factors(mut self, factors: Option<FactorModel>) -> Self {
        self.factors = factors;
        self
    }

    fn doc_index(&self, recipe_id: &str) -> Option<usize> {
        self.recipe_ids.binary_search_by(|id| id.as_str().cmp(recipe_id)).ok()
    }

    /// Cosine similarity of the user's health history to each recipe.
    pub fn content_scores(&self, profile: &UserProfile) -> Vec<f64> {
        self.tfidf.similarities(&profile.health_history)
    }

    pub fn collab_score(&self, user_id: &str, recipe_id: &str) -> f64 {
        self.factors.as_ref().map_or(0.0, |f| f.predict(user_id, recipe_id))
    }

    /// Highest-weight vocabulary terms shared by the history and the recipe.
    pub fn rationale_terms(&self, profile: &UserProfile, recipe_id: &str) -> Vec<String> {
        let Some(doc) = self.doc_index(recipe_id).map(|i| &self.tfidf.doc_vectors[i]) else {
            return Vec::new();
        };
        let query = self.tfidf.transform(&profile.health_history);
        let mut shared: Vec<(usize, f64)> = query
            .0
            .iter()
            .filter_map(|&(t, w)| doc.0.iter().find(|(d, _)| *d == t).map(|&(_, dw)| (t, w * dw)))
            .collect();
        shared.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        shared
            .into_iter()
            .take(RATIONALE_TERMS)
            .filter_map(|(t, _)| self.tfidf.term(t).map(str::to_string))
            .collect()
    }
}

/// Min-max scaling to `[0, 1]`; a constant input maps to all zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// `alpha * content + (1 - alpha) * collab` after min-max normalizing each
/// family over the candidates.
pub fn hybrid_scores(content: &[f64], collab: &[f64], alpha: f64) -> Vec<f64> {
    let c = min_max(content);
    let f = min_max(collab);
    c.iter().zip(&f).map(|(c, f)| alpha * c + (1.0 - alpha) * f).collect()
}

/// Orders by score descending, then recipe id ascending.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    /// `sugar` or `carbohydrates`.
    pub nutrient: String,
    pub amount_g: f64,
    pub limit_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub recipe_id: String,
    pub score: f64,
    pub warnings: Vec<Warning>,
    pub rationale_terms: Vec<String>,
}

/// Per-serving sugar or carbohydrates above the user's limit.
pub fn warnings_for(recipe: &Recipe, profile: &UserProfile) -> Vec<Warning> {
    let mut out = Vec::new();
    if recipe.per_serving.sugar_g > profile.sugar_limit_g {
        out.push(Warning {
            nutrient: "sugar".into(),
            amount_g: recipe.per_serving.sugar_g,
            limit_g: profile.sugar_limit_g,
        });
    }
    if recipe.per_serving.carbohydrates_g > profile.carb_limit_g {
        out.push(Warning {
            nutrient: "carbohydrates".into(),
            amount_g: recipe.per_serving.carbohydrates_g,
            limit_g: profile.carb_limit_g,
        });
    }
    out
}

/// Attaches warnings; never drops or reorders recipes.
pub fn apply_warnings(scored: &[(&Recipe, f64)], profile: &UserProfile) -> Vec<Recommendation> {
    scored
        .iter()
        .map(|(recipe, score)| Recommendation {
            recipe_id: recipe.id.clone(),
            score: *score,
            warnings: warnings_for(recipe, profile),
            rationale_terms: Vec::new(),
        })
        .collect()
}

/// Everything about the user that ranking needs besides the models.
#[derive(Debug, Clone, Copy)]
pub struct RecommendInput<'a> {
    pub profile: &'a UserProfile,
    pub rating_count: usize,
    pub skips: &'a [SkipRecord],
    pub now: DateTime<Utc>,
}

/// Mean daily intake over the window as `[carbohydrates, protein, fat]`, or
/// `None` when no meal falls inside it.
fn mean_daily_intake(profile: &UserProfile, now: DateTime<Utc>, window_days: i64) -> Option<[f64; 3]> {
    let start = now - Duration::days(window_days);
    let meals: Vec<_> = profile
        .meal_log
        .iter()
        .filter(|m| m.timestamp > start && m.timestamp <= now)
        .collect();
    if meals.is_empty() {
        return None;
    }
    let mut sum = [0.0; 3];
    for m in meals {
        sum[0] += m.report.totals.carbohydrates_g;
        sum[1] += m.report.totals.protein_g;
        sum[2] += m.report.totals.fat_g;
    }
    Some(sum.map(|s| s / window_days as f64))
}

/// Ranks eligible recipes for a user.
///
/// 1. Hard diet filter.
/// 2. Hybrid blend; content only below `cold_start_min_ratings` ratings.
/// 3. BMI: `+gamma * calories` for underweight, `-gamma * calories` for
///    overweight and obese (calories min-max normalized).
/// 4. For each macro whose recent mean daily intake is under target,
///    `+beta * deficit_fraction * normalized macro content`.
/// 5. `-delta` for recipes skipped within the window.
/// 6. Sort by score, ties by recipe id; keep `count`; attach warnings.
pub fn recommend(
    input: RecommendInput<'_>,
    recipes: &RecipeBook,
    model: &HybridModel,
    cfg: &RecommenderConfig,
    count: usize,
) -> Result<Vec<Recommendation>, RecommendError> {
    let profile = input.profile;
    let candidates: Vec<(&Recipe, usize)> = recipes
        .recipes()
        .iter()
        .filter(|r| profile.diet_pref.permits(r.diet_tag))
        .filter_map(|r| model.doc_index(&r.id).map(|i| (r, i)))
        .collect();
    if candidates.is_empty() {
        return Err(RecommendError::NoEligibleRecipes);
    }

    let all_content = model.content_scores(profile);
    let content: Vec<f64> = candidates.iter().map(|(_, i)| all_content[*i]).collect();
    let collab: Vec<f64> = candidates
        .iter()
        .map(|(r, _)| model.collab_score(&profile.user_id, &r.id))
        .collect();
    let alpha = if input.rating_count < cfg.cold_start_min_ratings {
        1.0
    } else {
        cfg.alpha
    };
    let mut scores = hybrid_scores(&content, &collab, alpha);

    let column = |f: fn(&Recipe) -> f64| min_max(&candidates.iter().map(|(r, _)| f(r)).collect::<Vec<_>>());

    let bmi = compute_bmi(profile.height_m, profile.weight_kg)?;
    let direction = match bmi.category {
        BmiCategory::Underweight => 1.0,
        BmiCategory::Normal => 0.0,
        BmiCategory::Overweight | BmiCategory::Obese => -1.0,
    };
    if direction != 0.0 {
        let calories = column(|r| r.per_serving.calories);
        for (s, c) in scores.iter_mut().zip(&calories) {
            *s += direction * cfg.gamma * c;
        }
    }

    if let (Some(intake), Some(target)) = (
        mean_daily_intake(profile, input.now, cfg.window_days),
        cfg.daily_targets.get(&profile.gender),
    ) {
        let targets = [target.carbohydrates_g, target.protein_g, target.fat_g];
        let contents = [
            column(|r| r.per_serving.carbohydrates_g),
            column(|r| r.per_serving.protein_g),
            column(|r| r.per_serving.fat_g),
        ];
        for ((mean, target), content) in intake.iter().zip(targets).zip(&contents) {
            if target <= 0.0 || *mean >= target {
                continue;
            }
            let deficit = (target - mean) / target;
            for (s, c) in scores.iter_mut().zip(content) {
                *s += cfg.beta * deficit * c;
            }
        }
    }

    let window_start = input.now - Duration::days(cfg.window_days);
    for (s, (recipe, _)) in scores.iter_mut().zip(&candidates) {
        let skipped = input
            .skips
            .iter()
            .any(|k| k.recipe_id == recipe.id && k.timestamp > window_start && k.timestamp <= input.now);
        if skipped {
            *s -= cfg.delta;
        }
    }

    let mut ranked: Vec<(&Recipe, f64)> = candidates.iter().map(|(r, _)| *r).zip(scores).collect();
    ranked.sort_by(|a, b| rank_order((&a.0.id, a.1), (&b.0.id, b.1)));
    ranked.truncate(count);

    let mut out = apply_warnings(&ranked, profile);
    for rec in &mut out {
        rec.rationale_terms = model.rationale_terms(profile, &rec.recipe_id);
    }
    Ok(out)
}
