//! Stateful facade over catalogs, the event log and fitted models.
//!
//! Reads work on immutable snapshots (`Arc<State>`, `Arc<ModelSnapshot>`)
//! that writers replace wholesale. Appends are serialized by the log mutex.
//! The factor model is refit lazily: a rating marks it stale and the next
//! recommendation request rebuilds and swaps it.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Recipe, RecipeBook};
use crate::config::Config;
use crate::detections::load_detections;
use crate::error::{Error, Result};
use crate::quantify::{analyze_plate, PlateReport};
use crate::recommender::{
    compute_bmi, fit_factors, recommend, BmiResult, FeedbackEvent, HybridModel, MealEntry, ProfileUpsert,
    Rating, RatingMatrix, RecommendError, RecommendInput, Recommendation, UserProfile,
};
use crate::reference::RgbImage;
use crate::store::{Event, EventLog, MealLogged, State};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Body of a feedback submission; the user comes from the request path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub recipe_id: String,
    pub tried: bool,
    /// Raw value so out-of-range ratings surface as `INVALID_RATING`.
    #[serde(default)]
    pub rating: Option<i64>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

/// Body of a meal log submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealRequest {
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
    pub report: PlateReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub sequence: u64,
}

#[derive(Debug)]
pub struct ModelSnapshot {
    pub model: HybridModel,
    /// Rating generation the factors were fit on.
    pub generation: u64,
}

pub struct Engine {
    config: Config,
    catalog: Arc<Catalog>,
    recipes: Arc<RecipeBook>,
    log: Mutex<EventLog>,
    state: RwLock<Arc<State>>,
    models: RwLock<Arc<ModelSnapshot>>,
    refit: Mutex<()>,
    rating_generation: AtomicU64,
    clock: Clock,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("store", &self.config.store.path)
            .field("foods", &self.catalog.len())
            .field("recipes", &self.recipes.len())
            .finish_non_exhaustive()
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::ImageDecode(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(RgbImage::new(w, h, rgb.into_raw())?)
}

pub fn load_catalogs(config: &Config) -> Result<(Catalog, RecipeBook)> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| {
            Error::Config(crate::config::ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })
        })
    };
    let catalog = match &config.catalog.foods {
        Some(p) => Catalog::load(&read(p)?)?,
        None => Catalog::shipped(),
    };
    let recipes = match &config.catalog.recipes {
        Some(p) => RecipeBook::load(&read(p)?)?,
        None => RecipeBook::shipped(),
    };
    Ok((catalog, recipes))
}

impl Engine {
    /// Loads catalogs named by the config and replays the event log.
    pub fn open(config: Config) -> Result<Self> {
        let (catalog, recipes) = load_catalogs(&config)?;
        Self::with_catalogs(config, catalog, recipes)
    }

    pub fn with_catalogs(config: Config, catalog: Catalog, recipes: RecipeBook) -> Result<Self> {
        config.quantifier_config().validate()?;
        let (log, state, _) = EventLog::open(&config.store.path)?;
        let content = HybridModel::fit_content(&recipes, &config.recommender)?;
        let engine = Self {
            catalog: Arc::new(catalog),
            recipes: Arc::new(recipes),
            log: Mutex::new(log),
            state: RwLock::new(Arc::new(state)),
            models: RwLock::new(Arc::new(ModelSnapshot {
                model: content,
                generation: u64::MAX,
            })),
            refit: Mutex::new(()),
            rating_generation: AtomicU64::new(0),
            clock: Arc::new(Utc::now),
            config,
        };
        Ok(engine)
    }

    /// Replaces the time source used for timestamps and recency windows.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn recipes(&self) -> &RecipeBook {
        &self.recipes
    }

    pub fn state(&self) -> Arc<State> {
        self.state.read().clone()
    }

    pub fn analyze(&self, image: &[u8], detections: &[u8]) -> Result<PlateReport> {
        let img = decode_image(image)?;
        self.analyze_image(&img, detections)
    }

    pub fn analyze_image(&self, img: &RgbImage, detections: &[u8]) -> Result<PlateReport> {
        let dets = load_detections(
            detections,
            img.width(),
            img.height(),
            self.config.detections.min_confidence,
            Some(&self.catalog),
        )?;
        Ok(analyze_plate(img, &dets, &self.catalog, &self.config.quantifier_config())?)
    }

    /// Appends `event` after `check` accepts it against the current state.
    fn write(&self, event: Event, check: impl FnOnce(&State) -> Result<()>) -> Result<u64> {
        let mut log = self.log.lock();
        let current = self.state();
        check(&current)?;
        let record = log.append(event, self.now())?;
        let mut next = (*current).clone();
        next.apply(&record);
        *self.state.write() = Arc::new(next);
        Ok(record.sequence)
    }

    pub fn upsert_profile(&self, profile: ProfileUpsert) -> Result<u64> {
        profile.validate()?;
        self.write(Event::ProfileUpsert(profile), |_| Ok(()))
    }

    pub fn profile(&self, user_id: &str) -> Result<UserProfile> {
        self.state()
            .profiles
            .get(user_id)
            .cloned()
            .ok_or_else(|| RecommendError::UnknownUser(user_id.to_string()).into())
    }

    pub fn log_meal(&self, user_id: &str, meal: MealRequest) -> Result<u64> {
        let entry = MealEntry {
            timestamp: meal.timestamp.unwrap_or_else(|| self.now()),
            report: meal.report,
        };
        let user = user_id.to_string();
        self.write(Event::MealLogged(MealLogged { user_id: user, entry }), |state| {
            if state.profiles.contains_key(user_id) {
                Ok(())
            } else {
                Err(RecommendError::UnknownUser(user_id.to_string()).into())
            }
        })
    }

    pub fn submit_feedback(&self, user_id: &str, request: FeedbackRequest) -> Result<u64> {
        let event = FeedbackEvent {
            user_id: user_id.to_string(),
            recipe_id: request.recipe_id,
            tried: request.tried,
            rating: request.rating.map(Rating::new).transpose()?,
            timestamp: request.timestamp.unwrap_or_else(|| self.now()),
        };
        event.validate()?;
        let rated = event.rating.is_some();
        let recipes = self.recipes.clone();
        let check_event = event.clone();
        let seq = self.write(Event::Feedback(event), move |state| {
            if !state.profiles.contains_key(&check_event.user_id) {
                return Err(RecommendError::UnknownUser(check_event.user_id.clone()).into());
            }
            if !recipes.contains(&check_event.recipe_id) {
                return Err(RecommendError::UnknownRecipe(check_event.recipe_id.clone()).into());
            }
            Ok(())
        })?;
        if rated {
            self.rating_generation.fetch_add(1, Ordering::SeqCst);
        }
        Ok(seq)
    }

    /// Current model snapshot, refitting the factor model first if ratings
    /// changed since the last fit.
    pub fn models(&self) -> Result<Arc<ModelSnapshot>> {
        let generation = self.rating_generation.load(Ordering::SeqCst);
        let current = self.models.read().clone();
        if current.generation == generation {
            return Ok(current);
        }
        let _guard = self.refit.lock();
        let current = self.models.read().clone();
        if current.generation == generation {
            return Ok(current);
        }
        let state = self.state();
        let matrix = RatingMatrix::from_nested(&state.ratings);
        let factors = if matrix.entries.is_empty() {
            None
        } else {
            Some(fit_factors(&matrix, &self.config.recommender.factor_params())?)
        };
        let fresh = Arc::new(ModelSnapshot {
            model: current.model.clone().with_factors(factors),
            generation,
        });
        *self.models.write() = fresh.clone();
        Ok(fresh)
    }

    pub fn recommend(&self, user_id: &str, count: usize) -> Result<Vec<Recommendation>> {
        let models = self.models()?;
        let state = self.state();
        let profile = state
            .profiles
            .get(user_id)
            .ok_or_else(|| RecommendError::UnknownUser(user_id.to_string()))?;
        let input = RecommendInput {
            profile,
            rating_count: state.rating_count(user_id),
            skips: state.skips_for(user_id),
            now: self.now(),
        };
        Ok(recommend(input, &self.recipes, &models.model, &self.config.recommender, count)?)
    }

    pub fn bmi(&self, user_id: &str) -> Result<BmiResult> {
        let p = self.profile(user_id)?;
        Ok(compute_bmi(p.height_m, p.weight_kg)?)
    }

    pub fn recipe(&self, id: &str) -> Result<Recipe> {
        Ok(self.recipes.get(id)?.clone())
    }

    /// Writes the current state as the log snapshot.
    pub fn snapshot(&self) -> Result<()> {
        let log = self.log.lock();
        log.write_snapshot(&self.state())?;
        Ok(())
    }
}
