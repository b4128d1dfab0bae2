//! Nutrition database and recipe catalog.
//!
//! The food table holds one row per detectable class: a default height used
//! as the third box dimension, a density for the volume to mass conversion,
//! and nutrients per 100 g. The shipped heights, densities and nutrient
//! values are editable calibration placeholders taken from public per-100 g
//! references; override them with a catalog file.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SHIPPED_FOODS: &str = include_str!("../data/foods.csv");
const SHIPPED_RECIPES: &str = include_str!("../data/recipes.json");

pub const CSV_HEADER: [&str; 8] = [
    "label",
    "default_height_cm",
    "density_g_per_cc",
    "calories",
    "carbohydrates_g",
    "protein_g",
    "fat_g",
    "sugar_g",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("{}{message}", row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    Schema { row: Option<usize>, message: String },
    #[error("row {row}: duplicate label '{label}' (first seen in row {first_row})")]
    DuplicateLabel {
        label: String,
        first_row: usize,
        row: usize,
    },
    #[error("unknown food class '{0}'")]
    UnknownFoodClass(String),
    #[error("duplicate recipe id '{0}'")]
    DuplicateRecipe(String),
    #[error("unknown recipe '{0}'")]
    UnknownRecipe(String),
}

impl CatalogError {
    fn schema(row: Option<usize>, message: impl Into<String>) -> Self {
        Self::Schema {
            row,
            message: message.into(),
        }
    }
}

/// Calories in kcal, macros in grams, micronutrients in milligrams.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientProfile {
    pub calories: f64,
    pub carbohydrates_g: f64,
    pub protein_g: f64,
    pub fat_g: f64,
    pub sugar_g: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub micros: BTreeMap<String, f64>,
}

impl NutrientProfile {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("calories", self.calories),
            ("carbohydrates_g", self.carbohydrates_g),
            ("protein_g", self.protein_g),
            ("fat_g", self.fat_g),
            ("sugar_g", self.sugar_g),
        ];
        for (name, value) in fields.into_iter().chain(self.micros.iter().map(|(k, v)| (k.as_str(), *v))) {
            if !value.is_finite() || value < 0.0 {
                return Err(format!("{name} must be a non-negative number, got {value}"));
            }
        }
        if self.sugar_g > self.carbohydrates_g {
            return Err(format!(
                "sugar_g ({}) exceeds carbohydrates_g ({})",
                self.sugar_g, self.carbohydrates_g
            ));
        }
        Ok(())
    }

    /// Every amount multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            calories: self.calories * factor,
            carbohydrates_g: self.carbohydrates_g * factor,
            protein_g: self.protein_g * factor,
            fat_g: self.fat_g * factor,
            sugar_g: self.sugar_g * factor,
            micros: self.micros.iter().map(|(k, v)| (k.clone(), v * factor)).collect(),
        }
    }

    pub fn add(&mut self, other: &Self) {
        self.calories += other.calories;
        self.carbohydrates_g += other.carbohydrates_g;
        self.protein_g += other.protein_g;
        self.fat_g += other.fat_g;
        self.sugar_g += other.sugar_g;
        for (k, v) in &other.micros {
            *self.micros.entry(k.clone()).or_insert(0.0) += v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodClassSpec {
    pub label: String,
    pub default_height_cm: f64,
    pub density_g_per_cc: f64,
    pub per_100g: NutrientProfile,
}

/// Flat row shared by the CSV and JSON catalog schemas. Fields are optional
/// here so that a missing column is reported by name.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoodRow {
    label: Option<String>,
    default_height_cm: Option<f64>,
    density_g_per_cc: Option<f64>,
    calories: Option<f64>,
    carbohydrates_g: Option<f64>,
    protein_g: Option<f64>,
    fat_g: Option<f64>,
    sugar_g: Option<f64>,
    #[serde(default)]
    micros: BTreeMap<String, f64>,
}

impl FoodRow {
    fn into_spec(self, row: usize) -> Result<FoodClassSpec, CatalogError> {
        let missing = |name: &str| CatalogError::schema(Some(row), format!("missing {name}"));
        let label = self.label.ok_or_else(|| missing("label"))?.trim().to_lowercase();
        if label.is_empty() {
            return Err(CatalogError::schema(Some(row), "empty label"));
        }
        let spec = FoodClassSpec {
            label,
            default_height_cm: self.default_height_cm.ok_or_else(|| missing("default_height_cm"))?,
            density_g_per_cc: self.density_g_per_cc.ok_or_else(|| missing("density_g_per_cc"))?,
            per_100g: NutrientProfile {
                calories: self.calories.ok_or_else(|| missing("calories"))?,
                carbohydrates_g: self.carbohydrates_g.ok_or_else(|| missing("carbohydrates_g"))?,
                protein_g: self.protein_g.ok_or_else(|| missing("protein_g"))?,
                fat_g: self.fat_g.ok_or_else(|| missing("fat_g"))?,
                sugar_g: self.sugar_g.ok_or_else(|| missing("sugar_g"))?,
                micros: self.micros,
            },
        };
        if !(spec.default_height_cm.is_finite() && spec.default_height_cm > 0.0) {
            return Err(CatalogError::schema(Some(row), "default_height_cm must be positive"));
        }
        if !(spec.density_g_per_cc.is_finite() && spec.density_g_per_cc > 0.0) {
            return Err(CatalogError::schema(Some(row), "density_g_per_cc must be positive"));
        }
        spec.per_100g
            .validate()
            .map_err(|m| CatalogError::schema(Some(row), m))?;
        Ok(spec)
    }
}

/// Immutable food-class table keyed by canonical label.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    classes: BTreeMap<String, FoodClassSpec>,
}

fn looks_structured(document: &str) -> bool {
    matches!(document.trim_start().chars().next(), Some('[' | '{'))
}

/// Row numbers are 1-based data rows (the CSV header is not counted).
type ParsedRows = Vec<(usize, Result<FoodRow, CatalogError>)>;

fn parse_rows(document: &[u8]) -> Result<ParsedRows, CatalogError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| CatalogError::schema(None, format!("not UTF-8: {e}")))?;
    if looks_structured(text) {
        let values: Vec<serde_json::Value> = serde_json::from_str(text)
            .map_err(|e| CatalogError::schema(None, format!("expected an array of food rows: {e}")))?;
        return Ok(values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let row = i + 1;
                (row, serde_json::from_value(v).map_err(|e| CatalogError::schema(Some(row), e.to_string())))
            })
            .collect());
    }

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CatalogError::schema(None, format!("unreadable header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(CatalogError::schema(
            None,
            format!("header must be `{}`", CSV_HEADER.join(",")),
        ));
    }
    Ok(reader
        .deserialize::<FoodRow>()
        .enumerate()
        .map(|(i, r)| (i + 1, r.map_err(|e| CatalogError::schema(Some(i + 1), e.to_string()))))
        .collect())
}

/// Every problem in a catalog document, in row order. Empty means valid.
pub fn validate_catalog(document: &[u8]) -> Vec<CatalogError> {
    let rows = match parse_rows(document) {
        Ok(rows) => rows,
        Err(e) => return vec![e],
    };
    let mut issues = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (row, parsed) in rows {
        match parsed.and_then(|r| r.into_spec(row)) {
            Ok(spec) => {
                if let Some(&first_row) = seen.get(&spec.label) {
                    issues.push(CatalogError::DuplicateLabel {
                        label: spec.label,
                        first_row,
                        row,
                    });
                } else {
                    seen.insert(spec.label, row);
                }
            }
            Err(e) => issues.push(e),
        }
    }
    if seen.is_empty() && issues.is_empty() {
        issues.push(CatalogError::schema(None, "catalog has no rows"));
    }
    issues
}

impl Catalog {
    /// Parses either schema; the first problem found is returned.
    pub fn load(document: &[u8]) -> Result<Self, CatalogError> {
        if let Some(first) = validate_catalog(document).into_iter().next() {
            return Err(first);
        }
        let classes = parse_rows(document)?
            .into_iter()
            .map(|(row, r)| r.and_then(|r| r.into_spec(row)))
            .map(|spec| spec.map(|s| (s.label.clone(), s)))
            .collect::<Result<_, _>>()?;
        Ok(Self { classes })
    }

    /// The ten-class table bundled with the crate.
    pub fn shipped() -> Self {
        Self::load(SHIPPED_FOODS.as_bytes()).expect("shipped catalog is valid")
    }

    pub fn shipped_document() -> &'static str {
        SHIPPED_FOODS
    }

    pub fn from_specs(specs: impl IntoIterator<Item = FoodClassSpec>) -> Result<Self, CatalogError> {
        let mut classes = BTreeMap::new();
        for (i, spec) in specs.into_iter().enumerate() {
            spec.per_100g
                .validate()
                .map_err(|m| CatalogError::schema(Some(i + 1), m))?;
            if classes.contains_key(&spec.label) {
                return Err(CatalogError::DuplicateLabel {
                    label: spec.label,
                    first_row: 0,
                    row: i + 1,
                });
            }
            classes.insert(spec.label.clone(), spec);
        }
        Ok(Self { classes })
    }

    pub fn contains(&self, label: &str) -> bool {
        self.classes.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Case-insensitive lookup that also accepts the plural form.
    pub fn lookup(&self, label: &str) -> Result<&FoodClassSpec, CatalogError> {
        let key = crate::detections::normalize_label(label, Some(self));
        self.classes
            .get(&key)
            .ok_or_else(|| CatalogError::UnknownFoodClass(label.to_string()))
    }
}

/// Dietary class, ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DietTag {
    Vegan,
    Vegetarian,
    NonVegetarian,
}

impl DietTag {
    /// Whether someone following `self` may eat a dish tagged `dish`.
    pub fn permits(self, dish: DietTag) -> bool {
        dish <= self
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vegan => "vegan",
            Self::Vegetarian => "vegetarian",
            Self::NonVegetarian => "non-vegetarian",
        }
    }
}

impl fmt::Display for DietTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub description: String,
    pub diet_tag: DietTag,
    pub per_serving: NutrientProfile,
    pub video_url: String,
}

/// Recipes in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeBook {
    recipes: Vec<Recipe>,
}

impl RecipeBook {
    pub fn new(mut recipes: Vec<Recipe>) -> Result<Self, CatalogError> {
        recipes.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in recipes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(CatalogError::DuplicateRecipe(pair[0].id.clone()));
            }
        }
        for (i, r) in recipes.iter().enumerate() {
            if r.id.trim().is_empty() {
                return Err(CatalogError::schema(Some(i + 1), "recipe id must not be empty"));
            }
            r.per_serving
                .validate()
                .map_err(|m| CatalogError::schema(Some(i + 1), format!("recipe {}: {m}", r.id)))?;
        }
        Ok(Self { recipes })
    }

    pub fn load(document: &[u8]) -> Result<Self, CatalogError> {
        let recipes: Vec<Recipe> = serde_json::from_slice(document)
            .map_err(|e| CatalogError::schema(None, format!("recipe file: {e}")))?;
        Self::new(recipes)
    }

    pub fn shipped() -> Self {
        Self::load(SHIPPED_RECIPES.as_bytes()).expect("shipped recipes are valid")
    }

    pub fn get(&self, id: &str) -> Result<&Recipe, CatalogError> {
        self.recipes
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .map(|i| &self.recipes[i])
            .map_err(|_| CatalogError::UnknownRecipe(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_ok()
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }
}
