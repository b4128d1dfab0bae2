//! Portion quantification: calibrated boxes to volume, grams and nutrients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, FoodClassSpec, NutrientProfile};
use crate::detections::{dedupe, Detection};
use crate::reference::{detect_reference, Calibration, ReferenceError, ReferenceMeasurement, ReferenceSpec, RgbImage};

/// Share of a bounding box assumed to be occupied by food.
pub const DEFAULT_BOX_FILL_FACTOR: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantifyError {
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("box_fill_factor must lie in (0, 1], got {0}")]
    InvalidFillFactor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantifierConfig {
    pub box_fill_factor: f64,
    pub reference: ReferenceSpec,
}

impl Default for QuantifierConfig {
    fn default() -> Self {
        Self {
            box_fill_factor: DEFAULT_BOX_FILL_FACTOR,
            reference: ReferenceSpec::default(),
        }
    }
}

impl QuantifierConfig {
    pub fn validate(&self) -> Result<(), QuantifyError> {
        if !(self.box_fill_factor > 0.0 && self.box_fill_factor <= 1.0) {
            return Err(QuantifyError::InvalidFillFactor(self.box_fill_factor));
        }
        self.reference.validate()?;
        Ok(())
    }
}

impl From<&ReferenceMeasurement> for Calibration {
    fn from(m: &ReferenceMeasurement) -> Self {
        m.calibration()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantifiedFood {
    pub label: String,
    pub length_cm: f64,
    pub width_cm: f64,
    pub height_cm: f64,
    pub volume_cc: f64,
    pub mass_g: f64,
    pub nutrients: NutrientProfile,
}

/// Percentages over the four tracked macros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroDistribution {
    pub carbohydrates: f64,
    pub protein: f64,
    pub fat: f64,
    pub sugar: f64,
}

/// A detection that could not be quantified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlateReport {
    pub items: Vec<QuantifiedFood>,
    pub totals: NutrientProfile,
    /// `None` when the plate carries no macro mass.
    pub distribution_pct: Option<MacroDistribution>,
    #[serde(default)]
    pub skipped: Vec<SkippedItem>,
}

/// Real dimensions, volume, mass and nutrients of one detected item.
///
/// The box height in pixels maps to length and the width to width; the third
/// dimension is the class default height.
pub fn quantify_item(
    det: &Detection,
    calibration: &Calibration,
    spec: &FoodClassSpec,
    cfg: &QuantifierConfig,
) -> QuantifiedFood {
    let length_cm = det.bbox.h * calibration.ratio_y_mm_per_px / 10.0;
    let width_cm = det.bbox.w * calibration.ratio_x_mm_per_px / 10.0;
    let height_cm = spec.default_height_cm;
    let volume_cc = length_cm * width_cm * height_cm * cfg.box_fill_factor;
    let mass_g = volume_cc * spec.density_g_per_cc;
    QuantifiedFood {
        label: spec.label.clone(),
        length_cm,
        width_cm,
        height_cm,
        volume_cc,
        mass_g,
        nutrients: spec.per_100g.scaled(mass_g / 100.0),
    }
}

pub fn build_report(items: Vec<QuantifiedFood>) -> PlateReport {
    let mut totals = NutrientProfile::default();
    for item in &items {
        totals.add(&item.nutrients);
    }
    let macro_sum = totals.carbohydrates_g + totals.protein_g + totals.fat_g + totals.sugar_g;
    let distribution_pct = (macro_sum > 0.0).then(|| MacroDistribution {
        carbohydrates: 100.0 * totals.carbohydrates_g / macro_sum,
        protein: 100.0 * totals.protein_g / macro_sum,
        fat: 100.0 * totals.fat_g / macro_sum,
        sugar: 100.0 * totals.sugar_g / macro_sum,
    });
    PlateReport {
        items,
        totals,
        distribution_pct,
        skipped: Vec::new(),
    }
}

/// Full plate pipeline: calibrate on the coin, de-duplicate detections,
/// resolve labels and quantify. Unknown labels become skipped entries; a
/// missing or ambiguous coin is an error.
pub fn analyze_plate(
    img: &RgbImage,
    dets: &[Detection],
    catalog: &Catalog,
    cfg: &QuantifierConfig,
) -> Result<PlateReport, QuantifyError> {
    cfg.validate()?;
    let reference = detect_reference(img, &cfg.reference)?;
    Ok(quantify_detections(dets, &reference.calibration(), catalog, cfg))
}

/// The part of [`analyze_plate`] that follows calibration.
pub fn quantify_detections(
    dets: &[Detection],
    calibration: &Calibration,
    catalog: &Catalog,
    cfg: &QuantifierConfig,
) -> PlateReport {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for det in dedupe(dets) {
        match catalog.lookup(&det.label) {
            Ok(spec) => items.push(quantify_item(&det, calibration, spec, cfg)),
            Err(_) => skipped.push(SkippedItem {
                label: det.label.clone(),
                reason: "UnknownFoodClass".into(),
            }),
        }
    }
    let mut report = build_report(items);
    report.skipped = skipped;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::BoundingBox;
    use crate::reference::synth;
    use proptest::prelude::*;

    fn test_spec(height: f64, density: f64, carbs: f64) -> FoodClassSpec {
        FoodClassSpec {
            label: "testfood".into(),
            default_height_cm: height,
            density_g_per_cc: density,
            per_100g: NutrientProfile {
                calories: 100.0,
                carbohydrates_g: carbs,
                protein_g: 2.0,
                fat_g: 1.0,
                sugar_g: carbs / 2.0,
                micros: Default::default(),
            },
        }
    }

    fn det(label: &str, w: f64, h: f64) -> Detection {
        Detection {
            label: label.into(),
            bbox: BoundingBox::new(10.0, 10.0, w, h),
            confidence: 0.9,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn worked_example() {
        let cal = ReferenceMeasurement::from_pixel_diameter(21.93, 219.3, 219.3);
        let q = quantify_item(&det("testfood", 500.0, 400.0), &cal, &test_spec(5.0, 0.5, 10.0), &QuantifierConfig::default());
        assert!(rel(q.length_cm, 4.0) < 1e-9);
        assert!(rel(q.width_cm, 5.0) < 1e-9);
        assert_eq!(q.height_cm, 5.0);
        assert!(rel(q.volume_cc, 80.0) < 1e-9);
        assert!(rel(q.mass_g, 40.0) < 1e-9);
        assert!(rel(q.nutrients.carbohydrates_g, 4.0) < 1e-9);
    }

    #[test]
    fn one_pixel_box_still_has_mass() {
        let cal = ReferenceMeasurement::from_pixel_diameter(21.93, 219.3, 219.3);
        let q = quantify_item(&det("testfood", 1.0, 1.0), &cal, &test_spec(5.0, 0.5, 10.0), &QuantifierConfig::default());
        assert!(q.mass_g > 0.0);
        assert!(rel(q.mass_g, 0.01 * 0.01 * 5.0 * 0.8 * 0.5) < 1e-9);
    }

    #[test]
    fn doubling_resolution_is_neutral() {
        let spec = test_spec(5.0, 0.5, 10.0);
        let cfg = QuantifierConfig::default();
        let a = quantify_item(&det("x", 300.0, 200.0), &ReferenceMeasurement::from_pixel_diameter(21.93, 120.0, 120.0), &spec, &cfg);
        let b = quantify_item(&det("x", 600.0, 400.0), &ReferenceMeasurement::from_pixel_diameter(21.93, 240.0, 240.0), &spec, &cfg);
        assert!(rel(a.mass_g, b.mass_g) < 1e-12);
        assert!(rel(a.volume_cc, b.volume_cc) < 1e-12);
    }

    #[test]
    fn report_distribution() {
        let item = QuantifiedFood {
            label: "x".into(),
            length_cm: 1.0,
            width_cm: 1.0,
            height_cm: 1.0,
            volume_cc: 1.0,
            mass_g: 1.0,
            nutrients: NutrientProfile {
                calories: 500.0,
                carbohydrates_g: 50.0,
                protein_g: 25.0,
                fat_g: 15.0,
                sugar_g: 10.0,
                micros: Default::default(),
            },
        };
        let report = build_report(vec![item.clone()]);
        assert_eq!(report.totals, item.nutrients);
        let d = report.distribution_pct.unwrap();
        assert_eq!((d.carbohydrates, d.protein, d.fat, d.sugar), (50.0, 25.0, 15.0, 10.0));
    }

    #[test]
    fn empty_report() {
        let report = build_report(vec![]);
        assert_eq!(report.totals, NutrientProfile::default());
        assert!(report.distribution_pct.is_none());
    }

    fn banana_scene() -> RgbImage {
        // coin radius 109.65 px gives a 219-220 px box
        let mut img = synth::coin_scene(900, 600, 150.0, 150.0, 109.65);
        synth::paint_rect(&mut img, 400, 100, 300, 200, [230, 200, 40]);
        img
    }

    #[test]
    fn analyze_banana_plate() {
        let catalog = Catalog::shipped();
        let cfg = QuantifierConfig::default();
        let report = analyze_plate(&banana_scene(), &[det("banana", 300.0, 200.0)], &catalog, &cfg).unwrap();
        assert_eq!(report.items.len(), 1);
        let banana = catalog.lookup("banana").unwrap();
        let reference = detect_reference(&banana_scene(), &cfg.reference).unwrap();
        let expected = (200.0 * reference.ratio_y_mm_per_px / 10.0)
            * (300.0 * reference.ratio_x_mm_per_px / 10.0)
            * banana.default_height_cm
            * 0.8
            * banana.density_g_per_cc;
        assert!(rel(report.items[0].mass_g, expected) < 1e-12);
        // 219.3 px coin gives exactly 3.0 x 2.0 cm
        let ideal = 3.0 * 2.0 * banana.default_height_cm * 0.8 * banana.density_g_per_cc;
        assert!(rel(report.items[0].mass_g, ideal) < 0.01);
    }

    #[test]
    fn analyze_empty_and_unknown() {
        let catalog = Catalog::shipped();
        let cfg = QuantifierConfig::default();
        let report = analyze_plate(&banana_scene(), &[], &catalog, &cfg).unwrap();
        assert!(report.items.is_empty() && report.skipped.is_empty());

        let report = analyze_plate(&banana_scene(), &[det("sushi", 50.0, 50.0), det("apple", 80.0, 80.0)], &catalog, &cfg).unwrap();
        assert_eq!(report.items.len(), 1);
        assert_eq!(report.items[0].label, "apple");
        assert_eq!(report.skipped, vec![SkippedItem { label: "sushi".into(), reason: "UnknownFoodClass".into() }]);
    }

    #[test]
    fn analyze_without_coin_fails() {
        let img = RgbImage::filled(100, 100, synth::TABLE_GREEN).unwrap();
        assert_eq!(
            analyze_plate(&img, &[], &Catalog::shipped(), &QuantifierConfig::default()),
            Err(QuantifyError::Reference(ReferenceError::NoReferenceFound))
        );
    }

    proptest! {
        #[test]
        fn mass_scales_quadratically(w in 1.0..400.0f64, h in 1.0..400.0f64, s in 0.1..5.0f64) {
            let cal = ReferenceMeasurement::from_pixel_diameter(21.93, 150.0, 140.0);
            let spec = test_spec(4.0, 0.7, 20.0);
            let cfg = QuantifierConfig::default();
            let a = quantify_item(&det("x", w, h), &cal, &spec, &cfg);
            let b = quantify_item(&det("x", w * s, h * s), &cal, &spec, &cfg);
            prop_assert!(rel(b.mass_g, a.mass_g * s * s) < 1e-12);
        }

        #[test]
        fn nutrients_linear_in_mass(w in 1.0..400.0f64, h in 1.0..400.0f64) {
            let cal = ReferenceMeasurement::from_pixel_diameter(21.93, 150.0, 150.0);
            let spec = test_spec(4.0, 0.7, 20.0);
            let q = quantify_item(&det("x", w, h), &cal, &spec, &QuantifierConfig::default());
            let expect = spec.per_100g.scaled(q.mass_g / 100.0);
            prop_assert!(rel(q.nutrients.carbohydrates_g, q.mass_g / 100.0 * 20.0) < 1e-12);
            prop_assert_eq!(q.nutrients, expect);
        }

        #[test]
        fn totals_and_distribution(masses in prop::collection::vec(0.1..500.0f64, 1..8)) {
            let cal = ReferenceMeasurement::from_pixel_diameter(21.93, 100.0, 100.0);
            let catalog = Catalog::shipped();
            let labels: Vec<&str> = catalog.labels().collect();
            let items: Vec<QuantifiedFood> = masses
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let spec = catalog.lookup(labels[i % labels.len()]).unwrap();
                    quantify_item(&det("x", *m, 40.0), &cal, spec, &QuantifierConfig::default())
                })
                .collect();
            let report = build_report(items.clone());
            let carbs: f64 = items.iter().map(|i| i.nutrients.carbohydrates_g).sum();
            prop_assert_eq!(report.totals.carbohydrates_g, carbs);
            let d = report.distribution_pct.unwrap();
            prop_assert!((d.carbohydrates + d.protein + d.fat + d.sugar - 100.0).abs() < 1e-9);
        }
    }
}
