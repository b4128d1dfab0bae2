use serde::{Deserialize, Serialize};

use super::RecommendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BmiCategory {
    Underweight,
    Normal,
    Overweight,
    Obese,
}

impl BmiCategory {
    /// Half-open bands: `< 18.5`, `[18.5, 25)`, `[25, 30)`, `>= 30`.
    pub fn from_value(bmi: f64) -> Self {
        if bmi < 18.5 {
            Self::Underweight
        } else if bmi < 25.0 {
            Self::Normal
        } else if bmi < 30.0 {
            Self::Overweight
        } else {
            Self::Obese
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Underweight => "underweight",
            Self::Normal => "normal",
            Self::Overweight => "overweight",
            Self::Obese => "obese",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiResult {
    pub value: f64,
    pub category: BmiCategory,
}

pub fn compute_bmi(height_m: f64, weight_kg: f64) -> Result<BmiResult, RecommendError> {
    if !(height_m > 0.0 && weight_kg > 0.0 && height_m.is_finite() && weight_kg.is_finite()) {
        return Err(RecommendError::InvalidAnthropometrics { height_m, weight_kg });
    }
    let value = weight_kg / (height_m * height_m);
    Ok(BmiResult {
        value,
        category: BmiCategory::from_value(value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let r = compute_bmi(1.75, 70.0).unwrap();
        assert!((r.value - 22.857142857142858).abs() < 1e-12);
        assert_eq!(r.category, BmiCategory::Normal);

        let r = compute_bmi(1.75, 50.0).unwrap();
        assert!((r.value - 16.326530612244898).abs() < 1e-12);
        assert_eq!(r.category, BmiCategory::Underweight);

        assert_eq!(compute_bmi(1.0, 25.0).unwrap().category, BmiCategory::Overweight);
    }

    #[test]
    fn boundary_table() {
        for (value, cat) in [
            (18.49, BmiCategory::Underweight),
            (18.5, BmiCategory::Normal),
            (24.99, BmiCategory::Normal),
            (25.0, BmiCategory::Overweight),
            (29.99, BmiCategory::Overweight),
            (30.0, BmiCategory::Obese),
        ] {
            assert_eq!(BmiCategory::from_value(value), cat, "{value}");
            // height 1 m makes the value equal the weight exactly
            assert_eq!(compute_bmi(1.0, value).unwrap().category, cat, "{value}");
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(compute_bmi(0.0, 70.0).is_err());
        assert!(compute_bmi(1.7, -1.0).is_err());
        assert!(compute_bmi(f64::NAN, 70.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_weight_antitone_in_height(h in 0.5..2.5f64, w in 20.0..200.0f64, dh in 0.0..0.5f64, dw in 0.0..50.0f64) {
            let base = compute_bmi(h, w).unwrap();
            let heavier = compute_bmi(h, w + dw).unwrap();
            let taller = compute_bmi(h + dh, w).unwrap();
            prop_assert!(heavier.value >= base.value && heavier.category >= base.category);
            prop_assert!(taller.value <= base.value && taller.category <= base.category);
        }
    }
}
