//! Crate-wide error and its stable machine codes.

use thiserror::Error;

use crate::catalog::CatalogError;
use crate::config::ConfigError;
use crate::detections::DetectionError;
use crate::quantify::QuantifyError;
use crate::recommender::RecommendError;
use crate::reference::ReferenceError;
use crate::store::StoreError;

/// Maps an error onto its wire code, HTTP status and process exit code.
pub trait ErrorCode {
    fn code(&self) -> &'static str;
    fn http_status(&self) -> u16;
    /// 2 for calibration failures, 1 for everything else.
    fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Quantify(#[from] QuantifyError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot decode image: {0}")]
    ImageDecode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl ErrorCode for ReferenceError {
    fn code(&self) -> &'static str {
        match self {
            Self::NoReferenceFound => "NO_REFERENCE_FOUND",
            Self::AmbiguousReference { .. } => "AMBIGUOUS_REFERENCE",
            Self::InvalidImage(_) => "INVALID_IMAGE",
            Self::InvalidSpec(_) => "INVALID_CONFIG",
        }
    }

    fn http_status(&self) -> u16 {
        match self {
            Self::NoReferenceFound | Self::AmbiguousReference { .. } => 422,
            Self::InvalidImage(_) | Self::InvalidSpec(_) => 400,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Self::NoReferenceFound | Self::AmbiguousReference { .. } => 2,
            _ => 1,
        }
    }
}

impl ErrorCode for CatalogError {
    fn code(&self) -> &'static str {
        match self {
            Self::Schema { .. } => "SCHEMA_ERROR",
            Self::DuplicateLabel { .. } => "DUPLICATE_LABEL",
            Self::UnknownFoodClass(_) => "UNKNOWN_FOOD_CLASS",
            Self::DuplicateRecipe(_) => "DUPLICATE_RECIPE",
            Self::UnknownRecipe(_) => "UNKNOWN_RECIPE",
        }
    }

    fn http_status(&self) -> u16 {
        match self {
            Self::UnknownFoodClass(_) | Self::UnknownRecipe(_) => 404,
            _ => 400,
        }
    }
}

impl ErrorCode for RecommendError {
    fn code(&self) -> &'static str {
        match self {
            Self::EmptyCorpus => "EMPTY_CORPUS",
            Self::EmptyRatings => "EMPTY_RATINGS",
            Self::NoEligibleRecipes => "NO_ELIGIBLE_RECIPES",
            Self::InvalidAnthropometrics { .. } => "INVALID_ANTHROPOMETRICS",
            Self::UnknownUser(_) => "UNKNOWN_USER",
            Self::UnknownRecipe(_) => "UNKNOWN_RECIPE",
            Self::InvalidRating(_) => "INVALID_RATING",
            Self::InvalidProfile(_) => "INVALID_PROFILE",
        }
    }

    fn http_status(&self) -> u16 {
        match self {
            Self::EmptyCorpus | Self::EmptyRatings => 500,
            Self::NoEligibleRecipes => 422,
            Self::UnknownUser(_) | Self::UnknownRecipe(_) => 404,
            Self::InvalidAnthropometrics { .. } | Self::InvalidRating(_) | Self::InvalidProfile(_) => 400,
        }
    }
}

impl ErrorCode for StoreError {
    fn code(&self) -> &'static str {
        match self {
            Self::StorageFull => "STORAGE_FULL",
            Self::CorruptLog { .. } | Self::CorruptSnapshot(_) => "CORRUPT_LOG",
            Self::Io(_) => "IO_ERROR",
        }
    }

    fn http_status(&self) -> u16 {
        match self {
            Self::StorageFull => 507,
            _ => 500,
        }
    }
}

impl ErrorCode for Error {
    fn code(&self) -> &'static str {
        match self {
            Self::Reference(e) => e.code(),
            Self::Quantify(QuantifyError::Reference(e)) => e.code(),
            Self::Quantify(QuantifyError::InvalidFillFactor(_)) => "INVALID_CONFIG",
            Self::Detection(DetectionError::Schema(_)) => "SCHEMA_ERROR",
            Self::Catalog(e) => e.code(),
            Self::Recommend(e) => e.code(),
            Self::Store(e) => e.code(),
            Self::Config(_) => "INVALID_CONFIG",
            Self::ImageDecode(_) => "INVALID_IMAGE",
        }
    }

    fn http_status(&self) -> u16 {
        match self {
            Self::Reference(e) | Self::Quantify(QuantifyError::Reference(e)) => e.http_status(),
            Self::Catalog(e) => e.http_status(),
            Self::Recommend(e) => e.http_status(),
            Self::Store(e) => e.http_status(),
            Self::Config(_) => 500,
            Self::Quantify(_) | Self::Detection(_) | Self::ImageDecode(_) => 400,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Self::Reference(e) | Self::Quantify(QuantifyError::Reference(e)) => e.exit_code(),
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_failures_exit_two() {
        let e = Error::from(QuantifyError::Reference(ReferenceError::NoReferenceFound));
        assert_eq!((e.code(), e.http_status(), e.exit_code()), ("NO_REFERENCE_FOUND", 422, 2));
        let e = Error::from(DetectionError::Schema("x".into()));
        assert_eq!((e.code(), e.http_status(), e.exit_code()), ("SCHEMA_ERROR", 400, 1));
        let e = Error::from(RecommendError::UnknownUser("u".into()));
        assert_eq!((e.code(), e.http_status()), ("UNKNOWN_USER", 404));
    }
}
