use crate::catalog::RecipeBook;
use crate::store::{Event, EventRecord, State};

use super::{FeedbackEvent, RecommendError};

/// Validates a feedback event against known users and recipes and folds it
/// into `state`. A rating upserts the (user, recipe) cell; an untried
/// recipe is recorded as a skip. Returns the event to be logged.
pub fn ingest_feedback(
    event: FeedbackEvent,
    state: &mut State,
    recipes: &RecipeBook,
    sequence: u64,
) -> Result<EventRecord, RecommendError> {
    event.validate()?;
    if !state.profiles.contains_key(&event.user_id) {
        return Err(RecommendError::UnknownUser(event.user_id));
    }
    if !recipes.contains(&event.recipe_id) {
        return Err(RecommendError::UnknownRecipe(event.recipe_id));
    }
    let record = EventRecord {
        sequence,
        timestamp: event.timestamp,
        event: Event::Feedback(event),
    };
    state.apply(&record);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::DietTag;
    use crate::recommender::{Gender, ProfileUpsert, Rating};
    use chrono::DateTime;

    fn state_with_user() -> State {
        let mut state = State::default();
        state.apply(&EventRecord {
            sequence: 1,
            timestamp: DateTime::UNIX_EPOCH,
            event: Event::ProfileUpsert(ProfileUpsert {
                user_id: "u1".into(),
                height_m: 1.7,
                weight_kg: 60.0,
                gender: Gender::Female,
                diet_pref: DietTag::Vegan,
                health_history: String::new(),
                sugar_limit_g: 25.0,
                carb_limit_g: 60.0,
            }),
        });
        state
    }

    fn event(user: &str, recipe: &str, rating: Option<i64>) -> FeedbackEvent {
        FeedbackEvent {
            user_id: user.into(),
            recipe_id: recipe.into(),
            tried: rating.is_some(),
            rating: rating.map(|r| Rating::new(r).unwrap()),
            timestamp: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn rating_upserts() {
        let book = RecipeBook::shipped();
        let mut state = state_with_user();
        ingest_feedback(event("u1", "r01", Some(2)), &mut state, &book, 2).unwrap();
        ingest_feedback(event("u1", "r01", Some(5)), &mut state, &book, 3).unwrap();
        assert_eq!(state.ratings["u1"].len(), 1);
        assert_eq!(state.ratings["u1"]["r01"].get(), 5);
        assert_eq!(state.last_sequence, 3);
    }

    #[test]
    fn untried_records_skip() {
        let book = RecipeBook::shipped();
        let mut state = state_with_user();
        ingest_feedback(event("u1", "r02", None), &mut state, &book, 2).unwrap();
        assert_eq!(state.skips_for("u1")[0].recipe_id, "r02");
        assert_eq!(state.rating_count("u1"), 0);
    }

    #[test]
    fn unknown_ids_rejected() {
        let book = RecipeBook::shipped();
        let mut state = state_with_user();
        assert_eq!(
            ingest_feedback(event("ghost", "r01", Some(3)), &mut state, &book, 2),
            Err(RecommendError::UnknownUser("ghost".into()))
        );
        assert_eq!(
            ingest_feedback(event("u1", "r99", Some(3)), &mut state, &book, 2),
            Err(RecommendError::UnknownRecipe("r99".into()))
        );
        assert_eq!(state.last_sequence, 1);
    }
}
