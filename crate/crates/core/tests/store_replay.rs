use chrono::{DateTime, Duration, Utc};
use nutrivision_core::recommender::{FeedbackEvent, Gender, MealEntry, ProfileUpsert, Rating};
use nutrivision_core::store::{replay, replay_bytes, Event, EventLog, MealLogged, State};
use nutrivision_core::{DietTag, PlateReport};
use proptest::prelude::*;

fn base() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2026-01-01T00:00:00Z").unwrap().with_timezone(&Utc)
}

fn arb_event() -> impl Strategy<Value = Event> {
    let user = prop::sample::select(vec!["u1", "u2", "u3"]);
    let recipe = prop::sample::select(vec!["r01", "r02", "r07", "r13"]);
    prop_oneof![
        (user.clone(), 1.4f64..2.1, 40.0f64..120.0, 0usize..3).prop_map(|(u, h, w, d)| {
            Event::ProfileUpsert(ProfileUpsert {
                user_id: u.into(),
                height_m: h,
                weight_kg: w,
                gender: Gender::Other,
                diet_pref: [DietTag::Vegan, DietTag::Vegetarian, DietTag::NonVegetarian][d],
                health_history: "low sugar".into(),
                sugar_limit_g: 25.0,
                carb_limit_g: 60.0,
            })
        }),
        (user.clone(), 0i64..100).prop_map(|(u, hours)| {
            Event::MealLogged(MealLogged {
                user_id: u.into(),
                entry: MealEntry {
                    timestamp: base() + Duration::hours(hours),
                    report: PlateReport::default(),
                },
            })
        }),
        (user, recipe, prop::option::of(1i64..=5)).prop_map(|(u, r, rating)| {
            Event::Feedback(FeedbackEvent {
                user_id: u.into(),
                recipe_id: r.into(),
                tried: rating.is_some(),
                rating: rating.map(|v| Rating::new(v).unwrap()),
                timestamp: base(),
            })
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn replay_equals_incremental_fold(events in prop::collection::vec(arb_event(), 100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        let (mut log, _, _) = EventLog::open(&path).unwrap();
        let mut fold = State::default();
        let mut prefixes = vec![State::default()];
        for (i, event) in events.into_iter().enumerate() {
            let record = log.append(event, base() + Duration::seconds(i as i64)).unwrap();
            fold.apply(&record);
            prefixes.push(fold.clone());
        }
        drop(log);
        let (replayed, report) = replay(&path).unwrap();
        prop_assert_eq!(&replayed, &fold);
        prop_assert_eq!(report.ignored_tail_bytes, 0);

        let bytes = std::fs::read(&path).unwrap();
        let mut line_ends = vec![0];
        line_ends.extend(bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1));
        for (n, end) in line_ends.iter().enumerate() {
            let (state, _) = replay_bytes(&bytes[..*end], State::default()).unwrap();
            prop_assert_eq!(&state, &prefixes[n]);
        }
    }
}

#[test]
fn torn_tail_is_dropped_and_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let (mut log, _, _) = EventLog::open(&path).unwrap();
    let upsert = Event::ProfileUpsert(ProfileUpsert {
        user_id: "u1".into(),
        height_m: 1.7,
        weight_kg: 65.0,
        gender: Gender::Male,
        diet_pref: DietTag::Vegan,
        health_history: String::new(),
        sugar_limit_g: 25.0,
        carb_limit_g: 60.0,
    });
    log.append(upsert.clone(), base()).unwrap();
    log.append(upsert, base()).unwrap();
    drop(log);
    let full = std::fs::read(&path).unwrap();
    std::fs::write(&path, &full[..full.len() - 7]).unwrap();

    let (state, report) = replay(&path).unwrap();
    assert_eq!(state.last_sequence, 1);
    assert!(report.ignored_tail_bytes > 0);

    let (mut log, state, _) = EventLog::open(&path).unwrap();
    assert_eq!(state.last_sequence, 1);
    assert_eq!(log.last_sequence(), 1);
    let rec = log
        .append(
            Event::MealLogged(MealLogged {
                user_id: "u1".into(),
                entry: MealEntry {
                    timestamp: base(),
                    report: PlateReport::default(),
                },
            }),
            base(),
        )
        .unwrap();
    assert_eq!(rec.sequence, 2);
    drop(log);
    let (state, report) = replay(&path).unwrap();
    assert_eq!(report.ignored_tail_bytes, 0);
    assert_eq!(state.profiles["u1"].meal_log.len(), 1);
}
