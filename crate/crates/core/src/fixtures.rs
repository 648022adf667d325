//! Seed scenarios compiled into the library.

use crate::error::{Error, Result};
use crate::scenario::PlanningScenario;
use crate::subjects::SubjectId;

const SEEDS: [(&str, &str); 9] = [
    ("v1_narrow_lane.json", include_str!("../fixtures/v1_narrow_lane.json")),
    ("v2_lane_change.json", include_str!("../fixtures/v2_lane_change.json")),
    ("v3_lane_borrow.json", include_str!("../fixtures/v3_lane_borrow.json")),
    ("v4_lane_borrow_offroad.json", include_str!("../fixtures/v4_lane_borrow_offroad.json")),
    ("v5_signal_standing.json", include_str!("../fixtures/v5_signal_standing.json")),
    ("v6_signal_walking.json", include_str!("../fixtures/v6_signal_walking.json")),
    ("v7_stop_sign.json", include_str!("../fixtures/v7_stop_sign.json")),
    ("v8_autoware_static.json", include_str!("../fixtures/v8_autoware_static.json")),
    ("v9_autoware_dynamic.json", include_str!("../fixtures/v9_autoware_dynamic.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SEEDS.iter().map(|(n, _)| *n)
}

/// Raw JSON of a bundled seed, looked up by file name.
pub fn seed_json(name: &str) -> Option<&'static str> {
    SEEDS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_named(name: &str) -> Result<PlanningScenario> {
    let text = seed_json(name).ok_or_else(|| Error::Usage(format!("no bundled seed named `{name}`")))?;
    PlanningScenario::from_json(text, name)
}

/// The bundled seed for a subject.
pub fn seed_for(subject: SubjectId) -> PlanningScenario {
    load_named(subject.fixture()).expect("bundled seeds are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_seed_loads() {
        for s in SubjectId::ALL {
            let sc = seed_for(s);
            assert_eq!(sc.kind, s.scenario_kind());
        }
    }

    #[test]
    fn v1_seed_is_empty_narrow_lane() {
        let sc = seed_for(SubjectId::V1);
        assert_eq!(sc.objects.len(), 0);
        assert_eq!(sc.map.lane(1).unwrap().width, 2.7);
    }

    #[test]
    fn seeds_round_trip() {
        for name in names() {
            let sc = load_named(name).unwrap();
            let again = PlanningScenario::from_json(&sc.to_json(), name).unwrap();
            assert_eq!(sc, again);
        }
    }
}
