//! Decision procedures modeled on the Autoware planner.

use super::{decision, sorted_objects, PlanningDecision, SubjectConfig, SubjectId, Trace, Verdict};
use crate::error::Result;
use crate::scenario::PlanningScenario;

pub(super) fn v8_static_block(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let lane = sc.map.lane(sc.ego_lane_id())?;
    let ego_s = lane.project(sc.ego.position).s;
    let critical_lateral_distance = sc.ego.width / 2.0 + cfg.v8_lateral_margin;
    let behind_limit = -sc.ego.length / 1.5;
    let ahead_limit = cfg.v8_following_distance;

    let n = cfg.v8_candidates;
    let half = (n as f64 - 1.0) / 2.0;
    let offsets: Vec<f64> = (0..n).map(|j| (j as f64 - half) * cfg.v8_candidate_spacing).collect();
    let mut blocked = vec![false; n];

    for obs in sorted_objects(sc) {
        if !obs.is_static() {
            continue;
        }
        let Ok(poly) = obs.polygon() else { continue };
        let contour: Vec<(f64, f64)> = poly
            .points()
            .iter()
            .map(|&p| {
                let pr = lane.project(p);
                (pr.s, pr.l)
            })
            .collect();
        for (j, &offset) in offsets.iter().enumerate() {
            for &(s, l) in &contour {
                let lateral = (l - offset).abs();
                let longitudinal = s - ego_s;
                let hit = lateral <= critical_lateral_distance
                    && longitudinal >= behind_limit
                    && longitudinal < ahead_limit;
                let miss = (lateral - critical_lateral_distance).abs()
                    + (behind_limit - longitudinal).max(0.0)
                    + (longitudinal - ahead_limit).max(0.0);
                if trace.branch("p15", hit, miss) {
                    blocked[j] = true;
                }
            }
        }
    }

    let count = blocked.iter().filter(|&&b| b).count();
    if trace.branch("p20", count == n, (n - count) as f64) {
        trace.hit("t23");
        return Ok(decision(
            SubjectId::V8,
            Verdict::FullyBlocked,
            format!("all {n} candidate trajectories blocked"),
            Some("t23"),
        ));
    }
    Ok(decision(
        SubjectId::V8,
        Verdict::Clear,
        format!("{} of {n} candidate trajectories free", n - count),
        None,
    ))
}

pub(super) fn v9_dynamic_block(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let lane = sc.map.lane(sc.ego_lane_id())?;
    let ego_s = lane.project(sc.ego.position).s;
    let critical_distance = sc.ego.width / 2.0 + cfg.v9_lateral_margin;
    let path: Vec<_> = (0..cfg.v9_path_points)
        .map(|k| {
            let s = (ego_s + k as f64 * cfg.v9_path_spacing).min(lane.length());
            lane.centerline.offset_point(s, 0.0)
        })
        .collect();

    let mut culprit = None;
    for obs in sorted_objects(sc) {
        if obs.is_static() || lane.project(obs.center).s <= ego_s {
            continue;
        }
        for w in &obs.trajectory {
            for &p in &path {
                let d = w.pos.distance(p);
                if trace.branch("p10", d < critical_distance, d - critical_distance) {
                    trace.hit("t12");
                    culprit.get_or_insert(obs.id);
                }
            }
        }
    }
    Ok(match culprit {
        Some(id) => decision(
            SubjectId::V9,
            Verdict::Blocked,
            format!("predicted path of object {id} crosses the planned path"),
            Some("t12"),
        ),
        None => decision(SubjectId::V9, Verdict::Clear, "planned path clear", None),
    })
}
