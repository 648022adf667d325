//! Decision procedures modeled on the Apollo planner.
//!
//! Lateral coordinates inside these procedures follow the planner's own
//! convention where negative `l` is left of the reference line, so values
//! produced by [`FrenetBox`] are flipped on the way in.

use std::collections::HashMap;

use super::{decision, sorted_objects, FrenetBox, PlanningDecision, SubjectConfig, SubjectId, Trace, Verdict};
use crate::error::{Error, Result};
use crate::geom::{min_lateral_distance, normalize_angle, point_segment_distance, Point2};
use crate::scenario::{ObjectType, PlanningScenario};

pub(super) fn v1_path_bounds(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let lane = sc.map.lane(sc.ego_lane_id())?;
    let hw = lane.half_width();
    let ego_s = lane.project(sc.ego.position).s;

    let mut boxes: Vec<FrenetBox> = sorted_objects(sc)
        .into_iter()
        .filter(|o| o.is_static())
        .filter_map(|o| o.polygon().ok())
        .map(|p| FrenetBox::of(lane, &p))
        .filter(|b| b.max_s >= ego_s && b.min_s <= ego_s + cfg.v1_lookahead)
        .collect();
    boxes.sort_by(|a, b| a.min_s.total_cmp(&b.min_s));

    // Obstacles close to each other longitudinally share a slice.
    let mut slices: Vec<Vec<FrenetBox>> = Vec::new();
    let mut reach = f64::NEG_INFINITY;
    for b in boxes {
        match slices.last_mut() {
            Some(slice) if b.min_s - reach <= cfg.v1_slice_gap => slice.push(b),
            _ => slices.push(vec![b]),
        }
        reach = reach.max(b.max_s);
    }
    if slices.is_empty() {
        slices.push(Vec::new());
    }

    let mut narrowest = f64::INFINITY;
    let mut blocked = false;
    for slice in &slices {
        let (mut left_bound, mut right_bound) = (-hw, hw);
        for b in slice {
            let (min_l, max_l) = b.right_positive();
            let center = (min_l + max_l) / 2.0;
            if trace.branch("p7", center < 0.0, center) {
                left_bound = left_bound.max(max_l + cfg.v1_lateral_buffer);
            } else {
                right_bound = right_bound.min(min_l - cfg.v1_lateral_buffer);
            }
        }
        let gap = right_bound - left_bound;
        narrowest = narrowest.min(gap);
        if trace.branch("p13", gap < sc.ego.width, gap - sc.ego.width) {
            blocked = true;
            trace.hit("t15");
        }
    }
    Ok(if blocked {
        decision(
            SubjectId::V1,
            Verdict::Blocked,
            format!("drivable gap {narrowest:.3} m is narrower than the vehicle"),
            Some("t15"),
        )
    } else {
        decision(SubjectId::V1, Verdict::Clear, format!("narrowest gap {narrowest:.3} m"), None)
    })
}

pub(super) fn v2_lane_change_clear(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let target_id = sc
        .context
        .target_lane
        .ok_or_else(|| Error::Context("lane change requires a target lane".into()))?;
    let target = sc.map.lane(target_id)?;
    let ego_start_s = target.project(sc.ego.position).s - sc.ego.length / 2.0;
    let limit = cfg.v2_lateral_filter;

    for obs in sorted_objects(sc) {
        if !trace.branch("p3", obs.kind == ObjectType::Vehicle, 0.0) {
            continue;
        }
        let Ok(poly) = obs.polygon() else { continue };
        let b = FrenetBox::of(target, &poly);
        let (start_l, end_l) = b.right_positive();
        let outside = end_l < -limit || start_l > limit;
        let lateral = (end_l + limit).abs().min((start_l - limit).abs());
        if trace.branch("p5", outside, lateral) {
            continue;
        }
        let gap = ego_start_s - b.max_s;
        if trace.branch("p10", gap < cfg.v2_backward_buffer, gap - cfg.v2_backward_buffer) {
            trace.hit("t11");
            return Ok(decision(
                SubjectId::V2,
                Verdict::NotClear,
                format!("vehicle {} is {gap:.2} m behind on the target lane", obs.id),
                Some("t11"),
            ));
        }
    }
    Ok(decision(SubjectId::V2, Verdict::ClearToChange, "target lane clear", None))
}

pub(super) fn v3_blocker_movable(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let lane = sc.map.lane(sc.ego_lane_id())?;
    let blocker = sc
        .context
        .blocker_id
        .and_then(|id| sc.object(id))
        .ok_or_else(|| Error::Context("lane borrow requires a blocking obstacle".into()))?;
    let current = FrenetBox::of(lane, &blocker.polygon()?);
    let (cur_start_l, cur_end_l) = current.right_positive();

    for obs in sorted_objects(sc) {
        if obs.id == blocker.id {
            continue;
        }
        let Ok(poly) = obs.polygon() else { continue };
        let b = FrenetBox::of(lane, &poly);
        let (start_l, end_l) = b.right_positive();
        let apart = start_l > cur_end_l || end_l < cur_start_l;
        let lateral = (start_l - cur_end_l).abs().min((end_l - cur_start_l).abs());
        if trace.branch("p6", apart, lateral) {
            continue;
        }
        let delta_s = b.min_s - current.max_s;
        let outside = delta_s < 0.0 || delta_s > cfg.v3_threshold;
        let longitudinal = delta_s.abs().min((delta_s - cfg.v3_threshold).abs());
        if trace.branch("p11", outside, longitudinal) {
            continue;
        }
        trace.hit("t16");
        return Ok(decision(
            SubjectId::V3,
            Verdict::NonMovable,
            format!("blocker {} looks queued behind obstacle {}", blocker.id, obs.id),
            Some("t16"),
        ));
    }
    Ok(decision(SubjectId::V3, Verdict::Movable, "blocker can be passed", None))
}

pub(super) fn v4_perception_blocked(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let heading = sc.ego.heading;
    let origin = sc.ego.position;
    let range = cfg.v4_search_range;
    let step = cfg.v4_beam_intensity;
    let beams = (0..).take_while(|&k| (k as f64) * step < range).count();

    // These three survive from one obstacle to the next.
    let mut left_most = normalize_angle(heading + 0.5 * range);
    let mut right_most = normalize_angle(heading - 0.5 * range);
    let mut right_most_found = false;

    for obs in sorted_objects(sc) {
        if Some(obs.id) == sc.context.blocker_id {
            continue;
        }
        let Ok(poly) = obs.polygon() else { continue };
        for k in 0..beams {
            let search_angle = k as f64 * step;
            let beam_heading = heading - 0.5 * range + search_angle;
            let end = origin + Point2::from_heading(beam_heading) * cfg.v4_beam_length;
            let clearance = min_lateral_distance(&[origin, end], &poly);
            let overlap = trace.branch("p17", clearance == 0.0, clearance);
            if trace.branch("p22", !right_most_found && overlap, 0.0) {
                right_most_found = true;
                right_most = beam_heading;
            }
            if trace.branch("p26", right_most_found && !overlap, 0.0) {
                left_most = beam_heading - step;
                break;
            }
        }
        if trace.branch("p30", !right_most_found, 0.0) {
            continue;
        }
        let span = normalize_angle(left_most - right_most).abs();
        if trace.branch("p33", span > cfg.v4_block_angle, span - cfg.v4_block_angle) {
            trace.hit("t35");
            return Ok(decision(
                SubjectId::V4,
                Verdict::PerceptionBlocked,
                format!("blocked sector {span:.3} rad after obstacle {}", obs.id),
                Some("t35"),
            ));
        }
    }
    Ok(decision(SubjectId::V4, Verdict::Ok, "perception clear", None))
}

pub(super) fn v5_crosswalk_static(
    _cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let reference = sc.route_polyline();
    let threshold = sc.ego.width;
    let mut stop_for = None;
    for obs in sorted_objects(sc) {
        if obs.kind != ObjectType::Pedestrian {
            continue;
        }
        if !trace.branch("p4", obs.is_static(), 0.0) {
            continue;
        }
        let Ok(poly) = obs.polygon() else { continue };
        let d = min_lateral_distance(&reference, &poly);
        if trace.branch("p6", d < threshold, d - threshold) {
            trace.hit("t8");
            stop_for.get_or_insert(obs.id);
        }
    }
    Ok(match stop_for {
        Some(id) => decision(
            SubjectId::V5,
            Verdict::Stop,
            format!("pedestrian {id} crosses the driving path"),
            Some("t8"),
        ),
        None => decision(SubjectId::V5, Verdict::Proceed, "crosswalk clear", None),
    })
}

fn distance_to_polyline(p: Point2, line: &[Point2]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.distance(*only),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

pub(super) fn v6_crosswalk_moving(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let reference = sc.route_polyline();
    let adc_path_point = sc.ego.position;
    let mut stop_for = None;
    for obs in sorted_objects(sc) {
        if obs.kind != ObjectType::Pedestrian || obs.is_static() {
            continue;
        }
        let l_distance = distance_to_polyline(obs.center, &reference);
        let near = l_distance < cfg.v6_strict_l_distance;
        if !trace.branch("p4", near, l_distance - cfg.v6_strict_l_distance) {
            continue;
        }
        let obs_to_adc = adc_path_point - obs.center;
        let inner = obs.velocity().dot(obs_to_adc);
        if trace.branch("p8", inner > 1e-6, inner - 1e-6) {
            trace.hit("t10");
            stop_for.get_or_insert(obs.id);
        }
    }
    Ok(match stop_for {
        Some(id) => decision(
            SubjectId::V6,
            Verdict::Stop,
            format!("pedestrian {id} is moving toward the vehicle"),
            Some("t10"),
        ),
        None => decision(SubjectId::V6, Verdict::Proceed, "no approaching pedestrian", None),
    })
}

pub(super) fn v7_stop_sign_watch_list(
    cfg: &SubjectConfig,
    sc: &PlanningScenario,
    trace: &mut Trace,
) -> Result<PlanningDecision> {
    let asso: HashMap<u32, f64> = sc
        .context
        .associated_lanes
        .iter()
        .map(|a| (a.lane, a.stop_s))
        .collect();
    let mut watch_list: Vec<(u32, u32)> = Vec::new();
    for obs in sorted_objects(sc) {
        let skip = obs.kind != ObjectType::Bicycle && obs.kind != ObjectType::Vehicle;
        if trace.branch("p4", skip, 0.0) {
            continue;
        }
        let Ok((lane, pr)) = sc.map.nearest(obs.center) else { continue };
        let within = pr.distance <= cfg.v7_lane_radius;
        if !trace.branch("p7", within, pr.distance - cfg.v7_lane_radius) {
            continue;
        }
        let guarded = asso.get(&lane.id).copied();
        if !trace.branch("p10", guarded.is_some(), 0.0) {
            continue;
        }
        let Some(stop_s) = guarded else { continue };
        let to_stop_line = stop_s - pr.s;
        let close = to_stop_line < cfg.v7_max_stop_distance;
        if trace.branch("p11", close, to_stop_line - cfg.v7_max_stop_distance) {
            watch_list.push((lane.id, obs.id));
        }
    }
    let n = watch_list.len();
    if trace.branch("p16", n >= 2, n as f64 - 2.0) {
        trace.hit("t17");
        return Ok(decision(
            SubjectId::V7,
            Verdict::Stop,
            format!("{n} watched obstacles never clear the intersection"),
            Some("t17"),
        ));
    }
    let reason = if n == 1 {
        format!(
            "single watched obstacle released after {} cycles",
            cfg.v7_timeout_cycles
        )
    } else {
        "watch list empty".to_string()
    };
    Ok(decision(SubjectId::V7, Verdict::Proceed, reason, None))
}
