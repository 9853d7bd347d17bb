//! Executor state lanes per thread and utilization over a window.

use crate::{
    ir::{ExecutorState, ExecutorStateInterval, IrDatabase},
    trace::{HostId, Timestamp},
};
use serde::{Deserialize, Serialize};
use std::{collections::BTreeMap, fmt::Write};
use thiserror::Error;

pub const TIMELINE_VERSION: u32 = 1;
pub const DEFAULT_LANE_HEIGHT: u32 = 12;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TimelineLane {
    pub host: HostId,
    pub pid: u32,
    pub tid: u32,
    /// Disjoint and time-ordered.
    pub intervals: Vec<ExecutorStateInterval>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ExecutorUtilization {
    pub host: HostId,
    pub pid: u32,
    pub tid: u32,
    pub fraction_waiting: f64,
    pub fraction_overhead: f64,
    pub fraction_executing: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimelineError {
    #[error("window [{0}, {1}] is empty or reversed")]
    DegenerateWindow(Timestamp, Timestamp),
}

/// Earliest start and latest end over all executor intervals.
pub fn full_window(db: &IrDatabase) -> Option<(Timestamp, Timestamp)> {
    let start = db.executor_intervals.iter().map(|x| x.start).min()?;
    let end = db.executor_intervals.iter().map(|x| x.end).max()?;
    Some((start, end))
}

/// Lanes for every thread with executor intervals inside `[t0, t1]`, clipped to it.
pub fn build_timeline(db: &IrDatabase, window: (Timestamp, Timestamp)) -> Result<Vec<TimelineLane>, TimelineError> {
    let (t0, t1) = window;
    if t0 > t1 {
        return Err(TimelineError::DegenerateWindow(t0, t1));
    }
    let mut lanes: BTreeMap<(HostId, u32, u32), Vec<ExecutorStateInterval>> = BTreeMap::new();
    for x in &db.executor_intervals {
        let (start, end) = (x.start.max(t0), x.end.min(t1));
        if start >= end {
            continue;
        }
        lanes
            .entry((x.host.clone(), x.pid, x.tid))
            .or_default()
            .push(ExecutorStateInterval { start, end, ..x.clone() });
    }
    Ok(lanes
        .into_iter()
        .map(|((host, pid, tid), mut intervals)| {
            intervals.sort_by_key(|x| (x.start, x.end));
            TimelineLane { host, pid, tid, intervals }
        })
        .collect())
}

pub fn utilization(lanes: &[TimelineLane], window: (Timestamp, Timestamp)) -> Result<Vec<ExecutorUtilization>, TimelineError> {
    let (t0, t1) = window;
    if t0 >= t1 {
        return Err(TimelineError::DegenerateWindow(t0, t1));
    }
    let span = (t1 - t0) as f64;
    Ok(lanes
        .iter()
        .map(|lane| {
            let mut total = [0i64; 3];
            for x in &lane.intervals {
                let d = x.end.min(t1) - x.start.max(t0);
                if d > 0 {
                    total[state_index(x.state)] += d;
                }
            }
            ExecutorUtilization {
                host: lane.host.clone(),
                pid: lane.pid,
                tid: lane.tid,
                fraction_waiting: total[0] as f64 / span,
                fraction_overhead: total[1] as f64 / span,
                fraction_executing: total[2] as f64 / span,
            }
        })
        .collect())
}

fn state_index(s: ExecutorState) -> usize {
    match s {
        ExecutorState::Waiting => 0,
        ExecutorState::Overhead => 1,
        ExecutorState::Executing => 2,
    }
}

pub fn state_color(s: ExecutorState) -> &'static str {
    match s {
        ExecutorState::Executing => "green",
        ExecutorState::Waiting => "orange",
        ExecutorState::Overhead => "red",
    }
}

/// True if two lanes of one process are executing at the same instant.
pub fn has_concurrent_execution(lanes: &[TimelineLane]) -> bool {
    let mut by_proc: BTreeMap<(&HostId, u32), Vec<(Timestamp, Timestamp)>> = BTreeMap::new();
    for lane in lanes {
        let v = by_proc.entry((&lane.host, lane.pid)).or_default();
        v.extend(
            lane.intervals
                .iter()
                .filter(|x| x.state == ExecutorState::Executing)
                .map(|x| (x.start, x.end)),
        );
    }
    by_proc.values_mut().any(|v| {
        v.sort();
        // Intervals within one lane are disjoint, so any overlap comes from two lanes.
        let mut max_end = Timestamp::MIN;
        v.iter().any(|(s, e)| {
            let overlap = *s < max_end;
            max_end = max_end.max(*e);
            overlap
        })
    })
}

#[derive(Serialize)]
struct TimelineJson<'a> {
    timeline_version: u32,
    window: (Timestamp, Timestamp),
    lanes: &'a [TimelineLane],
    utilization: Vec<ExecutorUtilization>,
}

pub fn to_json(lanes: &[TimelineLane], window: (Timestamp, Timestamp)) -> String {
    let doc = TimelineJson {
        timeline_version: TIMELINE_VERSION,
        window,
        lanes,
        utilization: utilization(lanes, window).unwrap_or_default(),
    };
    serde_json::to_string_pretty(&doc).expect("timeline serializes") + "\n"
}

/// One horizontal lane per thread; green executing, orange waiting, red overhead.
pub fn to_svg(lanes: &[TimelineLane], window: (Timestamp, Timestamp), px_per_ms: f64, lane_height: u32) -> String {
    const LABEL_WIDTH: f64 = 160.0;
    let (t0, t1) = window;
    let h = lane_height as f64;
    let x = |t: Timestamp| LABEL_WIDTH + (t - t0) as f64 * px_per_ms / 1e6;
    let width = x(t1.max(t0)) + 10.0;
    let height = h * lanes.len() as f64 + 4.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" font-size=\"{:.1}\">\n",
        (h * 0.8).max(6.0)
    );
    out.push_str("  <g class=\"lanes\">");
    if !lanes.is_empty() {
        out.push('\n');
    }
    for (i, lane) in lanes.iter().enumerate() {
        let y = h * i as f64;
        let _ = writeln!(out, "    <g class=\"lane\" data-host=\"{}\" data-pid=\"{}\" data-tid=\"{}\">", lane.host, lane.pid, lane.tid);
        let _ = writeln!(out, "      <text x=\"2\" y=\"{:.1}\">{}/{}/{}</text>", y + h * 0.8, lane.host, lane.pid, lane.tid);
        for iv in &lane.intervals {
            let _ = writeln!(
                out,
                "      <rect class=\"{}\" x=\"{:.3}\" y=\"{:.1}\" width=\"{:.3}\" height=\"{:.1}\" fill=\"{}\"/>",
                state_name(iv.state),
                x(iv.start),
                y + 1.0,
                (x(iv.end) - x(iv.start)).max(0.0),
                h - 2.0,
                state_color(iv.state)
            );
        }
        out.push_str("    </g>\n");
    }
    if !lanes.is_empty() {
        out.push_str("  ");
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn state_name(s: ExecutorState) -> &'static str {
    match s {
        ExecutorState::Waiting => "waiting",
        ExecutorState::Overhead => "overhead",
        ExecutorState::Executing => "executing",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(tid: u32, state: ExecutorState, start: Timestamp, end: Timestamp) -> ExecutorStateInterval {
        ExecutorStateInterval { host: HostId::new("A").unwrap(), pid: 1, tid, state, start, end, target: None }
    }

    fn db(intervals: Vec<ExecutorStateInterval>) -> IrDatabase {
        IrDatabase { executor_intervals: intervals, ..IrDatabase::default() }
    }

    #[test]
    fn fully_waiting_lane() {
        let d = db(vec![iv(1, ExecutorState::Waiting, 0, 100)]);
        let lanes = build_timeline(&d, (0, 100)).unwrap();
        let u = utilization(&lanes, (0, 100)).unwrap();
        assert_eq!((u[0].fraction_waiting, u[0].fraction_overhead, u[0].fraction_executing), (1.0, 0.0, 0.0));
    }

    #[test]
    fn executing_30_of_100_ms() {
        let ms = 1_000_000;
        let d = db(vec![
            iv(1, ExecutorState::Waiting, 0, 70 * ms),
            iv(1, ExecutorState::Executing, 70 * ms, 100 * ms),
        ]);
        let lanes = build_timeline(&d, (0, 100 * ms)).unwrap();
        let u = utilization(&lanes, (0, 100 * ms)).unwrap();
        assert!((u[0].fraction_executing - 0.3).abs() < 1e-12);
    }

    #[test]
    fn window_outside_events_gives_no_lanes() {
        let d = db(vec![iv(1, ExecutorState::Waiting, 0, 100)]);
        assert!(build_timeline(&d, (200, 300)).unwrap().is_empty());
        assert!(utilization(&[], (0, 0)).is_err());
    }

    #[test]
    fn clipping_keeps_lanes_disjoint() {
        let d = db(vec![
            iv(1, ExecutorState::Waiting, 0, 10),
            iv(1, ExecutorState::Overhead, 10, 12),
            iv(1, ExecutorState::Executing, 12, 40),
        ]);
        let lanes = build_timeline(&d, (5, 20)).unwrap();
        let ivs = &lanes[0].intervals;
        assert_eq!(ivs.iter().map(|x| (x.start, x.end)).collect::<Vec<_>>(), vec![(5, 10), (10, 12), (12, 20)]);
        assert!(ivs.windows(2).all(|w| w[0].end <= w[1].start));
    }

    #[test]
    fn svg_rect_count_and_colors() {
        assert!(to_svg(&[], (0, 10), 1.0, DEFAULT_LANE_HEIGHT).contains("<g class=\"lanes\"></g>"));
        let d = db(vec![
            iv(1, ExecutorState::Waiting, 0, 10),
            iv(1, ExecutorState::Overhead, 10, 12),
            iv(1, ExecutorState::Executing, 12, 40),
        ]);
        let lanes = build_timeline(&d, (0, 40)).unwrap();
        let svg = to_svg(&lanes, (0, 40), 1.0, DEFAULT_LANE_HEIGHT);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("class=\"executing\"") && svg.contains("fill=\"green\""));
        assert!(svg.contains("class=\"waiting\"") && svg.contains("fill=\"orange\""));
        assert!(svg.contains("class=\"overhead\"") && svg.contains("fill=\"red\""));
    }

    #[test]
    fn concurrency_witness() {
        let a = vec![iv(1, ExecutorState::Executing, 0, 10), iv(2, ExecutorState::Executing, 5, 15)];
        let lanes = build_timeline(&db(a), (0, 20)).unwrap();
        assert!(has_concurrent_execution(&lanes));
        let b = vec![iv(1, ExecutorState::Executing, 0, 10), iv(2, ExecutorState::Executing, 10, 15)];
        let lanes = build_timeline(&db(b), (0, 20)).unwrap();
        assert!(!has_concurrent_execution(&lanes));
    }
}
