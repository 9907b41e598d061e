//! ETH/UCY-style trajectory ingestion, window extraction and the five task
//! protocols (splits and per-task window lengths).

mod registry;
mod split;
mod task;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::{Error, Result, Scalar};

pub use registry::{SceneEntry, SceneRegistry};
pub use split::{domain_adaptation_pairs, make_split, scene_groups, subsample_windows};
pub use task::{Task, TaskSpec, ETH_UCY_SCENES, T_FUT};

/// A world-coordinate position in meters.
pub type Position<T> = [T; 2];

/// One `frame ped x y` line after frame-stride normalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord<T> {
    pub frame_id: i64,
    pub ped_id: i64,
    pub x: T,
    pub y: T,
}

/// Every record of one scene file, sorted by `(ped_id, frame_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecords<T> {
    pub name: String,
    pub records: Vec<RawRecord<T>>,
    /// Raw frame-id step divided out during parsing (10 for most ETH/UCY files).
    pub frame_stride: i64,
}

/// A fixed-length observation/prediction window for one agent.
///
/// `neighbors` lists the ped ids of every other agent present for the whole
/// span. Each of them has its own window with the same `scene_id` and
/// `start_frame` in the set produced by [`make_windows`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryWindow<T> {
    pub scene_id: String,
    pub ped_id: i64,
    pub start_frame: i64,
    pub hist: Vec<Position<T>>,
    pub fut: Vec<Position<T>>,
    pub neighbors: Vec<i64>,
}

impl<T: Scalar> TrajectoryWindow<T> {
    pub fn last_observed(&self) -> Position<T> {
        *self.hist.last().expect("window has an empty history")
    }

    /// Frame index of `fut[0]`.
    pub fn first_future_frame(&self) -> i64 {
        self.start_frame + self.hist.len() as i64
    }
}

/// Reads a whitespace-separated `frame ped x y` file.
pub fn parse_scene<T: Scalar>(path: impl AsRef<Path>) -> Result<SceneRecords<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_scene_text(&name, &text, path)
}

/// Same as [`parse_scene`] on in-memory text; `origin` only labels errors.
pub fn parse_scene_text<T: Scalar>(
    name: &str,
    text: &str,
    origin: impl AsRef<Path>,
) -> Result<SceneRecords<T>> {
    let origin = origin.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };

    let mut raw: Vec<(i64, i64, f64, f64, usize)> = Vec::new();
    let mut last_frame: HashMap<i64, i64> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 fields (frame ped x y), found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    parse_err(
                        lineno,
                        format!("field {} is not a finite number: {:?}", i + 1, fields[i]),
                    )
                })
        };
        let (frame, ped, x, y) = (num(0)?, num(1)?, num(2)?, num(3)?);
        if frame.fract() != 0.0 || ped.fract() != 0.0 {
            return Err(parse_err(
                lineno,
                "frame and ped ids must be integers".into(),
            ));
        }
        let (frame, ped) = (frame as i64, ped as i64);
        if let Some(&prev) = last_frame.get(&ped) {
            if frame <= prev {
                return Err(Error::Data(format!(
                    "{}:{lineno}: frames for ped {ped} are not strictly increasing ({prev} then {frame})",
                    origin.display()
                )));
            }
        }
        last_frame.insert(ped, frame);
        raw.push((frame, ped, x, y, lineno));
    }

    let frame_stride = detect_stride(&raw);
    let min_frame = raw.iter().map(|r| r.0).min().unwrap_or(0);
    let mut records = Vec::with_capacity(raw.len());
    for &(frame, ped, x, y, lineno) in &raw {
        let offset = frame - min_frame;
        if offset % frame_stride != 0 {
            return Err(Error::Data(format!(
                "{}:{lineno}: frame {frame} is off the detected stride {frame_stride}",
                origin.display()
            )));
        }
        records.push(RawRecord {
            frame_id: offset / frame_stride,
            ped_id: ped,
            x: T::of(x),
            y: T::of(y),
        });
    }
    records.sort_by_key(|r| (r.ped_id, r.frame_id));
    Ok(SceneRecords {
        name: name.to_string(),
        records,
        frame_stride,
    })
}

/// Most common positive frame step between consecutive observations of one agent.
fn detect_stride(raw: &[(i64, i64, f64, f64, usize)]) -> i64 {
    let mut by_ped: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for r in raw {
        by_ped.entry(r.1).or_default().push(r.0);
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for frames in by_ped.values() {
        for w in frames.windows(2) {
            *counts.entry(w[1] - w[0]).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(step, _)| step)
        .unwrap_or(1)
}

/// Cuts every agent's contiguous runs into windows of `t_hist + t_fut`
/// frames with stride one. The result is ordered by `(start_frame, ped_id)`.
pub fn make_windows<T: Scalar>(
    scene: &SceneRecords<T>,
    spec: &TaskSpec,
) -> Vec<TrajectoryWindow<T>> {
    let total = spec.t_hist + spec.t_fut;
    let mut windows = Vec::new();
    let mut i = 0;
    let recs = &scene.records;
    while i < recs.len() {
        let ped = recs[i].ped_id;
        let mut j = i;
        while j < recs.len() && recs[j].ped_id == ped {
            j += 1;
        }
        // split [i, j) into contiguous runs
        let mut run_start = i;
        for k in i..=j {
            let breaks = k == j || (k > run_start && recs[k].frame_id != recs[k - 1].frame_id + 1);
            if breaks {
                let run = &recs[run_start..k];
                if run.len() >= total {
                    for w in run.windows(total) {
                        let pts: Vec<Position<T>> = w.iter().map(|r| [r.x, r.y]).collect();
                        windows.push(TrajectoryWindow {
                            scene_id: scene.name.clone(),
                            ped_id: ped,
                            start_frame: w[0].frame_id,
                            hist: pts[..spec.t_hist].to_vec(),
                            fut: pts[spec.t_hist..].to_vec(),
                            neighbors: Vec::new(),
                        });
                    }
                }
                run_start = k;
            }
        }
        i = j;
    }
    windows.sort_by_key(|w| (w.start_frame, w.ped_id));

    let mut by_start: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for w in &windows {
        by_start.entry(w.start_frame).or_default().push(w.ped_id);
    }
    for w in &mut windows {
        w.neighbors = by_start[&w.start_frame]
            .iter()
            .copied()
            .filter(|&p| p != w.ped_id)
            .collect();
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SceneRecords<f64>> {
        parse_scene_text("test", text, "test.txt")
    }

    fn straight_track(ped: i64, frames: impl Iterator<Item = i64>) -> String {
        frames
            .map(|f| format!("{} {} {:.1} 0.0\n", f * 10, ped, f as f64))
            .collect()
    }

    #[test]
    fn two_line_file() {
        let scene = parse("0 1 0.0 0.0\n10 1 1.0 0.0\n").unwrap();
        assert_eq!(scene.records.len(), 2);
        assert_eq!(scene.frame_stride, 10);
        assert_eq!(scene.records[1].frame_id, 1);
        assert_eq!(scene.records[1].x, 1.0);
    }

    #[test]
    fn empty_file() {
        let scene = parse("").unwrap();
        assert!(scene.records.is_empty());
    }

    #[test]
    fn three_field_line_names_the_line() {
        let err = parse("0 1 0.0 0.0\n10 1 1.0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let err = parse("10 1 0.0 0.0\n0 1 1.0 0.0\n").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn sorted_by_ped_then_frame() {
        let scene = parse("0 2 0 0\n0 1 0 0\n10 2 1 0\n10 1 1 0\n").unwrap();
        let keys: Vec<_> = scene
            .records
            .iter()
            .map(|r| (r.ped_id, r.frame_id))
            .collect();
        assert_eq!(keys, vec![(1, 0), (1, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn window_counts() {
        let spec = TaskSpec::leave_one_out(Task::Stochastic, "A", &["A", "B"]).unwrap();
        let s20 = parse(&straight_track(1, 0..20)).unwrap();
        assert_eq!(make_windows(&s20, &spec).len(), 1);
        let s21 = parse(&straight_track(1, 0..21)).unwrap();
        assert_eq!(make_windows(&s21, &spec).len(), 2);
        // 20 frames with frame 10 missing
        let gap = parse(&straight_track(1, (0..21).filter(|&f| f != 10))).unwrap();
        assert_eq!(make_windows(&gap, &spec).len(), 0);
    }

    #[test]
    fn neighbors_require_full_overlap() {
        let spec = TaskSpec::leave_one_out(Task::Stochastic, "A", &["A", "B"]).unwrap();
        let mut text = straight_track(1, 0..20);
        text += &straight_track(2, 0..20);
        text += &straight_track(3, 5..25);
        let windows = make_windows(&parse(&text).unwrap(), &spec);
        let w1 = windows.iter().find(|w| w.ped_id == 1).unwrap();
        assert_eq!(w1.neighbors, vec![2]);
        let w3 = windows.iter().find(|w| w.ped_id == 3).unwrap();
        assert!(w3.neighbors.is_empty());
    }

    #[test]
    fn hist_and_future_are_consecutive() {
        let spec = TaskSpec::leave_one_out(Task::Momentary, "A", &["A", "B"]).unwrap();
        let windows = make_windows(&parse(&straight_track(1, 0..30)).unwrap(), &spec);
        for w in &windows {
            assert_eq!(w.hist.len(), 2);
            assert_eq!(w.fut.len(), 12);
            assert_eq!(w.fut[0][0] - w.hist[1][0], 1.0);
        }
    }
}
