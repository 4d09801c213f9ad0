//! Demonstration sets on disk.
//!
//! One JSON document per set: channels declared once, each demo a list of
//! rows `[t, v_0, v_1, ...]`. Positions are meters, orientations axis-angle
//! radians.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::trajectory::{Channel, ChannelKind, ChannelLayout, Sample, Trajectory};

pub const DEMOSET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Recorded,
    Synthetic,
    PaperDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub task_label: String,
    pub frame: String,
    pub provenance: Provenance,
    pub demos: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSetDocument {
    pub version: u32,
    pub task_label: String,
    pub frame: String,
    pub provenance: Provenance,
    pub channels: ChannelLayout,
    pub demos: Vec<DemoDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoDocument {
    pub samples: Vec<Vec<f64>>,
}

impl DemoSet {
    pub fn new(task_label: &str, frame: &str, provenance: Provenance, demos: Vec<Trajectory>) -> Result<Self> {
        let set = Self {
            task_label: task_label.to_string(),
            frame: frame.to_string(),
            provenance,
            demos,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn channels(&self) -> &ChannelLayout {
        &self.demos[0].channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.demos.len() < 2 {
            return Err(CoreError::DegenerateInput(format!(
                "demo set {} needs at least 2 demos, has {}",
                self.task_label,
                self.demos.len()
            )));
        }
        let layout = &self.demos[0].channels;
        for (i, d) in self.demos.iter().enumerate() {
            if &d.channels != layout {
                return Err(CoreError::Schema(format!("demo {i} uses a different channel layout")));
            }
            d.validate()?;
        }
        Ok(())
    }

    pub fn to_document(&self) -> DemoSetDocument {
        DemoSetDocument {
            version: DEMOSET_FORMAT_VERSION,
            task_label: self.task_label.clone(),
            frame: self.frame.clone(),
            provenance: self.provenance,
            channels: self.channels().clone(),
            demos: self
                .demos
                .iter()
                .map(|d| DemoDocument {
                    samples: d
                        .samples
                        .iter()
                        .map(|s| std::iter::once(s.t).chain(s.values.iter().copied()).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: DemoSetDocument) -> Result<Self> {
        let (task_label, frame, provenance) = (doc.task_label.clone(), doc.frame.clone(), doc.provenance);
        let demos = demos_from_document(doc)?;
        Self::new(&task_label, &frame, provenance, demos)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("demo set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DemoSetDocument = serde_json::from_str(text).map_err(|e| CoreError::json("demo set", e))?;
        Self::from_document(doc)
    }
}

fn demos_from_document(doc: DemoSetDocument) -> Result<Vec<Trajectory>> {
    if doc.version != DEMOSET_FORMAT_VERSION {
        return Err(CoreError::Version {
            found: doc.version,
            supported: DEMOSET_FORMAT_VERSION,
        });
    }
    doc.channels
        .validate()
        .map_err(|e| CoreError::field("channels", e.to_string()))?;
    let dim = doc.channels.dim();
    let mut demos = Vec::with_capacity(doc.demos.len());
    for (i, demo) in doc.demos.into_iter().enumerate() {
        let mut samples = Vec::with_capacity(demo.samples.len());
        for (j, row) in demo.samples.into_iter().enumerate() {
            if row.len() != dim + 1 {
                return Err(CoreError::field(
                    format!("demos[{i}].samples[{j}]"),
                    format!("expected {} columns (t + {dim} values), found {}", dim + 1, row.len()),
                ));
            }
            samples.push(Sample::new(row[0], row[1..].to_vec()));
        }
        let traj = Trajectory::new(doc.channels.clone(), doc.frame.clone(), samples)
            .map_err(|e| CoreError::field(format!("demos[{i}]"), e.to_string()))?;
        demos.push(traj);
    }
    Ok(demos)
}

pub fn load_demoset(path: &Path) -> Result<DemoSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let doc: DemoSetDocument =
        serde_json::from_str(&text).map_err(|e| CoreError::json(&path.display().to_string(), e))?;
    DemoSet::from_document(doc)
}

pub fn save_demoset(set: &DemoSet, path: &Path) -> Result<()> {
    std::fs::write(path, set.to_json()).map_err(|e| CoreError::io(path, e))
}

/// Reads the trajectories of a demo set document, which may hold a single demo.
///
/// Also accepts a bare trajectory document (`channels`, `frame`, `samples`).
pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let location = path.display().to_string();
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CoreError::json(&location, e))?;
    if value.get("demos").is_some() {
        let doc: DemoSetDocument =
            serde_json::from_value(value).map_err(|e| CoreError::field(&location, e.to_string()))?;
        return demos_from_document(doc);
    }
    let traj: Trajectory = serde_json::from_value(value).map_err(|e| CoreError::field(&location, e.to_string()))?;
    traj.validate()?;
    Ok(vec![traj])
}

/// Builds a demo set from CSV files exported from the published recordings.
///
/// Each file is one demonstration. The header needs one time column (`t`,
/// `time` or `timestamp`, seconds) and value columns named
/// `<group>_<position|orientation>_<x|y|z>`. Columns are grouped into 3-D
/// channels in header order. Anything else is rejected rather than guessed:
/// unknown columns, several time columns, incomplete triples, or headers that
/// differ between files.
pub fn load_csv_demos(paths: &[&Path], task_label: &str, frame: &str) -> Result<DemoSet> {
    let mut layout: Option<(Vec<String>, ChannelLayout)> = None;
    let mut demos = Vec::new();
    for path in paths {
        let location = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| CoreError::field(&location, e.to_string()))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| CoreError::field(&location, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let (time_col, parsed) = parse_csv_header(&header).map_err(|m| CoreError::field(format!("{location}:1"), m))?;
        match &layout {
            Some((h, _)) if h != &header => {
                return Err(CoreError::field(
                    format!("{location}:1"),
                    "header differs from the first file",
                ));
            }
            None => layout = Some((header.clone(), parsed.1.clone())),
            _ => {}
        }
        let mut samples = Vec::new();
        for (row_index, record) in reader.records().enumerate() {
            let line = row_index + 2;
            let record = record.map_err(|e| CoreError::field(format!("{location}:{line}"), e.to_string()))?;
            let parse = |col: usize| -> Result<f64> {
                let raw = record.get(col).unwrap_or("").trim();
                raw.parse::<f64>().map_err(|_| {
                    CoreError::field(
                        format!("{location}:{line}"),
                        format!("column {} is not a number: {raw:?}", header[col]),
                    )
                })
            };
            let t = parse(time_col)?;
            let values = parsed.0.iter().map(|&c| parse(c)).collect::<Result<Vec<_>>>()?;
            samples.push(Sample::new(t, values));
        }
        let traj = Trajectory::new(parsed.1, frame, samples).map_err(|e| CoreError::field(&location, e.to_string()))?;
        demos.push(traj);
    }
    DemoSet::new(task_label, frame, Provenance::PaperDataset, demos)
}

type CsvColumns = (Vec<usize>, ChannelLayout);

fn parse_csv_header(header: &[String]) -> std::result::Result<(usize, CsvColumns), String> {
    let time_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| matches!(h.to_ascii_lowercase().as_str(), "t" | "time" | "timestamp"))
        .map(|(i, _)| i)
        .collect();
    let time_col = match time_cols.as_slice() {
        [one] => *one,
        [] => return Err("no time column".into()),
        _ => return Err("more than one time column".into()),
    };
    let mut order: Vec<usize> = Vec::new();
    let mut channels: Vec<Channel> = Vec::new();
    let mut pending: Vec<(String, ChannelKind, usize, char)> = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if i == time_col {
            continue;
        }
        let (stem, axis) = h
            .rsplit_once('_')
            .ok_or_else(|| format!("column {h:?} does not name an axis"))?;
        let axis = match axis {
            "x" => 'x',
            "y" => 'y',
            "z" => 'z',
            _ => return Err(format!("column {h:?} does not end in _x, _y or _z")),
        };
        let (group, kind) = if let Some(g) = stem.strip_suffix("_position") {
            (g, ChannelKind::Position)
        } else if let Some(g) = stem.strip_suffix("_orientation") {
            (g, ChannelKind::Orientation)
        } else {
            return Err(format!("column {h:?} is neither a position nor an orientation"));
        };
        pending.push((group.to_string(), kind, i, axis));
        if pending.len() == 3 {
            let same = pending.iter().all(|p| p.0 == pending[0].0 && p.1 == pending[0].1);
            let axes: String = pending.iter().map(|p| p.3).collect();
            if !same || axes != "xyz" {
                return Err(format!("columns near {h:?} do not form an x, y, z triple"));
            }
            let (g, k) = (&pending[0].0, pending[0].1);
            let ch = match k {
                ChannelKind::Position => Channel::position(g),
                ChannelKind::Orientation => Channel::orientation(g),
            };
            if channels.contains(&ch) {
                return Err(format!("channel {} appears twice", ch.name));
            }
            channels.push(ch);
            order.extend(pending.iter().map(|p| p.2));
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err("trailing columns do not form a complete triple".into());
    }
    if channels.is_empty() {
        return Err("no value columns".into());
    }
    Ok((time_col, (order, ChannelLayout::new(channels))))
}
