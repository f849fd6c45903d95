//! Scene records and the JSON Lines formats for annotations, predictions and
//! instructions.
//!
//! Writers produce canonical files: keys in sorted order, one record per line,
//! numbers in shortest round-trip form. Reading a canonical file and writing it
//! back yields the same bytes.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ply::{read_ply, write_ply, PlyEncoding};
use crate::cot::Instruction;
use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub category: String,
    pub object_id: String,
}

/// Sidecar metadata stored next to a scene's PLY file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub description: String,
    pub objects: Vec<SceneObject>,
    pub scene_id: String,
}

impl SceneMeta {
    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(Error::Validation("scene_id is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.object_id.as_str()) {
                return Err(Error::Validation(format!(
                    "object_id {:?} is not unique within scene {:?}",
                    o.object_id, self.scene_id
                )));
            }
        }
        Ok(())
    }

    pub fn has_object(&self, object_id: &str) -> bool {
        self.objects.iter().any(|o| o.object_id == object_id)
    }

    pub fn category_of(&self, object_id: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|o| o.object_id == object_id)
            .map(|o| o.category.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub meta: SceneMeta,
    pub scene: Scene,
}

/// `scene.ply` → `scene.meta.json`.
pub fn meta_path(ply_path: &Path) -> PathBuf {
    ply_path.with_extension("meta.json")
}

pub fn load_meta(path: &Path) -> Result<SceneMeta> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: SceneMeta = serde_json::from_str(&text).map_err(|e| json_error(path, &text, 0, e))?;
    meta.validate()?;
    Ok(meta)
}

pub fn store_meta(path: &Path, meta: &SceneMeta) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta).expect("meta serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads `<stem>.ply` and its `<stem>.meta.json` sidecar.
pub fn load_scene(ply_path: &Path) -> Result<SceneRecord> {
    let scene = read_ply(ply_path)?;
    let meta = load_meta(&meta_path(ply_path))?;
    Ok(SceneRecord { meta, scene })
}

pub fn store_scene(ply_path: &Path, record: &SceneRecord, encoding: PlyEncoding) -> Result<()> {
    record.meta.validate()?;
    write_ply(ply_path, &record.scene, encoding)?;
    store_meta(&meta_path(ply_path), &record.meta)
}

/// Optional first line of a derived JSON Lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub cap: Option<usize>,
    pub tool: String,
    pub version: String,
}

impl Provenance {
    pub fn for_prune(cap: usize) -> Self {
        Provenance {
            cap: Some(cap),
            tool: "graspkit prune".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    #[serde(rename = "_provenance")]
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationLine {
    object_id: String,
    pose: PoseVector,
    scene_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    confidence: f64,
    instruction_id: String,
    pose: PoseVector,
    scene_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instruction_id: Option<String>,
    scene_id: String,
    target_names: Vec<String>,
    text: String,
}

/// Ground-truth labels of one object. Raw encodings are kept so files round
/// trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabels {
    pub object_id: String,
    pub poses: Vec<PoseVector>,
}

impl ObjectLabels {
    pub fn grasp_set(&self) -> Result<GraspSet> {
        GraspSet::from_vectors(&self.poses, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub scene_id: String,
    /// Objects in order of first appearance.
    pub objects: Vec<ObjectLabels>,
}

impl AnnotationRecord {
    /// All labels of the scene, object by object.
    pub fn all_poses(&self) -> Vec<PoseVector> {
        self.objects.iter().flat_map(|o| o.poses.iter().copied()).collect()
    }

    /// Object ids that the scene metadata does not declare.
    pub fn unknown_objects(&self, meta: &SceneMeta) -> Vec<String> {
        self.objects
            .iter()
            .filter(|o| !meta.has_object(&o.object_id))
            .map(|o| o.object_id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationFile {
    pub provenance: Option<Provenance>,
    /// Scenes in order of first appearance.
    pub records: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub instruction_id: String,
    pub poses: Vec<PoseVector>,
    pub confidences: Vec<f64>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.poses.len() != self.confidences.len() {
            return Err(Error::Dimension(format!(
                "{} confidences for {} poses",
                self.confidences.len(),
                self.poses.len()
            )));
        }
        if let Some(c) = self.confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Validation(format!(
                "confidence {c} outside [0, 1] in scene {:?}",
                self.scene_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionRecord {
    pub instruction_id: Option<String>,
    pub instruction: Instruction,
}

fn json_error(path: &Path, text: &str, base: usize, e: serde_json::Error) -> Error {
    // serde_json reports 1-based line/column within the parsed string
    let offset = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + e.column().saturating_sub(1);
    Error::format(path, base + offset, e.to_string())
}

/// Nonblank lines with their byte offsets.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        (!line.trim().is_empty()).then_some((start, line))
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses JSON Lines, peeling an optional provenance header off the first line.
fn parse_lines<T: DeserializeOwned>(path: &Path, text: &str) -> Result<(Option<Provenance>, Vec<T>)> {
    let mut provenance = None;
    let mut out = Vec::new();
    for (n, (offset, line)) in lines_with_offsets(text).enumerate() {
        if n == 0 && line.trim_start().starts_with("{\"_provenance\"") {
            let p: ProvenanceLine = serde_json::from_str(line).map_err(|e| json_error(path, line, offset, e))?;
            provenance = Some(p.provenance);
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| json_error(path, line, offset, e))?);
    }
    Ok((provenance, out))
}

fn write_lines<T: Serialize>(path: &Path, provenance: Option<&Provenance>, lines: &[T]) -> Result<()> {
    let mut text = String::new();
    if let Some(p) = provenance {
        text.push_str(&serde_json::to_string(&ProvenanceLine { provenance: p.clone() }).expect("serializes"));
        text.push('\n');
    }
    for l in lines {
        text.push_str(&serde_json::to_string(l).expect("serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_annotations(path: &Path, text: &str) -> Result<AnnotationFile> {
    let (provenance, lines): (_, Vec<AnnotationLine>) = parse_lines(path, text)?;
    let mut records: Vec<AnnotationRecord> = Vec::new();
    let mut scene_index: HashMap<String, usize> = HashMap::new();
    for line in lines {
        let s = *scene_index.entry(line.scene_id.clone()).or_insert_with(|| {
            records.push(AnnotationRecord {
                scene_id: line.scene_id.clone(),
                objects: Vec::new(),
            });
            records.len() - 1
        });
        let rec = &mut records[s];
        match rec.objects.iter_mut().find(|o| o.object_id == line.object_id) {
            Some(o) => o.poses.push(line.pose),
            None => rec.objects.push(ObjectLabels {
                object_id: line.object_id,
                poses: vec![line.pose],
            }),
        }
    }
    Ok(AnnotationFile { provenance, records })
}

pub fn load_annotations(path: &Path) -> Result<AnnotationFile> {
    parse_annotations(path, &read_text(path)?)
}

pub fn store_annotations(path: &Path, file: &AnnotationFile) -> Result<()> {
    let lines: Vec<AnnotationLine> = file
        .records
        .iter()
        .flat_map(|r| {
            r.objects.iter().flat_map(move |o| {
                o.poses.iter().map(move |p| AnnotationLine {
                    object_id: o.object_id.clone(),
                    pose: *p,
                    scene_id: r.scene_id.clone(),
                })
            })
        })
        .collect();
    write_lines(path, file.provenance.as_ref(), &lines)
}

/// Predictions grouped by `(scene_id, instruction_id)` in order of first
/// appearance.
pub fn parse_predictions(path: &Path, text: &str) -> Result<Vec<PredictionRecord>> {
    let (_, lines): (_, Vec<PredictionLine>) = parse_lines(path, text)?;
    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for line in lines {
        let key = (line.scene_id.clone(), line.instruction_id.clone());
        let i = *index.entry(key).or_insert_with(|| {
            records.push(PredictionRecord {
                scene_id: line.scene_id.clone(),
                instruction_id: line.instruction_id.clone(),
                poses: Vec::new(),
                confidences: Vec::new(),
            });
            records.len() - 1
        });
        records[i].poses.push(line.pose);
        records[i].confidences.push(line.confidence);
    }
    records.iter().try_for_each(PredictionRecord::validate)?;
    Ok(records)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    parse_predictions(path, &read_text(path)?)
}

pub fn store_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut lines = Vec::new();
    for r in records {
        r.validate()?;
        for (p, c) in r.poses.iter().zip(&r.confidences) {
            lines.push(PredictionLine {
                confidence: *c,
                instruction_id: r.instruction_id.clone(),
                pose: *p,
                scene_id: r.scene_id.clone(),
            });
        }
    }
    write_lines(path, None, &lines)
}

pub fn parse_instructions(path: &Path, text: &str) -> Result<Vec<InstructionRecord>> {
    let (_, lines): (_, Vec<InstructionLine>) = parse_lines(path, text)?;
    Ok(lines
        .into_iter()
        .map(|l| InstructionRecord {
            instruction_id: l.instruction_id,
            instruction: Instruction {
                text: l.text,
                scene_id: l.scene_id,
                target_names: l.target_names,
            },
        })
        .collect())
}

pub fn load_instructions(path: &Path) -> Result<Vec<InstructionRecord>> {
    parse_instructions(path, &read_text(path)?)
}

pub fn store_instructions(path: &Path, records: &[InstructionRecord]) -> Result<()> {
    let lines: Vec<InstructionLine> = records
        .iter()
        .map(|r| InstructionLine {
            instruction_id: r.instruction_id.clone(),
            scene_id: r.instruction.scene_id.clone(),
            target_names: r.instruction.target_names.clone(),
            text: r.instruction.text.clone(),
        })
        .collect();
    write_lines(path, None, &lines)
}
