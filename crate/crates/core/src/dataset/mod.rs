//! File formats, benchmark splits and candidate selection.
//!
//! Scenes are `<stem>.ply` plus a `<stem>.meta.json` sidecar. Annotations
//! (`*.anno.jsonl`), predictions (`*.pred.jsonl`) and instructions are JSON
//! Lines. Splits are `*.split.json`.

pub mod candidates;
pub mod ply;
pub mod records;
pub mod split;

pub use candidates::{
    filter_valid_poses, select_candidate_indices, select_candidates, valid_indices, SelectionMode,
    DEFAULT_CANDIDATES,
};
pub use ply::{encode_ply, parse_ply, read_ply, write_ply, PlyEncoding};
pub use records::{
    load_annotations, load_instructions, load_meta, load_predictions, load_scene, meta_path, parse_annotations,
    parse_instructions, parse_predictions, store_annotations, store_instructions, store_meta, store_predictions,
    store_scene, AnnotationFile, AnnotationRecord, InstructionRecord, ObjectLabels, PredictionRecord, Provenance,
    SceneMeta, SceneObject, SceneRecord,
};
pub use split::{make_split, SplitManifest, SplitMix64, DEFAULT_TRAIN_RATIO};
