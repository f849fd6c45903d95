use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use graspkit::cot::{
    build_cot_sequence, build_instruction_prompt, parse_answer, validate_instruction, DescriptorLibrary,
    DescriptorMode, RejectReason, Verdict,
};
use graspkit::dataset::{
    load_annotations, load_instructions, load_meta, load_predictions, load_scene, make_split, read_ply,
    select_candidates, store_annotations, valid_indices, AnnotationFile, AnnotationRecord, ObjectLabels,
    Provenance, SceneMeta, SelectionMode,
};
use graspkit::geometry::{GraspSet, PoseVector};
use graspkit::gripper::GripperModel;
use graspkit::metrics::{evaluate, MetricConfig, MetricReport};
use graspkit::pruning::{prune_indices, PruneConfig};
use graspkit::view::{scene_to_tokens_with, MeanRgb, ViewConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    write_file, CliError, CliResult, EvalArgs, PruneArgs, QaArgs, SplitArgs, TokensArgs, ValidateArgs, EXIT_FORMAT,
    EXIT_ID_MISMATCH, EXIT_UNKNOWN_TARGET,
};

fn in_scene(scene_id: &str, e: impl Into<CliError>) -> CliError {
    let e = e.into();
    CliError::new(e.code, format!("scene {scene_id}: {}", e.message))
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokensSummary {
    pub tokens: usize,
    pub valid_patches_per_view: Vec<usize>,
    pub voxel_size: f64,
}

impl fmt::Display for TokensSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let views: Vec<String> = self.valid_patches_per_view.iter().map(usize::to_string).collect();
        writeln!(f, "tokens: {}", self.tokens)?;
        writeln!(f, "valid patches per view: {}", views.join(" "))?;
        writeln!(f, "voxel size: {}", self.voxel_size)
    }
}

pub fn cmd_tokens(args: &TokensArgs) -> CliResult<TokensSummary> {
    let scene = read_ply(&args.scene)?;
    let config = ViewConfig {
        n_views: args.views,
        width_px: args.resolution,
        height_px: args.resolution,
        patch_size: args.patch,
        voxel_size: args.voxel,
        splat_px: args.splat,
    };
    let out = scene_to_tokens_with(&scene, &config, &MeanRgb)?;
    let mut text = String::new();
    for t in &out.tokens {
        text.push_str(&t.to_json_line());
        text.push('\n');
    }
    write_file(&args.out, text)?;
    Ok(TokensSummary {
        tokens: out.tokens.len(),
        valid_patches_per_view: out.valid_patches_per_view,
        voxel_size: out.voxel_size,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneSummary {
    pub objects: usize,
    pub labels_in: usize,
    pub labels_out: usize,
    pub cap: usize,
}

impl fmt::Display for PruneSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "objects: {}", self.objects)?;
        writeln!(f, "labels: {} -> {} (cap {})", self.labels_in, self.labels_out, self.cap)
    }
}

pub fn cmd_prune(args: &PruneArgs) -> CliResult<PruneSummary> {
    let input = load_annotations(&args.anno)?;
    let config = PruneConfig::with_cap(args.cap);
    let mut summary = PruneSummary {
        objects: 0,
        labels_in: 0,
        labels_out: 0,
        cap: args.cap,
    };
    let mut records = Vec::with_capacity(input.records.len());
    for rec in &input.records {
        let mut objects = Vec::with_capacity(rec.objects.len());
        for obj in &rec.objects {
            let keep = prune_indices(&obj.poses, &config)?;
            summary.objects += 1;
            summary.labels_in += obj.poses.len();
            summary.labels_out += keep.len();
            objects.push(ObjectLabels {
                object_id: obj.object_id.clone(),
                poses: keep.iter().map(|&i| obj.poses[i]).collect(),
            });
        }
        records.push(AnnotationRecord {
            scene_id: rec.scene_id.clone(),
            objects,
        });
    }
    let out = AnnotationFile {
        provenance: Some(Provenance::for_prune(args.cap)),
        records,
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", dir.display())))?;
    }
    store_annotations(&args.out, &out)?;
    Ok(summary)
}

/// Fully resolved evaluation settings, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub anno: String,
    pub candidate_k: usize,
    pub candidate_mode: SelectionMode,
    pub gripper: GripperModel,
    pub include_width_in_distance: bool,
    pub pred: String,
    pub scenes: String,
    pub seed: u64,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneReport {
    pub scene_id: String,
    pub n_predictions: usize,
    pub n_dropped: usize,
    pub n_candidates: usize,
    pub n_ground_truth: usize,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub scenes: usize,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub aggregate: Aggregate,
    pub config: EvalConfig,
    pub scenes: Vec<SceneReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        json_pretty(self)
    }

    pub fn summary(&self) -> String {
        let m = &self.aggregate.metrics;
        let mut s = format!("scenes: {}\n", self.aggregate.scenes);
        for theta in &self.config.thresholds {
            let key = graspkit::metrics::coverage_key(*theta);
            s.push_str(&format!("{key}: {:.4}\n", m.cr_at[&key]));
        }
        s.push_str(&format!("emd: {:.4}\ncfr: {:.4}\new_cfr: {:.4}\n", m.emd, m.cfr, m.ew_cfr));
        s
    }
}

/// Unweighted mean of every metric over the scenes, summed in scene order.
fn mean_report(reports: &[SceneReport]) -> MetricReport {
    let n = reports.len() as f64;
    let mut cr_at: BTreeMap<String, f64> = BTreeMap::new();
    for r in reports {
        for (k, v) in &r.metrics.cr_at {
            *cr_at.entry(k.clone()).or_default() += v;
        }
    }
    cr_at.values_mut().for_each(|v| *v /= n);
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    MetricReport {
        cr_at,
        emd: mean(|m| m.emd),
        cfr: mean(|m| m.cfr),
        ew_cfr: mean(|m| m.ew_cfr),
    }
}

fn id_list(ids: &BTreeSet<&str>) -> String {
    ids.iter().copied().collect::<Vec<_>>().join(", ")
}

/// Filter, select and score every scene. Predictions of all instructions in a
/// scene are pooled, and the ground truth is the union of every object's
/// labels in that scene.
pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalReport> {
    let metric_config = MetricConfig {
        thresholds: args.thresholds.clone(),
        include_width_in_distance: args.include_width,
    };
    metric_config.validate()?;
    if args.k == 0 {
        return Err(CliError::new(EXIT_FORMAT, "--k must be at least 1"));
    }
    let model = GripperModel::default();
    let preds = load_predictions(&args.pred)?;
    let annos = load_annotations(&args.anno)?;

    let mut by_scene: BTreeMap<&str, (Vec<PoseVector>, Vec<f64>)> = BTreeMap::new();
    for p in &preds {
        let entry = by_scene.entry(p.scene_id.as_str()).or_default();
        entry.0.extend_from_slice(&p.poses);
        entry.1.extend_from_slice(&p.confidences);
    }
    let anno_by_scene: BTreeMap<&str, &AnnotationRecord> =
        annos.records.iter().map(|r| (r.scene_id.as_str(), r)).collect();

    let pred_ids: BTreeSet<&str> = by_scene.keys().copied().collect();
    let anno_ids: BTreeSet<&str> = anno_by_scene.keys().copied().collect();
    let only_pred: BTreeSet<&str> = pred_ids.difference(&anno_ids).copied().collect();
    let only_anno: BTreeSet<&str> = anno_ids.difference(&pred_ids).copied().collect();
    if !only_pred.is_empty() || !only_anno.is_empty() {
        return Err(CliError::new(
            EXIT_ID_MISMATCH,
            format!(
                "scene ids differ: only in predictions [{}]; only in annotations [{}]",
                id_list(&only_pred),
                id_list(&only_anno)
            ),
        ));
    }
    let no_scene: BTreeSet<&str> = pred_ids
        .iter()
        .copied()
        .filter(|id| !args.scenes.join(format!("{id}.ply")).is_file())
        .collect();
    if !no_scene.is_empty() {
        return Err(CliError::new(
            EXIT_ID_MISMATCH,
            format!("no scene file in {} for ids [{}]", args.scenes.display(), id_list(&no_scene)),
        ));
    }
    if pred_ids.is_empty() {
        return Err(CliError::new(crate::EXIT_DEGENERATE, "no scenes to evaluate"));
    }

    let mode: SelectionMode = args.mode.into();
    let results: Vec<CliResult<SceneReport>> = by_scene
        .par_iter()
        .map(|(&scene_id, (poses, confidences))| {
            let record = load_scene(&args.scenes.join(format!("{scene_id}.ply")))?;
            if record.meta.scene_id != scene_id {
                return Err(CliError::new(
                    EXIT_ID_MISMATCH,
                    format!("scene file {scene_id}.ply declares scene_id {:?}", record.meta.scene_id),
                ));
            }
            let anno = anno_by_scene[scene_id];
            let unknown = anno.unknown_objects(&record.meta);
            if !unknown.is_empty() {
                return Err(CliError::new(
                    EXIT_ID_MISMATCH,
                    format!("scene {scene_id}: annotated objects missing from metadata [{}]", unknown.join(", ")),
                ));
            }
            let keep = valid_indices(poses);
            let kept: Vec<PoseVector> = keep.iter().map(|&i| poses[i]).collect();
            let kept_conf: Vec<f64> = keep.iter().map(|&i| confidences[i]).collect();
            let set = GraspSet::from_vectors(&kept, Some(kept_conf)).map_err(|e| in_scene(scene_id, e))?;
            let candidates = select_candidates(&set, args.k, mode, args.seed).map_err(|e| in_scene(scene_id, e))?;
            let gts = GraspSet::from_vectors(&anno.all_poses(), None).map_err(|e| in_scene(scene_id, e))?;
            let metrics = evaluate(&candidates, &gts, &record.scene, &metric_config, &model)
                .map_err(|e| in_scene(scene_id, e))?;
            Ok(SceneReport {
                scene_id: scene_id.to_string(),
                n_predictions: poses.len(),
                n_dropped: poses.len() - keep.len(),
                n_candidates: candidates.len(),
                n_ground_truth: gts.len(),
                metrics,
            })
        })
        .collect();
    let scenes = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let report = EvalReport {
        aggregate: Aggregate {
            scenes: scenes.len(),
            metrics: mean_report(&scenes),
        },
        config: EvalConfig {
            anno: args.anno.display().to_string(),
            candidate_k: args.k,
            candidate_mode: mode,
            gripper: model,
            include_width_in_distance: args.include_width,
            pred: args.pred.display().to_string(),
            scenes: args.scenes.display().to_string(),
            seed: args.seed,
            thresholds: args.thresholds.clone(),
        },
        scenes,
    };
    if let Some(out) = &args.out {
        write_file(out, report.to_json())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaSummary {
    pub records: usize,
    pub qa_path: String,
    pub prompt_path: String,
    pub parsed_path: Option<String>,
    pub novel_descriptors: usize,
}

impl fmt::Display for QaSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.records)?;
        writeln!(f, "qa: {}", self.qa_path)?;
        writeln!(f, "prompt: {}", self.prompt_path)?;
        if let Some(p) = &self.parsed_path {
            writeln!(f, "parsed: {p}")?;
            writeln!(f, "novel descriptors: {}", self.novel_descriptors)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ParsedLine {
    novel: Vec<String>,
    record: usize,
    unresolved: Vec<String>,
    values: BTreeMap<String, Option<String>>,
}

fn check_targets(meta: &SceneMeta, targets: &[String]) -> CliResult<()> {
    let categories: BTreeSet<String> = meta.objects.iter().map(|o| o.category.to_lowercase()).collect();
    let missing: Vec<&str> = targets
        .iter()
        .filter(|t| !categories.contains(&t.to_lowercase()))
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    Err(CliError::new(
        EXIT_UNKNOWN_TARGET,
        format!(
            "scene {}: unknown target(s) [{}]; objects are [{}]",
            meta.scene_id,
            missing.join(", "),
            meta.objects.iter().map(|o| o.category.as_str()).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn load_library(path: Option<&Path>) -> CliResult<DescriptorLibrary> {
    let Some(path) = path else {
        return Ok(DescriptorLibrary::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", path.display())))?;
    let lib: DescriptorLibrary = serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", path.display())))?;
    lib.validate()?;
    Ok(lib)
}

pub fn cmd_qa(args: &QaArgs) -> CliResult<QaSummary> {
    let meta = load_meta(&args.meta)?;
    if args.targets.iter().any(|t| t.trim().is_empty()) {
        return Err(CliError::new(EXIT_FORMAT, "empty entry in --targets"));
    }
    if args.targets.is_empty() {
        return Err(CliError::new(EXIT_UNKNOWN_TARGET, "no targets given"));
    }
    check_targets(&meta, &args.targets)?;
    let library = load_library(args.library.as_deref())?;
    let targets: Vec<&str> = args.targets.iter().map(String::as_str).collect();
    let records = build_cot_sequence(&targets, &library)?;

    let qa_path = args.out_dir.join(format!("{}.qa.jsonl", meta.scene_id));
    let prompt_path = args.out_dir.join(format!("{}.prompt.txt", meta.scene_id));
    let mut text = String::new();
    for r in &records {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    write_file(&qa_path, text)?;
    write_file(&prompt_path, build_instruction_prompt(&meta.description, &targets)?)?;

    let mut summary = QaSummary {
        records: records.len(),
        qa_path: qa_path.display().to_string(),
        prompt_path: prompt_path.display().to_string(),
        parsed_path: None,
        novel_descriptors: 0,
    };
    if let Some(answers_path) = &args.answers {
        let answers = std::fs::read_to_string(answers_path)
            .map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", answers_path.display())))?;
        let lines: Vec<&str> = answers.lines().collect();
        if lines.len() != records.len() {
            return Err(CliError::new(
                EXIT_FORMAT,
                format!("{}: {} answers for {} QA records", answers_path.display(), lines.len(), records.len()),
            ));
        }
        let mode = if args.strict_descriptors {
            DescriptorMode::Strict
        } else {
            DescriptorMode::OpenWorld
        };
        let mut out = String::new();
        for (k, (line, record)) in lines.iter().zip(&records).enumerate() {
            let parsed = parse_answer(line, record, &library, mode)
                .map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: answer {}: {e}", answers_path.display(), k + 1)))?;
            summary.novel_descriptors += parsed.novel.len();
            let values = record
                .slots
                .iter()
                .zip(parsed.values)
                .map(|(s, v)| (s.name.clone(), v))
                .collect();
            out.push_str(
                &serde_json::to_string(&ParsedLine {
                    novel: parsed.novel,
                    record: k,
                    unresolved: parsed.unresolved,
                    values,
                })
                .expect("parsed answer serializes"),
            );
            out.push('\n');
        }
        let parsed_path = args.out_dir.join(format!("{}.parsed.jsonl", meta.scene_id));
        write_file(&parsed_path, out)?;
        summary.parsed_path = Some(parsed_path.display().to_string());
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstructionVerdict {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instruction_id: Option<String>,
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub instructions: Vec<InstructionVerdict>,
    pub summary: ValidationSummary,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        json_pretty(self)
    }

    pub fn summary(&self) -> String {
        format!(
            "total: {}\naccepted: {}\nrejected: {}\n",
            self.summary.total, self.summary.accepted, self.summary.rejected
        )
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> CliResult<ValidationReport> {
    let meta = load_meta(&args.meta)?;
    let records = load_instructions(&args.instructions)?;
    let foreign: BTreeSet<&str> = records
        .iter()
        .map(|r| r.instruction.scene_id.as_str())
        .filter(|id| *id != meta.scene_id)
        .collect();
    if !foreign.is_empty() {
        return Err(CliError::new(
            EXIT_ID_MISMATCH,
            format!("instructions reference scenes [{}], metadata is for {:?}", id_list(&foreign), meta.scene_id),
        ));
    }
    let mut verdicts = Vec::with_capacity(records.len());
    for (index, r) in records.iter().enumerate() {
        r.instruction
            .validate()
            .map_err(|e| CliError::new(EXIT_FORMAT, format!("instruction {}: {e}", index + 1)))?;
        check_targets(&meta, &r.instruction.target_names)?;
        let (verdict, reason, name) = match validate_instruction(&r.instruction) {
            Verdict::Accepted => ("accepted", None, None),
            Verdict::Rejected {
                reason: RejectReason::ExplicitName(n),
            } => ("rejected", Some("explicit-name"), Some(n)),
        };
        verdicts.push(InstructionVerdict {
            index,
            instruction_id: r.instruction_id.clone(),
            verdict,
            reason,
            name,
        });
    }
    let accepted = verdicts.iter().filter(|v| v.verdict == "accepted").count();
    let report = ValidationReport {
        summary: ValidationSummary {
            accepted,
            rejected: verdicts.len() - accepted,
            total: verdicts.len(),
        },
        instructions: verdicts,
    };
    if let Some(out) = &args.out {
        write_file(out, report.to_json())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub train: usize,
    pub eval: usize,
}

impl fmt::Display for SplitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "train: {}\neval: {}", self.train, self.eval)
    }
}

pub fn cmd_split(args: &SplitArgs) -> CliResult<SplitSummary> {
    let dir = std::fs::read_dir(&args.scenes)
        .map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", args.scenes.display())))?;
    let mut metas: Vec<_> = dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".meta.json"))
        .collect();
    metas.sort();
    let ids = metas
        .iter()
        .map(|p| load_meta(p).map(|m| m.scene_id))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = make_split(&ids, args.ratio, args.seed)?;
    write_file(&args.out, manifest.to_json())?;
    Ok(SplitSummary {
        train: manifest.train_ids.len(),
        eval: manifest.eval_ids.len(),
    })
}
