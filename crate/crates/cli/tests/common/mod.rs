//! Deterministic synthetic dataset shared by the CLI tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graspkit::dataset::{
    store_annotations, store_instructions, store_predictions, store_scene, AnnotationFile, AnnotationRecord,
    InstructionRecord, ObjectLabels, PlyEncoding, PredictionRecord, SceneMeta, SceneObject, SceneRecord, SplitMix64,
};
use graspkit::cot::Instruction;
use graspkit::geometry::PoseVector;
use graspkit::scene::Scene;
use nalgebra::Vector3;

pub const CATEGORIES: [&str; 4] = ["mug", "bowl", "screwdriver", "banana"];

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub scene_ids: Vec<String>,
}

impl Fixture {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }
    pub fn scenes(&self) -> PathBuf {
        self.root().join("scenes")
    }
    pub fn pred(&self) -> PathBuf {
        self.root().join("eval.pred.jsonl")
    }
    pub fn anno(&self) -> PathBuf {
        self.root().join("eval.anno.jsonl")
    }
    pub fn meta(&self, k: usize) -> PathBuf {
        self.scenes().join(format!("{}.meta.json", self.scene_ids[k]))
    }
    pub fn ply(&self, k: usize) -> PathBuf {
        self.scenes().join(format!("{}.ply", self.scene_ids[k]))
    }
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn pose_near(rng: &mut SplitMix64, c: Vector3<f64>, spread: f64) -> PoseVector {
    PoseVector::from([
        (c.x + uniform(rng, -spread, spread)).clamp(-1.0, 1.0),
        (c.y + uniform(rng, -spread, spread)).clamp(-1.0, 1.0),
        (c.z + uniform(rng, -spread, spread)).clamp(-1.0, 1.0),
        uniform(rng, -1.0, 1.0),
        uniform(rng, -1.0, 1.0),
        uniform(rng, 0.0, std::f64::consts::PI),
        uniform(rng, 0.0, 0.08),
    ])
}

/// `n_scenes` scenes of three objects each, with `labels` annotations per
/// object and `preds` predictions per instruction (two instructions per
/// scene). One prediction in fifty is out of range.
pub fn build(n_scenes: usize, labels: usize, preds: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("scenes")).unwrap();
    let mut rng = SplitMix64::new(seed);
    let mut annos = Vec::new();
    let mut predictions = Vec::new();
    let mut scene_ids = Vec::new();
    for s in 0..n_scenes {
        let scene_id = format!("scene_{s:03}");
        let mut points = Vec::new();
        let mut colors = Vec::new();
        let mut objects = Vec::new();
        let mut labelled = Vec::new();
        let mut centers = Vec::new();
        for o in 0..3 {
            let c = Vector3::new(uniform(&mut rng, -0.5, 0.5), uniform(&mut rng, -0.5, 0.5), 0.05);
            centers.push(c);
            let tint = [uniform(&mut rng, 0.0, 1.0), uniform(&mut rng, 0.0, 1.0), uniform(&mut rng, 0.0, 1.0)];
            for _ in 0..400 {
                points.push(c + Vector3::new(
                    uniform(&mut rng, -0.04, 0.04),
                    uniform(&mut rng, -0.04, 0.04),
                    uniform(&mut rng, -0.05, 0.05),
                ));
                colors.push(tint);
            }
            let object_id = format!("{scene_id}_obj{o}");
            objects.push(SceneObject {
                category: CATEGORIES[(s + o) % CATEGORIES.len()].to_string(),
                object_id: object_id.clone(),
            });
            labelled.push(ObjectLabels {
                object_id,
                poses: (0..labels).map(|_| pose_near(&mut rng, c, 0.1)).collect(),
            });
        }
        // table plane
        for _ in 0..600 {
            points.push(Vector3::new(uniform(&mut rng, -0.7, 0.7), uniform(&mut rng, -0.7, 0.7), 0.0));
            colors.push([0.5, 0.4, 0.3]);
        }
        let meta = SceneMeta {
            description: format!("A table with a {}, a {} and a {}.", objects[0].category, objects[1].category, objects[2].category),
            objects,
            scene_id: scene_id.clone(),
        };
        let record = SceneRecord {
            meta,
            scene: Scene::new(points, colors).unwrap(),
        };
        let encoding = if s % 2 == 0 { PlyEncoding::BinaryLittleEndian } else { PlyEncoding::Ascii };
        store_scene(&dir.path().join("scenes").join(format!("{scene_id}.ply")), &record, encoding).unwrap();
        for i in 0..2 {
            let mut poses = Vec::with_capacity(preds);
            let mut confidences = Vec::with_capacity(preds);
            for p in 0..preds {
                let c = centers[p % 3];
                let mut v = pose_near(&mut rng, c, 0.15);
                if p % 50 == 49 {
                    v.rz = 4.0;
                }
                poses.push(v);
                confidences.push(uniform(&mut rng, 0.0, 1.0));
            }
            predictions.push(PredictionRecord {
                scene_id: scene_id.clone(),
                instruction_id: format!("{scene_id}_i{i}"),
                poses,
                confidences,
            });
        }
        annos.push(AnnotationRecord {
            scene_id: scene_id.clone(),
            objects: labelled,
        });
        scene_ids.push(scene_id);
    }
    let fixture = Fixture { dir, scene_ids };
    store_annotations(&fixture.anno(), &AnnotationFile { provenance: None, records: annos }).unwrap();
    store_predictions(&fixture.pred(), &predictions).unwrap();
    fixture
}

pub fn instruction(scene_id: &str, text: &str, targets: &[&str]) -> InstructionRecord {
    InstructionRecord {
        instruction_id: None,
        instruction: Instruction {
            text: text.to_string(),
            scene_id: scene_id.to_string(),
            target_names: targets.iter().map(|t| t.to_string()).collect(),
        },
    }
}

pub fn write_instructions(path: &Path, records: &[InstructionRecord]) {
    store_instructions(path, records).unwrap();
}

pub fn graspkit(args: &[&std::ffi::OsStr], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graspkit"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("GRASPKIT_THREADS", n.to_string()),
        None => cmd.env_remove("GRASPKIT_THREADS"),
    };
    cmd.output().unwrap()
}

#[macro_export]
macro_rules! args {
    ($($a:expr),* $(,)?) => {
        &[$(::std::ffi::OsStr::new(&$a)),*]
    };
}
