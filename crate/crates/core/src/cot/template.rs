//! Fill-in-the-blank QA records for the three reasoning stages.
//!
//! An answer template is a list of literal text pieces and typed slots. Object
//! and count slots are supervised like the surrounding text; descriptor slots
//! are reasoning tokens and carry weight 0. Supervision is defined over word
//! units (runs of alphanumeric characters, or single punctuation characters)
//! and each unit is emitted with its character span so a different tokenizer
//! can remap the mask.

use serde::{Deserialize, Serialize};

use super::library::{DescriptorLibrary, PropertyGroup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TargetParsing,
    PropertyAnalysis,
    ActionSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Object,
    Count,
    PhyDescriptor,
    ActDescriptor,
}

impl SlotKind {
    pub fn is_reasoning(&self) -> bool {
        matches!(self, SlotKind::PhyDescriptor | SlotKind::ActDescriptor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    pub value: Option<String>,
}

impl Slot {
    pub fn marker(&self) -> String {
        format!("<{}>", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    Slot(usize),
}

/// One word unit of a rendered answer.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedToken {
    pub text: String,
    /// Character offsets `[start, end)` into the rendered answer.
    pub span: (usize, usize),
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaRecord {
    pub stage: Stage,
    pub question: String,
    /// Set for property-analysis records.
    pub group: Option<PropertyGroup>,
    pub segments: Vec<Segment>,
    pub slots: Vec<Slot>,
}

#[derive(Serialize)]
struct QaLine<'a> {
    stage: Stage,
    question: &'a str,
    answer_template: String,
    answer: String,
    slots: &'a [Slot],
    supervision: Vec<f64>,
    char_spans: Vec<(usize, usize)>,
}

impl QaRecord {
    /// The template with every slot shown as its `<name>` marker.
    pub fn answer_template(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Text(t) => t.clone(),
                Segment::Slot(k) => self.slots[*k].marker(),
            })
            .collect()
    }

    /// Rendered answer and the character span covered by each slot.
    fn render_with_spans(&self) -> (String, Vec<(usize, usize)>) {
        let mut out = String::new();
        let mut chars = 0;
        let mut spans = vec![(0, 0); self.slots.len()];
        for seg in &self.segments {
            let piece = match seg {
                Segment::Text(t) => t.clone(),
                Segment::Slot(k) => {
                    let slot = &self.slots[*k];
                    slot.value.clone().unwrap_or_else(|| slot.marker())
                }
            };
            let len = piece.chars().count();
            if let Segment::Slot(k) = seg {
                spans[*k] = (chars, chars + len);
            }
            chars += len;
            out.push_str(&piece);
        }
        (out, spans)
    }

    /// The answer text; unfilled slots keep their markers.
    pub fn render(&self) -> String {
        self.render_with_spans().0
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn fill(&mut self, name: &str, value: &str) -> Result<()> {
        let k = self
            .slot_index(name)
            .ok_or_else(|| Error::Validation(format!("record has no slot {name:?}")))?;
        check_slot_value(value)?;
        self.slots[k].value = Some(value.to_string());
        Ok(())
    }

    /// Fills the reasoning slots in order.
    pub fn fill_reasoning(&mut self, values: &[&str]) -> Result<()> {
        let names: Vec<String> = self
            .slots
            .iter()
            .filter(|s| s.kind.is_reasoning())
            .map(|s| s.name.clone())
            .collect();
        if names.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} reasoning slots",
                values.len(),
                names.len()
            )));
        }
        for (name, value) in names.iter().zip(values) {
            self.fill(name, value)?;
        }
        Ok(())
    }

    pub fn reasoning_slot_count(&self) -> usize {
        self.slots.iter().filter(|s| s.kind.is_reasoning()).count()
    }

    /// Word units of the rendered answer with their supervision weights.
    pub fn supervision(&self) -> Vec<SupervisedToken> {
        let (text, spans) = self.render_with_spans();
        let masked: Vec<(usize, usize)> = self
            .slots
            .iter()
            .zip(&spans)
            .filter(|(s, _)| s.kind.is_reasoning())
            .map(|(_, span)| *span)
            .collect();
        word_units(&text)
            .into_iter()
            .map(|(start, end, unit)| {
                let inside = masked.iter().any(|&(a, b)| start >= a && end <= b);
                SupervisedToken {
                    text: unit,
                    span: (start, end),
                    weight: if inside { 0.0 } else { 1.0 },
                }
            })
            .collect()
    }

    /// JSON object with stage, question, answer_template, answer, slots,
    /// supervision and char_spans.
    pub fn to_json_line(&self) -> String {
        let tokens = self.supervision();
        let line = QaLine {
            stage: self.stage,
            question: &self.question,
            answer_template: self.answer_template(),
            answer: self.render(),
            slots: &self.slots,
            supervision: tokens.iter().map(|t| t.weight).collect(),
            char_spans: tokens.iter().map(|t| t.span).collect(),
        };
        serde_json::to_string(&line).expect("QA serialization is infallible")
    }
}

/// Number of maximal runs of zero weights in a mask.
pub fn zero_weight_spans(weights: &[f64]) -> usize {
    let mut runs = 0;
    let mut inside = false;
    for &w in weights {
        if w == 0.0 && !inside {
            runs += 1;
        }
        inside = w == 0.0;
    }
    runs
}

fn word_units(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            match current.as_mut() {
                Some((_, s)) => s.push(c),
                None => current = Some((i, c.to_string())),
            }
            continue;
        }
        if let Some((start, s)) = current.take() {
            out.push((start, i, s));
        }
        if !c.is_whitespace() {
            out.push((i, i + 1, c.to_string()));
        }
    }
    if let Some((start, s)) = current {
        let end = start + s.chars().count();
        out.push((start, end, s));
    }
    out
}

fn check_slot_value(value: &str) -> Result<()> {
    if value.trim().is_empty() || value.contains(['\n', '<', '>']) {
        return Err(Error::Validation(format!("invalid slot value {value:?}")));
    }
    Ok(())
}

fn check_object_name(name: &str) -> Result<()> {
    check_slot_value(name)?;
    if name.contains([',', '[', ']']) {
        return Err(Error::Validation(format!(
            "object name {name:?} may not contain ',', '[' or ']'"
        )));
    }
    Ok(())
}

fn options(list: &[String]) -> String {
    format!("[options: {}, etc.]", list.join(", "))
}

/// `[<obj_1>, <obj_2>, ...]. Total <#objs>.` with every slot filled.
pub fn build_target_qa(targets: &[&str]) -> Result<QaRecord> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let mut segments = vec![Segment::Text("[".into())];
    let mut slots = Vec::with_capacity(targets.len() + 1);
    for (k, name) in targets.iter().enumerate() {
        check_object_name(name)?;
        if k > 0 {
            segments.push(Segment::Text(", ".into()));
        }
        segments.push(Segment::Slot(slots.len()));
        slots.push(Slot {
            name: format!("obj_{}", k + 1),
            kind: SlotKind::Object,
            value: Some(name.to_string()),
        });
    }
    segments.push(Segment::Text("]. Total ".into()));
    segments.push(Segment::Slot(slots.len()));
    slots.push(Slot {
        name: "#objs".into(),
        kind: SlotKind::Count,
        value: Some(targets.len().to_string()),
    });
    segments.push(Segment::Text(".".into()));
    Ok(QaRecord {
        stage: Stage::TargetParsing,
        question: "Target Parsing - Which objects need to be grasped?".into(),
        group: None,
        segments,
        slots,
    })
}

/// `The <group> properties of <obj> are <d> (c1), <d> (c2), and <d> (c3).`
/// with the object filled and the three descriptors open.
pub fn build_property_qa(object_name: &str, group: PropertyGroup, library: &DescriptorLibrary) -> Result<QaRecord> {
    check_object_name(object_name)?;
    let [c1, c2, c3] = group.characteristics();
    let option_list = |c: &str| -> Result<String> {
        library
            .descriptors(group, c)
            .map(options)
            .ok_or_else(|| Error::Validation(format!("library has no {group}.{c} descriptors")))
    };
    let question = format!(
        "Physical Property Analysis ({group}) - Analyze the {group} of the {object_name} from three aspects: \
         {c1} {}, {c2} {}, and {c3} {}.",
        option_list(c1)?,
        option_list(c2)?,
        option_list(c3)?,
    );
    let mut slots = vec![Slot {
        name: "obj".into(),
        kind: SlotKind::Object,
        value: Some(object_name.to_string()),
    }];
    for c in [c1, c2, c3] {
        slots.push(Slot {
            name: c.to_string(),
            kind: SlotKind::PhyDescriptor,
            value: None,
        });
    }
    let segments = vec![
        Segment::Text(format!("The {group} properties of ")),
        Segment::Slot(0),
        Segment::Text(" are ".into()),
        Segment::Slot(1),
        Segment::Text(format!(" ({c1}), ")),
        Segment::Slot(2),
        Segment::Text(format!(" ({c2}), and ")),
        Segment::Slot(3),
        Segment::Text(format!(" ({c3}).")),
    ];
    Ok(QaRecord {
        stage: Stage::PropertyAnalysis,
        question,
        group: Some(group),
        segments,
        slots,
    })
}

/// `The appropriate verb to grasp the <obj> is <verb>.` with the verb open.
pub fn build_action_qa(object_name: &str, library: &DescriptorLibrary) -> Result<QaRecord> {
    check_object_name(object_name)?;
    Ok(QaRecord {
        stage: Stage::ActionSelection,
        question: format!(
            "Grasp Action Selection - Select an appropriate grasp action for the {object_name} {}.",
            options(&library.actions)
        ),
        group: None,
        segments: vec![
            Segment::Text("The appropriate verb to grasp the ".into()),
            Segment::Slot(0),
            Segment::Text(" is ".into()),
            Segment::Slot(1),
            Segment::Text(".".into()),
        ],
        slots: vec![
            Slot {
                name: "obj".into(),
                kind: SlotKind::Object,
                value: Some(object_name.to_string()),
            },
            Slot {
                name: "action".into(),
                kind: SlotKind::ActDescriptor,
                value: None,
            },
        ],
    })
}

/// Target parsing, then material/surface/shape per target, then one action
/// record per target: `1 + 4 * targets.len()` records.
pub fn build_cot_sequence(targets: &[&str], library: &DescriptorLibrary) -> Result<Vec<QaRecord>> {
    let mut records = vec![build_target_qa(targets)?];
    for t in targets {
        for group in PropertyGroup::ALL {
            records.push(build_property_qa(t, group, library)?);
        }
    }
    for t in targets {
        records.push(build_action_qa(t, library)?);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescriptorMode {
    /// Unknown descriptors are accepted and reported as novel.
    #[default]
    OpenWorld,
    /// Unknown descriptors are an error.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAnswer {
    /// One entry per slot; `None` where the answer still shows the marker.
    pub values: Vec<Option<String>>,
    pub unresolved: Vec<String>,
    /// Slots whose descriptor is not in the library (open-world mode only).
    pub novel: Vec<String>,
}

/// Recovers slot values by anchoring on the template's literal text.
///
/// Each slot runs up to the first occurrence of the literal that follows it.
pub fn parse_answer(
    text: &str,
    record: &QaRecord,
    library: &DescriptorLibrary,
    mode: DescriptorMode,
) -> Result<ParsedAnswer> {
    let mut pos = 0;
    let mut values = vec![None; record.slots.len()];
    let mut unresolved = Vec::new();
    let mut novel = Vec::new();

    for (k, seg) in record.segments.iter().enumerate() {
        match seg {
            Segment::Text(anchor) => {
                if !text[pos..].starts_with(anchor.as_str()) {
                    return Err(Error::Parse {
                        anchor: anchor.clone(),
                        offset: pos,
                    });
                }
                pos += anchor.len();
            }
            Segment::Slot(s) => {
                let slot = &record.slots[*s];
                let end = match record.segments.get(k + 1) {
                    Some(Segment::Text(anchor)) => {
                        pos + text[pos..].find(anchor.as_str()).ok_or_else(|| Error::Parse {
                            anchor: anchor.clone(),
                            offset: pos,
                        })?
                    }
                    _ => text.len(),
                };
                let value = &text[pos..end];
                pos = end;
                if value == slot.marker() {
                    unresolved.push(slot.name.clone());
                    continue;
                }
                if value.is_empty() {
                    return Err(Error::Parse {
                        anchor: slot.marker(),
                        offset: pos,
                    });
                }
                let known = match slot.kind {
                    SlotKind::Object => true,
                    SlotKind::Count => {
                        if value.parse::<usize>().is_err() {
                            return Err(Error::Parse {
                                anchor: slot.marker(),
                                offset: end - value.len(),
                            });
                        }
                        true
                    }
                    SlotKind::PhyDescriptor => record
                        .group
                        .is_some_and(|g| library.contains_physical(g, &slot.name, value)),
                    SlotKind::ActDescriptor => library.contains_action(value),
                };
                if !known {
                    if mode == DescriptorMode::Strict {
                        return Err(Error::UnknownDescriptor {
                            slot: slot.name.clone(),
                            value: value.to_string(),
                        });
                    }
                    novel.push(slot.name.clone());
                }
                values[*s] = Some(value.to_string());
            }
        }
    }
    if pos != text.len() {
        return Err(Error::Parse {
            anchor: "<end of answer>".into(),
            offset: pos,
        });
    }
    Ok(ParsedAnswer {
        values,
        unresolved,
        novel,
    })
}

#[cfg(test)]
mod tests {
    use super::super::library::default_library;
    use super::*;

    #[test]
    fn target_answer_lists_objects_and_count() {
        let r = build_target_qa(&["remote control", "glasses"]).unwrap();
        assert_eq!(r.render(), "[remote control, glasses]. Total 2.");
        assert_eq!(r.answer_template(), "[<obj_1>, <obj_2>]. Total <#objs>.");
        assert!(r.supervision().iter().all(|t| t.weight == 1.0));

        let single = build_target_qa(&["mug"]).unwrap();
        assert_eq!(single.render(), "[mug]. Total 1.");
        assert!(matches!(build_target_qa(&[]), Err(Error::EmptyTargets)));
    }

    #[test]
    fn target_answer_parses_back() {
        let lib = default_library();
        let r = build_target_qa(&["remote control", "glasses"]).unwrap();
        let parsed = parse_answer(&r.render(), &r, &lib, DescriptorMode::Strict).unwrap();
        assert_eq!(
            parsed.values,
            vec![Some("remote control".into()), Some("glasses".into()), Some("2".into())]
        );
    }

    #[test]
    fn material_answer_shape() {
        let lib = default_library();
        let mut r = build_property_qa("glass cup", PropertyGroup::Material, &lib).unwrap();
        r.fill_reasoning(&["rigid", "brittle", "inflexible"]).unwrap();
        assert_eq!(
            r.render(),
            "The material properties of glass cup are rigid (hardness), brittle (strength), and inflexible (elasticity)."
        );
        assert!(r.question.contains("hardness [options: soft, hard, rigid, flexible, etc.]"));
        let weights: Vec<f64> = r.supervision().iter().map(|t| t.weight).collect();
        assert_eq!(zero_weight_spans(&weights), 3);
        let masked: Vec<String> = r
            .supervision()
            .into_iter()
            .filter(|t| t.weight == 0.0)
            .map(|t| t.text)
            .collect();
        assert_eq!(masked, ["rigid", "brittle", "inflexible"]);
    }

    #[test]
    fn unfilled_property_slots_are_unresolved() {
        let lib = default_library();
        let r = build_property_qa("mug", PropertyGroup::Surface, &lib).unwrap();
        let text = r.render();
        assert!(text.contains("<texture> (texture)"));
        let parsed = parse_answer(&text, &r, &lib, DescriptorMode::Strict).unwrap();
        assert_eq!(parsed.unresolved, ["texture", "roughness", "friction"]);
        let weights: Vec<f64> = r.supervision().iter().map(|t| t.weight).collect();
        assert_eq!(zero_weight_spans(&weights), 3);
    }

    #[test]
    fn action_answer() {
        let lib = default_library();
        let mut r = build_action_qa("vase", &lib).unwrap();
        r.fill("action", "pinch").unwrap();
        assert_eq!(r.render(), "The appropriate verb to grasp the vase is pinch.");
        let weights: Vec<f64> = r.supervision().iter().map(|t| t.weight).collect();
        assert_eq!(zero_weight_spans(&weights), 1);
        let parsed = parse_answer(&r.render(), &r, &lib, DescriptorMode::Strict).unwrap();
        assert_eq!(parsed.values[1].as_deref(), Some("pinch"));
        assert!(r.question.contains("[options: clamp, pinch, snap, pluck, lift, grip, etc.]"));
    }

    #[test]
    fn novel_descriptor_handling() {
        let lib = default_library();
        let r = build_property_qa("scarf", PropertyGroup::Surface, &lib).unwrap();
        let text = "The surface properties of scarf are velvety (texture), matte (roughness), and grippy (friction).";
        let parsed = parse_answer(text, &r, &lib, DescriptorMode::OpenWorld).unwrap();
        assert_eq!(parsed.novel, ["texture"]);
        assert_eq!(parsed.values[1].as_deref(), Some("velvety"));
        assert!(matches!(
            parse_answer(text, &r, &lib, DescriptorMode::Strict),
            Err(Error::UnknownDescriptor { .. })
        ));
    }

    #[test]
    fn missing_period_names_the_anchor() {
        let lib = default_library();
        let r = build_action_qa("vase", &lib).unwrap();
        let err = parse_answer("The appropriate verb to grasp the vase is pinch", &r, &lib, DescriptorMode::OpenWorld)
            .unwrap_err();
        match err {
            Error::Parse { anchor, .. } => assert_eq!(anchor, "."),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_prefix_is_a_parse_error() {
        let lib = default_library();
        let r = build_action_qa("vase", &lib).unwrap();
        assert!(matches!(
            parse_answer("Grab the vase.", &r, &lib, DescriptorMode::OpenWorld),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(parse_answer("The appropriate verb to grasp the vase is pinch. ok", &r, &lib, DescriptorMode::OpenWorld)
            .is_err());
    }

    #[test]
    fn sequence_order_and_counts() {
        let lib = default_library();
        assert_eq!(build_cot_sequence(&["mug"], &lib).unwrap().len(), 5);
        let seq = build_cot_sequence(&["car keys", "sunglasses"], &lib).unwrap();
        assert_eq!(seq.len(), 9);
        let stages: Vec<Stage> = seq.iter().map(|r| r.stage).collect();
        assert_eq!(stages[0], Stage::TargetParsing);
        assert!(stages[1..7].iter().all(|s| *s == Stage::PropertyAnalysis));
        assert!(stages[7..].iter().all(|s| *s == Stage::ActionSelection));
        let zero: usize = seq
            .iter()
            .map(|r| zero_weight_spans(&r.supervision().iter().map(|t| t.weight).collect::<Vec<_>>()))
            .sum();
        assert_eq!(zero, 20);
    }

    #[test]
    fn word_units_and_spans() {
        let units = word_units("Total 2.");
        assert_eq!(
            units,
            vec![(0, 5, "Total".into()), (6, 7, "2".into()), (7, 8, ".".into())]
        );
    }

    #[test]
    fn json_line_fields() {
        let lib = default_library();
        let r = build_action_qa("vase", &lib).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        for key in ["stage", "question", "answer_template", "slots", "supervision", "char_spans"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["stage"], "action_selection");
        assert_eq!(v["slots"][1]["kind"], "act_descriptor");
    }

    #[test]
    fn invalid_names_rejected() {
        assert!(build_target_qa(&["a, b"]).is_err());
        assert!(build_target_qa(&["  "]).is_err());
    }
}
