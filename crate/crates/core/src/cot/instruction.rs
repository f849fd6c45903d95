//! Flexible-instruction prompts and the explicit-name check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub scene_id: String,
    pub target_names: Vec<String>,
}

impl Instruction {
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Validation("instruction text is empty".into()));
        }
        if self.target_names.is_empty() {
            return Err(Error::EmptyTargets);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "name", rename_all = "kebab-case")]
pub enum RejectReason {
    /// The text names this target.
    ExplicitName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected { reason: RejectReason },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True when `name` occurs in `text` as a run of whole words, ignoring case.
/// The last word may carry an `s` or `es` suffix.
pub fn mentions(text: &str, name: &str) -> bool {
    let needle = words(name);
    if needle.is_empty() {
        return false;
    }
    let hay = words(text);
    let last = needle.len() - 1;
    hay.windows(needle.len()).any(|w| {
        w[..last] == needle[..last] && {
            let (got, want) = (&w[last], &needle[last]);
            got == want
                || got.strip_prefix(want.as_str()).is_some_and(|rest| rest == "s" || rest == "es")
        }
    })
}

pub fn validate_instruction(instr: &Instruction) -> Verdict {
    match instr.target_names.iter().find(|n| mentions(&instr.text, n)) {
        Some(name) => Verdict::Rejected {
            reason: RejectReason::ExplicitName(name.clone()),
        },
        None => Verdict::Accepted,
    }
}

/// Prompt for an external text generator. Pure function of its inputs.
pub fn build_instruction_prompt(scene_description: &str, object_names: &[&str]) -> Result<String> {
    if scene_description.trim().is_empty() {
        return Err(Error::Validation("scene description is empty".into()));
    }
    if object_names.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let forbidden = object_names
        .iter()
        .map(|n| format!("- {n}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(format!(
        "You write requests a person might say to a household robot.\n\
         \n\
         Scene: {scene_description}\n\
         \n\
         Target objects:\n{forbidden}\n\
         \n\
         Write 3-5 short, natural requests. Each request must make it clear from context that \
         the robot should pick up one or more of the target objects, but must never mention a \
         target object by name, in singular or plural form. Describe a situation, need or goal \
         instead of an object.\n\
         \n\
         Return one request per line with no numbering.\n"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instr(text: &str, targets: &[&str]) -> Instruction {
        Instruction {
            text: text.into(),
            scene_id: "s".into(),
            target_names: targets.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn drive_example_is_accepted() {
        let v = validate_instruction(&instr(
            "It\u{2019}s sunny outside and I want to go for a drive",
            &["car keys", "sunglasses"],
        ));
        assert_eq!(v, Verdict::Accepted);
    }

    #[test]
    fn explicit_name_is_rejected() {
        let v = validate_instruction(&instr("Grasp the black car keys", &["car keys"]));
        assert_eq!(
            v,
            Verdict::Rejected {
                reason: RejectReason::ExplicitName("car keys".into())
            }
        );
    }

    #[test]
    fn case_and_plural() {
        assert!(!validate_instruction(&instr("hand me the MUGS please", &["mug"])).is_accepted());
        assert!(mentions("two glasses", "glass"));
        assert!(mentions("a box.", "box"));
        assert!(mentions("the boxes", "box"));
        assert!(!mentions("a mugger", "mug"));
        assert!(!mentions("smug", "mug"));
        assert!(!mentions("car and keys", "car keys"));
    }

    #[test]
    fn prompt_is_deterministic_and_complete() {
        let desc = "black car keys, a ceramic mug, a red notebook, and sunglasses on the table";
        let a = build_instruction_prompt(desc, &["car keys", "sunglasses"]).unwrap();
        let b = build_instruction_prompt(desc, &["car keys", "sunglasses"]).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(desc));
        assert!(a.contains("3-5"));
        assert!(a.contains("- car keys\n- sunglasses"));
        assert!(build_instruction_prompt(desc, &[]).is_err());
    }

    #[test]
    fn record_validation() {
        assert!(instr("x", &["a"]).validate().is_ok());
        assert!(instr(" ", &["a"]).validate().is_err());
        assert!(instr("x", &[]).validate().is_err());
    }
}
