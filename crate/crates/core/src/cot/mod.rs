//! Chain-of-thought QA templates, descriptor vocabularies and instruction
//! handling.

pub mod instruction;
pub mod library;
pub mod template;

pub use instruction::{build_instruction_prompt, mentions, validate_instruction, Instruction, RejectReason, Verdict};
pub use library::{default_library, Characteristic, DescriptorLibrary, GroupDescriptors, PropertyGroup};
pub use template::{
    build_action_qa, build_cot_sequence, build_property_qa, build_target_qa, parse_answer, zero_weight_spans,
    DescriptorMode, ParsedAnswer, QaRecord, Segment, Slot, SlotKind, Stage, SupervisedToken,
};
