use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyGroup {
    Material,
    Surface,
    Shape,
}

impl PropertyGroup {
    pub const ALL: [PropertyGroup; 3] = [PropertyGroup::Material, PropertyGroup::Surface, PropertyGroup::Shape];

    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyGroup::Material => "material",
            PropertyGroup::Surface => "surface",
            PropertyGroup::Shape => "shape",
        }
    }

    /// Fixed characteristic names, in template order.
    pub fn characteristics(&self) -> [&'static str; 3] {
        match self {
            PropertyGroup::Material => ["hardness", "strength", "elasticity"],
            PropertyGroup::Surface => ["texture", "roughness", "friction"],
            // no canonical list exists for shape; this one is a toolkit convention
            PropertyGroup::Shape => ["geometry", "size", "symmetry"],
        }
    }
}

impl fmt::Display for PropertyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Characteristic {
    pub name: String,
    pub descriptors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescriptors {
    pub group: PropertyGroup,
    pub characteristics: Vec<Characteristic>,
}

/// Open-world vocabularies for physical-property and grasp-action slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorLibrary {
    pub physical: Vec<GroupDescriptors>,
    pub actions: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn check_descriptor(d: &str) -> Result<()> {
    if d.is_empty() || d.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
        return Err(Error::Validation(format!(
            "descriptor {d:?} must be nonempty, lowercase and whitespace-free"
        )));
    }
    Ok(())
}

impl Default for DescriptorLibrary {
    fn default() -> Self {
        default_library()
    }
}

/// The seeded vocabulary. Callers may extend it.
pub fn default_library() -> DescriptorLibrary {
    let table: [(PropertyGroup, [&[&str]; 3]); 3] = [
        (
            PropertyGroup::Material,
            [
                &["soft", "hard", "rigid", "flexible"],
                &["brittle", "ductile", "tough"],
                &["elastic", "viscoelastic", "inflexible"],
            ],
        ),
        (
            PropertyGroup::Surface,
            [
                &["smooth", "rough", "textured", "grainy"],
                &["polished", "matte", "coarse"],
                &["slippery", "grippy", "sticky"],
            ],
        ),
        (
            PropertyGroup::Shape,
            [
                &["cylindrical", "spherical", "cuboid", "flat", "irregular"],
                &["small", "medium", "large"],
                &["symmetric", "asymmetric"],
            ],
        ),
    ];
    let physical = table
        .iter()
        .map(|(group, lists)| GroupDescriptors {
            group: *group,
            characteristics: group
                .characteristics()
                .iter()
                .zip(lists.iter())
                .map(|(name, ds)| Characteristic {
                    name: name.to_string(),
                    descriptors: strings(ds),
                })
                .collect(),
        })
        .collect();
    DescriptorLibrary {
        physical,
        actions: strings(&["clamp", "pinch", "snap", "pluck", "lift", "grip"]),
    }
}

impl DescriptorLibrary {
    pub fn group(&self, group: PropertyGroup) -> Option<&GroupDescriptors> {
        self.physical.iter().find(|g| g.group == group)
    }

    pub fn descriptors(&self, group: PropertyGroup, characteristic: &str) -> Option<&[String]> {
        self.group(group)?
            .characteristics
            .iter()
            .find(|c| c.name == characteristic)
            .map(|c| c.descriptors.as_slice())
    }

    pub fn contains_physical(&self, group: PropertyGroup, characteristic: &str, descriptor: &str) -> bool {
        self.descriptors(group, characteristic)
            .is_some_and(|ds| ds.iter().any(|d| d == descriptor))
    }

    pub fn contains_action(&self, verb: &str) -> bool {
        self.actions.iter().any(|a| a == verb)
    }

    pub fn add_descriptor(&mut self, group: PropertyGroup, characteristic: &str, descriptor: &str) -> Result<()> {
        check_descriptor(descriptor)?;
        let entry = self
            .physical
            .iter_mut()
            .find(|g| g.group == group)
            .and_then(|g| g.characteristics.iter_mut().find(|c| c.name == characteristic))
            .ok_or_else(|| Error::Validation(format!("{group} has no characteristic {characteristic:?}")))?;
        if !entry.descriptors.iter().any(|d| d == descriptor) {
            entry.descriptors.push(descriptor.to_string());
        }
        Ok(())
    }

    pub fn add_action(&mut self, verb: &str) -> Result<()> {
        check_descriptor(verb)?;
        if !self.contains_action(verb) {
            self.actions.push(verb.to_string());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for group in PropertyGroup::ALL {
            let g = self
                .group(group)
                .ok_or_else(|| Error::Validation(format!("library is missing the {group} group")))?;
            let names: Vec<&str> = g.characteristics.iter().map(|c| c.name.as_str()).collect();
            if names != group.characteristics() {
                return Err(Error::Validation(format!(
                    "{group} characteristics must be {:?}, found {names:?}",
                    group.characteristics()
                )));
            }
            for c in &g.characteristics {
                c.descriptors.iter().try_for_each(|d| check_descriptor(d))?;
            }
        }
        if self.physical.len() != 3 {
            return Err(Error::Validation("library must hold exactly three property groups".into()));
        }
        self.actions.iter().try_for_each(|a| check_descriptor(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_vocabulary() {
        let lib = default_library();
        lib.validate().unwrap();
        for verb in ["clamp", "pinch", "snap", "pluck", "lift", "grip"] {
            assert!(lib.contains_action(verb));
        }
        for d in ["soft", "hard", "rigid", "flexible"] {
            assert!(lib.contains_physical(PropertyGroup::Material, "hardness", d));
        }
        assert!(lib.contains_physical(PropertyGroup::Surface, "friction", "slippery"));
        assert!(lib.contains_physical(PropertyGroup::Material, "elasticity", "inflexible"));
        assert!(lib.contains_physical(PropertyGroup::Surface, "roughness", "polished"));
    }

    #[test]
    fn extension_and_validation() {
        let mut lib = default_library();
        lib.add_descriptor(PropertyGroup::Surface, "texture", "velvety").unwrap();
        assert!(lib.contains_physical(PropertyGroup::Surface, "texture", "velvety"));
        assert!(lib.add_descriptor(PropertyGroup::Surface, "texture", "Velvety").is_err());
        assert!(lib.add_descriptor(PropertyGroup::Surface, "texture", "very soft").is_err());
        assert!(lib.add_descriptor(PropertyGroup::Material, "texture", "soft").is_err());
        lib.add_action("scoop").unwrap();
        lib.validate().unwrap();

        lib.physical[0].characteristics.pop();
        assert!(lib.validate().is_err());
    }
}
