use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::DetectError;

pub const DEFAULT_CLASSES: [&str; 4] = ["cercospora", "miner", "phoma", "rust"];

/// Ordered, duplicate-free list of class names; a class id is an index into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassList(Vec<String>);

impl ClassList {
    pub fn new<I, S>(names: I) -> Result<Self, DetectError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DetectError::Config("class list is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(DetectError::Config("class list contains a blank name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DetectError::Config(format!("duplicate class name `{name}`")));
            }
        }
        Ok(ClassList(names))
    }

    /// Reads one class name per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self, DetectError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectError::Io(format!("{}: {e}", path.display())))?;
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn name(&self, class_id: usize) -> Option<&str> {
        self.0.get(class_id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

impl Default for ClassList {
    fn default() -> Self {
        ClassList(DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect())
    }
}

impl TryFrom<Vec<String>> for ClassList {
    type Error = DetectError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        ClassList::new(v)
    }
}

impl From<ClassList> for Vec<String> {
    fn from(c: ClassList) -> Self {
        c.0
    }
}

/// One detector output: a labelled box with a confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub class_name: String,
    #[serde(flatten)]
    pub bbox: BBox,
    pub confidence: f64,
}

/// One annotated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub class_id: usize,
    #[serde(flatten)]
    pub bbox: BBox,
}
