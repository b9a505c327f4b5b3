//! The label space: 14 observations, 4 label classes, and the on-disk cell
//! convention used by rule-labeler CSV exports.
//!
//! Cells are encoded as `""` (blank), `"1.0"` (positive), `"0.0"` (negative)
//! and `"-1.0"` (uncertain). Columns are always written in [`Condition`]
//! index order, which is alphabetical by name.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Number of observations every label vector covers.
pub const NUM_CONDITIONS: usize = 14;

/// One of the 14 fixed radiographic observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    Atelectasis,
    Cardiomegaly,
    Consolidation,
    Edema,
    EnlargedCardiomediastinum,
    Fracture,
    LungLesion,
    LungOpacity,
    NoFinding,
    PleuralEffusion,
    PleuralOther,
    Pneumonia,
    Pneumothorax,
    SupportDevices,
}

impl Condition {
    /// All conditions in canonical (column) order.
    pub const ALL: [Condition; NUM_CONDITIONS] = [
        Condition::Atelectasis,
        Condition::Cardiomegaly,
        Condition::Consolidation,
        Condition::Edema,
        Condition::EnlargedCardiomediastinum,
        Condition::Fracture,
        Condition::LungLesion,
        Condition::LungOpacity,
        Condition::NoFinding,
        Condition::PleuralEffusion,
        Condition::PleuralOther,
        Condition::Pneumonia,
        Condition::Pneumothorax,
        Condition::SupportDevices,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Condition> {
        Self::ALL.get(index).copied()
    }

    /// Display name, as used in CSV headers.
    pub const fn name(self) -> &'static str {
        match self {
            Condition::Atelectasis => "Atelectasis",
            Condition::Cardiomegaly => "Cardiomegaly",
            Condition::Consolidation => "Consolidation",
            Condition::Edema => "Edema",
            Condition::EnlargedCardiomediastinum => "Enlarged Cardiomediastinum",
            Condition::Fracture => "Fracture",
            Condition::LungLesion => "Lung Lesion",
            Condition::LungOpacity => "Lung Opacity",
            Condition::NoFinding => "No Finding",
            Condition::PleuralEffusion => "Pleural Effusion",
            Condition::PleuralOther => "Pleural Other",
            Condition::Pneumonia => "Pneumonia",
            Condition::Pneumothorax => "Pneumothorax",
            Condition::SupportDevices => "Support Devices",
        }
    }

    /// Exact-match lookup by display name.
    pub fn from_name(name: &str) -> Option<Condition> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// Number of classes the head for this condition predicts.
    pub const fn num_classes(self) -> usize {
        match self {
            Condition::NoFinding => 2,
            _ => 4,
        }
    }

    /// Whether `class` is a legal label for this condition.
    pub fn allows(self, class: LabelClass) -> bool {
        class.index() < self.num_classes()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-condition label. The discriminant is the head output index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum LabelClass {
    #[default]
    Blank = 0,
    Positive = 1,
    Negative = 2,
    Uncertain = 3,
}

impl LabelClass {
    pub const ALL: [LabelClass; 4] = [
        LabelClass::Blank,
        LabelClass::Positive,
        LabelClass::Negative,
        LabelClass::Uncertain,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<LabelClass> {
        Self::ALL.get(index).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            LabelClass::Blank => "Blank",
            LabelClass::Positive => "Positive",
            LabelClass::Negative => "Negative",
            LabelClass::Uncertain => "Uncertain",
        }
    }

    /// Canonical cell encoding.
    pub const fn encode(self) -> &'static str {
        match self {
            LabelClass::Blank => "",
            LabelClass::Positive => "1.0",
            LabelClass::Negative => "0.0",
            LabelClass::Uncertain => "-1.0",
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A label cell that is neither empty nor one of the accepted numeric forms.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid label value {value:?} in column {column:?}")]
pub struct FormatError {
    pub value: String,
    pub column: String,
}

/// One violated label constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Missing(Condition),
    ForbiddenClass(Condition, LabelClass),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing(c) => write!(f, "missing label for {c}"),
            Violation::ForbiddenClass(c, k) => write!(f, "{c} cannot be {k}"),
        }
    }
}

/// Every constraint a candidate label vector violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid label vector: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for SchemaError {}

/// Parse one label cell. `None` and empty/whitespace-only cells are blank.
pub fn parse_label_value(raw: Option<&str>, column: &str) -> Result<LabelClass, FormatError> {
    let trimmed = raw.map(str::trim).unwrap_or("");
    match trimmed {
        "" => Ok(LabelClass::Blank),
        "1" | "1.0" => Ok(LabelClass::Positive),
        "0" | "0.0" => Ok(LabelClass::Negative),
        "-1" | "-1.0" => Ok(LabelClass::Uncertain),
        _ => Err(FormatError {
            value: trimmed.to_string(),
            column: column.to_string(),
        }),
    }
}

/// A label for every condition, with the No Finding restriction enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "[LabelClass; NUM_CONDITIONS]", into = "[LabelClass; NUM_CONDITIONS]")]
pub struct LabelVector([LabelClass; NUM_CONDITIONS]);

impl LabelVector {
    /// The all-blank vector.
    pub const fn blank() -> Self {
        LabelVector([LabelClass::Blank; NUM_CONDITIONS])
    }

    pub fn new(labels: [LabelClass; NUM_CONDITIONS]) -> Result<Self, SchemaError> {
        let violations: Vec<Violation> = Condition::ALL
            .iter()
            .filter(|c| !c.allows(labels[c.index()]))
            .map(|&c| Violation::ForbiddenClass(c, labels[c.index()]))
            .collect();
        if violations.is_empty() {
            Ok(LabelVector(labels))
        } else {
            Err(SchemaError { violations })
        }
    }

    pub fn get(&self, condition: Condition) -> LabelClass {
        self.0[condition.index()]
    }

    /// Returns a copy with one label replaced.
    pub fn with(&self, condition: Condition, class: LabelClass) -> Result<Self, SchemaError> {
        let mut labels = self.0;
        labels[condition.index()] = class;
        LabelVector::new(labels)
    }

    pub fn as_array(&self) -> &[LabelClass; NUM_CONDITIONS] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Condition, LabelClass)> + '_ {
        Condition::ALL.iter().map(move |&c| (c, self.0[c.index()]))
    }
}

impl TryFrom<[LabelClass; NUM_CONDITIONS]> for LabelVector {
    type Error = SchemaError;

    fn try_from(labels: [LabelClass; NUM_CONDITIONS]) -> Result<Self, Self::Error> {
        LabelVector::new(labels)
    }
}

impl From<LabelVector> for [LabelClass; NUM_CONDITIONS] {
    fn from(v: LabelVector) -> Self {
        v.0
    }
}

/// Check a possibly partial condition → class mapping and build the
/// corresponding [`LabelVector`]. Reports all violations at once.
pub fn validate(labels: &BTreeMap<Condition, LabelClass>) -> Result<LabelVector, SchemaError> {
    let mut violations = Vec::new();
    let mut out = [LabelClass::Blank; NUM_CONDITIONS];
    for c in Condition::ALL {
        match labels.get(&c) {
            None => violations.push(Violation::Missing(c)),
            Some(&k) if !c.allows(k) => violations.push(Violation::ForbiddenClass(c, k)),
            Some(&k) => out[c.index()] = k,
        }
    }
    if violations.is_empty() {
        Ok(LabelVector(out))
    } else {
        Err(SchemaError { violations })
    }
}

/// Canonical cells in column order.
pub fn encode_label_row(labels: &LabelVector) -> [&'static str; NUM_CONDITIONS] {
    let mut out = [""; NUM_CONDITIONS];
    for (c, k) in labels.iter() {
        out[c.index()] = k.encode();
    }
    out
}

/// Errors from decoding a whole label row.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RowError {
    #[error("expected {NUM_CONDITIONS} label cells, found {0}")]
    Width(usize),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Schema(SchemaError),
}

/// Decode 14 cells in canonical column order.
pub fn parse_label_row<S: AsRef<str>>(cells: &[S]) -> Result<LabelVector, RowError> {
    if cells.len() != NUM_CONDITIONS {
        return Err(RowError::Width(cells.len()));
    }
    let mut map = BTreeMap::new();
    for (c, cell) in Condition::ALL.iter().zip(cells) {
        map.insert(*c, parse_label_value(Some(cell.as_ref()), c.name())?);
    }
    validate(&map).map_err(RowError::Schema)
}
