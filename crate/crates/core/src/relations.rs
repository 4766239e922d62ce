//! Relation inventory and the joint relation-nuclearity label space.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const DEFAULT_INVENTORY: &str = include_str!("../data/relations.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nuclearity {
    NS,
    SN,
    NN,
}

impl Nuclearity {
    pub const ALL: [Nuclearity; 3] = [Nuclearity::NS, Nuclearity::SN, Nuclearity::NN];

    pub fn as_str(self) -> &'static str {
        match self {
            Nuclearity::NS => "NS",
            Nuclearity::SN => "SN",
            Nuclearity::NN => "NN",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Nuclearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Nuclearity {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "NS" => Ok(Nuclearity::NS),
            "SN" => Ok(Nuclearity::SN),
            "NN" => Ok(Nuclearity::NN),
            _ => Err(()),
        }
    }
}

/// Label attached to an internal tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationLabel {
    pub nuclearity: Nuclearity,
    pub relation: String,
}

impl RelationLabel {
    pub fn new(relation: impl Into<String>, nuclearity: Nuclearity) -> Self {
        RelationLabel {
            nuclearity,
            relation: relation.into(),
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.relation, self.nuclearity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct InventoryEntry {
    name: String,
    allowed: Vec<Nuclearity>,
}

/// Configurable set of relation classes, optionally restricting which
/// nuclearity pairs each class may take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInventory {
    entries: Vec<InventoryEntry>,
}

impl Default for RelationInventory {
    /// The 18 RST-DT relation classes, every nuclearity pair allowed.
    fn default() -> Self {
        RelationInventory::parse(DEFAULT_INVENTORY).expect("bundled inventory parses")
    }
}

impl RelationInventory {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<InventoryEntry> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let name = fields.next().expect("non-empty line").to_string();
            let mut allowed = Vec::new();
            for f in fields {
                let n: Nuclearity = f.parse().map_err(|_| {
                    Error::Config(format!(
                        "relation inventory line {}: `{f}` is not NS, SN or NN",
                        lineno + 1
                    ))
                })?;
                if !allowed.contains(&n) {
                    allowed.push(n);
                }
            }
            if allowed.is_empty() {
                allowed = Nuclearity::ALL.to_vec();
            }
            allowed.sort();
            if entries.iter().any(|e| e.name == name) {
                return Err(Error::Config(format!(
                    "relation inventory line {}: duplicate relation `{name}`",
                    lineno + 1
                )));
            }
            entries.push(InventoryEntry { name, allowed });
        }
        if entries.is_empty() {
            return Err(Error::Config("relation inventory is empty".into()));
        }
        Ok(RelationInventory { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RelationInventory::parse(&text)
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let text: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
        RelationInventory::parse(&text.join("\n"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].name
    }

    pub fn allows(&self, label: &RelationLabel) -> bool {
        self.entries
            .iter()
            .any(|e| e.name == label.relation && e.allowed.contains(&label.nuclearity))
    }

    /// Every valid relation-nuclearity combination, relation-major.
    pub fn labels(&self) -> Vec<RelationLabel> {
        self.entries
            .iter()
            .flat_map(|e| {
                e.allowed
                    .iter()
                    .map(|&n| RelationLabel::new(e.name.clone(), n))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.name);
            if e.allowed.len() < 3 {
                for n in &e.allowed {
                    out.push(' ');
                    out.push_str(n.as_str());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Dense indexing of the valid labels of an inventory, used by the classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    inventory: RelationInventory,
    labels: Vec<RelationLabel>,
}

impl LabelSet {
    pub fn new(inventory: RelationInventory) -> Self {
        let labels = inventory.labels();
        LabelSet { inventory, labels }
    }

    pub fn inventory(&self) -> &RelationInventory {
        &self.inventory
    }

    /// Number of joint relation-nuclearity labels.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &RelationLabel {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[RelationLabel] {
        &self.labels
    }

    pub fn index_of(&self, label: &RelationLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn relation_count(&self) -> usize {
        self.inventory.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_inventory_has_eighteen_classes() {
        let inv = RelationInventory::default();
        assert_eq!(inv.len(), 18);
        assert!(inv.contains("Textual-Organization"));
        assert_eq!(LabelSet::new(inv).len(), 54);
    }

    #[test]
    fn validity_table_restricts_labels() {
        let inv = RelationInventory::parse("Joint NN\nAttribution NS SN\n").unwrap();
        let set = LabelSet::new(inv.clone());
        assert_eq!(set.len(), 3);
        assert!(inv.allows(&RelationLabel::new("Joint", Nuclearity::NN)));
        assert!(!inv.allows(&RelationLabel::new("Joint", Nuclearity::NS)));
        assert_eq!(RelationInventory::parse(&inv.to_text()).unwrap(), inv);
    }

    #[test]
    fn bad_inventory_lines() {
        assert!(RelationInventory::parse("Joint XY").is_err());
        assert!(RelationInventory::parse("Joint\nJoint").is_err());
        assert!(RelationInventory::parse("# nothing").is_err());
    }
}
