use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense identifier of a named class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u32);

/// Dense identifier of a relation (role) name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelId(pub u32);

impl ClassId {
    pub const TOP: ClassId = ClassId(0);
    pub const BOT: ClassId = ClassId(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Textual name of the top concept in every file format.
pub const TOP_NAME: &str = "owl:Thing";
/// Textual name of the bottom concept in every file format.
pub const BOT_NAME: &str = "owl:Nothing";

/// Prefix reserved for classes introduced by the normalizer.
pub const FRESH_PREFIX: &str = "_N";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }
}

/// Class and relation name tables.
///
/// Ids are dense and assigned in first-appearance order. `TOP` and `BOT`
/// always occupy class ids 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    classes: Interner,
    relations: Interner,
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

impl Signature {
    pub fn new() -> Self {
        let mut classes = Interner::default();
        classes.intern(TOP_NAME);
        classes.intern(BOT_NAME);
        Signature {
            classes,
            relations: Interner::default(),
        }
    }

    /// Rebuild a signature from stored name tables (e.g. a checkpoint).
    ///
    /// The first two class names must be the reserved top/bottom names.
    pub fn from_tables(classes: Vec<String>, relations: Vec<String>) -> Option<Self> {
        if classes.len() < 2 || classes[0] != TOP_NAME || classes[1] != BOT_NAME {
            return None;
        }
        let mut sig = Signature {
            classes: Interner::default(),
            relations: Interner::default(),
        };
        for c in &classes {
            sig.classes.intern(c);
        }
        for r in &relations {
            sig.relations.intern(r);
        }
        if sig.classes.names.len() != classes.len() || sig.relations.names.len() != relations.len()
        {
            return None;
        }
        Some(sig)
    }

    pub fn intern_class(&mut self, name: &str) -> ClassId {
        ClassId(self.classes.intern(name))
    }

    pub fn intern_relation(&mut self, name: &str) -> RelId {
        RelId(self.relations.intern(name))
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.ids.get(name).copied().map(ClassId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelId> {
        self.relations.ids.get(name).copied().map(RelId)
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes.names[id.index()]
    }

    pub fn relation_name(&self, id: RelId) -> &str {
        &self.relations.names[id.index()]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.names.len()
    }

    pub fn has_class(&self, id: ClassId) -> bool {
        id.index() < self.num_classes()
    }

    pub fn has_relation(&self, id: RelId) -> bool {
        id.index() < self.num_relations()
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.num_classes() as u32).map(ClassId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelId> + '_ {
        (0..self.num_relations() as u32).map(RelId)
    }

    /// Every class except `TOP` and `BOT`.
    pub fn named_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (2..self.num_classes() as u32).map(ClassId)
    }

    pub fn class_names(&self) -> &[String] {
        &self.classes.names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations.names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids() {
        let sig = Signature::new();
        assert_eq!(sig.class_id(TOP_NAME), Some(ClassId::TOP));
        assert_eq!(sig.class_id(BOT_NAME), Some(ClassId::BOT));
        assert_ne!(ClassId::TOP, ClassId::BOT);
        assert_eq!(sig.num_classes(), 2);
    }

    #[test]
    fn interning_is_dense_and_stable() {
        let mut sig = Signature::new();
        let a = sig.intern_class("A");
        let b = sig.intern_class("B");
        assert_eq!(sig.intern_class("A"), a);
        assert_eq!((a.0, b.0), (2, 3));
        assert_eq!(sig.class_name(b), "B");
        let r = sig.intern_relation("r");
        assert_eq!(r, RelId(0));
        assert_eq!(sig.named_classes().collect::<Vec<_>>(), vec![a, b]);
    }

    #[test]
    fn from_tables_round_trip() {
        let mut sig = Signature::new();
        sig.intern_class("X");
        sig.intern_relation("p");
        let rebuilt =
            Signature::from_tables(sig.class_names().to_vec(), sig.relation_names().to_vec())
                .unwrap();
        assert_eq!(rebuilt, sig);
        assert!(Signature::from_tables(vec!["X".into()], vec![]).is_none());
    }
}
