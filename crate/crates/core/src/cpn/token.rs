use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::ClassId;

/// Object identifier: class plus the number of objects of that class that
/// existed when it was created. Written `Class#n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId {
    pub class: ClassId,
    pub index: u32,
}

impl ObjectId {
    pub fn new(class: impl Into<String>, index: u32) -> Self {
        ObjectId {
            class: ClassId(class.into()),
            index,
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.class, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed object id `{0}`, expected Class#n")]
pub struct ParseObjectIdError(String);

impl FromStr for ObjectId {
    type Err = ParseObjectIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (class, index) = s
            .rsplit_once('#')
            .ok_or_else(|| ParseObjectIdError(s.to_string()))?;
        let index = index.parse().map_err(|_| ParseObjectIdError(s.to_string()))?;
        if class.is_empty() {
            return Err(ParseObjectIdError(s.to_string()));
        }
        Ok(ObjectId::new(class, index))
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unordered pair of distinct objects, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Association(ObjectId, ObjectId);

impl Association {
    /// `None` when both ends are the same object.
    pub fn new(a: ObjectId, b: ObjectId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Association(a, b)),
            std::cmp::Ordering::Greater => Some(Association(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn ends(&self) -> (&ObjectId, &ObjectId) {
        (&self.0, &self.1)
    }

    pub fn contains(&self, o: &ObjectId) -> bool {
        &self.0 == o || &self.1 == o
    }

    /// The end opposite to `o`, if `o` is one of the ends.
    pub fn partner(&self, o: &ObjectId) -> Option<&ObjectId> {
        if &self.0 == o {
            Some(&self.1)
        } else if &self.1 == o {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl<'de> Deserialize<'de> for Association {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (a, b) = <(ObjectId, ObjectId)>::deserialize(d)?;
        Association::new(a, b)
            .ok_or_else(|| serde::de::Error::custom("association ends must differ"))
    }
}

/// A token value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum ColorValue {
    Unit,
    Int(u64),
    Id(ObjectId),
    IdSet(BTreeSet<ObjectId>),
    AssocSet(BTreeSet<Association>),
    CfMap(BTreeMap<ClassId, Option<ObjectId>>),
}

impl ColorValue {
    pub fn as_id(&self) -> Option<&ObjectId> {
        match self {
            ColorValue::Id(o) => Some(o),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<u64> {
        match self {
            ColorValue::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_id_set(&self) -> Option<&BTreeSet<ObjectId>> {
        match self {
            ColorValue::IdSet(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_assoc_set(&self) -> Option<&BTreeSet<Association>> {
        match self {
            ColorValue::AssocSet(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_cf(&self) -> Option<&BTreeMap<ClassId, Option<ObjectId>>> {
        match self {
            ColorValue::CfMap(m) => Some(m),
            _ => None,
        }
    }

    /// The objects a value stands for: one for an id, all for a set, none
    /// otherwise.
    pub fn objects(&self) -> Vec<&ObjectId> {
        match self {
            ColorValue::Id(o) => vec![o],
            ColorValue::IdSet(s) => s.iter().collect(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ColorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorValue::Unit => f.write_str("()"),
            ColorValue::Int(n) => write!(f, "{n}"),
            ColorValue::Id(o) => write!(f, "{o}"),
            ColorValue::IdSet(s) => {
                f.write_str("{")?;
                for (i, o) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{o}")?;
                }
                f.write_str("}")
            }
            ColorValue::AssocSet(s) => {
                f.write_str("{")?;
                for (i, a) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}-{}", a.0, a.1)?;
                }
                f.write_str("}")
            }
            ColorValue::CfMap(m) => {
                f.write_str("[")?;
                let mut first = true;
                for (c, o) in m {
                    if let Some(o) = o {
                        if !first {
                            f.write_str(", ")?;
                        }
                        first = false;
                        write!(f, "{c}:{o}")?;
                    }
                }
                f.write_str("]")
            }
        }
    }
}

/// Assignment of transition variables to values. Ordered by variable name,
/// so bindings compare lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Binding(pub BTreeMap<String, ColorValue>);

impl Binding {
    pub fn get(&self, var: &str) -> Option<&ColorValue> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, value: ColorValue) {
        self.0.insert(var.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ColorValue)> {
        self.0.iter()
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(">")
    }
}

/// Token multisets per place, indexed like `Net::places`. Every place's
/// tokens are kept sorted, so equal markings are structurally equal and
/// hash the same.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking(Vec<Vec<ColorValue>>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking(vec![Vec::new(); places])
    }

    pub fn tokens(&self, place: usize) -> &[ColorValue] {
        &self.0[place]
    }

    pub fn places(&self) -> usize {
        self.0.len()
    }

    pub fn count(&self, place: usize, value: &ColorValue) -> usize {
        let tokens = &self.0[place];
        let start = tokens.partition_point(|t| t < value);
        tokens[start..].iter().take_while(|t| *t == value).count()
    }

    pub fn contains(&self, place: usize, value: &ColorValue) -> bool {
        self.0[place].binary_search(value).is_ok()
    }

    pub fn add(&mut self, place: usize, value: ColorValue) {
        let tokens = &mut self.0[place];
        let at = tokens.partition_point(|t| t <= &value);
        tokens.insert(at, value);
    }

    /// Removes one occurrence; `false` if the token was not there.
    pub fn remove(&mut self, place: usize, value: &ColorValue) -> bool {
        let tokens = &mut self.0[place];
        match tokens.binary_search(value) {
            Ok(at) => {
                tokens.remove(at);
                true
            }
            Err(_) => false,
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Builds a marking from unsorted per-place token lists.
    pub fn from_tokens(mut tokens: Vec<Vec<ColorValue>>) -> Self {
        for t in &mut tokens {
            t.sort();
        }
        Marking(tokens)
    }

    pub fn into_tokens(self) -> Vec<Vec<ColorValue>> {
        self.0
    }
}
