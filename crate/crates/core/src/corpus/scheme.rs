use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Dense tag index: `0` is `O`, then `B-`, `I-`, `E-` for each class in order.
pub type TagId = usize;

/// Entity classes of the CHEMDNER corpus, in the order used for tag ids.
pub const CHEMDNER_CLASSES: [&str; 8] = [
    "TRIVIAL",
    "SYSTEMATIC",
    "ABBREVIATION",
    "FORMULA",
    "FAMILY",
    "IDENTIFIER",
    "MULTIPLE",
    "NO CLASS",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
    End(usize),
}

impl Tag {
    pub fn class(self) -> Option<usize> {
        match self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) | Tag::End(c) => Some(c),
        }
    }
}

/// Begin/Inside/End/Outside tag inventory over a list of entity classes.
///
/// Single-token entities are written as a solitary `B-` tag.
#[derive(Clone, PartialEq, Eq)]
pub struct TagScheme {
    classes: Vec<String>,
    by_name: HashMap<String, usize>,
}

impl fmt::Debug for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TagScheme").field(&self.classes).finish()
    }
}

impl Default for TagScheme {
    fn default() -> Self {
        TagScheme::chemdner()
    }
}

impl TagScheme {
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Result<Self> {
        let mut by_name = HashMap::new();
        let mut names = Vec::with_capacity(classes.len());
        for (i, c) in classes.iter().enumerate() {
            let c = c.as_ref();
            if c.is_empty() || c == "O" || c.contains(['\t', '\n', '\r']) {
                return Err(Error::Config(format!("invalid entity class name {c:?}")));
            }
            if by_name.insert(c.to_string(), i).is_some() {
                return Err(Error::Config(format!("duplicate entity class {c:?}")));
            }
            names.push(c.to_string());
        }
        if names.is_empty() {
            return Err(Error::Config("tag scheme needs at least one class".into()));
        }
        Ok(TagScheme {
            classes: names,
            by_name,
        })
    }

    pub fn chemdner() -> Self {
        TagScheme::new(&CHEMDNER_CLASSES).expect("static class list is valid")
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// `3 × classes + 1`.
    pub fn num_tags(&self) -> usize {
        3 * self.classes.len() + 1
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.classes[class]
    }

    pub fn id(&self, tag: Tag) -> TagId {
        match tag {
            Tag::Outside => 0,
            Tag::Begin(c) => 1 + 3 * c,
            Tag::Inside(c) => 2 + 3 * c,
            Tag::End(c) => 3 + 3 * c,
        }
    }

    pub fn tag(&self, id: TagId) -> Option<Tag> {
        if id == 0 {
            return Some(Tag::Outside);
        }
        if id >= self.num_tags() {
            return None;
        }
        let class = (id - 1) / 3;
        Some(match (id - 1) % 3 {
            0 => Tag::Begin(class),
            1 => Tag::Inside(class),
            _ => Tag::End(class),
        })
    }

    pub fn tag_name(&self, id: TagId) -> String {
        match self.tag(id) {
            Some(Tag::Outside) => "O".to_string(),
            Some(Tag::Begin(c)) => format!("B-{}", self.classes[c]),
            Some(Tag::Inside(c)) => format!("I-{}", self.classes[c]),
            Some(Tag::End(c)) => format!("E-{}", self.classes[c]),
            None => format!("<invalid:{id}>"),
        }
    }

    pub fn parse_tag(&self, name: &str) -> Option<TagId> {
        if name == "O" {
            return Some(0);
        }
        let (prefix, class) = name.split_at_checked(2)?;
        let class = self.class_index(class)?;
        let tag = match prefix {
            "B-" => Tag::Begin(class),
            "I-" => Tag::Inside(class),
            "E-" => Tag::End(class),
            _ => return None,
        };
        Some(self.id(tag))
    }

    /// Pairs `(from, to)` that cannot occur in a well-formed sequence.
    ///
    /// A run that has seen `I-` must close with `E-`, so `I-c` may only be
    /// followed by `I-c` or `E-c`; `I-c` and `E-c` may only follow `B-c` or
    /// `I-c`. Returned ids refer to the tag inventory; sentence start and end
    /// are handled by [`TagScheme::forbidden_start`] and
    /// [`TagScheme::forbidden_end`].
    pub fn forbidden_transitions(&self) -> Vec<(TagId, TagId)> {
        let m = self.num_tags();
        let mut out = Vec::new();
        for from in 0..m {
            for to in 0..m {
                if !self.transition_allowed(from, to) {
                    out.push((from, to));
                }
            }
        }
        out
    }

    fn transition_allowed(&self, from: TagId, to: TagId) -> bool {
        let from = self.tag(from).expect("valid id");
        let to = self.tag(to).expect("valid id");
        let continues = |c: usize| matches!(from, Tag::Begin(f) | Tag::Inside(f) if f == c);
        match to {
            Tag::Inside(c) | Tag::End(c) => continues(c),
            Tag::Outside | Tag::Begin(_) => !matches!(from, Tag::Inside(_)),
        }
    }

    /// Tags that cannot open a sentence.
    pub fn forbidden_start(&self) -> Vec<TagId> {
        (0..self.num_tags())
            .filter(|&t| matches!(self.tag(t), Some(Tag::Inside(_) | Tag::End(_))))
            .collect()
    }

    /// Tags that cannot close a sentence.
    pub fn forbidden_end(&self) -> Vec<TagId> {
        (0..self.num_tags())
            .filter(|&t| matches!(self.tag(t), Some(Tag::Inside(_))))
            .collect()
    }
}
