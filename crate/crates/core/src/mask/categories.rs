use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::{Error, Result};

/// Category names accepted in category files.
pub const CATEGORY_NAMES: [&str; 9] = [
    "S-V agreement",
    "Quantifiers",
    "Filler gap",
    "Modal verbs",
    "NPI licensing",
    "D-N agreement",
    "Adverbs",
    "Anaphor agreement",
    "Animacy",
];

/// Bundled word lists.
pub const DEFAULT_CATEGORIES: &str = include_str!("../../data/categories.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskCategory {
    pub name: String,
    pub words: BTreeSet<String>,
}

/// Categories in file order with a word lookup that resolves overlaps to the
/// first category listing the word.
#[derive(Clone, Debug)]
pub struct CategorySet {
    categories: Vec<MaskCategory>,
    lookup: HashMap<String, usize>,
}

pub(crate) fn normalize_word(word: &str) -> String {
    word.to_lowercase().replace('\u{2019}', "'")
}

pub fn load_categories(path: &Path) -> Result<CategorySet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CategorySet::parse(&text)
}

impl CategorySet {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CATEGORIES).expect("bundled category file is valid")
    }

    /// Parses `[name]` sections with one word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut categories: Vec<(usize, MaskCategory)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::CategoryFormat {
                line: line_no,
                message,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header {line:?}")))?
                    .trim();
                if !CATEGORY_NAMES.contains(&name) {
                    return Err(err(format!(
                        "unknown category {name:?}; expected one of {}",
                        CATEGORY_NAMES.join(", ")
                    )));
                }
                if categories.iter().any(|(_, c)| c.name == name) {
                    return Err(err(format!("duplicate category {name:?}")));
                }
                categories.push((
                    line_no,
                    MaskCategory {
                        name: name.to_string(),
                        words: BTreeSet::new(),
                    },
                ));
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(err(format!("word {line:?} contains whitespace")));
            }
            let (_, current) = categories
                .last_mut()
                .ok_or_else(|| err("word before any [category] header".into()))?;
            current.words.insert(normalize_word(line));
        }
        if categories.is_empty() {
            return Err(Error::CategoryFormat {
                line: 1,
                message: "no categories defined".into(),
            });
        }
        if let Some((line, c)) = categories.iter().find(|(_, c)| c.words.is_empty()) {
            return Err(Error::CategoryFormat {
                line: *line,
                message: format!("category {:?} has no words", c.name),
            });
        }
        let categories: Vec<MaskCategory> = categories.into_iter().map(|(_, c)| c).collect();
        let mut lookup = HashMap::new();
        for (i, c) in categories.iter().enumerate() {
            for w in &c.words {
                lookup.entry(w.clone()).or_insert(i);
            }
        }
        Ok(CategorySet { categories, lookup })
    }

    pub fn categories(&self) -> &[MaskCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&MaskCategory> {
        self.categories.iter().find(|c| c.name == name)
    }

    /// Index of the category a word is attributed to, case-insensitively.
    pub fn category_of(&self, word: &str) -> Option<usize> {
        self.lookup.get(&normalize_word(word)).copied()
    }
}
