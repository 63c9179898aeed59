//! A set of loaded knowledge bases with their parent → child links.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::dsl::parse_kb_named;
use crate::model::{validate, KnowledgeBase};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KbCatalog {
    kbs: IndexMap<String, Arc<KnowledgeBase>>,
    /// (parent kb id, pattern id) → child kb id
    children: HashMap<(String, String), String>,
    /// canonical file path → kb id, for files loaded from disk
    files: HashMap<PathBuf, String>,
}

impl KbCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a knowledge base; it must validate and its id must be new.
    pub fn insert(&mut self, kb: KnowledgeBase) -> Result<Arc<KnowledgeBase>> {
        let report = validate(&kb);
        if !report.is_empty() {
            return Err(Error::InvalidKb(report));
        }
        if self.kbs.contains_key(&kb.id) {
            return Err(Error::DuplicateKb(kb.id));
        }
        let kb = Arc::new(kb);
        self.kbs.insert(kb.id.clone(), kb.clone());
        Ok(kb)
    }

    /// Declares `child` as the refinement KB of `pattern` in `parent`.
    pub fn link_child(&mut self, parent: &str, pattern: &str, child: &str) -> Result<()> {
        let parent_kb = self
            .get(parent)
            .ok_or_else(|| Error::UnknownKb(parent.into()))?;
        if parent_kb.pattern(pattern).is_none() {
            return Err(Error::UnknownPattern(pattern.into()));
        }
        if !self.kbs.contains_key(child) {
            return Err(Error::UnknownKb(child.into()));
        }
        self.children
            .insert((parent.to_string(), pattern.to_string()), child.to_string());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<KnowledgeBase>> {
        self.kbs.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&Arc<KnowledgeBase>> {
        self.get(id).ok_or_else(|| Error::UnknownKb(id.to_string()))
    }

    pub fn child_of(&self, kb: &str, pattern: &str) -> Option<&Arc<KnowledgeBase>> {
        self.children
            .get(&(kb.to_string(), pattern.to_string()))
            .and_then(|id| self.kbs.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<KnowledgeBase>> {
        self.kbs.values()
    }

    pub fn len(&self) -> usize {
        self.kbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kbs.is_empty()
    }

    /// Loads a `.kb` file and, recursively, every child it references
    /// (resolved relative to the referencing file). Returns the KB id.
    pub fn load_file(&mut self, path: &Path) -> Result<String> {
        let canonical = fs::canonicalize(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(id) = self.files.get(&canonical) {
            return Ok(id.clone());
        }
        let text = fs::read_to_string(&canonical).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let kb = parse_kb_named(&text, &path.display().to_string())?;
        let id = kb.id.clone();
        let links: Vec<(String, String)> = kb
            .patterns
            .iter()
            .filter_map(|p| p.child_kb.as_ref().map(|c| (p.id.clone(), c.clone())))
            .collect();
        self.insert(kb)?;
        self.files.insert(canonical.clone(), id.clone());

        let base = canonical.parent().unwrap_or(Path::new("."));
        for (pattern, child_ref) in links {
            let child_id = self.load_file(&base.join(&child_ref))?;
            self.link_child(&id, &pattern, &child_id)?;
        }
        Ok(id)
    }

    /// Loads every `.kb` file in `dir` (not recursive), sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut catalog = Self::new();
        let entries = fs::read_dir(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut paths = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "kb") {
                paths.push(path);
            }
        }
        paths.sort();
        for path in paths {
            catalog.load_file(&path)?;
        }
        Ok(catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_children_relative_to_parent() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        fs::create_dir_all(dir.join("sub")).unwrap();
        fs::write(
            dir.join("root.kb"),
            "control root\nproperty c pattern\n  values a, b\npattern p\n  c = a\n  child \"sub/leaf.kb\"\n",
        )
        .unwrap();
        fs::write(
            dir.join("sub/leaf.kb"),
            "control leaf\n  level pattern\nproperty c pattern\n  values a, b\npattern q\n  c = b\n",
        )
        .unwrap();
        let mut cat = KbCatalog::new();
        let id = cat.load_file(&dir.join("root.kb")).unwrap();
        assert_eq!(id, "root");
        assert_eq!(cat.child_of("root", "p").unwrap().id, "leaf");
        // loading the child again is a no-op
        assert_eq!(cat.load_file(&dir.join("sub/leaf.kb")).unwrap(), "leaf");
        assert_eq!(cat.len(), 2);
    }

    #[test]
    fn missing_child_file_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        fs::write(
            dir.join("root.kb"),
            "control root\nproperty c pattern\n  values a, b\npattern p\n  c = a\n  child \"nope.kb\"\n",
        )
        .unwrap();
        let err = KbCatalog::new()
            .load_file(&dir.join("root.kb"))
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }
}
