//! Directory-per-class dataset ingestion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class image counts of the original field dataset before augmentation, in lexicographic class order.
pub const REFERENCE_CLASS_COUNTS: [(&str, usize); 6] = [
    ("bacterial_leaf_blight", 636),
    ("brown_spot", 646),
    ("healthy", 653),
    ("leaf_blast", 634),
    ("leaf_scald", 628),
    ("sheath_blight", 632),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    /// Lexicographic; position is the label index.
    pub classes: Vec<String>,
    pub samples: Vec<Vec<PathBuf>>,
    pub counts: Vec<usize>,
}

impl DatasetManifest {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(label, path)` for every sample, class by class.
    pub fn entries(&self) -> Vec<(usize, &Path)> {
        self.samples
            .iter()
            .enumerate()
            .flat_map(|(c, files)| files.iter().map(move |p| (c, p.as_path())))
            .collect()
    }

    /// `class/file` identifier of a sample path.
    pub fn sample_id(&self, label: usize, path: &Path) -> String {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{}/{file}", self.classes[label])
    }
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Scans `root/<class>/*.{png,jpg,jpeg}`. Other files are skipped with a
/// warning; an empty class is an error.
pub fn ingest(root: &Path) -> Result<DatasetManifest> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::Ingest(format!("{} has no class subdirectories", root.display())));
    }
    let mut classes = Vec::new();
    let mut samples = Vec::new();
    for dir in class_dirs {
        let name = dir.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let mut files = Vec::new();
        for p in sorted_entries(&dir)? {
            if p.is_file() && is_image(&p) {
                files.push(p);
            } else {
                log::warn!("skipping non-image entry {}", p.display());
            }
        }
        if files.is_empty() {
            return Err(Error::Ingest(format!("class {name:?} has no images")));
        }
        classes.push(name);
        samples.push(files);
    }
    let counts = samples.iter().map(Vec::len).collect();
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        classes,
        samples,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(p: &Path) {
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, b"x").unwrap();
    }

    #[test]
    fn lexicographic_classes_and_skips() {
        let d = tempfile::tempdir().unwrap();
        touch(&d.path().join("b/one.png"));
        touch(&d.path().join("b/notes.txt"));
        touch(&d.path().join("a/one.png"));
        touch(&d.path().join("a/two.JPG"));
        let m = ingest(d.path()).unwrap();
        assert_eq!(m.classes, vec!["a", "b"]);
        assert_eq!(m.counts, vec![2, 1]);
        assert_eq!(m.total(), 3);
        assert_eq!(m.sample_id(1, &m.samples[1][0]), "b/one.png");
    }

    #[test]
    fn empty_inputs_fail() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(ingest(d.path()), Err(Error::Ingest(_))));
        std::fs::create_dir_all(d.path().join("empty")).unwrap();
        let err = ingest(d.path()).unwrap_err();
        assert!(err.to_string().contains("empty"));
    }

    #[test]
    fn reference_counts() {
        assert_eq!(REFERENCE_CLASS_COUNTS.iter().map(|c| c.1).sum::<usize>(), 3829);
        let names: Vec<&str> = REFERENCE_CLASS_COUNTS.iter().map(|c| c.0).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
    }
}
