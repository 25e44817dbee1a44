use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Labeled image paths. `items[i].1` indexes `classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub items: Vec<(PathBuf, usize)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for (_, c) in &self.items {
            counts[*c] += 1;
        }
        counts
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { classes: self.classes.clone(), items: indices.iter().map(|&i| self.items[i].clone()).collect() }
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Reads `root/<class>/<image>`; classes and images in lexicographic order.
pub fn ingest(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::FileNotFound(root.to_path_buf()));
    }
    let mut classes = Vec::new();
    let mut items = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let images: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| p.is_file() && is_image(p)).collect();
        if images.is_empty() {
            return Err(Error::EmptyClassDir(dir));
        }
        let label = classes.len();
        classes.push(dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        items.extend(images.into_iter().map(|p| (p, label)));
    }
    if classes.is_empty() {
        return Err(Error::NoClasses(root.to_path_buf()));
    }
    Ok(Dataset { classes, items })
}

/// `train_per_class` (M) images of every class go to training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub seed: u64,
}

/// Item indices of the train and test parts. Each class is shuffled with a
/// ChaCha8 stream seeded by `spec.seed` (classes in order, one stream); the
/// first M go to training.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = spec.train_per_class;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes.len()];
    for (i, (_, c)) in ds.items.iter().enumerate() {
        per_class[*c].push(i);
    }
    for (class, members) in per_class.iter().enumerate() {
        if m == 0 || m >= members.len() {
            return Err(Error::InsufficientExamples {
                class: ds.classes[class].clone(),
                available: members.len(),
                requested: m,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in per_class {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..m]);
        test.extend_from_slice(&members[m..]);
    }
    Ok((train, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn synthetic(counts: &[usize]) -> Dataset {
        let classes = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let items = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |i| (PathBuf::from(format!("c{c}/{i}.png")), c)))
            .collect();
        Dataset { classes, items }
    }

    #[test]
    fn reported_class_sizes() {
        let ds = synthetic(&[104, 107, 100, 80]);
        assert_eq!(ds.len(), 391);
        let (train, test) = split(&ds, &SplitSpec { train_per_class: 50, seed: 1 }).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(test.len(), 191);
        assert_eq!(train.counts(), vec![50; 4]);
    }

    #[test]
    fn partition_and_determinism() {
        let ds = synthetic(&[5, 9, 7]);
        let spec = SplitSpec { train_per_class: 4, seed: 3 };
        let (tr, te) = split_indices(&ds, &spec).unwrap();
        let all: HashSet<usize> = tr.iter().chain(&te).copied().collect();
        assert_eq!(all.len(), ds.len());
        assert_eq!(tr.len() + te.len(), ds.len());
        assert_eq!(split_indices(&ds, &spec).unwrap(), (tr.clone(), te));
        assert_ne!(split_indices(&ds, &SplitSpec { seed: 4, ..spec }).unwrap().0, tr);
    }

    #[test]
    fn leave_one_out_per_class() {
        let ds = synthetic(&[3, 4]);
        let (_, test) = split(&ds, &SplitSpec { train_per_class: 2, seed: 0 }).unwrap();
        assert_eq!(test.counts(), vec![1, 2]);
        assert!(matches!(
            split(&ds, &SplitSpec { train_per_class: 3, seed: 0 }),
            Err(Error::InsufficientExamples { available: 3, requested: 3, .. })
        ));
    }

    #[test]
    fn ingest_layout() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["b", "a"] {
            std::fs::create_dir(dir.path().join(class)).unwrap();
            for i in 0..3 {
                std::fs::write(dir.path().join(class).join(format!("{i}.png")), b"x").unwrap();
            }
        }
        std::fs::write(dir.path().join("a").join("notes.txt"), b"x").unwrap();
        std::fs::write(dir.path().join("manifest.csv"), b"x").unwrap();
        let ds = ingest(dir.path()).unwrap();
        assert_eq!(ds.classes, vec!["a", "b"]);
        assert_eq!(ds.len(), 6);
        assert!(ds.items[0].0.ends_with("a/0.png"));

        std::fs::create_dir(dir.path().join("c")).unwrap();
        assert!(matches!(ingest(dir.path()), Err(Error::EmptyClassDir(_))));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(ingest(empty.path()), Err(Error::NoClasses(_))));
    }
}
