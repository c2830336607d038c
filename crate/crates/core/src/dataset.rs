//! In-memory labelled dataset with a held-out validation split.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    features: Vec<f64>,
    labels: Vec<u32>,
}

impl Split {
    pub fn new(features: Vec<f64>, labels: Vec<u32>, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::param("feature_dim", "must be at least 1"));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::Dimension(format!(
                "{} feature values for {} rows of width {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Split { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize, feature_dim: usize) -> &[f64] {
        &self.features[i * feature_dim..(i + 1) * feature_dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_dim: usize,
    num_classes: usize,
    train: Split,
    val: Split,
}

impl Dataset {
    pub fn new(feature_dim: usize, num_classes: usize, train: Split, val: Split) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::param("num_classes", "must be at least 1"));
        }
        if train.is_empty() {
            return Err(Error::param("train", "dataset needs at least one training sample"));
        }
        for split in [&train, &val] {
            if split.features.len() != split.len() * feature_dim {
                return Err(Error::Dimension("split width differs from feature_dim".into()));
            }
            if let Some(l) = split.labels.iter().find(|&&l| l as usize >= num_classes) {
                return Err(Error::param("labels", format!("label {l} >= num_classes {num_classes}")));
            }
        }
        Ok(Dataset { feature_dim, num_classes, train, val })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of training samples, i.e. the size of the id space.
    pub fn num_samples(&self) -> usize {
        self.train.len()
    }

    pub fn num_val(&self) -> usize {
        self.val.len()
    }

    pub fn train(&self) -> &Split {
        &self.train
    }

    pub fn val(&self) -> &Split {
        &self.val
    }

    pub fn train_row(&self, i: usize) -> &[f64] {
        self.train.row(i, self.feature_dim)
    }

    pub fn train_label(&self, i: usize) -> u32 {
        self.train.labels[i]
    }

    pub fn val_row(&self, i: usize) -> &[f64] {
        self.val.row(i, self.feature_dim)
    }

    pub fn val_label(&self, i: usize) -> u32 {
        self.val.labels[i]
    }

    /// Writes `id,label,f0,..` CSV files for both splits.
    pub fn write_csv(&self, train_path: &Path, val_path: &Path) -> Result<()> {
        write_split(&self.train, self.feature_dim, train_path)?;
        write_split(&self.val, self.feature_dim, val_path)
    }

    /// Reads two `id,label,f0,..` CSV files. Rows must be ordered by id.
    /// When `num_classes` is `None` it is one more than the largest label.
    pub fn read_csv(train_path: &Path, val_path: &Path, num_classes: Option<usize>) -> Result<Self> {
        let (train, dim) = read_split(train_path)?;
        let (val, val_dim) = read_split(val_path)?;
        let dim = dim.ok_or_else(|| Error::Config(format!("{} has no rows", train_path.display())))?;
        if let Some(vd) = val_dim {
            if vd != dim {
                return Err(Error::Dimension(format!("train width {dim}, validation width {vd}")));
            }
        }
        let max_label = train.labels.iter().chain(&val.labels).copied().max().unwrap_or(0) as usize;
        Dataset::new(dim, num_classes.unwrap_or(max_label + 1), train, val)
    }
}

fn write_split(split: &Split, dim: usize, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..split.len() {
        let mut rec = vec![i.to_string(), split.labels[i].to_string()];
        rec.extend(split.row(i, dim).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_split(path: &Path) -> Result<(Split, Option<usize>)> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::Config(format!("{}: row {row}: bad {what}", path.display()));
        if rec.len() < 3 {
            return Err(bad("width"));
        }
        let id: usize = rec[0].trim().parse().map_err(|_| bad("id"))?;
        if id != row {
            return Err(bad("id order"));
        }
        labels.push(rec[1].trim().parse::<u32>().map_err(|_| bad("label"))?);
        let width = rec.len() - 2;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => return Err(bad("width")),
            _ => {}
        }
        for v in rec.iter().skip(2) {
            features.push(v.trim().parse::<f64>().map_err(|_| bad("feature"))?);
        }
    }
    let split = Split::new(features, labels, dim.unwrap_or(1))?;
    Ok((split, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let train = Split::new(vec![0.0, 1.0, 2.5, -3.0, 1e-17, 7.0], vec![0, 1, 2], 2).unwrap();
        let val = Split::new(vec![0.5, 0.25], vec![1], 2).unwrap();
        Dataset::new(2, 3, train, val).unwrap()
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let train = Split::new(vec![0.0, 1.0], vec![3], 2).unwrap();
        let val = Split::new(vec![], vec![], 2).unwrap();
        assert!(Dataset::new(2, 3, train, val.clone()).is_err());
        assert!(Split::new(vec![0.0], vec![0, 1], 2).is_err());
        let empty = Split::new(vec![], vec![], 2).unwrap();
        assert!(Dataset::new(2, 3, empty, val).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = (dir.path().join("train.csv"), dir.path().join("val.csv"));
        let d = tiny();
        d.write_csv(&t, &v).unwrap();
        let back = Dataset::read_csv(&t, &v, Some(3)).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.train_row(1), &[2.5, -3.0]);
    }
}
