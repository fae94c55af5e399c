//! Reader for the UCI HAPT raw layout:
//! `RawData/acc_expEE_userUU.txt`, `RawData/gyro_expEE_userUU.txt` and
//! `RawData/labels.txt` (`exp user activity start end`, end inclusive).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{window_dataset, LabelSegment, LabeledDataset, RawRecording, Split, N_CHANNELS};
use crate::error::{Error, Result};

/// Subjects of the official HAPT test split; the remaining 21 form the training split.
pub const HAPT_TEST_SUBJECTS: [u32; 9] = [2, 4, 9, 10, 12, 13, 18, 20, 24];

/// sitting, standing, laying
pub const HAPT_STATIC_IDS: [u16; 3] = [4, 5, 6];

pub fn hapt_class_names() -> BTreeMap<u16, String> {
    [
        "WALKING",
        "WALKING_UPSTAIRS",
        "WALKING_DOWNSTAIRS",
        "SITTING",
        "STANDING",
        "LAYING",
        "STAND_TO_SIT",
        "SIT_TO_STAND",
        "SIT_TO_LIE",
        "LIE_TO_SIT",
        "STAND_TO_LIE",
        "LIE_TO_STAND",
    ]
    .iter()
    .enumerate()
    .map(|(i, n)| (i as u16 + 1, n.to_string()))
    .collect()
}

fn raw_dir(root: &Path) -> PathBuf {
    let nested = root.join("RawData");
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

fn read_rows<const N: usize>(path: &Path) -> Result<Vec<[f64; N]>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = [0.0; N];
        let mut fields = line.split_whitespace();
        for slot in row.iter_mut() {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected {N} columns"),
            })?;
            *slot = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("not a number: {tok:?}"),
            })?;
        }
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("more than {N} columns"),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_exp_user(name: &str, prefix: &str) -> Option<(u32, u32)> {
    let rest = name.strip_prefix(prefix)?.strip_suffix(".txt")?;
    let (exp, user) = rest.split_once("_user")?;
    Some((exp.parse().ok()?, user.parse().ok()?))
}

/// Loads every (experiment, user) recording found under `root`.
///
/// `root` may be the HAPT archive root or its `RawData` directory.
pub fn load_hapt(root: &Path) -> Result<Vec<RawRecording>> {
    let dir = raw_dir(root);
    let labels_path = dir.join("labels.txt");
    if !labels_path.is_file() {
        return Err(Error::MissingFile(labels_path));
    }
    let mut segments: BTreeMap<(u32, u32), Vec<LabelSegment>> = BTreeMap::new();
    for (i, row) in read_rows::<5>(&labels_path)?.into_iter().enumerate() {
        if row.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::Parse {
                path: labels_path.clone(),
                line: i + 1,
                msg: "label rows must be non-negative integers".into(),
            });
        }
        let [exp, user, act, start, end] = row.map(|v| v as u64);
        if !(1..=12).contains(&act) {
            return Err(Error::Parse {
                path: labels_path.clone(),
                line: i + 1,
                msg: format!("activity id {act} outside 1..12"),
            });
        }
        segments.entry((exp as u32, user as u32)).or_default().push(LabelSegment {
            activity_id: act as u16,
            start: start as usize,
            end: end as usize,
        });
    }

    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut keys = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if let Some(k) = entry.file_name().to_str().and_then(|n| parse_exp_user(n, "acc_exp")) {
            keys.insert(k);
        }
    }

    let mut recs = Vec::with_capacity(keys.len());
    for (exp, user) in keys {
        let acc_path = dir.join(format!("acc_exp{exp:02}_user{user:02}.txt"));
        let gyro_path = dir.join(format!("gyro_exp{exp:02}_user{user:02}.txt"));
        if !gyro_path.is_file() {
            return Err(Error::MissingFile(gyro_path));
        }
        let acc = read_rows::<3>(&acc_path)?;
        let gyro = read_rows::<3>(&gyro_path)?;
        if acc.len() != gyro.len() {
            return Err(Error::LengthMismatch { exp, user, acc: acc.len(), gyro: gyro.len() });
        }
        let samples = acc
            .iter()
            .zip(&gyro)
            .map(|(a, g)| {
                let mut row = [0.0f32; N_CHANNELS];
                for k in 0..3 {
                    row[k] = a[k] as f32;
                    row[k + 3] = g[k] as f32;
                }
                row
            })
            .collect();
        let rec = RawRecording {
            experiment_id: exp,
            user_id: user,
            samples,
            label_segments: segments.remove(&(exp, user)).unwrap_or_default(),
        };
        rec.validate()?;
        recs.push(rec);
    }
    Ok(recs)
}

/// One subject id per line; blank lines ignored.
pub fn read_split_file(path: &Path) -> Result<BTreeSet<u32>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("not a subject id: {l:?}"),
            })
        })
        .collect()
}

/// Windows the recordings into train / test datasets.
///
/// `test_subjects` defaults to [`HAPT_TEST_SUBJECTS`].
pub fn load_hapt_split(
    recs: &[RawRecording],
    window_len: usize,
    test_subjects: Option<&BTreeSet<u32>>,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let default_test: BTreeSet<u32> = HAPT_TEST_SUBJECTS.into_iter().collect();
    let test_set = test_subjects.unwrap_or(&default_test);
    let all: BTreeSet<u32> = recs.iter().map(|r| r.user_id).collect();
    let train_set: BTreeSet<u32> = all.difference(test_set).copied().collect();
    let names = hapt_class_names();
    let train = LabeledDataset::new(window_dataset(recs, window_len, &train_set), names.clone(), Split::Train)?;
    let test = LabeledDataset::new(window_dataset(recs, window_len, test_set), names, Split::Test)?;
    Ok((train, test))
}
