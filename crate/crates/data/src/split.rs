//! Dataset partitioning: the OOD profile goes exclusively to test, a small
//! stratified fraction of the rest is labeled for fine-tuning, and the bulk
//! becomes the unlabeled pretraining pool.

use std::collections::BTreeMap;

use tsfm_core::Rng;

use crate::window::{Window, WindowDataset};
use crate::DataError;

/// The three dataset roles. Pretrain windows keep their ground-truth label
/// field for in-distribution evaluation, but pretraining never reads it.
#[derive(Debug, Clone)]
pub struct Splits {
    pub pretrain: WindowDataset,
    pub finetune: WindowDataset,
    pub test: WindowDataset,
}

/// Partition deterministically under `seed`.
///
/// - every window of `ood_profile` goes to `test`;
/// - of the remaining windows, round(labeled_frac * n) are selected for
///   `finetune`, stratified over levels by largest-remainder apportionment;
/// - everything else lands in `pretrain`. No window appears twice.
pub fn split(
    dataset: &WindowDataset,
    ood_profile: &str,
    labeled_frac: f64,
    seed: u64,
) -> Result<Splits, DataError> {
    if !(0.0..=1.0).contains(&labeled_frac) {
        return Err(DataError::Config(format!("labeled_frac {labeled_frac} not in [0,1]")));
    }
    let mut test = WindowDataset::new(dataset.channels.clone(), dataset.window_len);
    let mut rest_idx: Vec<usize> = Vec::new();
    for (i, w) in dataset.windows.iter().enumerate() {
        if w.profile == ood_profile {
            test.windows.push(w.clone());
        } else {
            rest_idx.push(i);
        }
    }
    if rest_idx.is_empty() {
        return Err(DataError::Data("no windows outside the OOD profile".into()));
    }

    // Group the in-distribution windows by level.
    let mut by_level: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &rest_idx {
        let level = dataset.windows[i].label.ok_or_else(|| {
            DataError::Data("stratified labeling needs level annotations on all windows".into())
        })?;
        by_level.entry(level).or_default().push(i);
    }

    let n_labeled = (labeled_frac * rest_idx.len() as f64).round() as usize;
    // Largest-remainder apportionment of the labeled budget over levels.
    let mut quotas: Vec<(usize, usize, f64)> = by_level
        .iter()
        .map(|(&level, idxs)| {
            let exact = n_labeled as f64 * idxs.len() as f64 / rest_idx.len() as f64;
            (level, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|&(_, q, _)| q).sum();
    let mut leftover = n_labeled.saturating_sub(assigned);
    quotas.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    for q in quotas.iter_mut() {
        if leftover == 0 {
            break;
        }
        q.1 += 1;
        leftover -= 1;
    }
    quotas.sort_by_key(|&(level, _, _)| level);

    let mut rng = Rng::new(seed);
    let mut finetune = WindowDataset::new(dataset.channels.clone(), dataset.window_len);
    let mut pretrain = WindowDataset::new(dataset.channels.clone(), dataset.window_len);
    for (level, quota, _) in quotas {
        let idxs = &by_level[&level];
        if quota == 0 || quota > idxs.len() {
            return Err(DataError::Data(format!(
                "labeled_frac {labeled_frac} yields {quota} labeled windows for level {level} \
                 (available: {})",
                idxs.len()
            )));
        }
        let mut shuffled = idxs.clone();
        rng.shuffle(&mut shuffled);
        for (pos, &i) in shuffled.iter().enumerate() {
            let w: &Window = &dataset.windows[i];
            if pos < quota {
                finetune.windows.push(w.clone());
            } else {
                pretrain.windows.push(w.clone());
            }
        }
    }
    Ok(Splits { pretrain, finetune, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_dataset(n_per_level_profile: usize, profiles: &[&str], levels: usize) -> WindowDataset {
        let mut ds = WindowDataset::new(vec!["x".into()], 4);
        for profile in profiles {
            for level in 0..levels {
                for i in 0..n_per_level_profile {
                    ds.windows.push(Window {
                        data: vec![i as f32; 4],
                        label: Some(level),
                        profile: profile.to_string(),
                    });
                }
            }
        }
        ds
    }

    #[test]
    fn table_arithmetic_180_labeled_45_per_level() {
        // 10000 non-OOD windows, frac 0.018, balanced levels: 180 labeled,
        // 45 per level.
        let ds = synthetic_dataset(625, &["a", "b", "c", "d", "ood"], 4); // 4 profiles * 4 * 625 = 10000 non-OOD
        let s = split(&ds, "ood", 0.018, 7).unwrap();
        assert_eq!(s.finetune.len(), 180);
        for level in 0..4 {
            let n = s.finetune.windows.iter().filter(|w| w.label == Some(level)).count();
            assert_eq!(n, 45);
        }
        assert_eq!(s.pretrain.len(), 10000 - 180);
        assert_eq!(s.test.len(), 4 * 625);
    }

    #[test]
    fn ood_windows_never_in_training() {
        let ds = synthetic_dataset(10, &["a", "ood"], 4);
        let s = split(&ds, "ood", 0.1, 1).unwrap();
        assert!(s.pretrain.windows.iter().all(|w| w.profile != "ood"));
        assert!(s.finetune.windows.iter().all(|w| w.profile != "ood"));
        assert!(s.test.windows.iter().all(|w| w.profile == "ood"));
        assert_eq!(s.pretrain.len() + s.finetune.len() + s.test.len(), ds.len());
    }

    #[test]
    fn full_labeling_leaves_no_pretrain_windows() {
        let ds = synthetic_dataset(8, &["a", "b", "ood"], 2);
        let s = split(&ds, "ood", 1.0, 3).unwrap();
        assert_eq!(s.pretrain.len(), 0);
        assert_eq!(s.finetune.len(), 2 * 2 * 8);
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = synthetic_dataset(50, &["a", "b", "ood"], 4);
        let pick = |seed| {
            split(&ds, "ood", 0.1, seed)
                .unwrap()
                .finetune
                .windows
                .iter()
                .map(|w| (w.data[0] as usize, w.label.unwrap()))
                .collect::<Vec<_>>()
        };
        assert_eq!(pick(9), pick(9));
        assert_ne!(pick(9), pick(10));
    }

    #[test]
    fn starved_class_is_data_error() {
        let ds = synthetic_dataset(100, &["a", "ood"], 4);
        let err = split(&ds, "ood", 0.001, 1).unwrap_err();
        assert!(err.to_string().contains("level"), "{err}");
    }
}
