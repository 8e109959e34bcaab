use super::encode::EncodedSample;
use super::io::RawRecord;
use crate::error::{Error, Result};
use crate::math::Rng;

pub trait Labeled {
    fn label(&self) -> u8;
}

impl Labeled for EncodedSample {
    fn label(&self) -> u8 {
        self.label
    }
}

impl Labeled for RawRecord {
    fn label(&self) -> u8 {
        self.label
    }
}

/// Keeps every positive and a uniform subset of negatives so that the
/// positive ratio lands on `target_pos_ratio`. Input order is preserved.
/// If the ratio already meets the target the data is returned unchanged.
pub fn downsample_negatives<T: Labeled + Clone>(
    dataset: &[T],
    target_pos_ratio: f64,
    rng: &mut Rng,
) -> Result<Vec<T>> {
    if !(target_pos_ratio > 0.0 && target_pos_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "target positive ratio must be in (0, 1), got {target_pos_ratio}"
        )));
    }
    let neg: Vec<usize> = (0..dataset.len()).filter(|&i| dataset[i].label() == 0).collect();
    let pos = dataset.len() - neg.len();
    if pos == 0 || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    if pos as f64 / dataset.len() as f64 >= target_pos_ratio {
        return Ok(dataset.to_vec());
    }
    let wanted = ((pos as f64) * (1.0 - target_pos_ratio) / target_pos_ratio).round() as usize;
    let wanted = wanted.min(neg.len());

    let mut keep = vec![false; dataset.len()];
    // partial Fisher-Yates over the negative positions
    let mut pool = neg;
    for i in 0..wanted {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
        keep[pool[i]] = true;
    }
    Ok(dataset
        .iter()
        .enumerate()
        .filter(|(i, s)| s.label() == 1 || keep[*i])
        .map(|(_, s)| s.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Seeded random assignment; each part keeps input order.
    Random,
    /// Leading `fraction` for training, the tail for test.
    Sequential,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMode::Random),
            "sequential" => Ok(SplitMode::Sequential),
            other => Err(Error::invalid(format!("unknown split mode `{other}`"))),
        }
    }
}

/// Partitions `dataset` into `(train, test)` with `round(fraction * len)`
/// training items, clamped so both parts are non-empty.
pub fn split<T: Clone>(
    dataset: &[T],
    fraction: f64,
    rng: &mut Rng,
    mode: SplitMode,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    if dataset.len() < 2 {
        return Err(Error::invalid("split needs at least 2 samples"));
    }
    let n = dataset.len();
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    match mode {
        SplitMode::Sequential => Ok((dataset[..n_train].to_vec(), dataset[n_train..].to_vec())),
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let mut in_train = vec![false; n];
            for &i in &order[..n_train] {
                in_train[i] = true;
            }
            let mut train = Vec::with_capacity(n_train);
            let mut test = Vec::with_capacity(n - n_train);
            for (i, s) in dataset.iter().enumerate() {
                if in_train[i] {
                    train.push(s.clone());
                } else {
                    test.push(s.clone());
                }
            }
            Ok((train, test))
        }
    }
}

/// A mini-batch of borrowed samples.
#[derive(Debug, Clone)]
pub struct Batch<'a, T> {
    pub samples: Vec<&'a T>,
}

impl<T> Batch<'_, T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub struct BatchIter<'a, T> {
    data: &'a [T],
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl<'a, T> Iterator for BatchIter<'a, T> {
    type Item = Batch<'a, T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let samples = self.order[self.pos..end].iter().map(|&i| &self.data[i]).collect();
        self.pos = end;
        Some(Batch { samples })
    }
}

/// One epoch of mini-batches. Every sample appears exactly once; the final
/// batch may be short.
pub fn batch_iter<'a, T>(
    dataset: &'a [T],
    batch_size: usize,
    shuffle: bool,
    rng: &mut Rng,
) -> Result<BatchIter<'a, T>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    Ok(BatchIter {
        data: dataset,
        order,
        batch_size,
        pos: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(pos: usize, neg: usize) -> Vec<EncodedSample> {
        let mut v: Vec<EncodedSample> = (0..pos).map(|i| EncodedSample::new(vec![i, 0], 1)).collect();
        v.extend((0..neg).map(|i| EncodedSample::new(vec![i, 1], 0)));
        v
    }

    fn ratio(v: &[EncodedSample]) -> f64 {
        v.iter().filter(|s| s.label == 1).count() as f64 / v.len() as f64
    }

    #[test]
    fn downsample_to_half() {
        let data = labeled(100, 900);
        let out = downsample_negatives(&data, 0.5, &mut Rng::new(1)).unwrap();
        // counting oracle
        let pos = out.iter().filter(|s| s.label == 1).count();
        let neg = out.len() - pos;
        assert_eq!(pos, 100);
        assert!((ratio(&out) - 0.5).abs() <= 0.02, "{neg}");
    }

    #[test]
    fn downsample_noop_when_ratio_met() {
        let data = labeled(60, 40);
        let out = downsample_negatives(&data, 0.3, &mut Rng::new(1)).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn downsample_deterministic_and_single_class_error() {
        let data = labeled(10, 200);
        let a = downsample_negatives(&data, 0.4, &mut Rng::new(5)).unwrap();
        let b = downsample_negatives(&data, 0.4, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            downsample_negatives(&labeled(0, 5), 0.5, &mut Rng::new(0)),
            Err(Error::SingleClass)
        ));
        assert!(downsample_negatives(&data, 1.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn sequential_split() {
        let data: Vec<usize> = (0..10).collect();
        let (train, test) = split(&data, 0.8, &mut Rng::new(0), SplitMode::Sequential).unwrap();
        assert_eq!(train, (0..8).collect::<Vec<_>>());
        assert_eq!(test, vec![8, 9]);
    }

    #[test]
    fn random_split_is_seeded_partition() {
        let data: Vec<usize> = (0..50).collect();
        let a = split(&data, 0.7, &mut Rng::new(3), SplitMode::Random).unwrap();
        let b = split(&data, 0.7, &mut Rng::new(3), SplitMode::Random).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, data);
        assert_eq!(a.0.len(), 35);
    }

    #[test]
    fn split_errors() {
        assert!(split(&[1, 2, 3], 0.0, &mut Rng::new(0), SplitMode::Random).is_err());
        assert!(split(&[1, 2, 3], 1.0, &mut Rng::new(0), SplitMode::Random).is_err());
        assert!(split(&[1], 0.5, &mut Rng::new(0), SplitMode::Random).is_err());
    }

    #[test]
    fn batch_sizes() {
        let data: Vec<usize> = (0..10).collect();
        let sizes: Vec<usize> = batch_iter(&data, 3, false, &mut Rng::new(0))
            .unwrap()
            .map(|b| b.len())
            .collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        let flat: Vec<usize> = batch_iter(&data, 4, false, &mut Rng::new(0))
            .unwrap()
            .flat_map(|b| b.samples.into_iter().copied())
            .collect();
        assert_eq!(flat, data);
        assert!(batch_iter(&data, 0, false, &mut Rng::new(0)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shuffled_batches_are_a_permutation(n in 0usize..200, bs in 1usize..17, seed: u64) {
            let data: Vec<usize> = (0..n).collect();
            let mut flat: Vec<usize> = batch_iter(&data, bs, true, &mut Rng::new(seed))
                .unwrap()
                .flat_map(|b| b.samples.into_iter().copied())
                .collect();
            flat.sort_unstable();
            proptest::prop_assert_eq!(flat, data);
        }

        #[test]
        fn downsampling_keeps_every_positive(pos in 1usize..50, neg in 1usize..400, t in 0.05f64..0.95, seed: u64) {
            let data = labeled(pos, neg);
            let out = downsample_negatives(&data, t, &mut Rng::new(seed)).unwrap();
            proptest::prop_assert_eq!(out.iter().filter(|s| s.label == 1).count(), pos);
        }
    }
}
