//! Splitting the training set across devices.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::aggregation::DeviceWeights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Training-sample indices held by each device.
    pub assignments: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_devices(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    /// `rho_k = D_k / D` over the assigned samples.
    pub fn weights(&self) -> Result<DeviceWeights> {
        DeviceWeights::from_sizes(&self.sizes())
    }
}

/// Random permutation cut into `k` parts of `floor(D / k)` samples each; the
/// remainder is left unassigned.
pub fn partition_iid<R: Rng + ?Sized>(num_samples: usize, k: usize, rng: &mut R) -> Result<Partition> {
    if k == 0 || num_samples < k {
        return Err(Error::Domain(format!("cannot split {num_samples} samples over {k} devices")));
    }
    let mut order: Vec<usize> = (0..num_samples).collect();
    order.shuffle(rng);
    let per = num_samples / k;
    let assignments = order.chunks(per).take(k).map(<[usize]>::to_vec).collect();
    Ok(Partition { assignments })
}

/// Label-sorted shards: the samples are ordered by label, cut into `k c`
/// contiguous shards of `floor(D / (k c))` (the last shard takes the
/// remainder), and each device receives `c` shards drawn without replacement.
pub fn partition_shards<R: Rng + ?Sized>(labels: &[usize], k: usize, c: usize, rng: &mut R) -> Result<Partition> {
    let shards = k.checked_mul(c).unwrap_or(usize::MAX);
    if k == 0 || c == 0 || shards > labels.len() {
        return Err(Error::Domain(format!(
            "{k} devices with {c} shards each need at least {shards} samples, have {}",
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    let size = labels.len() / shards;
    let pieces: Vec<&[usize]> = (0..shards)
        .map(|s| {
            let end = if s + 1 == shards { labels.len() } else { (s + 1) * size };
            &order[s * size..end]
        })
        .collect();
    let mut ids: Vec<usize> = (0..shards).collect();
    ids.shuffle(rng);
    let assignments = ids
        .chunks(c)
        .map(|chunk| chunk.iter().flat_map(|&s| pieces[s].iter().copied()).collect())
        .collect();
    Ok(Partition { assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn iid_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = partition_iid(10, 1, &mut rng).unwrap();
        assert_eq!(p.sizes(), vec![10]);
        let p = partition_iid(10, 2, &mut rng).unwrap();
        assert_eq!(p.sizes(), vec![5, 5]);
        let p = partition_iid(11, 3, &mut rng).unwrap();
        assert_eq!(p.sizes(), vec![3, 3, 3]);
        assert!(partition_iid(2, 3, &mut rng).is_err());
    }

    #[test]
    fn iid_label_histograms_track_the_global_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let labels: Vec<usize> = (0..6000).map(|i| i % 10).collect();
        let p = partition_iid(labels.len(), 5, &mut rng).unwrap();
        for device in &p.assignments {
            let n = device.len() as f64;
            for class in 0..10 {
                let count = device.iter().filter(|&&i| labels[i] == class).count() as f64;
                let (mean, sd) = (n * 0.1, (n * 0.1 * 0.9).sqrt());
                assert!((count - mean).abs() <= 3.0 * sd, "class {class}: {count} vs {mean}");
            }
        }
    }

    #[test]
    fn one_shard_per_device_gives_one_class_each() {
        let labels = vec![0, 1, 0, 1, 0, 1];
        let p = partition_shards(&labels, 2, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for device in &p.assignments {
            let classes: BTreeSet<usize> = device.iter().map(|&i| labels[i]).collect();
            assert_eq!(classes.len(), 1);
        }
    }

    #[test]
    fn shards_straddle_at_most_one_boundary_each() {
        let labels: Vec<usize> = (0..1003).map(|i| i % 10).collect();
        let p = partition_shards(&labels, 7, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for device in &p.assignments {
            let classes: BTreeSet<usize> = device.iter().map(|&i| labels[i]).collect();
            assert!(classes.len() <= 2 * 3);
        }
        assert!(partition_shards(&labels, 1000, 2, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint(n in 1usize..400, k in 1usize..12, c in 1usize..4, seed in 0u64..1000) {
            prop_assume!(n >= k * c);
            let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 5).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for p in [partition_iid(n, k, &mut rng).unwrap(), partition_shards(&labels, k, c, &mut rng).unwrap()] {
                prop_assert_eq!(p.num_devices(), k);
                let mut seen = BTreeSet::new();
                for device in &p.assignments {
                    prop_assert!(!device.is_empty());
                    for &i in device {
                        prop_assert!(i < n);
                        prop_assert!(seen.insert(i));
                    }
                }
            }
            let shards = partition_shards(&labels, k, c, &mut rng).unwrap();
            prop_assert_eq!(shards.sizes().iter().sum::<usize>(), n);
        }
    }
}
