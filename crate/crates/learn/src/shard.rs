//! Label-sorted non-IID sharding.

use rand::seq::SliceRandom;

use crate::error::{config, Result};
use crate::idx::Dataset;

const STREAM_SHARDS: u64 = 0x5A;

#[derive(Debug, Clone, PartialEq)]
pub struct ShardedDataset {
    /// Dataset indices per shard.
    pub shards: Vec<Vec<usize>>,
    /// Shard ids per device.
    pub assignment: Vec<Vec<usize>>,
}

impl ShardedDataset {
    pub fn num_devices(&self) -> usize {
        self.assignment.len()
    }

    /// Every dataset index held by `device`, in shard order.
    pub fn device_indices(&self, device: usize) -> Vec<usize> {
        self.assignment[device]
            .iter()
            .flat_map(|&s| self.shards[s].iter().copied())
            .collect()
    }

    pub fn device_samples(&self, device: usize) -> usize {
        self.assignment[device].iter().map(|&s| self.shards[s].len()).sum()
    }
}

/// Stable-sorts by label, slices consecutive shards and hands each device
/// one distinct shard drawn with `seed`.
pub fn shard_non_iid(
    dataset: &Dataset,
    num_shards: usize,
    shard_size: usize,
    devices: usize,
    seed: u64,
) -> Result<ShardedDataset> {
    if num_shards == 0 || shard_size == 0 {
        return Err(config("num_shards", "shard count and size must be positive"));
    }
    if num_shards * shard_size > dataset.len() {
        return Err(config(
            "num_shards",
            format!("{num_shards} x {shard_size} exceeds {} samples", dataset.len()),
        ));
    }
    if devices > num_shards {
        return Err(config("devices", format!("{devices} devices but only {num_shards} shards")));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by_key(|&i| dataset.labels[i]);
    let shards: Vec<Vec<usize>> = order
        .chunks(shard_size)
        .take(num_shards)
        .map(<[usize]>::to_vec)
        .collect();
    let mut ids: Vec<usize> = (0..num_shards).collect();
    ids.shuffle(&mut dsfl_core::rng::stream(seed, &[STREAM_SHARDS]));
    let assignment = ids.into_iter().take(devices).map(|s| vec![s]).collect();
    Ok(ShardedDataset { shards, assignment })
}

/// One shard per device, each a contiguous slice of a seeded shuffle (IID).
pub fn shard_iid(dataset: &Dataset, shard_size: usize, devices: usize, seed: u64) -> Result<ShardedDataset> {
    if shard_size == 0 || devices * shard_size > dataset.len() {
        return Err(config("shard_size", "devices x shard_size must fit in the dataset"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut dsfl_core::rng::stream(seed, &[STREAM_SHARDS, 1]));
    let shards: Vec<Vec<usize>> = order.chunks(shard_size).take(devices).map(<[usize]>::to_vec).collect();
    Ok(ShardedDataset {
        shards,
        assignment: (0..devices).map(|d| vec![d]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        Dataset {
            rows: 1,
            cols: 1,
            pixels: (0..n).map(|i| i as f32).collect(),
            labels: (0..n).map(|i| ((i * 7) % 10) as u8).collect(),
        }
    }

    #[test]
    fn shards_are_sorted_disjoint_slices() {
        let ds = toy(1000);
        let sh = shard_non_iid(&ds, 20, 50, 5, 3).unwrap();
        assert_eq!(sh.shards.len(), 20);
        let mut all: Vec<usize> = sh.shards.concat();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 1000);
        for s in &sh.shards {
            let mut labels: Vec<u8> = s.iter().map(|&i| ds.labels[i]).collect();
            labels.dedup();
            assert!(labels.len() <= 2);
        }
        let mut given: Vec<usize> = sh.assignment.concat();
        given.sort_unstable();
        given.dedup();
        assert_eq!(given.len(), 5);
        assert_eq!(sh, shard_non_iid(&ds, 20, 50, 5, 3).unwrap());
        assert_ne!(sh.assignment, shard_non_iid(&ds, 20, 50, 5, 4).unwrap().assignment);
    }

    #[test]
    fn rejects_oversubscription() {
        let ds = toy(100);
        assert!(shard_non_iid(&ds, 10, 10, 11, 0).is_err());
        assert!(shard_non_iid(&ds, 11, 10, 1, 0).is_err());
        assert!(shard_iid(&ds, 10, 11, 0).is_err());
    }
}
