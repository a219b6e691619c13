use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::simgen::{Dataset, Triplet, TripletPool};

/// Observation ids on each side of a star-level split, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub train_stars: Vec<usize>,
    pub val_stars: Vec<usize>,
}

/// Holds out `round(val_fraction * n_stars)` whole stars (at least one).
pub fn split_dataset(ds: &Dataset, val_fraction: f64, seed: u64) -> Result<Split> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let n_stars = ds.stars.len();
    let n_val =
        ((val_fraction * n_stars as f64).round() as usize).clamp(1, n_stars.saturating_sub(1));
    if n_val == 0 {
        return Err(Error::Structure("cannot split a single star".into()));
    }
    let mut stars: Vec<usize> = (0..n_stars).collect();
    stars.shuffle(&mut stream(seed, Domain::Split, 0));
    let mut val_stars = stars[..n_val].to_vec();
    let mut train_stars = stars[n_val..].to_vec();
    val_stars.sort_unstable();
    train_stars.sort_unstable();

    let gather = |side: &[usize]| {
        let mut ids: Vec<usize> = side
            .iter()
            .flat_map(|&s| ds.index_by_star[s].iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    };
    let split = Split {
        train: gather(&train_stars),
        val: gather(&val_stars),
        train_stars,
        val_stars,
    };
    for (name, ids) in [("training", &split.train), ("validation", &split.val)] {
        TripletPool::restricted(ds, ids.clone())
            .check_feasible()
            .map_err(|e| {
                Error::Structure(format!(
                    "{name} side of the split is not triplet-feasible: {e}"
                ))
            })?;
    }
    Ok(split)
}

/// Every pool member anchors exactly one triplet, in shuffled order, chunked
/// into batches of `batch_size`; a final batch with one anchor is dropped.
pub fn make_epoch_batches<R: Rng + ?Sized>(
    pool: &TripletPool<'_>,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Triplet>>> {
    if batch_size < 2 {
        return Err(Error::Config(format!(
            "batch_size must be at least 2, got {batch_size}"
        )));
    }
    let mut anchors = pool.members().to_vec();
    anchors.shuffle(rng);
    let mut batches = Vec::with_capacity(anchors.len().div_ceil(batch_size));
    for chunk in anchors.chunks(batch_size) {
        if chunk.len() < 2 {
            break;
        }
        batches.push(
            chunk
                .iter()
                .map(|&a| pool.sample(a, rng))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(batches)
}
