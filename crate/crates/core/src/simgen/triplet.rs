use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// `(anchor, same star under another instrument, same instrument on another star)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub same_star: usize,
    pub same_inst: usize,
}

impl Triplet {
    pub fn members(&self) -> [usize; 3] {
        [self.anchor, self.same_star, self.same_inst]
    }

    pub fn check(&self, ds: &Dataset) -> Result<()> {
        let (a, p, q) = (self.anchor, self.same_star, self.same_inst);
        let ok = ds.star_of(a) == ds.star_of(p)
            && ds.instrument_of(a) != ds.instrument_of(p)
            && ds.instrument_of(a) == ds.instrument_of(q)
            && ds.star_of(a) != ds.star_of(q)
            && a != p
            && a != q
            && p != q;
        if ok {
            Ok(())
        } else {
            Err(Error::Structure(format!("invalid triplet {self:?}")))
        }
    }
}

fn same_star_candidates(ds: &Dataset, by_star: &[Vec<usize>], anchor: usize) -> Vec<usize> {
    let inst = ds.instrument_of(anchor);
    by_star[ds.star_of(anchor)]
        .iter()
        .copied()
        .filter(|&o| ds.instrument_of(o) != inst)
        .collect()
}

fn same_inst_candidates(ds: &Dataset, by_inst: &[Vec<usize>], anchor: usize) -> Vec<usize> {
    let star = ds.star_of(anchor);
    by_inst[ds.instrument_of(anchor)]
        .iter()
        .copied()
        .filter(|&o| ds.star_of(o) != star)
        .collect()
}

fn sample_with<R: Rng + ?Sized>(
    ds: &Dataset,
    by_star: &[Vec<usize>],
    by_inst: &[Vec<usize>],
    anchor: usize,
    rng: &mut R,
) -> Result<Triplet> {
    let stars = same_star_candidates(ds, by_star, anchor);
    if stars.is_empty() {
        return Err(Error::Structure(format!(
            "observation {anchor}: no observation of star {} under another instrument",
            ds.star_of(anchor)
        )));
    }
    let insts = same_inst_candidates(ds, by_inst, anchor);
    if insts.is_empty() {
        return Err(Error::Structure(format!(
            "observation {anchor}: instrument {} observes no other star",
            ds.instrument_of(anchor)
        )));
    }
    Ok(Triplet {
        anchor,
        same_star: stars[rng.random_range(0..stars.len())],
        same_inst: insts[rng.random_range(0..insts.len())],
    })
}

/// Draws a triplet for `anchor` over the whole dataset.
pub fn sample_triplet<R: Rng + ?Sized>(
    ds: &Dataset,
    anchor: usize,
    rng: &mut R,
) -> Result<Triplet> {
    if anchor >= ds.len() {
        return Err(Error::Structure(format!("anchor {anchor} out of range")));
    }
    sample_with(ds, &ds.index_by_star, &ds.index_by_instrument, anchor, rng)
}

/// A subset of observations that samples triplets only among its own members.
#[derive(Debug, Clone)]
pub struct TripletPool<'a> {
    dataset: &'a Dataset,
    members: Vec<usize>,
    by_star: Vec<Vec<usize>>,
    by_instrument: Vec<Vec<usize>>,
}

impl<'a> TripletPool<'a> {
    pub fn full(dataset: &'a Dataset) -> Self {
        Self::restricted(dataset, (0..dataset.len()).collect())
    }

    pub fn restricted(dataset: &'a Dataset, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut by_star = vec![Vec::new(); dataset.stars.len()];
        let mut by_instrument = vec![Vec::new(); dataset.instruments.len()];
        for &o in &members {
            by_star[dataset.star_of(o)].push(o);
            by_instrument[dataset.instrument_of(o)].push(o);
        }
        Self {
            dataset,
            members,
            by_star,
            by_instrument,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Ok when every member can anchor a triplet inside the pool.
    pub fn check_feasible(&self) -> Result<()> {
        for &o in &self.members {
            if same_star_candidates(self.dataset, &self.by_star, o).is_empty()
                || same_inst_candidates(self.dataset, &self.by_instrument, o).is_empty()
            {
                return Err(Error::Structure(format!(
                    "observation {o} cannot anchor a triplet in this pool"
                )));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, anchor: usize, rng: &mut R) -> Result<Triplet> {
        if self.members.binary_search(&anchor).is_err() {
            return Err(Error::Structure(format!(
                "anchor {anchor} is not in this pool"
            )));
        }
        sample_with(
            self.dataset,
            &self.by_star,
            &self.by_instrument,
            anchor,
            rng,
        )
    }
}
