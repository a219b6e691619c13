use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simgen::{Dataset, Triplet};

/// Stacked flux rows for a batch of triplets.
///
/// Rows `0..B` are anchors, `B..2B` their same-star partners and `2B..3B`
/// their same-instrument partners.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub flux: Array2<f64>,
    pub star: Vec<usize>,
    pub instrument: Vec<usize>,
    pub obs: Vec<usize>,
    pub n_anchors: usize,
    /// Per-step reconstruction mask; `None` means all ones.
    pub mask: Option<Array2<f64>>,
}

impl TripletBatch {
    pub fn from_triplets(ds: &Dataset, triplets: &[Triplet]) -> Result<Self> {
        if triplets.is_empty() {
            return Err(Error::Structure("empty triplet batch".into()));
        }
        let order: Vec<usize> = (0..3)
            .flat_map(|slot| triplets.iter().map(move |t| t.members()[slot]))
            .collect();
        let t_steps = ds.t_steps();
        let mut flux = Array2::zeros((order.len(), t_steps));
        for (row, &o) in order.iter().enumerate() {
            let lc = ds
                .observations
                .get(o)
                .ok_or_else(|| Error::Structure(format!("observation {o} out of range")))?;
            flux.row_mut(row)
                .assign(&ndarray::ArrayView1::from(&lc.flux[..]));
        }
        Ok(Self {
            flux,
            star: order.iter().map(|&o| ds.star_of(o)).collect(),
            instrument: order.iter().map(|&o| ds.instrument_of(o)).collect(),
            obs: order,
            n_anchors: triplets.len(),
            mask: None,
        })
    }

    /// Anchor and same-star rows only.
    pub fn pairs(&self) -> Self {
        let n = 2 * self.n_anchors;
        Self {
            flux: self.flux.slice(ndarray::s![..n, ..]).to_owned(),
            star: self.star[..n].to_vec(),
            instrument: self.instrument[..n].to_vec(),
            obs: self.obs[..n].to_vec(),
            n_anchors: self.n_anchors,
            mask: self
                .mask
                .as_ref()
                .map(|m| m.slice(ndarray::s![..n, ..]).to_owned()),
        }
    }

    pub fn rows(&self) -> usize {
        self.flux.nrows()
    }
}
