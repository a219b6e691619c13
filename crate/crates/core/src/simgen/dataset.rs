use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::signal::{observe, sample_instrument, sample_phases, sample_star};
use super::{InstrumentParams, LightCurve, SimConfig, StellarParams};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

const MAX_REPAIR_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: SimConfig,
    pub stars: Vec<StellarParams>,
    pub instruments: Vec<InstrumentParams>,
    pub observations: Vec<LightCurve>,
    /// `index_by_star[s]` lists the observation ids of star `s`, ascending.
    pub index_by_star: Vec<Vec<usize>>,
    pub index_by_instrument: Vec<Vec<usize>>,
}

impl Dataset {
    /// Assembles a dataset from parts, rebuilding the indexes and checking every invariant.
    pub fn from_parts(
        config: SimConfig,
        stars: Vec<StellarParams>,
        instruments: Vec<InstrumentParams>,
        observations: Vec<LightCurve>,
    ) -> Result<Self> {
        let (index_by_star, index_by_instrument) =
            build_indexes(&observations, stars.len(), instruments.len())?;
        let ds = Self {
            config,
            stars,
            instruments,
            observations,
            index_by_star,
            index_by_instrument,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn t_steps(&self) -> usize {
        self.config.t_steps
    }

    pub fn star_of(&self, obs: usize) -> usize {
        self.observations[obs].star_id
    }

    pub fn instrument_of(&self, obs: usize) -> usize {
        self.observations[obs].instrument_id
    }

    /// Log-period of the star behind an observation; the downstream regression target.
    pub fn log_period_of(&self, obs: usize) -> f64 {
        self.stars[self.star_of(obs)].log_period()
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let bad = |msg: String| Err(Error::Structure(msg));
        if self.observations.len() != c.n_obs
            || self.stars.len() != c.n_stars
            || self.instruments.len() != c.n_instruments
        {
            return bad("object counts disagree with the configuration".into());
        }
        for (i, s) in self.stars.iter().enumerate() {
            if s.star_id != i || s.theta.len() != c.k_params {
                return bad(format!("star {i} malformed"));
            }
        }
        for (i, m) in self.instruments.iter().enumerate() {
            if m.instrument_id != i || m.beta.len() != c.m_terms || m.gamma.len() != c.m_terms {
                return bad(format!("instrument {i} malformed"));
            }
        }
        for (i, o) in self.observations.iter().enumerate() {
            if o.obs_id != i
                || o.flux.len() != c.t_steps
                || o.times.len() != c.t_steps
                || o.phases.len() != c.k_params - 1
            {
                return bad(format!("observation {i} malformed"));
            }
        }
        let (by_star, by_inst) =
            build_indexes(&self.observations, self.stars.len(), self.instruments.len())?;
        if by_star != self.index_by_star || by_inst != self.index_by_instrument {
            return bad("indexes inconsistent with observations".into());
        }
        for (s, obs) in by_star.iter().enumerate() {
            let distinct: BTreeSet<usize> = obs.iter().map(|&o| self.instrument_of(o)).collect();
            if obs.len() < 2 || distinct.len() < 2 {
                return bad(format!("star {s} is not seen by two distinct instruments"));
            }
        }
        for (m, obs) in by_inst.iter().enumerate() {
            let distinct: BTreeSet<usize> = obs.iter().map(|&o| self.star_of(o)).collect();
            if distinct.len() < 2 {
                return bad(format!(
                    "instrument {m} does not observe two distinct stars"
                ));
            }
        }
        Ok(())
    }
}

/// Observation ids grouped by star and by instrument.
type Indexes = (Vec<Vec<usize>>, Vec<Vec<usize>>);

fn build_indexes(
    observations: &[LightCurve],
    n_stars: usize,
    n_instruments: usize,
) -> Result<Indexes> {
    let mut by_star = vec![Vec::new(); n_stars];
    let mut by_inst = vec![Vec::new(); n_instruments];
    for o in observations {
        if o.star_id >= n_stars || o.instrument_id >= n_instruments {
            return Err(Error::Structure(format!(
                "observation {} references an unknown id",
                o.obs_id
            )));
        }
        by_star[o.star_id].push(o.obs_id);
        by_inst[o.instrument_id].push(o.obs_id);
    }
    Ok((by_star, by_inst))
}

/// Generates a full dataset. The output is a pure function of `config`
/// (including its seed) regardless of the rayon worker count.
pub fn build_dataset(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    if config.n_obs / config.n_stars < 2 {
        return Err(Error::Structure(format!(
            "{} observations of {} stars leave fewer than 2 per star",
            config.n_obs, config.n_stars
        )));
    }
    if config.n_instruments < 2 || config.n_stars < 2 {
        return Err(Error::Structure(
            "need at least 2 stars and 2 instruments".into(),
        ));
    }
    if config.n_obs < 2 * config.n_instruments {
        return Err(Error::Structure(format!(
            "{} observations cannot give each of {} instruments two stars",
            config.n_obs, config.n_instruments
        )));
    }

    let seed = config.seed;
    let stars: Vec<StellarParams> = (0..config.n_stars)
        .map(|s| sample_star(&mut stream(seed, Domain::Star, s as u64), s, config))
        .collect();
    let instruments: Vec<InstrumentParams> = (0..config.n_instruments)
        .map(|m| sample_instrument(&mut stream(seed, Domain::Instrument, m as u64), m, config))
        .collect();

    let star_of: Vec<usize> = (0..config.n_obs).map(|n| n % config.n_stars).collect();
    let instrument_of =
        assign_instruments(&star_of, config, &mut stream(seed, Domain::Assignment, 0))?;

    let observations = (0..config.n_obs)
        .into_par_iter()
        .map(|n| {
            let mut rng = stream(seed, Domain::Observation, n as u64);
            let phases = sample_phases(&mut rng, config);
            observe(
                n,
                &stars[star_of[n]],
                &instruments[instrument_of[n]],
                phases,
                &mut rng,
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Dataset::from_parts(config.clone(), stars, instruments, observations)
}

/// Uniform instrument draw per observation, followed by repair passes until
/// every star has two instruments and every instrument has two stars.
fn assign_instruments(
    star_of: &[usize],
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let n_inst = config.n_instruments;
    let mut inst: Vec<usize> = star_of
        .iter()
        .map(|_| rng.random_range(0..n_inst))
        .collect();
    let mut obs_of_star = vec![Vec::new(); config.n_stars];
    for (n, &s) in star_of.iter().enumerate() {
        obs_of_star[s].push(n);
    }

    for _ in 0..MAX_REPAIR_ROUNDS {
        let mut clean = true;
        for obs in &obs_of_star {
            let first = inst[obs[0]];
            if obs.iter().all(|&n| inst[n] == first) {
                clean = false;
                for &n in obs {
                    inst[n] = rng.random_range(0..n_inst);
                }
            }
        }
        let mut stars_of_inst = vec![BTreeSet::new(); n_inst];
        let mut count_of_inst = vec![0usize; n_inst];
        for (n, &m) in inst.iter().enumerate() {
            stars_of_inst[m].insert(star_of[n]);
            count_of_inst[m] += 1;
        }
        for m in 0..n_inst {
            if stars_of_inst[m].len() >= 2 {
                continue;
            }
            clean = false;
            // Borrow an observation from a well-populated instrument, of a star not yet seen by `m`.
            let donors: Vec<usize> = (0..inst.len())
                .filter(|&n| count_of_inst[inst[n]] >= 3 && !stars_of_inst[m].contains(&star_of[n]))
                .collect();
            if donors.is_empty() {
                break;
            }
            let n = donors[rng.random_range(0..donors.len())];
            count_of_inst[inst[n]] -= 1;
            count_of_inst[m] += 1;
            stars_of_inst[m].insert(star_of[n]);
            inst[n] = m;
        }
        if clean {
            return Ok(inst);
        }
    }
    Err(Error::Structure(format!(
        "could not assign instruments satisfying the triplet structure after {MAX_REPAIR_ROUNDS} rounds"
    )))
}
