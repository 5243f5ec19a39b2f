use super::{Universe, UniverseTag};
use crate::error::{Error, Result};

/// Empirical pmf of the demand counts observed at each arm, smoothed so no
/// cell falls below `floor`.
pub fn empirical_likelihood(samples: &[Vec<u32>], n: u32, floor: f64) -> Result<Universe> {
    if samples.is_empty() {
        return Err(Error::Construction("no arms sampled".into()));
    }
    let width = n as usize + 1;
    let mut rows = Vec::with_capacity(samples.len());
    for (k, draws) in samples.iter().enumerate() {
        if draws.is_empty() {
            return Err(Error::Construction(format!("arm {} has no samples", k + 1)));
        }
        let mut row = vec![0.0; width];
        for &d in draws {
            if d > n {
                return Err(Error::Construction(format!(
                    "demand {d} at arm {} exceeds batch size {n}",
                    k + 1
                )));
            }
            row[d as usize] += 1.0;
        }
        rows.push(row);
    }
    Universe::from_rows(UniverseTag::Perceived, rows, n, floor)
}

/// Arm visiting order of an exploration sweep building `l_p` universes from
/// `n` passes each: universe-major, then passes, with arms innermost.
pub fn initiator_schedule(l_p: usize, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(l_p * n * k);
    for _ in 0..l_p {
        for _ in 0..n {
            out.extend(0..k);
        }
    }
    out
}

/// Incremental exploration sweep: hands out arms one round at a time and
/// emits a perceived universe whenever its `n` passes over the grid are
/// complete.
#[derive(Debug, Clone)]
pub struct InitiatorRun {
    l_p: usize,
    n_rep: usize,
    k: usize,
    batch: u32,
    floor: f64,
    step: usize,
    samples: Vec<Vec<u32>>,
}

impl InitiatorRun {
    pub fn new(l_p: usize, n_rep: usize, k: usize, batch: u32, floor: f64) -> Result<Self> {
        if l_p == 0 || n_rep == 0 || k == 0 {
            return Err(Error::config(
                "initiator needs at least one universe, one pass and one arm",
            ));
        }
        Ok(Self {
            l_p,
            n_rep,
            k,
            batch,
            floor,
            step: 0,
            samples: vec![Vec::with_capacity(n_rep); k],
        })
    }

    pub fn total_rounds(&self) -> usize {
        self.l_p * self.n_rep * self.k
    }

    pub fn rounds_done(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_rounds()
    }

    /// Arm to offer next, or `None` once the sweep is over.
    pub fn next_arm(&self) -> Option<usize> {
        (!self.is_done()).then(|| self.step % self.k)
    }

    /// Records the demand seen at the arm returned by [`next_arm`].
    /// Returns a finished universe when this round closes one.
    ///
    /// [`next_arm`]: InitiatorRun::next_arm
    pub fn record(&mut self, arm: usize, demand: u32) -> Result<Option<Universe>> {
        let expected = self
            .next_arm()
            .ok_or_else(|| Error::Runtime("initiator sweep already finished".into()))?;
        if arm != expected {
            return Err(Error::Runtime(format!(
                "initiator expected arm {} but got {}",
                expected + 1,
                arm + 1
            )));
        }
        self.samples[arm].push(demand);
        self.step += 1;
        if self.step % (self.n_rep * self.k) == 0 {
            let u = empirical_likelihood(&self.samples, self.batch, self.floor)?;
            for s in &mut self.samples {
                s.clear();
            }
            return Ok(Some(u));
        }
        Ok(None)
    }
}

/// Runs a whole sweep against `sampler` (arm index → demand) and returns
/// the perceived universes along with every `(arm, demand)` consumed.
pub fn initiator<F>(
    l_p: usize,
    n_rep: usize,
    k: usize,
    batch: u32,
    floor: f64,
    mut sampler: F,
) -> Result<(Vec<Universe>, Vec<(usize, u32)>)>
where
    F: FnMut(usize) -> Result<u32>,
{
    let mut run = InitiatorRun::new(l_p, n_rep, k, batch, floor)?;
    let mut universes = Vec::with_capacity(l_p);
    let mut log = Vec::with_capacity(run.total_rounds());
    while let Some(arm) = run.next_arm() {
        let d = sampler(arm)?;
        log.push((arm, d));
        if let Some(u) = run.record(arm, d)? {
            universes.push(u);
        }
    }
    Ok((universes, log))
}
