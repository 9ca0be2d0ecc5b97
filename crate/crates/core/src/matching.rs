//! Pairing of primary and secondary links by minimum-weight bipartite
//! matching over per-pair minimal WSP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{QosReq, ResourceGrid, Weights};
use crate::newton::{self, NewtonConfig};
use crate::sim::{uniform_in_disk, PathLoss, Point, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryLink {
    pub pt: Point,
    pub pr: Point,
    pub q_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondaryLink {
    pub st: Point,
    pub sr: Point,
    pub q_s: f64,
}

/// Settings shared by every candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingEnv {
    pub path_loss: PathLoss,
    pub weights: Weights,
    pub grid: ResourceGrid,
    pub newton: NewtonConfig,
}

/// Links with both ends uniform in a disk, all with the same QoS targets.
pub fn random_links(
    primaries: usize,
    secondaries: usize,
    radius: f64,
    qos: QosReq,
    seed: u64,
) -> (Vec<PrimaryLink>, Vec<SecondaryLink>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..primaries)
        .map(|_| PrimaryLink {
            pt: uniform_in_disk(radius, &mut rng),
            pr: uniform_in_disk(radius, &mut rng),
            q_p: qos.q_p,
        })
        .collect();
    let s = (0..secondaries)
        .map(|_| SecondaryLink {
            st: uniform_in_disk(radius, &mut rng),
            sr: uniform_in_disk(radius, &mut rng),
            q_s: qos.q_s,
        })
        .collect();
    (p, s)
}

/// Row-major `M x N` costs; `None` marks an infeasible pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Option<f64>>,
    sentinel: f64,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Option<f64>>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "cost matrix needs {rows}x{cols} > 0 entries, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries
            .iter()
            .flatten()
            .find(|c| !(c.is_finite() && **c >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "costs must be finite and nonnegative, got {bad}"
            )));
        }
        let sentinel = 1.0 + entries.iter().flatten().sum::<f64>();
        Ok(Self {
            rows,
            cols,
            entries,
            sentinel,
        })
    }

    /// Fully feasible matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged cost matrix".into()));
        }
        let entries = rows.iter().flatten().map(|&c| Some(c)).collect();
        Self::new(rows.len(), cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.cols + j]
    }

    /// Entry with infeasible pairs replaced by the sentinel.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(self.sentinel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, column, cost)` sorted by row.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    pub total: f64,
}

/// Entry `(i, j)` is the snapped minimal WSP of primary `i` with
/// secondary `j`, or infeasible when the pair has no grid allocation.
pub fn pairwise_cost_matrix(
    primaries: &[PrimaryLink],
    secondaries: &[SecondaryLink],
    env: &PairingEnv,
) -> Result<CostMatrix> {
    let (m, n) = (primaries.len(), secondaries.len());
    let entries: Vec<Option<f64>> = (0..m * n)
        .into_par_iter()
        .map(|k| pair_cost(&primaries[k / n], &secondaries[k % n], env))
        .collect::<Result<_>>()?;
    CostMatrix::new(m, n, entries)
}

fn pair_cost(p: &PrimaryLink, s: &SecondaryLink, env: &PairingEnv) -> Result<Option<f64>> {
    let scenario = Scenario {
        pt: p.pt,
        pr: p.pr,
        st: s.st,
        sr: s.sr,
        path_loss: env.path_loss,
        weights: env.weights,
        qos: QosReq::new(p.q_p, s.q_s)?,
        grid: env.grid.clone(),
    };
    let pair = scenario.link_pair()?;
    match newton::allocate(&pair, &env.newton) {
        Ok(res) => Ok(res.snapped_wsp()),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Minimum-total-cost assignment (Hungarian method with potentials,
/// `O(n^3)` on the matrix padded to square with sentinel entries).
pub fn kuhn_munkres(costs: &CostMatrix) -> Assignment {
    let n = costs.rows.max(costs.cols);
    let weight = |i: usize, j: usize| {
        if i < costs.rows && j < costs.cols {
            costs.weight(i, j)
        } else {
            costs.sentinel
        }
    };

    // 1-based arrays; column 0 is a virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = weight(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut row_used = vec![false; costs.rows];
    let mut col_used = vec![false; costs.cols];
    for j in 1..=n {
        let (r, c) = (owner[j] - 1, j - 1);
        if r < costs.rows && c < costs.cols {
            if let Some(cost) = costs.get(r, c) {
                pairs.push((r, c, cost));
                row_used[r] = true;
                col_used[c] = true;
            }
        }
    }
    pairs.sort_by_key(|p| p.0);
    let unused = |used: &[bool]| (0..used.len()).filter(|&k| !used[k]).collect();
    Assignment {
        total: pairs.iter().map(|p| p.2).sum(),
        unmatched_rows: unused(&row_used),
        unmatched_cols: unused(&col_used),
        pairs,
    }
}
