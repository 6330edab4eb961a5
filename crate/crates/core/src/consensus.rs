//! Simulated consensus ADMM over measurement shards.
//!
//! Each agent owns a disjoint slice of the Pauli measurements and minimizes
//! its own least-squares term plus a proximity penalty to the average of its
//! closed neighborhood. Rounds are synchronous; the low-rank PSD projection
//! is applied once to the final global average.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::pauli::{MeasurementEnsemble, MeasurementRecord};
use crate::prox::{threshold_spectrum, trace_normalize};
use crate::seed::{self, Stream};
use crate::solvers::{l2, stopping_check, IterationRecord, SolverConfig, SolverResult};

/// One agent's measurements and local iterates.
#[derive(Clone, Debug)]
pub struct AgentShard {
    pub agent_id: usize,
    /// Positions of this shard's measurements in the full ensemble.
    pub indices: Vec<usize>,
    /// Sub-ensemble sharing the full ensemble's normalization.
    pub ensemble: MeasurementEnsemble,
    pub y: Vec<f64>,
    pub local_x: ComplexMatrix,
    pub local_dual: ComplexMatrix,
}

/// Split the measurements into `n` disjoint shards.
///
/// The measurement order is shuffled with a seed-derived permutation and dealt
/// round-robin, so shard sizes differ by at most one. `n = 1` keeps the
/// original order.
pub fn shard_measurements(
    ens: &MeasurementEnsemble,
    y: &MeasurementRecord,
    n: usize,
    seed: u64,
) -> Result<Vec<AgentShard>> {
    y.check_against(ens)?;
    let m = ens.len();
    if n == 0 {
        return Err(Error::param("need at least one agent"));
    }
    if n > m {
        return Err(Error::param(format!("{n} agents but only {m} measurements")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    if n > 1 {
        order.shuffle(&mut seed::rng(seed::stream_seed(seed, Stream::Sharding)));
    }
    let d = ens.dim();
    (0..n)
        .map(|agent_id| {
            let mut indices: Vec<usize> = order.iter().skip(agent_id).step_by(n).copied().collect();
            indices.sort_unstable();
            Ok(AgentShard {
                agent_id,
                ensemble: ens.select(&indices)?,
                y: indices.iter().map(|&i| y.y[i]).collect(),
                indices,
                local_x: ComplexMatrix::zeros(d, d),
                local_dual: ComplexMatrix::zeros(d, d),
            })
        })
        .collect()
}

/// Check that every measurement in `0..m` has exactly one owner.
pub fn validate_partition(shards: &[AgentShard], m: usize) -> Result<()> {
    let mut owner = vec![None; m];
    for shard in shards {
        for &i in &shard.indices {
            match owner.get_mut(i) {
                None => return Err(Error::dim(format!("shard index {i} out of range 0..{m}"))),
                Some(Some(prev)) => {
                    return Err(Error::param(format!(
                        "measurement {i} owned by agents {prev} and {}",
                        shard.agent_id
                    )))
                }
                Some(slot) => *slot = Some(shard.agent_id),
            }
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(Error::param(format!("measurement {i} has no owner")));
    }
    Ok(())
}

/// Undirected communication graph with self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl Topology {
    /// Build from an edge list. Edges are undirected; self-loops are implied.
    /// Fails unless the graph is connected.
    pub fn from_edges(n: usize, edges: &[[usize; 2]]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("need at least one agent".into()));
        }
        let mut adjacency = vec![vec![false; n]; n];
        for (i, row) in adjacency.iter_mut().enumerate() {
            row[i] = true;
        }
        for &[a, b] in edges {
            if a >= n || b >= n {
                return Err(Error::Topology(format!("edge ({a}, {b}) references an agent outside 0..{n}")));
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        let topo = Topology { n, adjacency };
        topo.check_connected()?;
        Ok(topo)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<[usize; 2]> = (0..n).flat_map(|i| (i + 1..n).map(move |j| [i, j])).collect();
        Self::from_edges(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self> {
        let edges: Vec<[usize; 2]> = (0..n).map(|i| [i, (i + 1) % n]).collect();
        Self::from_edges(n, &edges)
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(j) => Err(Error::Topology(format!("agent {j} is not reachable from agent 0"))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    /// Closed neighborhood of `i`, in increasing order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    pub fn to_json(&self) -> Result<String> {
        let edges = (0..self.n)
            .flat_map(|i| (i + 1..self.n).filter(move |&j| self.adjacency[i][j]).map(move |j| [i, j]))
            .collect();
        Ok(serde_json::to_string_pretty(&TopologyRepr { n: self.n, edges })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: TopologyRepr = serde_json::from_str(s)?;
        Self::from_edges(repr.n, &repr.edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn check_shards(shards: &[AgentShard], topology: &Topology) -> Result<(usize, f64)> {
    let first = shards.first().ok_or_else(|| Error::param("no shards"))?;
    if topology.len() != shards.len() {
        return Err(Error::Topology(format!(
            "topology has {} agents but there are {} shards",
            topology.len(),
            shards.len()
        )));
    }
    let d = first.ensemble.dim();
    let c = first.ensemble.normalization();
    for s in shards {
        if s.ensemble.dim() != d || s.ensemble.normalization() != c {
            return Err(Error::dim(format!(
                "shard {} does not come from the same ensemble as shard {}",
                s.agent_id, first.agent_id
            )));
        }
        if s.y.len() != s.ensemble.len() {
            return Err(Error::dim(format!(
                "shard {} has {} values for {} measurements",
                s.agent_id,
                s.y.len(),
                s.ensemble.len()
            )));
        }
        if s.local_x.rows() != d || s.local_dual.rows() != d {
            return Err(Error::dim(format!("shard {} iterates are not {d}x{d}", s.agent_id)));
        }
    }
    Ok((d, first.ensemble.gram_scale()))
}

fn average<'a>(ms: impl Iterator<Item = &'a ComplexMatrix>, d: usize) -> ComplexMatrix {
    let mut sum = ComplexMatrix::zeros(d, d);
    let mut count = 0;
    for m in ms {
        sum += m;
        count += 1;
    }
    sum.scale(1.0 / count as f64)
}

/// Run `rounds` synchronous consensus rounds, then threshold the global average.
///
/// Local iterates start from the shards' current `local_x`/`local_dual` and are
/// written back. History `primal` is the maximum distance of an agent from the
/// global average; `d_rho` is the largest local step.
pub fn consensus_solve(
    shards: &mut [AgentShard],
    topology: &Topology,
    cfg: &SolverConfig,
    rounds: usize,
) -> Result<SolverResult> {
    consensus_solve_observed(shards, topology, cfg, rounds, |_, _| {})
}

pub fn consensus_solve_observed(
    shards: &mut [AgentShard],
    topology: &Topology,
    cfg: &SolverConfig,
    rounds: usize,
    mut observe: impl FnMut(usize, &[AgentShard]),
) -> Result<SolverResult> {
    cfg.validate()?;
    if rounds == 0 {
        return Err(Error::param("rounds must be at least 1"));
    }
    let (d, g) = check_shards(shards, topology)?;
    if let Some(r) = cfg.rank_cap {
        if r > d {
            return Err(Error::param(format!("rank_cap {r} exceeds dimension {d}")));
        }
    }
    let lam = cfg.lambda;
    let aty: Vec<ComplexMatrix> = shards
        .iter()
        .map(|s| s.ensemble.adjoint(&s.y))
        .collect::<Result<_>>()?;
    let y_norm = shards.iter().map(|s| l2(&s.y).powi(2)).sum::<f64>().sqrt();

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut xbar_local: Vec<ComplexMatrix> = (0..shards.len())
        .map(|i| average(topology.neighbors(i).map(|j| &shards[j].local_x), d))
        .collect();

    for round in 1..=rounds {
        let new_x: Vec<ComplexMatrix> = shards
            .par_iter()
            .zip(&aty)
            .zip(&xbar_local)
            .map(|((s, aty), xbar)| {
                let w = aty + &(&(xbar - &s.local_dual) * lam);
                let atw = s.ensemble.adjoint(&s.ensemble.forward_real_part(&w)?)?;
                Ok(&(&w - &(&atw * (1.0 / (g + lam)))) * (1.0 / lam))
            })
            .collect::<Result<_>>()?;

        let step = shards
            .iter()
            .zip(&new_x)
            .map(|(s, x)| x.frobenius_distance(&s.local_x))
            .fold(0.0, f64::max);
        xbar_local = (0..shards.len())
            .map(|i| average(topology.neighbors(i).map(|j| &new_x[j]), d))
            .collect();
        for ((s, x), xbar) in shards.iter_mut().zip(new_x).zip(&xbar_local) {
            s.local_dual += &(&x - xbar);
            s.local_x = x;
        }

        let global = average(shards.iter().map(|s| &s.local_x), d);
        let disagreement = shards
            .iter()
            .map(|s| s.local_x.frobenius_distance(&global))
            .fold(0.0, f64::max);
        let residual = shards
            .iter()
            .map(|s| {
                let fit = s.ensemble.forward_real_part(&global)?;
                Ok(s.y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            })
            .sum::<Result<f64>>()?
            .sqrt();
        let record = IterationRecord {
            iter: round,
            primal: disagreement,
            d_rho: step,
            d_s: 0.0,
            measurement_residual: residual,
            objective: 0.5 * residual * residual,
        };
        if ![disagreement, step, residual].iter().all(|v| v.is_finite()) {
            history.push(record);
            return Err(Error::Divergence {
                iteration: round,
                reason: "non-finite consensus iterate".into(),
                history,
            });
        }
        observe(round, shards);
        let done = stopping_check(&record, cfg, y_norm);
        history.push(record);
        if done {
            converged = true;
            break;
        }
    }

    let global = average(shards.iter().map(|s| &s.local_x), d);
    let (projected, _, _) = threshold_spectrum(&global, cfg.tau() * lam / g, cfg.rank_cap)?;
    Ok(SolverResult {
        rho_hat: trace_normalize(&projected, cfg.trace_mode)?,
        s_hat: None,
        iterations: history.len(),
        converged,
        history,
    })
}

/// Round-by-round disagreement trace as CSV.
pub fn write_disagreement_csv(history: &[IterationRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["round", "max_disagreement", "max_step", "measurement_residual"])?;
    for r in history {
        out.write_record([
            r.iter.to_string(),
            format!("{:.9e}", r.primal),
            format!("{:.9e}", r.d_rho),
            format!("{:.9e}", r.measurement_residual),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<disagreement csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_norm;
    use crate::pauli::sample_ensemble;
    use crate::solvers::solve_admm_simple;
    use crate::states::{random_density, relative_error};

    fn full_problem(seed: u64) -> (MeasurementEnsemble, MeasurementRecord) {
        let ens = sample_ensemble(3, 64, seed).unwrap();
        let truth = random_density(8, 1, seed + 1).unwrap();
        let y = ens.measure(truth.matrix()).unwrap();
        (ens, y)
    }

    #[test]
    fn sharding_partitions_evenly() {
        let ens = sample_ensemble(5, 512, 1).unwrap();
        let y = ens.record(vec![0.5; 512]).unwrap();
        let shards = shard_measurements(&ens, &y, 4, 9).unwrap();
        assert_eq!(shards.iter().map(|s| s.indices.len()).collect::<Vec<_>>(), vec![128; 4]);
        validate_partition(&shards, 512).unwrap();
        let mut words: Vec<_> = shards.iter().flat_map(|s| s.ensemble.words().to_vec()).collect();
        let mut all = ens.words().to_vec();
        words.sort_by_key(|w| w.index());
        all.sort_by_key(|w| w.index());
        assert_eq!(words, all);
        let again = shard_measurements(&ens, &y, 4, 9).unwrap();
        assert!(shards.iter().zip(&again).all(|(a, b)| a.indices == b.indices));
    }

    #[test]
    fn single_shard_is_the_full_problem() {
        let (ens, y) = full_problem(2);
        let shards = shard_measurements(&ens, &y, 1, 0).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].ensemble, ens);
        assert_eq!(shards[0].y, y.y);
    }

    #[test]
    fn sharding_errors() {
        let ens = sample_ensemble(2, 4, 1).unwrap();
        let y = ens.record(vec![0.0; 4]).unwrap();
        assert!(shard_measurements(&ens, &y, 5, 0).is_err());
        assert!(shard_measurements(&ens, &y, 0, 0).is_err());
    }

    #[test]
    fn partition_violations_detected() {
        let (ens, y) = full_problem(3);
        let mut shards = shard_measurements(&ens, &y, 2, 1).unwrap();
        let stolen = shards[1].indices[0];
        shards[0].indices.push(stolen);
        assert!(validate_partition(&shards, 64).is_err());
        shards[0].indices.pop();
        shards[1].indices.remove(0);
        assert!(validate_partition(&shards, 64).is_err());
    }

    #[test]
    fn topology_construction() {
        let t = Topology::complete(4).unwrap();
        assert!((0..4).all(|i| (0..4).all(|j| t.is_adjacent(i, j))));
        let r = Topology::ring(5).unwrap();
        assert_eq!(r.neighbors(0).collect::<Vec<_>>(), vec![0, 1, 4]);
        assert!(matches!(Topology::from_edges(3, &[[0, 1]]), Err(Error::Topology(_))));
        assert!(matches!(Topology::from_edges(2, &[[0, 2]]), Err(Error::Topology(_))));
        let back = Topology::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let parsed = Topology::from_json(r#"{"n": 3, "edges": [[0, 1], [2, 1]]}"#).unwrap();
        assert!(parsed.is_adjacent(1, 2) && !parsed.is_adjacent(0, 2));
        assert!(Topology::from_edges(1, &[]).is_ok());
    }

    #[test]
    fn topology_size_must_match_shards() {
        let (ens, y) = full_problem(4);
        let mut shards = shard_measurements(&ens, &y, 2, 0).unwrap();
        let t = Topology::complete(3).unwrap();
        assert!(matches!(
            consensus_solve(&mut shards, &t, &SolverConfig::default(), 10),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn single_agent_matches_centralized() {
        let (ens, y) = full_problem(5);
        let cfg = SolverConfig { max_iters: 500, eps_rho: 1e-10, eps_s: 1e-10, ..Default::default() };
        let central = solve_admm_simple(&ens, &y, &cfg).unwrap();
        let mut shards = shard_measurements(&ens, &y, 1, 0).unwrap();
        let res = consensus_solve(&mut shards, &Topology::complete(1).unwrap(), &cfg, 300).unwrap();
        assert!(relative_error(&central.rho_hat, &res.rho_hat).unwrap() <= 1e-8);
    }

    #[test]
    fn identical_agents_stay_identical() {
        let (ens, y) = full_problem(6);
        let base = shard_measurements(&ens, &y, 1, 0).unwrap().remove(0);
        let mut shards: Vec<AgentShard> = (0..3)
            .map(|i| AgentShard { agent_id: i, ..base.clone() })
            .collect();
        let topo = Topology::ring(3).unwrap();
        consensus_solve_observed(&mut shards, &topo, &SolverConfig::default(), 20, |_, s| {
            assert!(s.iter().all(|a| a.local_x == s[0].local_x && a.local_dual == s[0].local_dual));
        })
        .unwrap();
    }

    #[test]
    fn complete_graph_reaches_centralized_solution() {
        let (ens, y) = full_problem(7);
        let central = solve_admm_simple(&ens, &y, &SolverConfig { max_iters: 500, ..Default::default() }).unwrap();
        let mut shards = shard_measurements(&ens, &y, 4, 3).unwrap();
        let res = consensus_solve(&mut shards, &Topology::complete(4).unwrap(), &SolverConfig::default(), 300).unwrap();
        assert!(res.iterations <= 300);
        assert!(relative_error(&central.rho_hat, &res.rho_hat).unwrap() <= 1e-2);
    }

    #[test]
    fn csv_trace_layout() {
        let (ens, y) = full_problem(8);
        let mut shards = shard_measurements(&ens, &y, 2, 1).unwrap();
        let res = consensus_solve(&mut shards, &Topology::complete(2).unwrap(), &SolverConfig::default(), 5).unwrap();
        let mut buf = Vec::new();
        write_disagreement_csv(&res.history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "round,max_disagreement,max_step,measurement_residual");
        assert_eq!(lines.len(), res.history.len() + 1);
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn history_is_finite_and_bounded() {
        let (ens, y) = full_problem(9);
        let mut shards = shard_measurements(&ens, &y, 4, 2).unwrap();
        let res = consensus_solve(&mut shards, &Topology::ring(4).unwrap(), &SolverConfig::default(), 50).unwrap();
        assert!(res.history.iter().all(|r| r.primal.is_finite() && r.primal < 10.0));
        assert!(frobenius_norm(&res.rho_hat) <= 1.0 + 1e-9);
    }
}
