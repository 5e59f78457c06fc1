//! Classification of the Markov chain induced by a fixed policy.
//!
//! The support graph has an edge `s -> s'` iff `P(s, s') > 0` exactly.
//! Recurrent classes are the closed strongly connected components; each
//! class's period is the gcd of `depth(u) + 1 - depth(v)` over its internal
//! edges, with depths taken from a BFS inside the class.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::process::{check_distribution, MdpSpec, PolicySpec};

/// Above this size the stationary distribution is found by power iteration.
pub const DENSE_SOLVE_LIMIT: usize = 2000;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

/// Row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidSpec("empty transition matrix".into()));
        }
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {s} has {} entries, expected {n}", row.len())));
            }
            check_distribution(row).map_err(|e| Error::InvalidSpec(format!("row {s}: {e}")))?;
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.rows[s][t]
    }

    fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[s]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(t, _)| t)
    }

    /// One step of `mu^T P`.
    pub fn step_distribution(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (t, &p) in self.rows[s].iter().enumerate() {
                out[t] += m * p;
            }
        }
        out
    }
}

/// Transition reward table `g(s, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    n: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("reward table must be square".into()));
        }
        Ok(Self {
            n,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            n,
            values: vec![c; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.values[s * self.n + t]
    }
}

/// Classification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainClass {
    /// Irreducible and aperiodic.
    ErgodicChain,
    /// One recurrent class of period 1 plus transient states.
    UnichainAperiodic,
    /// One recurrent class with period > 1.
    UnichainPeriodic,
    /// Two or more recurrent classes.
    Multichain,
}

impl ChainClass {
    pub fn is_unichain(self) -> bool {
        !matches!(self, ChainClass::Multichain)
    }
}

impl fmt::Display for ChainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ChainClass::ErgodicChain => "ErgodicChain",
            ChainClass::UnichainAperiodic => "UnichainAperiodic",
            ChainClass::UnichainPeriodic => "UnichainPeriodic",
            ChainClass::Multichain => "Multichain",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    /// Strongly connected components, each sorted, in order of smallest member.
    pub sccs: Vec<Vec<usize>>,
    /// Indices into `sccs` of the closed components.
    pub recurrent_classes: Vec<usize>,
    pub transient_states: Vec<usize>,
    /// Period of each recurrent class, aligned with `recurrent_classes`.
    pub periods: Vec<usize>,
    pub classification: ChainClass,
    pub stationary: Option<Vec<f64>>,
    pub rho: Option<f64>,
}

impl ChainReport {
    pub fn recurrent_states(&self, class: usize) -> &[usize] {
        &self.sccs[self.recurrent_classes[class]]
    }

    /// Human-readable text block.
    pub fn to_text(&self) -> String {
        let fmt_set = |s: &[usize]| {
            format!(
                "{{{}}}",
                s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            )
        };
        let mut out = String::new();
        let _ = writeln!(out, "classification: {}", self.classification);
        let _ = writeln!(out, "states: {}", self.sccs.iter().map(Vec::len).sum::<usize>());
        let _ = writeln!(out, "sccs: {}", self.sccs.iter().map(|c| fmt_set(c)).collect::<Vec<_>>().join(" "));
        for (i, (&c, &p)) in self.recurrent_classes.iter().zip(&self.periods).enumerate() {
            let states = &self.sccs[c];
            let absorbing = if states.len() == 1 { " (absorbing)" } else { "" };
            let _ = writeln!(out, "recurrent_class[{i}]: {} period {p}{absorbing}", fmt_set(states));
        }
        let _ = writeln!(out, "transient: {}", fmt_set(&self.transient_states));
        match &self.stationary {
            Some(pi) => {
                let _ = writeln!(
                    out,
                    "stationary: [{}]",
                    pi.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ")
                );
            }
            None => {
                let _ = writeln!(out, "stationary: none (not unique)");
            }
        }
        if let Some(rho) = self.rho {
            let _ = writeln!(out, "rho: {rho:.12}");
        }
        out
    }

    /// DOT graph of the condensation (one node per SCC).
    pub fn condensation_dot(&self, p: &TransitionMatrix) -> String {
        let mut owner = vec![0; p.n()];
        for (c, members) in self.sccs.iter().enumerate() {
            for &s in members {
                owner[s] = c;
            }
        }
        let mut edges = std::collections::BTreeSet::new();
        for s in 0..p.n() {
            for t in p.successors(s) {
                if owner[s] != owner[t] {
                    edges.insert((owner[s], owner[t]));
                }
            }
        }
        let mut out = String::from("digraph condensation {\n");
        for (c, members) in self.sccs.iter().enumerate() {
            let recurrent = self.recurrent_classes.contains(&c);
            let label = members.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
            let shape = if recurrent { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  c{c} [label=\"{{{label}}}\", shape={shape}];");
        }
        for (a, b) in edges {
            let _ = writeln!(out, "  c{a} -> c{b};");
        }
        out.push_str("}\n");
        out
    }
}

/// Transition matrix of the MRP obtained by fixing a tabular policy:
/// row `s` is `sum_a pi(a|s) kernel(s, a, .)`.
pub fn induced_chain(mdp: &MdpSpec, policy: &PolicySpec) -> Result<TransitionMatrix> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let mut rows = vec![vec![0.0; n]; n];
    for (s, row) in rows.iter_mut().enumerate() {
        let probs = policy.action_probs(s, mdp.n_actions())?;
        for (a, &w) in probs.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (t, &p) in mdp.kernel_row(s, a).iter().enumerate() {
                row[t] += w * p;
            }
        }
        // Mixtures can drift from 1 by a few ulps.
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    TransitionMatrix::new(rows)
}

/// Transition reward of the induced chain: `g(s, s')` is the expected reward
/// conditional on the transition, so that `sum_s' P(s, s') g(s, s')` is the
/// policy's expected one-step reward in `s`.
pub fn induced_rewards(mdp: &MdpSpec, policy: &PolicySpec) -> Result<RewardTable> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let mut rows = vec![vec![0.0; n]; n];
    for (s, row) in rows.iter_mut().enumerate() {
        let probs = policy.action_probs(s, mdp.n_actions())?;
        let mut mass = vec![0.0; n];
        for (a, &w) in probs.iter().enumerate() {
            for (t, &p) in mdp.kernel_row(s, a).iter().enumerate() {
                mass[t] += w * p;
                row[t] += w * p * mdp.reward(s, a, t);
            }
        }
        for t in 0..n {
            row[t] = if mass[t] > 0.0 { row[t] / mass[t] } else { 0.0 };
        }
    }
    RewardTable::new(rows)
}

/// Tarjan's algorithm, iterative. Components are returned sorted internally
/// and ordered by their smallest state.
pub fn strongly_connected_components(p: &TransitionMatrix) -> Vec<Vec<usize>> {
    let n = p.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|s| p.successors(s).collect()).collect();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut comps = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, next successor position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn class_period(p: &TransitionMatrix, members: &[usize], in_class: &[bool]) -> usize {
    let n = p.n();
    let mut depth = vec![usize::MAX; n];
    let root = members[0];
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for v in p.successors(u) {
            if in_class[v] && depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for &u in members {
        for v in p.successors(u) {
            if in_class[v] {
                let d = (depth[u] + 1).abs_diff(depth[v]);
                g = gcd(g, d);
            }
        }
    }
    g.max(1)
}

fn structure(p: &TransitionMatrix) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let sccs = strongly_connected_components(p);
    let mut owner = vec![0; p.n()];
    for (c, members) in sccs.iter().enumerate() {
        for &s in members {
            owner[s] = c;
        }
    }
    let recurrent: Vec<usize> = (0..sccs.len())
        .filter(|&c| sccs[c].iter().all(|&s| p.successors(s).all(|t| owner[t] == c)))
        .collect();
    let mut transient = Vec::new();
    for (c, members) in sccs.iter().enumerate() {
        if !recurrent.contains(&c) {
            transient.extend_from_slice(members);
        }
    }
    transient.sort_unstable();
    let periods = recurrent
        .iter()
        .map(|&c| {
            let mut in_class = vec![false; p.n()];
            sccs[c].iter().for_each(|&s| in_class[s] = true);
            class_period(p, &sccs[c], &in_class)
        })
        .collect();
    (sccs, recurrent, transient, periods)
}

/// Full structural report; `rewards` adds the stationary reward rate.
pub fn classify_chain(p: &TransitionMatrix, rewards: Option<&RewardTable>) -> Result<ChainReport> {
    if let Some(g) = rewards {
        if g.n() != p.n() {
            return Err(Error::Shape(format!("reward table is {0}x{0}, chain has {1} states", g.n(), p.n())));
        }
    }
    let (sccs, recurrent, transient, periods) = structure(p);
    let classification = match recurrent.len() {
        1 if periods[0] > 1 => ChainClass::UnichainPeriodic,
        1 if sccs.len() == 1 => ChainClass::ErgodicChain,
        1 => ChainClass::UnichainAperiodic,
        _ => ChainClass::Multichain,
    };
    let stationary = if classification.is_unichain() {
        Some(stationary_on_class(p, &sccs[recurrent[0]])?)
    } else {
        None
    };
    let rho = match (&stationary, rewards) {
        (Some(pi), Some(g)) => Some(stationary_reward_rate(p, g, pi)?),
        _ => None,
    };
    Ok(ChainReport {
        sccs,
        recurrent_classes: recurrent,
        transient_states: transient,
        periods,
        classification,
        stationary,
        rho,
    })
}

/// Unique stationary distribution of a unichain.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let (sccs, recurrent, _, _) = structure(p);
    if recurrent.len() != 1 {
        return Err(Error::NonUniqueStationary {
            classes: recurrent.len(),
        });
    }
    stationary_on_class(p, &sccs[recurrent[0]])
}

fn stationary_on_class(p: &TransitionMatrix, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let local = if m <= DENSE_SOLVE_LIMIT {
        dense_stationary(p, class)?
    } else {
        power_stationary(p, class)
    };
    let mut pi = vec![0.0; p.n()];
    for (i, &s) in class.iter().enumerate() {
        pi[s] = local[i];
    }
    Ok(pi)
}

// Solves pi^T (P_C - I) = 0 with the last equation replaced by sum(pi) = 1.
fn dense_stationary(p: &TransitionMatrix, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (j, &sj) in class.iter().enumerate() {
        for (i, &si) in class.iter().enumerate() {
            a[(i, j)] = p.get(sj, si) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Fit("singular stationary system".into()))?;
    let mut pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

// Power iteration on the lazy chain (P + I) / 2, which shares the stationary
// distribution and is aperiodic.
fn power_stationary(p: &TransitionMatrix, class: &[usize]) -> Vec<f64> {
    let m = class.len();
    let mut pos = vec![usize::MAX; p.n()];
    for (i, &s) in class.iter().enumerate() {
        pos[s] = i;
    }
    let mut mu = vec![1.0 / m as f64; m];
    for _ in 0..POWER_MAX_ITERS {
        let mut next = vec![0.0; m];
        for (i, &s) in class.iter().enumerate() {
            next[i] += 0.5 * mu[i];
            for (t, &q) in p.rows[s].iter().enumerate() {
                if q > 0.0 {
                    next[pos[t]] += 0.5 * mu[i] * q;
                }
            }
        }
        let diff: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if diff < POWER_TOL {
            break;
        }
    }
    mu
}

/// `rho = sum_{s,s'} pi(s) P(s, s') g(s, s')`.
pub fn stationary_reward_rate(p: &TransitionMatrix, g: &RewardTable, pi: &[f64]) -> Result<f64> {
    if g.n() != p.n() || pi.len() != p.n() {
        return Err(Error::Shape(format!(
            "chain has {} states, reward table {}, distribution {}",
            p.n(),
            g.n(),
            pi.len()
        )));
    }
    let mut acc = crate::stats::CompensatedSum::new();
    for s in 0..p.n() {
        for t in 0..p.n() {
            acc.add(pi[s] * p.get(s, t) * g.get(s, t));
        }
    }
    Ok(acc.value())
}

/// Outcome of the ergodic-MDP check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErgodicVerdict {
    Ergodic,
    /// First deterministic policy (lexicographic) whose chain is not a single
    /// recurrent class covering every state.
    NotErgodic { counterexample: Vec<usize> },
    /// The cap was reached before every policy was checked.
    Inconclusive { checked: usize },
}

pub const DEFAULT_POLICY_CAP: usize = 1_000_000;

/// Enumerates deterministic stationary policies in lexicographic order
/// (state 0 most significant) and checks that each induces a chain made of
/// one recurrent class spanning all states.
pub fn is_ergodic_mdp(mdp: &MdpSpec, max_policies: usize) -> ErgodicVerdict {
    let n = mdp.n_states();
    let k = mdp.n_actions();
    let mut policy = vec![0usize; n];
    let mut checked = 0;
    loop {
        if checked == max_policies {
            return ErgodicVerdict::Inconclusive { checked };
        }
        let chain = induced_chain(mdp, &PolicySpec::DeterministicTabular(policy.clone()))
            .expect("deterministic policy always fits");
        let (_, recurrent, transient, _) = structure(&chain);
        checked += 1;
        if recurrent.len() != 1 || !transient.is_empty() {
            return ErgodicVerdict::NotErgodic {
                counterexample: policy,
            };
        }
        // Odometer increment, last state fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return ErgodicVerdict::Ergodic;
            }
            i -= 1;
            policy[i] += 1;
            if policy[i] < k {
                break;
            }
            policy[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tm(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn absorbing3() -> TransitionMatrix {
        tm(&[&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]])
    }

    #[test]
    fn scc_identity_and_cycle() {
        let id = tm(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(strongly_connected_components(&id), vec![vec![0], vec![1], vec![2]]);
        let cyc = tm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(strongly_connected_components(&cyc), vec![vec![0, 1]]);
    }

    #[test]
    fn scc_absorbing() {
        let p = absorbing3();
        assert_eq!(strongly_connected_components(&p), vec![vec![0], vec![1], vec![2]]);
        let r = classify_chain(&p, None).unwrap();
        assert_eq!(r.recurrent_classes.len(), 1);
        assert_eq!(r.recurrent_states(0), &[2]);
        assert_eq!(r.transient_states, vec![0, 1]);
        assert_eq!(r.classification, ChainClass::UnichainAperiodic);
        let pi = r.stationary.unwrap();
        assert_abs_diff_eq!(pi.as_slice(), [0.0, 0.0, 1.0].as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn classify_symmetric() {
        let p = tm(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let r = classify_chain(&p, None).unwrap();
        assert_eq!(r.classification, ChainClass::ErgodicChain);
        assert_abs_diff_eq!(r.stationary.unwrap().as_slice(), [0.5, 0.5].as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn classify_periodic() {
        let p = tm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let r = classify_chain(&p, None).unwrap();
        assert_eq!(r.classification, ChainClass::UnichainPeriodic);
        assert_eq!(r.periods, vec![2]);
        assert_abs_diff_eq!(r.stationary.unwrap().as_slice(), [0.5, 0.5].as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn period_three_with_chord() {
        // Cycles 0-1-2 (length 3) and 0-3-1-2 (length 4) give period 1.
        let p = tm(&[
            &[0.0, 0.5, 0.0, 0.5],
            &[0.0, 0.0, 1.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ]);
        let r = classify_chain(&p, None).unwrap();
        assert_eq!(r.periods, vec![1]);
        assert_eq!(r.classification, ChainClass::ErgodicChain);
        let p = tm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(classify_chain(&p, None).unwrap().periods, vec![3]);
    }

    #[test]
    fn multichain_has_no_stationary() {
        let p = tm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = classify_chain(&p, None).unwrap();
        assert_eq!(r.classification, ChainClass::Multichain);
        assert!(r.stationary.is_none());
        assert_eq!(
            stationary_distribution(&p),
            Err(Error::NonUniqueStationary { classes: 2 })
        );
    }

    #[test]
    fn stationary_values() {
        let p = tm(&[&[0.9, 0.1], &[0.5, 0.5]]);
        let pi = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 1.0 / 6.0, epsilon = 1e-12);
        let doubly = tm(&[&[0.2, 0.3, 0.5], &[0.5, 0.2, 0.3], &[0.3, 0.5, 0.2]]);
        for x in stationary_distribution(&doubly).unwrap() {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let p = tm(&[&[0.9, 0.1, 0.0], &[0.2, 0.3, 0.5], &[0.0, 1.0, 0.0]]);
        let class = [0, 1, 2];
        let dense = dense_stationary(&p, &class).unwrap();
        let power = power_stationary(&p, &class);
        for (a, b) in dense.iter().zip(&power) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn reward_rates() {
        let p = tm(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let c = RewardTable::constant(2, 3.5);
        assert_abs_diff_eq!(stationary_reward_rate(&p, &c, &[0.5, 0.5]).unwrap(), 3.5, epsilon = 1e-15);
        let diag = RewardTable::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(stationary_reward_rate(&p, &diag, &[0.5, 0.5]).unwrap(), 0.5, epsilon = 1e-15);
        let p = tm(&[&[0.9, 0.1], &[0.5, 0.5]]);
        let g = RewardTable::new(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let rho = stationary_reward_rate(&p, &g, &[5.0 / 6.0, 1.0 / 6.0]).unwrap();
        assert_abs_diff_eq!(rho, 5.0 / 6.0, epsilon = 1e-15);
        assert!(matches!(
            stationary_reward_rate(&p, &g, &[1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn induced_chain_linearity() {
        let kernel = vec![
            1.0, 0.0, 0.0, 1.0, // state 0: a0 -> 0, a1 -> 1
            0.3, 0.7, 0.9, 0.1, // state 1
        ];
        let mdp = MdpSpec::new(2, 2, kernel, vec![0.0; 8], vec![1.0, 0.0]).unwrap();
        let p = induced_chain(&mdp, &PolicySpec::uniform(2, 2)).unwrap();
        assert_abs_diff_eq!(p.rows()[0].as_slice(), [0.5, 0.5].as_slice(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.rows()[1].as_slice(), [0.6, 0.4].as_slice(), epsilon = 1e-15);
        let det = induced_chain(&mdp, &PolicySpec::deterministic(vec![1, 0])).unwrap();
        assert_eq!(det.rows()[0], vec![0.0, 1.0]);
        assert!(matches!(
            induced_chain(&mdp, &PolicySpec::ParametricFraction(0.2)),
            Err(Error::UnsupportedPolicy(_))
        ));
    }

    #[test]
    fn induced_rewards_preserve_expectation() {
        let kernel = vec![0.5, 0.5, 0.2, 0.8, 1.0, 0.0, 0.0, 1.0];
        let reward = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let mdp = MdpSpec::new(2, 2, kernel, reward, vec![1.0, 0.0]).unwrap();
        let policy = PolicySpec::stochastic(vec![vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let p = induced_chain(&mdp, &policy).unwrap();
        let g = induced_rewards(&mdp, &policy).unwrap();
        for s in 0..2 {
            let via_table: f64 = (0..2).map(|t| p.get(s, t) * g.get(s, t)).sum();
            let direct: f64 = (0..2)
                .map(|a| policy.action_probs(s, 2).unwrap()[a] * mdp.expected_reward(s, a))
                .sum();
            assert_abs_diff_eq!(via_table, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn ergodic_mdp_checks() {
        let single = MdpSpec::new(2, 1, vec![0.5, 0.5, 0.5, 0.5], vec![0.0; 4], vec![1.0, 0.0]).unwrap();
        assert_eq!(is_ergodic_mdp(&single, 10), ErgodicVerdict::Ergodic);

        let row = [0.2, 0.3, 0.5];
        let kernel: Vec<f64> = (0..12).flat_map(|_| row).collect();
        let big = MdpSpec::new(3, 4, kernel, vec![0.0; 36], vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(is_ergodic_mdp(&big, 10), ErgodicVerdict::Inconclusive { checked: 10 });
        assert_eq!(is_ergodic_mdp(&big, 64), ErgodicVerdict::Ergodic);
    }

    #[test]
    fn dot_output_marks_recurrent() {
        let p = absorbing3();
        let r = classify_chain(&p, None).unwrap();
        let dot = r.condensation_dot(&p);
        assert!(dot.contains("c2 [label=\"{2}\", shape=doublecircle]"));
        assert!(dot.contains("c0 -> c1;"));
    }
}
