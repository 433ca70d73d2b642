//! Finite MDPs and the exact occupancy quantities a density-ratio learner is
//! trying to recover.
//!
//! State-action pairs are flattened row-major, `index = s * n_actions + a`.
//! Every matrix and feature map in the crate shares this order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DiceError, Result};

const ROW_TOL: f64 = 1e-12;

fn check_prob_row(row: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("entry {v} is negative or non-finite"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// Tabular MDP with mean rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// p(s'|s,a), flattened as `[(s * A + a) * S + s']`.
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    initial_dist: Vec<f64>,
}

impl FiniteMdp {
    /// `transition[s][a][s']`, `reward[s][a]`.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        gamma: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        MdpDocument {
            n_states: transition.len(),
            n_actions: transition.first().map_or(0, Vec::len),
            transition,
            reward,
            gamma,
            initial_dist,
        }
        .try_into()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Row p(·|s,a).
    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        let start = self.pair(s, a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)]
    }

    /// Mean rewards in flattened pair order.
    pub fn reward_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.reward)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(DiceError::InvalidMdp(format!("gamma {gamma} outside [0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Replaces the mean reward table; `reward(s, a)` is evaluated for every pair.
    pub fn with_reward(mut self, reward: impl Fn(usize, usize) -> f64) -> Self {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let i = self.pair(s, a);
                self.reward[i] = reward(s, a);
            }
        }
        self
    }
}

/// Serialized form of [`FiniteMdp`]: nested arrays, validated on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
    pub initial_dist: Vec<f64>,
}

impl TryFrom<MdpDocument> for FiniteMdp {
    type Error = DiceError;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (ns, na) = (doc.n_states, doc.n_actions);
        let bad = |msg: String| Err(DiceError::InvalidMdp(msg));
        if ns == 0 || na == 0 {
            return bad("n_states and n_actions must be positive".into());
        }
        if !(0.0..=1.0).contains(&doc.gamma) {
            return bad(format!("gamma {} outside [0, 1]", doc.gamma));
        }
        if doc.transition.len() != ns || doc.reward.len() != ns || doc.initial_dist.len() != ns {
            return bad("transition, reward and initial_dist must have n_states rows".into());
        }
        let mut transition = Vec::with_capacity(ns * na * ns);
        let mut reward = Vec::with_capacity(ns * na);
        for (s, (rows, rewards)) in doc.transition.iter().zip(&doc.reward).enumerate() {
            if rows.len() != na || rewards.len() != na {
                return bad(format!("state {s} does not have n_actions entries"));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != ns {
                    return bad(format!("p(.|{s},{a}) has length {}", row.len()));
                }
                if let Err(e) = check_prob_row(row, ROW_TOL) {
                    return bad(format!("p(.|{s},{a}): {e}"));
                }
                transition.extend_from_slice(row);
            }
            if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
                return bad(format!("reward {r} at state {s} is not finite"));
            }
            reward.extend_from_slice(rewards);
        }
        if let Err(e) = check_prob_row(&doc.initial_dist, ROW_TOL) {
            return bad(format!("initial_dist: {e}"));
        }
        Ok(FiniteMdp {
            n_states: ns,
            n_actions: na,
            transition,
            reward,
            gamma: doc.gamma,
            initial_dist: doc.initial_dist,
        })
    }
}

impl From<FiniteMdp> for MdpDocument {
    fn from(mdp: FiniteMdp) -> Self {
        let (ns, na) = (mdp.n_states, mdp.n_actions);
        let transition = (0..ns)
            .map(|s| (0..na).map(|a| mdp.next_state_probs(s, a).to_vec()).collect())
            .collect();
        let reward = mdp.reward.chunks(na).map(<[f64]>::to_vec).collect();
        MdpDocument {
            n_states: ns,
            n_actions: na,
            transition,
            reward,
            gamma: mdp.gamma,
            initial_dist: mdp.initial_dist,
        }
    }
}

/// Target policy π(a|s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(DiceError::InvalidPolicy("empty policy table".into()));
        }
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(DiceError::InvalidPolicy(format!("row {s} has wrong length")));
            }
            check_prob_row(row, ROW_TOL)
                .map_err(|e| DiceError::InvalidPolicy(format!("pi(.|{s}): {e}")))?;
            probs.extend_from_slice(row);
        }
        Ok(Self { n_states, n_actions, probs })
    }

    /// Same action distribution in every state.
    pub fn uniform_rows(n_states: usize, row: &[f64]) -> Result<Self> {
        Self::new(vec![row.to_vec(); n_states])
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Ground-truth occupancy quantities for one (MDP, target policy, d_μ) triple.
#[derive(Debug, Clone)]
pub struct OccupancyModel {
    gamma: f64,
    n_states: usize,
    n_actions: usize,
    d_mu: DVector<f64>,
    mu0: DVector<f64>,
    p_pi: DMatrix<f64>,
    d_gamma: DVector<f64>,
    tau_star: DVector<f64>,
}

impl OccupancyModel {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.d_mu.len()
    }

    pub fn d_mu(&self) -> &DVector<f64> {
        &self.d_mu
    }

    /// μ₀(s,a) = μ̃₀(s)π(a|s).
    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    /// P_π((s,a),(s',a')) = p(s'|s,a)π(a'|s').
    pub fn p_pi(&self) -> &DMatrix<f64> {
        &self.p_pi
    }

    pub fn d_gamma(&self) -> &DVector<f64> {
        &self.d_gamma
    }

    pub fn tau_star(&self) -> &DVector<f64> {
        &self.tau_star
    }

    /// D = diag(d_μ).
    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.d_mu)
    }

    /// 𝒯y = (1−γ)μ₀ + γP_π^⊤Dy.
    pub fn apply_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let dy = self.d_mu.component_mul(y);
        (1.0 - self.gamma) * &self.mu0 + self.gamma * self.p_pi.tr_mul(&dy)
    }

    /// ρ_γ(π) = 𝔼_{d_γ}[r].
    pub fn policy_value(&self, mdp: &FiniteMdp) -> f64 {
        self.d_gamma.dot(&mdp.reward_vector())
    }

    /// ‖Dτ − 𝒯τ‖∞ for an arbitrary τ.
    pub fn fixed_point_residual(&self, tau: &DVector<f64>) -> f64 {
        (self.d_mu.component_mul(tau) - self.apply_t(tau)).amax()
    }
}

/// State-action transition matrix under `policy`.
pub fn state_action_transition(mdp: &FiniteMdp, policy: &PolicyTable) -> DMatrix<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let n = ns * na;
    DMatrix::from_fn(n, n, |i, j| {
        let (s, a) = (i / na, i % na);
        let (s2, a2) = (j / na, j % na);
        mdp.next_state_probs(s, a)[s2] * policy.prob(s2, a2)
    })
}

/// Exact d_γ and τ\* for the given triple.
pub fn build_occupancy(
    mdp: &FiniteMdp,
    policy: &PolicyTable,
    d_mu: &[f64],
) -> Result<OccupancyModel> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(DiceError::InvalidPolicy("policy shape does not match MDP".into()));
    }
    let n = ns * na;
    if d_mu.len() != n {
        return Err(DiceError::InvalidSamplingDist(format!(
            "length {} but the MDP has {n} state-action pairs",
            d_mu.len()
        )));
    }
    if let Some(v) = d_mu.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(DiceError::InvalidSamplingDist(format!("entry {v} is not > 0")));
    }
    let total: f64 = d_mu.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(DiceError::InvalidSamplingDist(format!("sums to {total}")));
    }

    let gamma = mdp.gamma();
    let p_pi = state_action_transition(mdp, policy);
    let mu0 = DVector::from_fn(n, |i, _| mdp.initial_dist()[i / na] * policy.prob(i / na, i % na));

    let d_gamma = if gamma < 1.0 {
        let system = DMatrix::identity(n, n) - gamma * p_pi.transpose();
        system
            .lu()
            .solve(&((1.0 - gamma) * &mu0))
            .ok_or_else(|| DiceError::SingularSystem("I - gamma P_pi^T".into()))?
    } else {
        check_ergodic(&p_pi, policy)?;
        stationary_distribution(&p_pi)?
    };

    let d_mu = DVector::from_column_slice(d_mu);
    let tau_star = d_gamma.component_div(&d_mu);
    Ok(OccupancyModel {
        gamma,
        n_states: ns,
        n_actions: na,
        d_mu,
        mu0,
        p_pi,
        d_gamma,
        tau_star,
    })
}

/// Least-squares solution of the bordered system [(I − P^⊤); 1^⊤] v = [0; 1].
fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut bordered = DMatrix::zeros(n + 1, n);
    bordered
        .view_mut((0, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) - p.transpose()));
    bordered.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let v = bordered
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| DiceError::SingularSystem(e.to_string()))?;
    Ok(v)
}

/// Irreducibility and aperiodicity of P_π restricted to pairs the policy can
/// select (π(a|s) > 0). Pairs outside that set have zero columns and are never
/// visited.
fn check_ergodic(p: &DMatrix<f64>, policy: &PolicyTable) -> Result<()> {
    let na = policy.n_actions();
    let support: Vec<usize> = (0..p.nrows())
        .filter(|&i| policy.prob(i / na, i % na) > 0.0)
        .collect();
    let root = *support
        .first()
        .ok_or_else(|| DiceError::NonErgodic("policy has empty support".into()))?;
    let edges = |i: usize| (0..p.ncols()).filter(move |&j| p[(i, j)] > 0.0);

    // forward BFS levels from the root
    let mut level = vec![usize::MAX; p.nrows()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(i) = queue.pop_front() {
        for j in edges(i) {
            if level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    if let Some(&i) = support.iter().find(|&&i| level[i] == usize::MAX) {
        return Err(DiceError::NonErgodic(format!("pair {i} unreachable from pair {root}")));
    }

    // backward reachability
    let mut seen = vec![false; p.nrows()];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(j) = stack.pop() {
        for i in 0..p.nrows() {
            if p[(i, j)] > 0.0 && !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    if let Some(&i) = support.iter().find(|&&i| !seen[i]) {
        return Err(DiceError::NonErgodic(format!("pair {root} unreachable from pair {i}")));
    }

    // period = gcd over edges u->v of level(u) + 1 - level(v)
    let mut period = 0usize;
    for &i in &support {
        for j in edges(i) {
            let diff = (level[i] + 1).abs_diff(level[j]);
            period = gcd(period, diff);
        }
    }
    if period != 1 {
        return Err(DiceError::NonErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
