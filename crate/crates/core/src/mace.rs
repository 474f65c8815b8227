//! Consensus-equilibrium engine: stacked state, weighted averaging, and the
//! Mann fixed-point iteration over the stacked agents.
//!
//! One iteration evaluates every agent on its own stack component, averages
//! the reflected outputs, and relaxes the stack toward the reflected average:
//!
//! ```text
//! x ← F(w);  z ← G(2x − w);  w ← w + 2ρ(z − x)
//! ```
//!
//! which is the averaged iteration `w ← (1−ρ)w + ρ(2G−I)(2F−I)w`. At a fixed
//! point all agent outputs agree with their weighted average.

use crate::agents::Agent;
use crate::error::{Error, Result};
use crate::volume::Volume;
use rayon::prelude::*;
use std::time::Instant;

/// The stacked consensus state: one volume per agent plus the agent weights.
#[derive(Debug, Clone)]
pub struct StackedState {
    pub components: Vec<Volume>,
    pub weights: Vec<f64>,
}

impl StackedState {
    pub fn new(components: Vec<Volume>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::config(format!(
                "stacked state needs matching non-empty components/weights, got {}/{}",
                components.len(),
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "agent weights must sum to 1 (within 1e-12), got {sum}"
            )));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::config("agent weights must be nonnegative"));
        }
        let dims = components[0].dims();
        if components.iter().any(|c| c.dims() != dims) {
            return Err(Error::config(
                "all stacked components must share the same grid",
            ));
        }
        Ok(StackedState {
            components,
            weights,
        })
    }

    /// The weighted average of the components.
    pub fn weighted_average(&self) -> Volume {
        weighted_average(&self.components, &self.weights)
    }
}

fn weighted_average(components: &[Volume], weights: &[f64]) -> Volume {
    let mut avg = components[0].zeros_like();
    let data = avg.data_mut();
    for (c, &mu) in components.iter().zip(weights) {
        for (a, v) in data.iter_mut().zip(c.data()) {
            *a += mu * v;
        }
    }
    avg
}

/// Solver parameters for the Mann iteration.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Mann relaxation parameter in (0, 1).
    pub rho: f64,
    /// Prior/data balance used when deriving agent weights.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop when the relative stacked update norm drops below this.
    pub conv_tol: f64,
    /// Keep the per-iteration consensus volume in the report.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 0.5,
            beta: 1.0,
            max_iters: 50,
            conv_tol: 1e-4,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!(
                "rho must be in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be >= 1"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::config("conv_tol must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
}

/// Per-iteration convergence record of one Mann solve.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Relative stacked update norm ‖w⁺ − w‖/‖w‖ per iteration.
    pub update_norms: Vec<f64>,
    /// Worst relative inter-agent disagreement max_k ‖x_k − x̄‖/‖x̄‖.
    pub disagreements: Vec<f64>,
    /// Wall time per iteration, seconds.
    pub seconds: Vec<f64>,
    pub status: SolverStatus,
    /// ‖G(x) − x‖/‖x‖ over the stacked final agent outputs.
    pub final_equilibrium_residual: f64,
    /// Consensus volume per iteration when history recording is on.
    pub history: Option<Vec<Volume>>,
}

impl ConvergenceReport {
    pub fn iterations(&self) -> usize {
        self.update_norms.len()
    }

    /// Plain-text table: iteration, update norm, disagreement, seconds.
    pub fn render_table(&self) -> String {
        let mut out = String::from("iter  update_norm   disagreement  seconds\n");
        for i in 0..self.update_norms.len() {
            out.push_str(&format!(
                "{:>4}  {:>12.6e}  {:>12.6e}  {:.3}\n",
                i + 1,
                self.update_norms[i],
                self.disagreements[i],
                self.seconds[i]
            ));
        }
        let status = match self.status {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
        };
        out.push_str(&format!(
            "status: {status}, equilibrium residual {:.6e}\n",
            self.final_equilibrium_residual
        ));
        out
    }
}

/// Agent weights for `num_data` data agents and the three-plane prior:
/// data agents get `1/(K(1+β))` each, prior agents `β/(3(1+β))` each.
pub fn make_weights(num_data: usize, beta: f64) -> Vec<f64> {
    make_weights_with_priors(num_data, 3, beta)
}

/// Generalization for a different prior-agent count; the prior block shares
/// `β/(1+β)` evenly. Used by the single-denoiser baseline (one prior agent).
pub fn make_weights_with_priors(num_data: usize, num_priors: usize, beta: f64) -> Vec<f64> {
    assert!(num_data >= 1, "need at least one data agent");
    assert!(num_priors >= 1, "need at least one prior agent");
    assert!(beta > 0.0, "beta must be positive");
    let data_w = 1.0 / (num_data as f64 * (1.0 + beta));
    let prior_w = beta / (num_priors as f64 * (1.0 + beta));
    let mut w = vec![data_w; num_data];
    w.extend(std::iter::repeat(prior_w).take(num_priors));
    w
}

/// Replaces every component with the weighted average of the stack.
pub fn apply_g(state: &StackedState) -> StackedState {
    let avg = state.weighted_average();
    StackedState {
        components: vec![avg; state.components.len()],
        weights: state.weights.clone(),
    }
}

/// Evaluates agent `k` on component `k`, all components independently and
/// in parallel. Agent failures carry the agent index.
pub fn apply_f(state: &StackedState, agents: &[Box<dyn Agent>]) -> Result<StackedState> {
    let components = eval_agents(&state.components, agents)?;
    Ok(StackedState {
        components,
        weights: state.weights.clone(),
    })
}

fn eval_agents(components: &[Volume], agents: &[Box<dyn Agent>]) -> Result<Vec<Volume>> {
    assert_eq!(
        components.len(),
        agents.len(),
        "one agent per stack component"
    );
    let results: Vec<Result<Volume>> = components
        .par_iter()
        .zip(agents.par_iter())
        .map(|(w, agent)| agent.apply(w))
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Agent {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

fn stacked_norm(components: &[Volume]) -> f64 {
    components
        .iter()
        .map(|c| {
            let n = c.norm2();
            n * n
        })
        .sum::<f64>()
        .sqrt()
}

fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Runs the Mann iteration from `x0` and returns the weighted average of the
/// final agent outputs together with the convergence record.
///
/// `weights` must sum to 1 and carry one entry per agent; build them with
/// [`make_weights`] for the standard three-plane prior stack.
pub fn mann_solve(
    x0: &Volume,
    agents: &[Box<dyn Agent>],
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<(Volume, ConvergenceReport)> {
    cfg.validate()?;
    if agents.is_empty() || agents.len() != weights.len() {
        return Err(Error::config(format!(
            "mann_solve needs matching non-empty agents/weights, got {}/{}",
            agents.len(),
            weights.len()
        )));
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!(
            "agent weights must sum to 1, got {wsum}"
        )));
    }

    let n_agents = agents.len();
    let mut w: Vec<Volume> = vec![x0.clone(); n_agents];
    let mut update_norms = Vec::new();
    let mut disagreements = Vec::new();
    let mut seconds = Vec::new();
    let mut history = cfg.record_history.then(Vec::new);
    let mut status = SolverStatus::MaxIters;
    let mut final_x: Vec<Volume> = w.clone();

    for _ in 0..cfg.max_iters {
        let tick = Instant::now();
        let x = eval_agents(&w, agents)?;

        // z̄ = Σ μ_k (2 x_k − w_k); every component of G(2x − w) equals z̄.
        let reflected: Vec<Volume> = x
            .iter()
            .zip(w.iter())
            .map(|(xk, wk)| {
                let mut r = xk.clone();
                r.scale_inplace(2.0);
                r.axpy_inplace(-1.0, wk);
                r
            })
            .collect();
        let zbar = weighted_average(&reflected, weights);

        // w ← w + 2ρ(z̄ − x_k), tracking ‖w⁺ − w‖ against ‖w‖.
        let w_norm = stacked_norm(&w);
        let mut delta_sq = 0.0;
        for (wk, xk) in w.iter_mut().zip(x.iter()) {
            let mut step = zbar.clone();
            step.axpy_inplace(-1.0, xk);
            step.scale_inplace(2.0 * cfg.rho);
            delta_sq += step.dot(&step);
            wk.axpy_inplace(1.0, &step);
        }
        let delta = relative(delta_sq.sqrt(), w_norm);

        let xbar = weighted_average(&x, weights);
        let xbar_norm = xbar.norm2();
        let disagreement = x
            .iter()
            .map(|xk| {
                let mut d = xk.clone();
                d.axpy_inplace(-1.0, &xbar);
                relative(d.norm2(), xbar_norm)
            })
            .fold(0.0f64, f64::max);

        update_norms.push(delta);
        disagreements.push(disagreement);
        seconds.push(tick.elapsed().as_secs_f64());
        if let Some(h) = history.as_mut() {
            h.push(xbar);
        }
        final_x = x;

        if delta < cfg.conv_tol {
            status = SolverStatus::Converged;
            break;
        }
    }

    let xbar = weighted_average(&final_x, weights);
    let equilibrium = {
        let num_sq: f64 = final_x
            .iter()
            .map(|xk| {
                let mut d = xk.clone();
                d.axpy_inplace(-1.0, &xbar);
                let n = d.norm2();
                n * n
            })
            .sum();
        relative(num_sq.sqrt(), stacked_norm(&final_x))
    };

    Ok((
        xbar,
        ConvergenceReport {
            update_norms,
            disagreements,
            seconds,
            status,
            final_equilibrium_residual: equilibrium,
            history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{solve, DenseMatrix};

    /// Proximal map of ½ xᵀQx − bᵀx, solved densely. Test-only agent used to
    /// cross-check the fixed point against direct optimization.
    pub struct QuadraticProxAgent {
        pub q: DenseMatrix,
        pub b: Vec<f64>,
        pub sigma: f64,
    }

    impl Agent for QuadraticProxAgent {
        fn apply(&self, v: &Volume) -> Result<Volume> {
            let n = v.num_voxels();
            let inv_s2 = 1.0 / (self.sigma * self.sigma);
            let mut m = self.q.clone();
            for i in 0..n {
                m.data[i * n + i] += inv_s2;
            }
            let rhs: Vec<f64> = self
                .b
                .iter()
                .zip(v.data())
                .map(|(b, vi)| b + inv_s2 * vi)
                .collect();
            let x = solve(&m, &rhs)?;
            Volume::from_data(v.dims(), v.voxel_size, v.origin, x)
        }

        fn label(&self) -> String {
            "quadratic_prox".into()
        }
    }

    struct IdentityAgent;

    impl Agent for IdentityAgent {
        fn apply(&self, v: &Volume) -> Result<Volume> {
            Ok(v.clone())
        }

        fn label(&self) -> String {
            "identity".into()
        }
    }

    fn spd_matrix(n: usize, seed: u64) -> DenseMatrix {
        // Q = LᵀL + I with a deterministic pseudo-random L.
        let mut l = vec![0.0; n * n];
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for v in l.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *v = ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0;
        }
        let mut q = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    acc += l[k * n + i] * l[k * n + j];
                }
                q.data[i * n + j] = acc;
            }
        }
        q
    }

    fn pseudo_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
            })
            .collect()
    }

    #[test]
    fn weights_match_hand_arithmetic() {
        let w = make_weights(2, 1.0);
        assert_eq!(w, vec![0.25, 0.25, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);
        let w = make_weights(1, 3.0);
        assert_eq!(w, vec![0.25, 0.25, 0.25, 0.25]);
        let sum: f64 = make_weights(7, 0.37).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_prior_weights() {
        let w = make_weights_with_priors(1, 1, 1.0);
        assert_eq!(w, vec![0.5, 0.5]);
        let w = make_weights_with_priors(2, 1, 3.0);
        assert_eq!(w, vec![0.125, 0.125, 0.75]);
    }

    #[test]
    fn averaging_of_equal_components_is_identity() {
        let mut v = Volume::centered((2, 2, 1), 1.0);
        for (i, val) in v.data_mut().iter_mut().enumerate() {
            *val = i as f64;
        }
        let state = StackedState::new(vec![v.clone(); 4], make_weights(1, 1.0)).unwrap();
        let g = apply_g(&state);
        for c in &g.components {
            for (a, b) in c.data().iter().zip(v.data()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn averaging_weighted_sum_example() {
        // K=1 data agent with μ = [0.5, 1/6, 1/6, 1/6] over [4v, 0, 0, 0].
        let mut v = Volume::centered((2, 1, 1), 1.0);
        v.data_mut()[0] = 1.0;
        v.data_mut()[1] = -2.0;
        let mut big = v.clone();
        big.scale_inplace(4.0);
        let zero = v.zeros_like();
        let state = StackedState::new(
            vec![big, zero.clone(), zero.clone(), zero],
            make_weights(1, 1.0),
        )
        .unwrap();
        let g = apply_g(&state);
        for c in &g.components {
            for (a, b) in c.data().iter().zip(v.data()) {
                assert!((a - 2.0 * b).abs() < 1e-14, "expected 2v");
            }
        }
    }

    #[test]
    fn averaging_is_idempotent() {
        let mut v = Volume::centered((3, 1, 1), 1.0);
        for (i, val) in v.data_mut().iter_mut().enumerate() {
            *val = (i as f64).sin();
        }
        let mut w = v.clone();
        w.scale_inplace(-0.5);
        let state = StackedState::new(
            vec![v, w, Volume::centered((3, 1, 1), 1.0), Volume::centered((3, 1, 1), 1.0)],
            make_weights(1, 1.0),
        )
        .unwrap();
        let once = apply_g(&state);
        let twice = apply_g(&once);
        for (a, b) in once.components[0].data().iter().zip(twice.components[0].data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_agents_fix_everything() {
        let mut x0 = Volume::centered((2, 2, 1), 1.0);
        for (i, val) in x0.data_mut().iter_mut().enumerate() {
            *val = i as f64 * 0.5 - 1.0;
        }
        let agents: Vec<Box<dyn Agent>> = (0..4).map(|_| Box::new(IdentityAgent) as _).collect();
        let weights = make_weights(1, 1.0);
        let cfg = SolverConfig::default();
        let (x, report) = mann_solve(&x0, &agents, &weights, &cfg).unwrap();
        assert_eq!(report.iterations(), 1);
        assert_eq!(report.status, SolverStatus::Converged);
        for (a, b) in x.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_f_identity_agents_is_noop() {
        let v = Volume::centered((2, 2, 2), 1.0);
        let state = StackedState::new(vec![v; 4], make_weights(1, 1.0)).unwrap();
        let agents: Vec<Box<dyn Agent>> = (0..4).map(|_| Box::new(IdentityAgent) as _).collect();
        let out = apply_f(&state, &agents).unwrap();
        for (a, b) in out.components.iter().zip(&state.components) {
            assert_eq!(a.data(), b.data());
        }
    }

    /// The weighted fixed point minimizes Σ_k μ_k f_k, so compare against the
    /// dense solve of (Σ μ_k Q_k) x = Σ μ_k b_k.
    fn consensus_reference(
        qs: &[DenseMatrix],
        bs: &[Vec<f64>],
        weights: &[f64],
        n: usize,
    ) -> Vec<f64> {
        let mut m = DenseMatrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for ((q, b), &mu) in qs.iter().zip(bs).zip(weights) {
            for (acc, v) in m.data.iter_mut().zip(&q.data) {
                *acc += mu * v;
            }
            for (acc, v) in rhs.iter_mut().zip(b) {
                *acc += mu * v;
            }
        }
        solve(&m, &rhs).unwrap()
    }

    #[test]
    fn mann_fixed_point_matches_dense_optimum() {
        let n = 4;
        let template = Volume::centered((2, 2, 1), 1.0);
        let sigma = 1.0;
        let num_agents = 5; // 2 "data" + 3 "prior", all quadratic proxes
        let qs: Vec<DenseMatrix> = (0..num_agents).map(|k| spd_matrix(n, 11 + k as u64)).collect();
        let bs: Vec<Vec<f64>> = (0..num_agents).map(|k| pseudo_vec(n, 101 + k as u64)).collect();

        for beta in [0.5, 1.0, 2.0] {
            let weights = make_weights(2, beta);
            let x_ref = consensus_reference(&qs, &bs, &weights, n);
            let scale = x_ref.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut fixed_points = Vec::new();
            for rho in [0.4, 0.6, 0.8] {
                let agents: Vec<Box<dyn Agent>> = qs
                    .iter()
                    .zip(&bs)
                    .map(|(q, b)| {
                        Box::new(QuadraticProxAgent {
                            q: q.clone(),
                            b: b.clone(),
                            sigma,
                        }) as Box<dyn Agent>
                    })
                    .collect();
                let cfg = SolverConfig {
                    rho,
                    beta,
                    max_iters: 2000,
                    conv_tol: 1e-12,
                    record_history: false,
                };
                let (x, report) = mann_solve(&template, &agents, &weights, &cfg).unwrap();
                assert_eq!(report.status, SolverStatus::Converged, "rho={rho}");
                for (got, expect) in x.data().iter().zip(&x_ref) {
                    assert!(
                        (got - expect).abs() < 1e-5 * scale.max(1.0),
                        "beta={beta} rho={rho}: {got} vs {expect}"
                    );
                }
                fixed_points.push(x);
            }
            // The fixed point does not depend on the relaxation parameter.
            for fx in &fixed_points[1..] {
                for (a, b) in fx.data().iter().zip(fixed_points[0].data()) {
                    assert!((a - b).abs() < 1e-5 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn consensus_invariants_at_convergence() {
        let n = 4;
        let template = Volume::centered((2, 2, 1), 1.0);
        let qs: Vec<DenseMatrix> = (0..4).map(|k| spd_matrix(n, 3 + k as u64)).collect();
        let bs: Vec<Vec<f64>> = (0..4).map(|k| pseudo_vec(n, 31 + k as u64)).collect();
        let agents: Vec<Box<dyn Agent>> = qs
            .iter()
            .zip(&bs)
            .map(|(q, b)| {
                Box::new(QuadraticProxAgent {
                    q: q.clone(),
                    b: b.clone(),
                    sigma: 1.0,
                }) as Box<dyn Agent>
            })
            .collect();
        let weights = make_weights(1, 1.0);
        let cfg = SolverConfig {
            rho: 0.5,
            beta: 1.0,
            max_iters: 3000,
            conv_tol: 1e-9,
            record_history: true,
        };
        let (_, report) = mann_solve(&template, &agents, &weights, &cfg).unwrap();
        assert_eq!(report.status, SolverStatus::Converged);
        let last_disagreement = *report.disagreements.last().unwrap();
        assert!(
            last_disagreement <= 10.0 * cfg.conv_tol,
            "consensus disagreement {last_disagreement} vs 10*conv_tol"
        );
        assert!(
            report.final_equilibrium_residual <= 10.0 * cfg.conv_tol,
            "equilibrium residual {} vs 10*conv_tol",
            report.final_equilibrium_residual
        );
        assert_eq!(report.history.as_ref().unwrap().len(), report.iterations());
    }

    #[test]
    fn mann_residual_mostly_nonincreasing_on_proximal_agents() {
        // Soft check: with proximal agents of strongly convex objectives the
        // update norm should settle into monotone decay after burn-in.
        // Violations are flagged, not failed; the iteration is averaged in
        // the fixed-point distance, not in the residual.
        let n = 4;
        let template = Volume::centered((2, 2, 1), 1.0);
        let agents: Vec<Box<dyn Agent>> = (0..4)
            .map(|k| {
                Box::new(QuadraticProxAgent {
                    q: spd_matrix(n, 41 + k as u64),
                    b: pseudo_vec(n, 410 + k as u64),
                    sigma: 1.0,
                }) as Box<dyn Agent>
            })
            .collect();
        let cfg = SolverConfig {
            rho: 0.5,
            beta: 1.0,
            max_iters: 60,
            conv_tol: 1e-14,
            record_history: false,
        };
        let (_, report) = mann_solve(&template, &agents, &make_weights(1, 1.0), &cfg).unwrap();
        let mut violations = 0;
        for pair in report.update_norms[5..].windows(2) {
            if pair[1] > pair[0] * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        if violations > 0 {
            println!("FLAG: Mann residual increased {violations} time(s) after burn-in");
        }
    }

    #[test]
    fn agent_failure_is_tagged_with_index() {
        struct FailingAgent;
        impl Agent for FailingAgent {
            fn apply(&self, _v: &Volume) -> Result<Volume> {
                Err(Error::Solver {
                    reason: "deliberate".into(),
                    trace: vec![],
                })
            }
            fn label(&self) -> String {
                "failing".into()
            }
        }
        let x0 = Volume::centered((2, 1, 1), 1.0);
        let agents: Vec<Box<dyn Agent>> = vec![Box::new(IdentityAgent), Box::new(FailingAgent)];
        let err = mann_solve(&x0, &agents, &[0.5, 0.5], &SolverConfig::default()).unwrap_err();
        match err {
            Error::Agent { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parallel_and_sequential_agent_evaluation_agree() {
        // Purity check: results must not depend on scheduling.
        let n = 4;
        let template = Volume::centered((2, 2, 1), 1.0);
        let agents: Vec<Box<dyn Agent>> = (0..5)
            .map(|k| {
                Box::new(QuadraticProxAgent {
                    q: spd_matrix(n, 7 + k as u64),
                    b: pseudo_vec(n, 77 + k as u64),
                    sigma: 0.7,
                }) as Box<dyn Agent>
            })
            .collect();
        let mut comps = Vec::new();
        for k in 0..5 {
            let mut c = template.clone();
            for (i, v) in c.data_mut().iter_mut().enumerate() {
                *v = (i + k) as f64 * 0.3;
            }
            comps.push(c);
        }
        let par = eval_agents(&comps, &agents).unwrap();
        let seq: Vec<Volume> = comps
            .iter()
            .zip(&agents)
            .map(|(c, a)| a.apply(c).unwrap())
            .collect();
        for (p, s) in par.iter().zip(&seq) {
            assert_eq!(p.data(), s.data(), "scheduling changed a result");
        }
    }
}
