//! Per-agent simulation of the iteration. Each agent stores only its own
//! block, its row of `W`, and an inbox; all exchange goes through
//! [`NodeNetwork::deliver`], which logs every message.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::manifold::{project_tangent, Mat, Retraction, StiefelPoint, TangentVector};
use crate::network::MixingMatrix;
use crate::state::NetworkState;

use super::gradient::{check_network, tangent_step, GradientField, GradientKind};
use super::run::{drive, ConvergenceTrace, Dynamics, StopRule};

/// One logged message: agent `from` sent a `d x r` block to agent `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub iteration: usize,
    /// Communication round within the iteration, starting at 1.
    pub round: u32,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageLog {
    deliveries: Vec<Delivery>,
}

/// Result of [`MessageLog::audit`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub deliveries: usize,
    /// Deliveries between agents that are not graph neighbors.
    pub non_neighbor: usize,
    /// Iterations whose message count differs from `t * 2|E|`.
    pub miscounted_iterations: Vec<usize>,
    pub expected_per_iteration: usize,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.non_neighbor == 0 && self.miscounted_iterations.is_empty()
    }
}

impl MessageLog {
    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }

    pub fn len(&self) -> usize {
        self.deliveries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deliveries.is_empty()
    }

    /// Checks every delivery against the sparsity of `w` and the per-iteration count.
    pub fn audit(&self, w: &MixingMatrix, t: u32) -> AuditReport {
        let non_neighbor = self
            .deliveries
            .iter()
            .filter(|m| !w.is_edge(m.to, m.from))
            .count();
        let mut per_iteration: BTreeMap<usize, usize> = BTreeMap::new();
        for m in &self.deliveries {
            *per_iteration.entry(m.iteration).or_default() += 1;
        }
        let expected = t as usize * 2 * w.edge_count();
        AuditReport {
            deliveries: self.deliveries.len(),
            non_neighbor,
            miscounted_iterations: per_iteration
                .into_iter()
                .filter(|&(_, c)| c != expected)
                .map(|(k, _)| k)
                .collect(),
            expected_per_iteration: expected,
        }
    }
}

/// Local memory of one agent.
#[derive(Clone, Debug)]
struct Agent {
    x: StiefelPoint,
    /// Own row of `W`: `(j, W_ij)` for `W_ij != 0`, ascending `j`.
    weights: Vec<(usize, f64)>,
    /// `g^1_i = x_i - sum_j W_ij x_j`.
    g1: Option<Mat>,
    /// Latest `g^l_i`.
    g: Option<Mat>,
    inbox: BTreeMap<usize, Mat>,
}

impl Agent {
    fn neighbors(&self, me: usize) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .map(|&(j, _)| j)
            .filter(move |&j| j != me)
    }

    /// `sum_j W_ij b_j` with `own` for `j = i` and inbox blocks otherwise, in
    /// the same order and operations as the centralized mixing.
    fn weighted_sum(&self, me: usize, own: &Mat) -> Result<Mat> {
        let pick = |j: usize| -> Result<&Mat> {
            if j == me {
                Ok(own)
            } else {
                self.inbox.get(&j).ok_or_else(|| {
                    Error::InvalidDimensions(format!("agent {me} is missing the message from {j}"))
                })
            }
        };
        let mut it = self.weights.iter();
        let &(j0, w0) = it.next().expect("positive diagonal");
        let mut acc = pick(j0)?.clone() * w0;
        for &(j, wij) in it {
            acc += pick(j)?.clone() * wij;
        }
        Ok(acc)
    }
}

/// Synchronous network of agents exchanging blocks with their neighbors.
#[derive(Clone, Debug)]
pub struct NodeNetwork {
    agents: Vec<Agent>,
    t: u32,
    alpha: f64,
    retraction: Retraction,
    iteration: usize,
    /// Iteration whose gradient rounds have already run.
    communicated: Option<usize>,
    log: MessageLog,
}

impl NodeNetwork {
    pub fn new(
        w: &MixingMatrix,
        x0: NetworkState,
        t: u32,
        alpha: f64,
        retraction: Retraction,
    ) -> Result<Self> {
        check_network(&x0, w)?;
        if t == 0 {
            return Err(Error::config("t", "must be at least 1"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(
                "alpha",
                format!("stepsize must be positive, got {alpha}"),
            ));
        }
        let agents = x0
            .into_blocks()
            .into_iter()
            .enumerate()
            .map(|(i, x)| Agent {
                x,
                weights: w.row_support(i),
                g1: None,
                g: None,
                inbox: BTreeMap::new(),
            })
            .collect();
        Ok(NodeNetwork {
            agents,
            t,
            alpha,
            retraction,
            iteration: 0,
            communicated: None,
            log: MessageLog::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    /// Observer view: the stacked blocks currently held by the agents.
    pub fn state(&self) -> NetworkState {
        NetworkState::new(self.agents.iter().map(|a| a.x.clone()).collect())
            .expect("agents hold valid blocks of equal shape")
    }

    /// Routes `payload` from `from` to `to`, recording the delivery.
    fn deliver(&mut self, round: u32, from: usize, to: usize, payload: Mat) {
        self.log.deliveries.push(Delivery {
            iteration: self.iteration,
            round,
            from,
            to,
        });
        self.agents[to].inbox.insert(from, payload);
    }

    /// Every agent sends `payload(agent)` to each of its neighbors.
    fn broadcast(&mut self, round: u32, payload: impl Fn(&Agent) -> Mat) {
        let mut outgoing = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let p = payload(a);
            for j in a.neighbors(i) {
                outgoing.push((i, j, p.clone()));
            }
        }
        for (from, to, p) in outgoing {
            self.deliver(round, from, to, p);
        }
    }

    /// Runs the `t` communication rounds of the current iteration; each agent
    /// ends with `g^t_i`.
    fn communicate(&mut self) -> Result<()> {
        if self.communicated == Some(self.iteration) {
            return Ok(());
        }
        self.broadcast(1, |a| a.x.as_matrix().clone());
        for i in 0..self.n() {
            let a = &self.agents[i];
            let own = a.x.as_matrix();
            let g1 = own - a.weighted_sum(i, own)?;
            let a = &mut self.agents[i];
            a.g = Some(g1.clone());
            a.g1 = Some(g1);
            a.inbox.clear();
        }
        for round in 2..=self.t {
            self.broadcast(round, |a| a.g.clone().expect("set in round 1"));
            for i in 0..self.n() {
                let a = &self.agents[i];
                let prev = a.g.as_ref().expect("set in round 1");
                let next = a.g1.as_ref().expect("set in round 1") + a.weighted_sum(i, prev)?;
                let a = &mut self.agents[i];
                a.g = Some(next);
                a.inbox.clear();
            }
        }
        self.communicated = Some(self.iteration);
        Ok(())
    }

    /// Local Riemannian gradients `P_T(g^t_i)` of the current iteration.
    pub fn local_gradients(&mut self) -> Result<GradientField> {
        self.communicate()?;
        let blocks = self
            .agents
            .iter()
            .map(|a| {
                project_tangent(&a.x, a.g.as_ref().expect("communicated"))
                    .map(TangentVector::into_matrix)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GradientField::new(GradientKind::Riemannian, blocks))
    }

    /// One full iteration: communication, then a local retraction at every agent.
    pub fn step(&mut self) -> Result<()> {
        let grad = self.local_gradients()?;
        self.apply(&grad)
    }

    fn apply(&mut self, grad: &GradientField) -> Result<()> {
        let (alpha, retraction) = (self.alpha, self.retraction);
        for (a, g) in self.agents.iter_mut().zip(grad.blocks()) {
            a.x = retraction.apply(&tangent_step(&a.x, g, -alpha))?;
            a.g1 = None;
            a.g = None;
        }
        self.iteration += 1;
        Ok(())
    }
}

impl Dynamics for NodeNetwork {
    fn state(&self) -> NetworkState {
        NodeNetwork::state(self)
    }

    fn gradient(&mut self) -> Result<GradientField> {
        self.local_gradients()
    }

    fn advance(&mut self, grad: &GradientField) -> Result<()> {
        self.apply(grad)
    }
}

/// Runs the message-passing simulation with an explicit matrix and stepsize;
/// also returns the message log.
pub fn node_sim_run_from(
    w: &MixingMatrix,
    x0: NetworkState,
    t: u32,
    alpha: f64,
    retraction: Retraction,
    stop: &StopRule,
) -> Result<(ConvergenceTrace, NetworkState, MessageLog)> {
    let mut net = NodeNetwork::new(w, x0, t, alpha, retraction)?;
    let (trace, state) = drive(&mut net, w, t, stop)?;
    Ok((trace, state, net.log))
}

/// [`super::run_drcs`] in message-passing mode regardless of `config.mode`.
pub fn node_sim_run(config: &super::RunConfig) -> Result<(ConvergenceTrace, NetworkState)> {
    let (w, _, alpha) = config.resolve()?;
    let x0 = config.initial_state()?;
    let (trace, state, _) = node_sim_run_from(
        &w,
        x0,
        config.t,
        alpha,
        config.retraction,
        &config.stop_rule(),
    )?;
    Ok((trace, state))
}
