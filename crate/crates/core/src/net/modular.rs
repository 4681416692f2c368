use serde::{Deserialize, Serialize};

use super::mlp::Workspace;
use super::{mlp_init, Activation, Mlp, NetError, Trainable};
use crate::targets::{Dataset, Node, TargetSpec};

/// A network shaped like a target's computation graph: every operation node
/// is replaced by its own small MLP taking the node's inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModularRepr")]
pub struct ModularNet {
    graph: TargetSpec,
    subnets: Vec<Mlp>,
    /// `wiring[node]` is the subnet standing in for `node`, if it is an operation.
    wiring: Vec<Option<usize>>,
    #[serde(skip)]
    params: Vec<f64>,
}

impl ModularNet {
    /// Wires `subnets` (one per operation node, in node order) into `graph`.
    pub fn new(graph: TargetSpec, subnets: Vec<Mlp>) -> Result<Self, NetError> {
        let mut wiring = Vec::with_capacity(graph.nodes().len());
        let mut next = 0;
        for (k, node) in graph.nodes().iter().enumerate() {
            let arity = node.arity();
            if arity == 0 {
                wiring.push(None);
                continue;
            }
            let Some(sub) = subnets.get(next) else {
                return Err(NetError::ShapeMismatch(format!("{} subnets for more operation nodes", subnets.len())));
            };
            if sub.input_dim() != arity {
                return Err(NetError::ArityMismatch { node: k, arity, width: sub.input_dim() });
            }
            wiring.push(Some(next));
            next += 1;
        }
        if next != subnets.len() {
            return Err(NetError::ShapeMismatch(format!("{} subnets for {next} operation nodes", subnets.len())));
        }
        let params = subnets.iter().flat_map(|s| s.params().iter().copied()).collect();
        Ok(ModularNet { graph, subnets, wiring, params })
    }

    pub fn graph(&self) -> &TargetSpec {
        &self.graph
    }

    pub fn subnets(&self) -> &[Mlp] {
        &self.subnets
    }

    pub fn subnet_for(&self, node: usize) -> Option<&Mlp> {
        self.wiring.get(node).copied().flatten().map(|s| &self.subnets[s])
    }

    pub fn input_dim(&self) -> usize {
        self.graph.dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut st = self.state();
        Ok(self.forward_at(self.params(), x, &mut st))
    }

    fn state(&self) -> State {
        State {
            values: vec![0.0; self.graph.nodes().len()],
            adjoint: vec![0.0; self.graph.nodes().len()],
            workspaces: self.subnets.iter().map(Mlp::workspace).collect(),
            offsets: self
                .subnets
                .iter()
                .scan(0, |off, s| {
                    let o = *off;
                    *off += s.n_params();
                    Some(o)
                })
                .collect(),
        }
    }

    fn forward_at(&self, theta: &[f64], x: &[f64], st: &mut State) -> f64 {
        let mut args = [0.0; 2];
        for (k, node) in self.graph.nodes().iter().enumerate() {
            st.values[k] = match *node {
                Node::Var(i) => x[i],
                Node::Const(c) => c,
                Node::Unary(..) | Node::Binary(..) => {
                    let s = self.wiring[k].expect("operation nodes are wired");
                    let sub = &self.subnets[s];
                    let mut n = 0;
                    for i in node.inputs() {
                        args[n] = st.values[i];
                        n += 1;
                    }
                    let off = st.offsets[s];
                    sub.forward_at(&theta[off..off + sub.n_params()], &args[..n], &mut st.workspaces[s])
                }
            };
        }
        st.values[self.graph.output_node()]
    }

    /// Backpropagates `upstream` from the output through the graph, accumulating into `grad`.
    fn backward(&self, theta: &[f64], st: &mut State, upstream: f64, grad: &mut [f64]) {
        st.adjoint.iter_mut().for_each(|a| *a = 0.0);
        st.adjoint[self.graph.output_node()] = upstream;
        let mut gi = [0.0; 2];
        for (k, node) in self.graph.nodes().iter().enumerate().rev() {
            let Some(s) = self.wiring[k] else { continue };
            let adj = st.adjoint[k];
            if adj == 0.0 {
                continue;
            }
            let sub = &self.subnets[s];
            let (off, n) = (st.offsets[s], sub.n_params());
            let arity = node.arity();
            sub.backward(&theta[off..off + n], &mut st.workspaces[s], adj, &mut grad[off..off + n], Some(&mut gi[..arity]));
            for (slot, i) in node.inputs().enumerate() {
                st.adjoint[i] += gi[slot];
            }
        }
    }

    /// Copy with every subnet's parameters replaced from the flat vector.
    pub fn with_params(&self, theta: &[f64]) -> Result<Self, NetError> {
        let mut out = self.clone();
        if theta.len() != self.params.len() {
            return Err(NetError::DimensionMismatch { expected: self.params.len(), got: theta.len() });
        }
        out.set_params(theta);
        Ok(out)
    }

}

#[derive(Deserialize)]
struct ModularRepr {
    graph: TargetSpec,
    subnets: Vec<Mlp>,
}

impl TryFrom<ModularRepr> for ModularNet {
    type Error = NetError;

    fn try_from(r: ModularRepr) -> Result<Self, NetError> {
        ModularNet::new(r.graph, r.subnets)
    }
}

struct State {
    values: Vec<f64>,
    adjoint: Vec<f64>,
    workspaces: Vec<Workspace>,
    offsets: Vec<usize>,
}

impl Trainable for ModularNet {
    fn input_dim(&self) -> usize {
        ModularNet::input_dim(self)
    }

    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn set_params(&mut self, theta: &[f64]) {
        self.params.copy_from_slice(theta);
        let mut off = 0;
        for s in &mut self.subnets {
            let n = s.n_params();
            Trainable::set_params(s, &theta[off..off + n]);
            off += n;
        }
    }

    fn loss_grad_at(&self, theta: &[f64], data: &Dataset, rows: Option<&[usize]>, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut st = self.state();
        let mut sse = 0.0;
        let mut visit = |i: usize| {
            let r = self.forward_at(theta, data.row(i), &mut st) - data.targets[i];
            sse += r * r;
            self.backward(theta, &mut st, r, grad);
        };
        let count = match rows {
            Some(idx) => {
                idx.iter().for_each(|&i| visit(i));
                idx.len()
            }
            None => {
                (0..data.len()).for_each(&mut visit);
                data.len()
            }
        };
        let scale = 2.0 / count as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        sse / count as f64
    }

    fn loss_at(&self, theta: &[f64], data: &Dataset) -> f64 {
        let mut st = self.state();
        let sse: f64 = data
            .rows()
            .zip(&data.targets)
            .map(|(x, y)| {
                let r = self.forward_at(theta, x, &mut st) - y;
                r * r
            })
            .sum();
        sse / data.len() as f64
    }
}

/// One freshly initialized `[arity, hidden…, 1]` subnet per operation node of `graph`.
pub fn modular_net_build(graph: &TargetSpec, hidden: &[usize], activation: Activation, seed: u64) -> Result<ModularNet, NetError> {
    let mut subnets = Vec::new();
    for node in graph.nodes() {
        let arity = node.arity();
        if arity == 0 {
            continue;
        }
        let mut dims = vec![arity];
        dims.extend_from_slice(hidden);
        dims.push(1);
        subnets.push(mlp_init(&dims, activation, seed.wrapping_add(subnets.len() as u64))?);
    }
    ModularNet::new(graph.clone(), subnets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{multiplication_gadget, GadgetConfig};
    use crate::targets::parse_expression;

    #[test]
    fn gadget_subnets_reproduce_a_triple_product() {
        let g = parse_expression("x1*x2*x3", 3).unwrap();
        let gadget = multiplication_gadget(GadgetConfig::with_scale(1e-3).unwrap()).unwrap();
        let net = ModularNet::new(g.clone(), vec![gadget.clone(), gadget]).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=10 {
            for j in 0..=10 {
                for k in 0..=10 {
                    let x = [-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64, -1.0 + 0.2 * k as f64];
                    let want = g.eval(&x).unwrap();
                    worst = worst.max((net.forward(&x).unwrap() - want).abs());
                }
            }
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn single_node_is_its_subnet() {
        let g = parse_expression("x1*x2", 2).unwrap();
        let net = modular_net_build(&g, &[7], Activation::Tanh, 4).unwrap();
        assert_eq!(net.subnets().len(), 1);
        for x in [[0.3, -0.2], [1.5, 2.5]] {
            assert_eq!(net.forward(&x).unwrap(), net.subnets()[0].forward(&x).unwrap());
        }
    }

    #[test]
    fn param_count_is_sum_over_subnets() {
        let g = parse_expression("sin(x1) + x2*x3", 3).unwrap();
        let net = modular_net_build(&g, &[5, 5], Activation::Tanh, 0).unwrap();
        let sum: usize = net.subnets().iter().map(Mlp::n_params).sum();
        assert_eq!(net.n_params(), sum);
        assert_eq!(net.subnets()[0].input_dim(), 1);
        assert_eq!(net.subnets()[1].input_dim(), 2);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let g = parse_expression("x1*x2", 2).unwrap();
        let wrong = mlp_init(&[3, 4, 1], Activation::Tanh, 0).unwrap();
        assert!(matches!(ModularNet::new(g, vec![wrong]), Err(NetError::ArityMismatch { .. })));
    }
}
