//! Symbolic target functions, their computation graphs, and sampled datasets.

mod catalog;
mod parse;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{builtin_catalog, lookup, CatalogEntry, TEACHER_SEED};
pub use parse::parse_expression;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("variable x{index} exceeds input dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("domain violation at node {node}: {msg}")]
    DomainViolation { node: usize, msg: &'static str },
    #[error("input has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("dimension {0} has zero variance")]
    ZeroVariance(usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("unknown catalog target `{0}`")]
    UnknownTarget(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    fn apply(self, a: f64, node: usize) -> Result<f64, TargetError> {
        let v = match self {
            UnaryOp::Neg => -a,
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => {
                if a <= 0.0 {
                    return Err(TargetError::DomainViolation { node, msg: "log of non-positive value" });
                }
                a.ln()
            }
            UnaryOp::Sqrt => {
                if a < 0.0 {
                    return Err(TargetError::DomainViolation { node, msg: "sqrt of negative value" });
                }
                a.sqrt()
            }
            UnaryOp::Tanh => a.tanh(),
        };
        Ok(v)
    }
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64, node: usize) -> Result<f64, TargetError> {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return Err(TargetError::DomainViolation { node, msg: "division by zero" });
                }
                a / b
            }
            BinaryOp::Pow => {
                if a == 0.0 && b < 0.0 {
                    return Err(TargetError::DomainViolation { node, msg: "zero raised to a negative power" });
                }
                if b.fract() == 0.0 && b.abs() <= 64.0 {
                    a.powi(b as i32)
                } else if a < 0.0 {
                    return Err(TargetError::DomainViolation {
                        node,
                        msg: "negative base with non-integer exponent",
                    });
                } else {
                    a.powf(b)
                }
            }
        };
        Ok(v)
    }
}

/// One node of a binarized computation graph. Inputs always refer to nodes
/// with strictly smaller indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// Zero-based input coordinate.
    Var(usize),
    Const(f64),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
}

impl Node {
    pub fn arity(&self) -> usize {
        match self {
            Node::Var(_) | Node::Const(_) => 0,
            Node::Unary(..) => 1,
            Node::Binary(..) => 2,
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Node::Var(_) | Node::Const(_) => (None, None),
            Node::Unary(_, a) => (Some(a), None),
            Node::Binary(_, a, b) => (Some(a), Some(b)),
        };
        a.into_iter().chain(b)
    }
}

/// A target function `f: R^d -> R` defined by a directed acyclic graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    name: String,
    dim: usize,
    nodes: Vec<Node>,
    output: usize,
}

impl TargetSpec {
    pub fn new(name: impl Into<String>, dim: usize, nodes: Vec<Node>, output: usize) -> Result<Self, TargetError> {
        if dim == 0 {
            return Err(TargetError::InvalidGraph("input dimension must be positive".into()));
        }
        if output >= nodes.len() {
            return Err(TargetError::InvalidGraph(format!(
                "output node {output} out of range for {} nodes",
                nodes.len()
            )));
        }
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Var(v) = *node {
                if v >= dim {
                    return Err(TargetError::VariableOutOfRange { index: v + 1, dim });
                }
            }
            if let Some(bad) = node.inputs().find(|&j| j >= i) {
                return Err(TargetError::InvalidGraph(format!("node {i} reads node {bad}, which is not earlier")));
            }
        }
        Ok(TargetSpec { name: name.into(), dim, nodes, output })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn output_node(&self) -> usize {
        self.output
    }

    /// Largest input count of any non-leaf node (d*).
    pub fn max_arity(&self) -> usize {
        self.nodes.iter().map(Node::arity).max().unwrap_or(0)
    }

    /// Evaluates every node in index order and returns the output value.
    pub fn eval(&self, x: &[f64]) -> Result<f64, TargetError> {
        let mut scratch = Vec::with_capacity(self.nodes.len());
        self.eval_with(x, &mut scratch)
    }

    pub(crate) fn eval_with(&self, x: &[f64], vals: &mut Vec<f64>) -> Result<f64, TargetError> {
        if x.len() != self.dim {
            return Err(TargetError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        vals.clear();
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match *node {
                Node::Var(j) => x[j],
                Node::Const(c) => c,
                Node::Unary(op, a) => op.apply(vals[a], i)?,
                Node::Binary(op, a, b) => op.apply(vals[a], vals[b], i)?,
            };
            vals.push(v);
        }
        Ok(vals[self.output])
    }

    fn fmt_node(&self, i: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.nodes[i] {
            Node::Var(j) => write!(f, "x{}", j + 1),
            Node::Const(c) => {
                if c < 0.0 {
                    write!(f, "(0 - {:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "(-")?;
                self.fmt_node(a, f)?;
                write!(f, ")")
            }
            Node::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                self.fmt_node(a, f)?;
                write!(f, ")")
            }
            Node::Binary(op, a, b) => {
                write!(f, "(")?;
                self.fmt_node(a, f)?;
                write!(f, " {} ", op.symbol())?;
                self.fmt_node(b, f)?;
                write!(f, ")")
            }
        }
    }
}

/// Prints a fully parenthesized expression that parses back to the same function.
impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(self.output, f)
    }
}

pub fn eval_target(spec: &TargetSpec, x: &[f64]) -> Result<f64, TargetError> {
    spec.eval(x)
}

pub fn max_arity(spec: &TargetSpec) -> usize {
    spec.max_arity()
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, TargetError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(TargetError::InvalidDomain(format!(
                "bound lengths {} and {} must match and be nonzero",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(TargetError::InvalidDomain(format!("axis {i}: need lo < hi, got [{l}, {h}]")));
            }
        }
        Ok(Domain { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, TargetError> {
        Domain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// Sampled inputs (row-major `n × dim`) and their exact target values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub dim: usize,
    pub seed: u64,
    pub domain: Domain,
}

impl Dataset {
    /// Builds a dataset from explicit rows. Inputs are not checked against the domain.
    pub fn from_parts(inputs: Vec<f64>, targets: Vec<f64>, dim: usize, domain: Domain) -> Self {
        assert_eq!(inputs.len(), targets.len() * dim, "inputs must hold targets.len() rows of width dim");
        Dataset { inputs, targets, dim, seed: 0, domain }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.inputs.chunks_exact(self.dim)
    }

    /// Same inputs, different targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Self {
        assert_eq!(targets.len(), self.len());
        Dataset { targets, ..self.clone() }
    }

    /// Keeps only rows for which `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Self {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                inputs.extend_from_slice(self.row(i));
                targets.push(self.targets[i]);
            }
        }
        Dataset { inputs, targets, ..self.clone() }
    }
}

/// Draws `n` points uniformly from `domain`, deterministically in `seed`.
pub fn sample_dataset(spec: &TargetSpec, domain: &Domain, n: usize, seed: u64) -> Result<Dataset, TargetError> {
    if n == 0 {
        return Err(TargetError::TooFewSamples { need: 1, got: 0 });
    }
    if domain.dim() != spec.dim() {
        return Err(TargetError::DimensionMismatch { expected: spec.dim(), got: domain.dim() });
    }
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            let u: f64 = rng.gen();
            // clamp guards the hi bound against rounding in lo + w*u
            inputs.push((domain.lo[j] + domain.width(j) * u).min(domain.hi[j]));
        }
    }
    let mut scratch = Vec::new();
    let targets = inputs
        .chunks_exact(d)
        .map(|x| spec.eval_with(x, &mut scratch))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { inputs, targets, dim: d, seed, domain: domain.clone() })
}

/// Per-dimension mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn from_dataset(data: &Dataset) -> Result<Self, TargetError> {
        let n = data.len();
        if n < 2 {
            return Err(TargetError::TooFewSamples { need: 2, got: n });
        }
        let d = data.dim;
        let mut mean = vec![0.0; d];
        for row in data.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        if let Some(j) = std.iter().position(|&s| !(s > 0.0)) {
            return Err(TargetError::ZeroVariance(j));
        }
        Ok(NormStats { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        NormStats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (x[j] - self.mean[j]) / self.std[j];
        }
    }

    pub fn invert(&self, z: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = z[j] * self.std[j] + self.mean[j];
        }
    }

    /// Standardizes the inputs of `data` with these statistics.
    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for row in out.inputs.chunks_exact_mut(data.dim) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn inverse_transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for row in out.inputs.chunks_exact_mut(data.dim) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        out
    }
}

/// Standardizes inputs to zero mean and unit population variance per dimension.
pub fn normalize_inputs(data: &Dataset) -> Result<(Dataset, NormStats), TargetError> {
    let stats = NormStats::from_dataset(data)?;
    Ok((stats.transform(data), stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> TargetSpec {
        parse_expression("x1*x2", 2).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_target(&xy(), &[3.0, 4.0]).unwrap(), 12.0);
        let c = parse_expression("cos(2*x1)", 1).unwrap();
        assert_eq!(c.eval(&[0.0]).unwrap(), 1.0);
        let dot = parse_expression("x1*x2+x3*x4+x5*x6", 6).unwrap();
        assert_eq!(dot.eval(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(), 44.0);
    }

    #[test]
    fn domain_violations_name_the_node() {
        let s = parse_expression("log(x1)", 1).unwrap();
        assert!(matches!(s.eval(&[-1.0]), Err(TargetError::DomainViolation { node: 1, .. })));
        let s = parse_expression("1/(x1-x1)", 1).unwrap();
        assert!(matches!(s.eval(&[2.0]), Err(TargetError::DomainViolation { .. })));
        let s = parse_expression("sqrt(x1)", 1).unwrap();
        assert!(s.eval(&[-0.5]).is_err());
        let s = parse_expression("x1^(0-2)", 1).unwrap();
        assert!(s.eval(&[0.0]).is_err());
        assert!(matches!(s.eval(&[0.0, 1.0]), Err(TargetError::DimensionMismatch { .. })));
    }

    #[test]
    fn max_arity_examples() {
        assert_eq!(parse_expression("x1*x2*x3", 3).unwrap().max_arity(), 2);
        assert_eq!(parse_expression("x1", 1).unwrap().max_arity(), 0);
        assert_eq!(parse_expression("sin(x1)", 1).unwrap().max_arity(), 1);
    }

    #[test]
    fn graph_validation() {
        assert!(TargetSpec::new("bad", 1, vec![Node::Unary(UnaryOp::Sin, 0)], 0).is_err());
        assert!(TargetSpec::new("bad", 1, vec![Node::Var(1)], 0).is_err());
        assert!(TargetSpec::new("bad", 1, vec![Node::Var(0)], 1).is_err());
        assert!(TargetSpec::new("ok", 1, vec![Node::Var(0), Node::Unary(UnaryOp::Sin, 0)], 1).is_ok());
    }

    #[test]
    fn sampling_is_seeded_and_in_bounds() {
        let dom = Domain::cube(2, 1.0, 5.0).unwrap();
        let a = sample_dataset(&xy(), &dom, 1000, 0).unwrap();
        assert!(a.rows().all(|r| dom.contains(r)));
        let b = sample_dataset(&xy(), &dom, 1000, 0).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(&xy(), &dom, 1000, 1).unwrap();
        assert_ne!(a.inputs, c.inputs);
        for (row, y) in a.rows().zip(&a.targets) {
            assert_eq!(*y, row[0] * row[1]);
        }
    }

    #[test]
    fn sample_mean_matches_uniform_mean() {
        let dom = Domain::cube(2, 1.0, 5.0).unwrap();
        let data = sample_dataset(&xy(), &dom, 100_000, 1).unwrap();
        for j in 0..2 {
            let mean = data.rows().map(|r| r[j]).sum::<f64>() / data.len() as f64;
            assert!((mean - 3.0).abs() < 0.02, "axis {j}: mean {mean}");
        }
    }

    #[test]
    fn sample_rejects_bad_requests() {
        let dom = Domain::cube(2, 1.0, 5.0).unwrap();
        assert!(sample_dataset(&xy(), &dom, 0, 0).is_err());
        let dom1 = Domain::cube(1, 1.0, 5.0).unwrap();
        assert!(sample_dataset(&xy(), &dom1, 10, 0).is_err());
        assert!(Domain::new(vec![1.0], vec![1.0]).is_err());
        let log = parse_expression("log(x1)", 1).unwrap();
        let neg = Domain::cube(1, -1.0, 1.0).unwrap();
        assert!(matches!(sample_dataset(&log, &neg, 50, 0), Err(TargetError::DomainViolation { .. })));
    }

    #[test]
    fn normalization_two_points() {
        let dom = Domain::cube(1, 0.0, 4.0).unwrap();
        let data = Dataset::from_parts(vec![1.0, 3.0], vec![0.0, 0.0], 1, dom);
        let (z, stats) = normalize_inputs(&data).unwrap();
        assert_eq!(stats.mean, vec![2.0]);
        assert_eq!(stats.std, vec![1.0]);
        assert_eq!(z.inputs, vec![-1.0, 1.0]);
    }

    #[test]
    fn normalization_moments_and_inverse() {
        let dom = Domain::cube(2, 1.0, 5.0).unwrap();
        let data = sample_dataset(&xy(), &dom, 777, 3).unwrap();
        let (z, stats) = normalize_inputs(&data).unwrap();
        assert_eq!(z.targets, data.targets);
        let again = NormStats::from_dataset(&z).unwrap();
        for j in 0..2 {
            assert!(again.mean[j].abs() < 1e-12);
            assert!((again.std[j] - 1.0).abs() < 1e-12);
        }
        // standardized data is left alone
        let (zz, _) = normalize_inputs(&z).unwrap();
        for (a, b) in zz.inputs.iter().zip(&z.inputs) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = stats.inverse_transform(&z);
        for (a, b) in back.inputs.iter().zip(&data.inputs) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn normalization_rejects_constant_dimension() {
        let dom = Domain::cube(2, 0.0, 4.0).unwrap();
        let data = Dataset::from_parts(vec![1.0, 2.0, 3.0, 2.0], vec![0.0, 0.0], 2, dom.clone());
        assert_eq!(normalize_inputs(&data), Err(TargetError::ZeroVariance(1)));
        let one = Dataset::from_parts(vec![1.0, 2.0], vec![0.0], 2, dom);
        assert!(normalize_inputs(&one).is_err());
    }

    #[test]
    fn display_round_trips() {
        for (text, dim) in [("x1*x2*x3", 3), ("-x1^2 + 3.5/x2", 2), ("exp(-x1)*sin(x1-0.25)", 1)] {
            let s = parse_expression(text, dim).unwrap();
            let t = parse_expression(&s.to_string(), dim).unwrap();
            let x = [1.3, 2.7, 0.4];
            assert_eq!(s.eval(&x[..dim]).unwrap(), t.eval(&x[..dim]).unwrap(), "{s}");
        }
    }
}
