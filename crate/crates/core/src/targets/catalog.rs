use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_expression, BinaryOp, Domain, Node, TargetError, TargetSpec, UnaryOp};

/// Seed for the teacher network's weights.
pub const TEACHER_SEED: u64 = 20_221_024;

const TEACHER_LAYERS: [usize; 4] = [2, 3, 3, 1];

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub spec: TargetSpec,
    pub domain: Domain,
    pub description: &'static str,
}

/// The fixed experiment registry. Names are stable CLI identifiers.
pub fn builtin_catalog() -> Vec<CatalogEntry> {
    let formula = |name: &str, text: &str, dim: usize, lo: f64, hi: f64, description| CatalogEntry {
        spec: parse_expression(text, dim).expect("catalog formula parses").with_name(name),
        domain: Domain::cube(dim, lo, hi).expect("catalog domain is valid"),
        description,
    };
    vec![
        formula("cos2x", "cos(2*x1)", 1, 1.0, 5.0, "cos(2 x1) on [1,5]"),
        formula("xy", "x1*x2", 2, 1.0, 5.0, "x1 x2 on [1,5]^2"),
        formula("xyz", "x1*x2*x3", 3, 1.0, 5.0, "x1 x2 x3 on [1,5]^3"),
        formula("dot3", "x1*x4 + x2*x5 + x3*x6", 6, 1.0, 5.0, "x1 x4 + x2 x5 + x3 x6 on [1,5]^6"),
        formula(
            "poly1d",
            "x1^4 - 0.8*x1^3 - 0.6*x1^2 + 0.5*x1 + 0.2",
            1,
            -1.0,
            1.0,
            "fixed quartic on [-1,1]",
        ),
        CatalogEntry {
            spec: teacher_network(TEACHER_SEED),
            domain: Domain::cube(2, -1.0, 1.0).expect("valid"),
            description: "seeded depth-3 width-3 tanh network on [-1,1]^2",
        },
        formula("expxy", "exp(-x1*x2/8)", 2, 1.0, 5.0, "smooth non-separable 2D target on [1,5]^2"),
        formula("expxyz", "exp(-x1*x2*x3/40)", 3, 1.0, 5.0, "smooth non-separable 3D target on [1,5]^3"),
    ]
}

pub fn lookup(name: &str) -> Result<CatalogEntry, TargetError> {
    builtin_catalog()
        .into_iter()
        .find(|e| e.spec.name() == name)
        .ok_or_else(|| TargetError::UnknownTarget(name.to_string()))
}

/// A `[2, 3, 3, 1]` tanh network written out as a computation graph. Weights and
/// biases are uniform in `±1/sqrt(fan_in)`.
fn teacher_network(seed: u64) -> TargetSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Node> = Vec::new();
    let push = |nodes: &mut Vec<Node>, n: Node| {
        nodes.push(n);
        nodes.len() - 1
    };
    let mut layer: Vec<usize> = (0..TEACHER_LAYERS[0]).map(|j| push(&mut nodes, Node::Var(j))).collect();
    let n_maps = TEACHER_LAYERS.len() - 1;
    for (l, w) in TEACHER_LAYERS.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut next = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            let mut acc = None;
            for &src in &layer {
                let c = push(&mut nodes, Node::Const(rng.gen_range(-bound..bound)));
                let term = push(&mut nodes, Node::Binary(BinaryOp::Mul, c, src));
                acc = Some(match acc {
                    None => term,
                    Some(a) => push(&mut nodes, Node::Binary(BinaryOp::Add, a, term)),
                });
            }
            let b = push(&mut nodes, Node::Const(rng.gen_range(-bound..bound)));
            let mut out = push(&mut nodes, Node::Binary(BinaryOp::Add, acc.expect("fan_in > 0"), b));
            if l + 1 < n_maps {
                out = push(&mut nodes, Node::Unary(UnaryOp::Tanh, out));
            }
            next.push(out);
        }
        layer = next;
    }
    let out = layer[0];
    TargetSpec::new("teacher", TEACHER_LAYERS[0], nodes, out).expect("teacher graph is valid")
}
