//! Tree-based histogram density over a box domain.
//!
//! The domain is recursively split at the weighted median of a weighted
//! sample, along the side that is widest relative to the domain. Leaf masses
//! mix the sample weight with a uniform floor `ε · volume(leaf)/volume(domain)`,
//! so the density is bounded below on the whole domain and importance
//! weights `g/q` stay finite.
//!
//! # Text format
//!
//! [`TreeHistogram::to_text`] writes a preorder dump, one node per line,
//! indented two spaces per depth level:
//!
//! ```text
//! tree-histogram 1
//! domain <lower_1> .. <lower_d> ; <upper_1> .. <upper_d>
//! mix <ε>
//! split <dim> <position>
//!   leaf <mass> <lower_1> .. <lower_d> ; <upper_1> .. <upper_d>
//!   leaf ...
//! ```
//!
//! A `split` line is followed by its lower child (`x[dim] ≤ position`) and
//! then its upper child. Indentation is informative only.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::Domain;
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_leaves: usize,
    /// Nodes holding at most this (normalized) sample weight are not split.
    pub min_leaf_weight: f64,
    /// Weight ε of the uniform component, in (0, 1].
    pub mix_uniform: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_leaves: 64,
            min_leaf_weight: 0.01,
            mix_uniform: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(usize),
    Split {
        dim: usize,
        at: f64,
        lower: usize,
        upper: usize,
    },
}

/// One cell of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mass: f64,
}

impl Leaf {
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn density(&self) -> f64 {
        self.mass / self.volume()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeHistogram {
    domain: Domain,
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
    mix_uniform: f64,
    cumulative: Vec<f64>,
}

struct Pending {
    node: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    members: Vec<usize>,
    weight: f64,
    splittable: bool,
}

impl TreeHistogram {
    /// Uniform density over `domain` (a single leaf).
    pub fn uniform(domain: &Domain) -> Self {
        let leaf = Leaf {
            lower: domain.lower().to_vec(),
            upper: domain.upper().to_vec(),
            mass: 1.0,
        };
        TreeHistogram::assemble(domain.clone(), vec![Node::Leaf(0)], vec![leaf], 1.0)
    }

    fn assemble(domain: Domain, nodes: Vec<Node>, leaves: Vec<Leaf>, mix_uniform: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = leaves
            .iter()
            .map(|l| {
                acc += l.mass;
                acc
            })
            .collect();
        TreeHistogram {
            domain,
            nodes,
            leaves,
            mix_uniform,
            cumulative,
        }
    }

    /// Fits the histogram to a weighted sample. `points[i]` has weight
    /// `weights[i]`; weights need not be normalized.
    pub fn fit(points: &[Vec<f64>], weights: &[f64], domain: &Domain, config: &TreeConfig) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidInput("points and weights differ in length".into()));
        }
        if !(config.mix_uniform > 0.0 && config.mix_uniform <= 1.0) || config.max_leaves == 0 {
            return Err(Error::InvalidInput(
                "tree config needs 0 < mix_uniform ≤ 1 and max_leaves ≥ 1".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(
                "sample weights must be finite and non-negative".into(),
            ));
        }
        for p in points {
            domain.check(p)?;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptySample);
        }
        let w: Vec<f64> = weights.iter().map(|v| v / total).collect();

        let widths: Vec<f64> = (0..domain.dim()).map(|k| domain.width(k)).collect();
        let mut nodes = vec![Node::Leaf(usize::MAX)];
        let mut open = vec![Pending {
            node: 0,
            lower: domain.lower().to_vec(),
            upper: domain.upper().to_vec(),
            members: (0..points.len()).filter(|&i| w[i] > 0.0).collect(),
            weight: 1.0,
            splittable: true,
        }];

        while open.len() < config.max_leaves {
            // heaviest splittable cell, lowest index on ties
            let Some(pick) = open
                .iter()
                .enumerate()
                .filter(|(_, p)| p.splittable && p.weight > config.min_leaf_weight)
                .fold(None, |best: Option<(usize, f64)>, (i, p)| match best {
                    Some((_, bw)) if bw >= p.weight => best,
                    _ => Some((i, p.weight)),
                })
                .map(|(i, _)| i)
            else {
                break;
            };
            let cell = &open[pick];
            let dim = (0..domain.dim())
                .fold((0, f64::NEG_INFINITY), |(bd, bs), k| {
                    let s = (cell.upper[k] - cell.lower[k]) / widths[k];
                    if s > bs {
                        (k, s)
                    } else {
                        (bd, bs)
                    }
                })
                .0;
            let at = weighted_median(&cell.members, points, &w, dim, cell.weight);
            if !(at > cell.lower[dim] && at < cell.upper[dim]) {
                open[pick].splittable = false;
                continue;
            }
            let cell = open.remove(pick);
            let (lo_members, hi_members): (Vec<usize>, Vec<usize>) =
                cell.members.iter().partition(|&&i| points[i][dim] <= at);
            let lo_weight: f64 = lo_members.iter().map(|&i| w[i]).sum();
            let hi_weight: f64 = hi_members.iter().map(|&i| w[i]).sum();
            let lower_node = nodes.len();
            nodes.push(Node::Leaf(usize::MAX));
            nodes.push(Node::Leaf(usize::MAX));
            nodes[cell.node] = Node::Split {
                dim,
                at,
                lower: lower_node,
                upper: lower_node + 1,
            };
            let mut mid_upper = cell.upper.clone();
            mid_upper[dim] = at;
            let mut mid_lower = cell.lower.clone();
            mid_lower[dim] = at;
            open.push(Pending {
                node: lower_node,
                lower: cell.lower,
                upper: mid_upper,
                members: lo_members,
                weight: lo_weight,
                splittable: true,
            });
            open.push(Pending {
                node: lower_node + 1,
                lower: mid_lower,
                upper: cell.upper,
                members: hi_members,
                weight: hi_weight,
                splittable: true,
            });
        }

        // renumber nodes and leaves in preorder
        let volume = domain.volume();
        let eps = config.mix_uniform;
        let mut cell_of: Vec<Option<Pending>> = (0..nodes.len()).map(|_| None).collect();
        for cell in open {
            let id = cell.node;
            cell_of[id] = Some(cell);
        }
        let mut ordered = Vec::with_capacity(nodes.len());
        let mut leaves = Vec::new();
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((old, parent)) = stack.pop() {
            let id = ordered.len();
            if let Some((p, is_upper)) = parent {
                if let Node::Split { lower, upper, .. } = &mut ordered[p] {
                    if is_upper {
                        *upper = id;
                    } else {
                        *lower = id;
                    }
                }
            }
            match nodes[old] {
                Node::Split { dim, at, lower, upper } => {
                    ordered.push(Node::Split {
                        dim,
                        at,
                        lower: 0,
                        upper: 0,
                    });
                    stack.push((upper, Some((id, true))));
                    stack.push((lower, Some((id, false))));
                }
                Node::Leaf(_) => {
                    let cell = cell_of[old].take().expect("every leaf node has a cell");
                    let vol: f64 = cell.lower.iter().zip(&cell.upper).map(|(l, u)| u - l).product();
                    ordered.push(Node::Leaf(leaves.len()));
                    leaves.push(Leaf {
                        mass: (1.0 - eps) * cell.weight + eps * vol / volume,
                        lower: cell.lower,
                        upper: cell.upper,
                    });
                }
            }
        }
        let nodes = ordered;
        // exact normalization against roundoff
        let total_mass: f64 = leaves.iter().map(|l| l.mass).sum();
        for l in &mut leaves {
            l.mass /= total_mass;
        }
        Ok(TreeHistogram::assemble(domain.clone(), nodes, leaves, eps))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn mix_uniform(&self) -> f64 {
        self.mix_uniform
    }

    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Leaf(i) => return i,
                Node::Split { dim, at, lower, upper } => {
                    node = if x[dim] <= at { lower } else { upper };
                }
            }
        }
    }

    /// Density at `x` (leaf mass over leaf volume). Points on an interior
    /// split plane belong to the lower cell.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        Ok(self.leaves[self.leaf_index(x)].density())
    }

    /// Draws a leaf by mass, then a uniform point inside it.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let total = *self.cumulative.last().expect("at least one leaf");
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|c| *c <= u).min(self.leaves.len() - 1);
        let leaf = &self.leaves[k];
        leaf.lower
            .iter()
            .zip(&leaf.upper)
            .map(|(l, h)| {
                let v = l + rng.random::<f64>() * (h - l);
                v.min(*h)
            })
            .collect()
    }

    pub fn sample(&self, count: usize, stream: RandomStream) -> Vec<Vec<f64>> {
        let mut rng = stream.rng();
        (0..count).map(|_| self.sample_one(&mut rng)).collect()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut out = String::from("tree-histogram 1\n");
        let _ = writeln!(
            out,
            "domain {} ; {}",
            join(self.domain.lower()),
            join(self.domain.upper())
        );
        let _ = writeln!(out, "mix {:?}", self.mix_uniform);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            let indent = "  ".repeat(depth);
            match &self.nodes[node] {
                Node::Leaf(i) => {
                    let l = &self.leaves[*i];
                    let _ = writeln!(out, "{indent}leaf {:?} {} ; {}", l.mass, join(&l.lower), join(&l.upper));
                }
                Node::Split { dim, at, lower, upper } => {
                    let _ = writeln!(out, "{indent}split {dim} {at:?}");
                    stack.push((*upper, depth + 1));
                    stack.push((*lower, depth + 1));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |m: &str| Error::Parse(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("tree-histogram 1") {
            return Err(perr("missing header"));
        }
        let parse_floats = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                .collect()
        };
        let parse_bounds = |s: &str| -> Result<(Vec<f64>, Vec<f64>)> {
            let (a, b) = s.split_once(';').ok_or_else(|| perr("bounds need ';'"))?;
            Ok((parse_floats(a)?, parse_floats(b)?))
        };
        let domain_line = lines
            .next()
            .and_then(|l| l.strip_prefix("domain "))
            .ok_or_else(|| perr("missing domain"))?;
        let (lo, hi) = parse_bounds(domain_line)?;
        let domain = Domain::new(lo, hi)?;
        let mix: f64 = lines
            .next()
            .and_then(|l| l.strip_prefix("mix "))
            .ok_or_else(|| perr("missing mix"))?
            .trim()
            .parse()
            .map_err(|_| perr("bad mix"))?;

        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        // (node index, children filled)
        let mut open: Vec<(usize, u8)> = Vec::new();
        for line in lines {
            let id = nodes.len();
            if let Some((parent, filled)) = open.last_mut() {
                if let Node::Split { lower, upper, .. } = &mut nodes[*parent] {
                    if *filled == 0 {
                        *lower = id;
                    } else {
                        *upper = id;
                    }
                }
                *filled += 1;
            } else if id != 0 {
                return Err(perr("trailing nodes after complete tree"));
            }
            while matches!(open.last(), Some((_, 2))) {
                open.pop();
            }
            if let Some(rest) = line.strip_prefix("split ") {
                let mut it = rest.split_whitespace();
                let dim: usize = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr("bad split dim"))?;
                let at: f64 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr("bad split position"))?;
                if dim >= domain.dim() {
                    return Err(perr("split dimension out of range"));
                }
                nodes.push(Node::Split {
                    dim,
                    at,
                    lower: 0,
                    upper: 0,
                });
                open.push((id, 0));
            } else if let Some(rest) = line.strip_prefix("leaf ") {
                let (mass, bounds) = rest.split_once(' ').ok_or_else(|| perr("bad leaf"))?;
                let mass: f64 = mass.parse().map_err(|_| perr("bad leaf mass"))?;
                let (lower, upper) = parse_bounds(bounds)?;
                if lower.len() != domain.dim() || upper.len() != domain.dim() {
                    return Err(perr("leaf dimension mismatch"));
                }
                nodes.push(Node::Leaf(leaves.len()));
                leaves.push(Leaf { lower, upper, mass });
            } else {
                return Err(Error::Parse(format!("unexpected line {line:?}")));
            }
            while matches!(open.last(), Some((_, 2))) {
                open.pop();
            }
        }
        if nodes.is_empty() || !open.is_empty() {
            return Err(perr("incomplete tree"));
        }
        Ok(TreeHistogram::assemble(domain, nodes, leaves, mix))
    }
}

/// Lower weighted median of `members` along `dim`: the smallest coordinate
/// whose cumulative weight reaches half of `total`.
fn weighted_median(members: &[usize], points: &[Vec<f64>], w: &[f64], dim: usize, total: f64) -> f64 {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| points[a][dim].total_cmp(&points[b][dim]).then(a.cmp(&b)));
    let half = 0.5 * total;
    let mut acc = 0.0;
    for &i in &order {
        acc += w[i];
        if acc >= half {
            return points[i][dim];
        }
    }
    order.last().map_or(f64::NAN, |&i| points[i][dim])
}

/// Fits a tree histogram; see [`TreeHistogram::fit`].
pub fn fit_tree_histogram(
    points: &[Vec<f64>],
    weights: &[f64],
    domain: &Domain,
    config: &TreeConfig,
) -> Result<TreeHistogram> {
    TreeHistogram::fit(points, weights, domain, config)
}

pub fn histogram_sample(q: &TreeHistogram, count: usize, stream: RandomStream) -> Vec<Vec<f64>> {
    q.sample(count, stream)
}

pub fn histogram_density(q: &TreeHistogram, x: &[f64]) -> Result<f64> {
    q.density(x)
}
