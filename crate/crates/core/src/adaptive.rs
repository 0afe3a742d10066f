//! Adaptive histogram transform ensembles.
//!
//! Each member rotates the sample with a random rotation and then partitions
//! the rotated cloud recursively: any cell holding more than `m` points is
//! cut along the dimension with the largest range-to-scaled-variance ratio,
//! at the 0.618 or 0.382 quantile of the cell's points in that dimension.
//! Leaves carry piecewise-constant densities `count / (n · volume)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_members, DensityEstimate, EnsembleModel};
use crate::error::{Error, Result};
use crate::points::{check_dim, check_finite, Points};
use crate::rng::stream;
use crate::transform::{sample_rotation, HistogramTransform, TransformRecord};

const ROOT_PADDING: f64 = 1e-9;
const SCALED_VARIANCE_LOW: f64 = 0.5;
const SCALED_VARIANCE_HIGH: f64 = 2.5;

/// Axis-aligned half-open box `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CellBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidConfig(
                "box lower corner must be strictly below the upper corner".to_string(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v < *h)
    }

    /// Lower and upper halves of a cut at `value` in `dim`.
    pub fn split(&self, dim: usize, value: f64) -> (Self, Self) {
        let mut lower = self.clone();
        let mut upper = self.clone();
        lower.hi[dim] = value;
        upper.lo[dim] = value;
        (lower, upper)
    }
}

/// Cut of a cell: points with `x[dim] < value` go to the lower child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDecision {
    pub dim: usize,
    pub value: f64,
}

/// Why a cell above the size threshold was left unsplit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateReason {
    /// Every point in the cell coincides.
    ZeroRange,
    /// The chosen cut would leave one child empty or lie on the cell boundary.
    EmptyChild,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub count: u64,
    pub volume: f64,
    pub bounds: CellBox,
    pub degenerate: Option<DegenerateReason>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        dim: usize,
        value: f64,
        lower: usize,
        upper: usize,
    },
    Leaf(Leaf),
}

/// Linear-interpolation quantile of a sorted, non-empty slice.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let below = pos.floor() as usize;
    let frac = pos - below as f64;
    if below + 1 < sorted.len() {
        sorted[below] + frac * (sorted[below + 1] - sorted[below])
    } else {
        sorted[below]
    }
}

fn choose_split(
    data: &Points,
    indices: &[usize],
    bounds: &CellBox,
) -> std::result::Result<SplitDecision, DegenerateReason> {
    let d = data.dim();
    let k = indices.len() as f64;
    let mut ranges = Vec::with_capacity(d);
    let mut variances = Vec::with_capacity(d);
    for j in 0..d {
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &i in indices {
            let v = data.row(i)[j];
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
        }
        let mean = sum / k;
        let ss: f64 = indices
            .iter()
            .map(|&i| (data.row(i)[j] - mean).powi(2))
            .sum();
        ranges.push(hi - lo);
        variances.push(ss / (k - 1.0));
    }
    if ranges.iter().all(|r| *r == 0.0) {
        return Err(DegenerateReason::ZeroRange);
    }

    let v_min = variances.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = variances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut dim = 0;
    let mut best = f64::NEG_INFINITY;
    for j in 0..d {
        let scaled = if v_max > v_min {
            SCALED_VARIANCE_LOW
                + (SCALED_VARIANCE_HIGH - SCALED_VARIANCE_LOW) * (variances[j] - v_min)
                    / (v_max - v_min)
        } else {
            0.5 * (SCALED_VARIANCE_LOW + SCALED_VARIANCE_HIGH)
        };
        let ratio = ranges[j] / scaled;
        if ratio > best {
            best = ratio;
            dim = j;
        }
    }

    let mut values: Vec<f64> = indices.iter().map(|&i| data.row(i)[dim]).collect();
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / k;
    let value = if mean <= quantile_sorted(&values, 0.6) {
        quantile_sorted(&values, 0.618)
    } else {
        quantile_sorted(&values, 0.382)
    };
    let interior = bounds.lo[dim] < value && value < bounds.hi[dim];
    let lower_nonempty = values[0] < value;
    let upper_nonempty = values[values.len() - 1] >= value;
    if interior && lower_nonempty && upper_nonempty {
        Ok(SplitDecision { dim, value })
    } else {
        Err(DegenerateReason::EmptyChild)
    }
}

/// Split rule for one cell holding `points`; `None` for degenerate cells.
pub fn select_split(
    points: &Points,
    bounds: &CellBox,
    min_samples_split: usize,
) -> Result<Option<SplitDecision>> {
    check_dim(bounds.dim(), points.dim())?;
    if points.len() <= min_samples_split {
        return Err(Error::Precondition(format!(
            "cell holds {} points, not more than min_samples_split = {min_samples_split}",
            points.len()
        )));
    }
    let indices: Vec<usize> = (0..points.len()).collect();
    Ok(choose_split(points, &indices, bounds).ok())
}

/// Recursive data-dependent partition of a (rotated) sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveTree {
    root_box: CellBox,
    nodes: Vec<Node>,
    n: u64,
    min_samples_split: usize,
}

fn padded_bounds(data: &Points) -> Result<CellBox> {
    let d = data.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in data.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    for j in 0..d {
        let range = hi[j] - lo[j];
        let pad = if range > 0.0 {
            ROOT_PADDING * range
        } else {
            ROOT_PADDING * lo[j].abs().max(1.0)
        };
        lo[j] -= pad;
        hi[j] += pad;
    }
    CellBox::new(lo, hi)
}

impl AdaptiveTree {
    /// Split breadth-first until no splittable cell holds more than `m` points.
    pub fn fit(data: &Points, min_samples_split: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if min_samples_split == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be at least 1".to_string(),
            ));
        }
        data.check_finite()?;
        let root_box = padded_bounds(data)?;
        let mut nodes = vec![Node::Leaf(Leaf {
            count: 0,
            volume: 0.0,
            bounds: root_box.clone(),
            degenerate: None,
        })];
        let mut queue = VecDeque::new();
        queue.push_back((0usize, (0..data.len()).collect::<Vec<_>>(), root_box.clone()));

        while let Some((node, indices, bounds)) = queue.pop_front() {
            let mut degenerate = None;
            if indices.len() > min_samples_split {
                match choose_split(data, &indices, &bounds) {
                    Ok(SplitDecision { dim, value }) => {
                        let (below, above): (Vec<usize>, Vec<usize>) =
                            indices.iter().partition(|&&i| data.row(i)[dim] < value);
                        let (lower_box, upper_box) = bounds.split(dim, value);
                        let lower = nodes.len();
                        let upper = lower + 1;
                        for b in [&lower_box, &upper_box] {
                            nodes.push(Node::Leaf(Leaf {
                                count: 0,
                                volume: 0.0,
                                bounds: b.clone(),
                                degenerate: None,
                            }));
                        }
                        nodes[node] = Node::Split {
                            dim,
                            value,
                            lower,
                            upper,
                        };
                        queue.push_back((lower, below, lower_box));
                        queue.push_back((upper, above, upper_box));
                        continue;
                    }
                    Err(reason) => degenerate = Some(reason),
                }
            }
            nodes[node] = Node::Leaf(Leaf {
                count: indices.len() as u64,
                volume: bounds.volume(),
                bounds,
                degenerate,
            });
        }

        Ok(Self {
            root_box,
            nodes,
            n: data.len() as u64,
            min_samples_split,
        })
    }

    pub fn root_box(&self) -> &CellBox {
        &self.root_box
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn min_samples_split(&self) -> usize {
        self.min_samples_split
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Leaves in breadth-first order, lower child first.
    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }

    /// Leaf containing `x`, if `x` lies in the root box.
    pub fn locate(&self, x: &[f64]) -> Option<&Leaf> {
        if !self.root_box.contains(x) {
            return None;
        }
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Split {
                    dim,
                    value,
                    lower,
                    upper,
                } => node = if x[*dim] < *value { *lower } else { *upper },
                Node::Leaf(leaf) => return Some(leaf),
            }
        }
    }

    /// `Σ_leaves density · volume`.
    pub fn total_mass(&self) -> f64 {
        let n = self.n as f64;
        self.leaves()
            .map(|l| l.count as f64 / (n * l.volume) * l.volume)
            .sum()
    }

    pub fn dim(&self) -> usize {
        self.root_box.dim()
    }

    /// Density of the piecewise-constant estimate at an already rotated point;
    /// zero outside the root box.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        Ok(match self.locate(x) {
            Some(leaf) => leaf.count as f64 / (self.n as f64 * leaf.volume),
            None => 0.0,
        })
    }
}

/// One AHTE member: a rotation followed by an adaptive tree in rotated space.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveMember {
    transform: HistogramTransform,
    tree: AdaptiveTree,
}

impl AdaptiveMember {
    /// Rotate `data` with `transform` and grow a tree on the result.
    pub fn fit(data: &Points, transform: HistogramTransform, min_samples_split: usize) -> Result<Self> {
        check_dim(transform.dim(), data.dim())?;
        data.check_finite()?;
        let rotated = data.map_rows(data.dim(), |x, out| transform.apply_into(x, out))?;
        let tree = AdaptiveTree::fit(&rotated, min_samples_split)?;
        Ok(Self { transform, tree })
    }

    pub fn transform(&self) -> &HistogramTransform {
        &self.transform
    }

    pub fn tree(&self) -> &AdaptiveTree {
        &self.tree
    }
}

impl DensityEstimate for AdaptiveMember {
    fn dim(&self) -> usize {
        self.transform.dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        let mut rotated = vec![0.0; self.dim()];
        self.transform.apply_into(x, &mut rotated);
        self.tree.density(&rotated)
    }
}

/// Fit `T` adaptive members, member `t` rotating with stream `t` of `seed`.
pub fn fit_ahte(
    data: &Points,
    members: usize,
    min_samples_split: usize,
    seed: u64,
) -> Result<EnsembleModel<AdaptiveMember>> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let d = data.dim();
    let fitted = fit_members(members, |t| {
        let rotation = sample_rotation(d, &mut stream(seed, t as u64))?;
        let transform = HistogramTransform::rotation_only(rotation)?.with_seed(seed);
        AdaptiveMember::fit(data, transform, min_samples_split)
    })?;
    EnsembleModel::new(fitted)
}

/// Pre-order node of a serialized tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRecord {
    Split {
        dim: usize,
        value: f64,
    },
    Leaf {
        count: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degenerate: Option<DegenerateReason>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeRecord {
    pub transform: TransformRecord,
    pub n: u64,
    pub min_samples_split: usize,
    pub root_box: CellBox,
    pub nodes: Vec<NodeRecord>,
}

impl From<&AdaptiveMember> for TreeRecord {
    fn from(member: &AdaptiveMember) -> Self {
        let tree = &member.tree;
        let mut nodes = Vec::with_capacity(tree.nodes.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match &tree.nodes[i] {
                Node::Split {
                    dim,
                    value,
                    lower,
                    upper,
                } => {
                    nodes.push(NodeRecord::Split {
                        dim: *dim,
                        value: *value,
                    });
                    stack.push(*upper);
                    stack.push(*lower);
                }
                Node::Leaf(leaf) => nodes.push(NodeRecord::Leaf {
                    count: leaf.count,
                    degenerate: leaf.degenerate,
                }),
            }
        }
        Self {
            transform: TransformRecord::from(&member.transform),
            n: tree.n,
            min_samples_split: tree.min_samples_split,
            root_box: tree.root_box.clone(),
            nodes,
        }
    }
}

enum Shape {
    Split(usize, f64, Box<Shape>, Box<Shape>),
    Leaf(u64, Option<DegenerateReason>),
}

fn parse_preorder(records: &[NodeRecord], pos: &mut usize, d: usize) -> Result<Shape> {
    let rec = records
        .get(*pos)
        .ok_or_else(|| Error::Model("truncated node list".to_string()))?;
    *pos += 1;
    Ok(match rec {
        NodeRecord::Split { dim, value } => {
            if *dim >= d || !value.is_finite() {
                return Err(Error::Model(format!("invalid split ({dim}, {value})")));
            }
            let lower = parse_preorder(records, pos, d)?;
            let upper = parse_preorder(records, pos, d)?;
            Shape::Split(*dim, *value, Box::new(lower), Box::new(upper))
        }
        NodeRecord::Leaf { count, degenerate } => Shape::Leaf(*count, *degenerate),
    })
}

impl TryFrom<TreeRecord> for AdaptiveMember {
    type Error = Error;

    fn try_from(rec: TreeRecord) -> Result<Self> {
        let transform = HistogramTransform::try_from(rec.transform)?;
        let d = transform.dim();
        let root_box = CellBox::new(rec.root_box.lo, rec.root_box.hi)?;
        check_dim(d, root_box.dim())?;
        let mut pos = 0;
        let shape = parse_preorder(&rec.nodes, &mut pos, d)?;
        if pos != rec.nodes.len() {
            return Err(Error::Model("trailing nodes after tree".to_string()));
        }

        // Lay out breadth-first, matching the arena order of a fresh fit.
        let mut nodes = Vec::with_capacity(rec.nodes.len());
        nodes.push(None);
        let mut queue = VecDeque::new();
        queue.push_back((0usize, shape, root_box.clone()));
        let mut total = 0u64;
        while let Some((slot, shape, bounds)) = queue.pop_front() {
            let node = match shape {
                Shape::Split(dim, value, lower, upper) => {
                    if !(bounds.lo[dim] < value && value < bounds.hi[dim]) {
                        return Err(Error::Model(format!(
                            "split value {value} outside its cell in dimension {dim}"
                        )));
                    }
                    let (lower_box, upper_box) = bounds.split(dim, value);
                    let l = nodes.len();
                    nodes.push(None);
                    nodes.push(None);
                    queue.push_back((l, *lower, lower_box));
                    queue.push_back((l + 1, *upper, upper_box));
                    Node::Split {
                        dim,
                        value,
                        lower: l,
                        upper: l + 1,
                    }
                }
                Shape::Leaf(count, degenerate) => {
                    total += count;
                    Node::Leaf(Leaf {
                        count,
                        volume: bounds.volume(),
                        bounds,
                        degenerate,
                    })
                }
            };
            nodes[slot] = Some(node);
        }
        if total != rec.n {
            return Err(Error::Model(format!(
                "leaf counts sum to {total}, expected n = {}",
                rec.n
            )));
        }
        let tree = AdaptiveTree {
            root_box,
            nodes: nodes.into_iter().map(|n| n.expect("every slot filled")).collect(),
            n: rec.n,
            min_samples_split: rec.min_samples_split,
        };
        Ok(Self { transform, tree })
    }
}
