use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{log_loss, sigmoid, LabeledVector, Node, TrainError, Tree, TreeModel, TreeParams};

const MIN_GAIN: f64 = 1e-9;
const MAX_PRIOR_LOGIT: f64 = 10.0;

#[derive(Clone, Copy)]
struct Split {
    feature: u32,
    threshold: f64,
    gain: f64,
}

struct Candidate {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    split: Option<Split>,
}

/// Fits an ensemble by stage-wise boosting on the logistic loss.
pub fn train(data: &[LabeledVector], params: &TreeParams) -> Result<TreeModel, TrainError> {
    let first = data.first().ok_or(TrainError::Empty)?;
    let dimension = first.vector.dimension();
    if let Some((index, d)) = data.iter().enumerate().find(|(_, d)| d.vector.dimension() != dimension) {
        return Err(TrainError::DimensionMismatch {
            index,
            expected: dimension,
            found: d.vector.dimension(),
        });
    }
    check_params(params)?;

    let base_score = params.base_score.unwrap_or_else(|| {
        let pos = data.iter().filter(|d| d.label).count() as f64;
        let n = data.len() as f64;
        // smoothed log-odds of the positive rate
        ((pos + 0.5) / (n - pos + 0.5))
            .ln()
            .clamp(-MAX_PRIOR_LOGIT, MAX_PRIOR_LOGIT)
    });
    let mut model = TreeModel::constant(dimension, base_score);
    let mut margins = vec![base_score; data.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    for _ in 0..params.trees {
        let grad: Vec<(f64, f64)> = data
            .iter()
            .zip(&margins)
            .map(|(d, m)| {
                let p = sigmoid(*m);
                let y = if d.label { 1.0 } else { 0.0 };
                (p - y, (p * (1.0 - p)).max(1e-16))
            })
            .collect();
        let rows: Vec<u32> = if params.subsample < 1.0 {
            let k = ((data.len() as f64 * params.subsample).ceil() as usize).clamp(1, data.len());
            let mut r: Vec<u32> = sample(&mut rng, data.len(), k).into_iter().map(|i| i as u32).collect();
            r.sort_unstable();
            r
        } else {
            (0..data.len() as u32).collect()
        };
        let mut tree = grow(data, &grad, rows, params);
        set_leaf_values(&mut tree, data, &grad, &margins, params);
        for (m, d) in margins.iter_mut().zip(data) {
            *m += tree.leaf_value(&d.vector);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

fn check_params(p: &TreeParams) -> Result<(), TrainError> {
    let bad = |m: &str| Err(TrainError::BadParams(m.to_string()));
    if p.max_depth < 1 {
        return bad("max_depth must be at least 1");
    }
    if p.max_leaves < 2 {
        return bad("max_leaves must be at least 2");
    }
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
        return bad("learning_rate must be positive");
    }
    if !(p.subsample > 0.0 && p.subsample <= 1.0) {
        return bad("subsample must be in (0, 1]");
    }
    if p.l2 < 0.0 {
        return bad("l2 must be non-negative");
    }
    Ok(())
}

/// Grows the tree structure best-first; leaf values are placeholders.
fn grow(data: &[LabeledVector], grad: &[(f64, f64)], rows: Vec<u32>, params: &TreeParams) -> Tree {
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut open = vec![evaluate(data, grad, 0, rows, 0, params)];
    let mut leaves = 1;
    while leaves < params.max_leaves {
        // best gain first; earlier node wins ties
        let Some(pick) = open
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.split.map(|s| (k, s.gain, c.node)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(k, _, _)| k)
        else {
            break;
        };
        let cand = open.swap_remove(pick);
        let split = cand.split.expect("picked candidates have a split");
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = cand
            .rows
            .iter()
            .partition(|r| data[**r as usize].vector.get(split.feature as usize) < split.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf(0.0));
        nodes.push(Node::Leaf(0.0));
        nodes[cand.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        leaves += 1;
        open.push(evaluate(data, grad, left, left_rows, cand.depth + 1, params));
        open.push(evaluate(data, grad, left + 1, right_rows, cand.depth + 1, params));
    }
    Tree { nodes }
}

fn evaluate(
    data: &[LabeledVector],
    grad: &[(f64, f64)],
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    params: &TreeParams,
) -> Candidate {
    let split = if depth < params.max_depth && rows.len() >= 2 * params.min_samples_leaf.max(1) {
        best_split(data, grad, &rows, params)
    } else {
        None
    };
    Candidate {
        node,
        rows,
        depth,
        split,
    }
}

fn best_split(data: &[LabeledVector], grad: &[(f64, f64)], rows: &[u32], params: &TreeParams) -> Option<Split> {
    let lambda = params.l2;
    let min_leaf = params.min_samples_leaf.max(1);
    let (g_all, h_all) = rows.iter().fold((0.0, 0.0), |(g, h), r| {
        let (gi, hi) = grad[*r as usize];
        (g + gi, h + hi)
    });
    let n_all = rows.len();
    let parent = g_all * g_all / (h_all + lambda);

    let mut entries: Vec<(u32, f64, u32)> = Vec::new();
    for r in rows {
        for (f, x) in data[*r as usize].vector.entries() {
            entries.push((*f, *x, *r));
        }
    }
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut best: Option<Split> = None;
    let mut start = 0;
    // bins of (value, g, h, count) for the current feature, ascending by value
    let mut bins: Vec<(f64, f64, f64, usize)> = Vec::new();
    while start < entries.len() {
        let feature = entries[start].0;
        let mut end = start;
        while end < entries.len() && entries[end].0 == feature {
            end += 1;
        }
        bins.clear();
        let (mut g_nz, mut h_nz) = (0.0, 0.0);
        for &(_, x, r) in &entries[start..end] {
            let (gi, hi) = grad[r as usize];
            g_nz += gi;
            h_nz += hi;
            match bins.last_mut() {
                Some(b) if b.0 == x => {
                    b.1 += gi;
                    b.2 += hi;
                    b.3 += 1;
                }
                _ => bins.push((x, gi, hi, 1)),
            }
        }
        let zeros = n_all - (end - start);
        if zeros > 0 {
            let zero_bin = (0.0, g_all - g_nz, h_all - h_nz, zeros);
            let at = bins.partition_point(|b| b.0 < 0.0);
            bins.insert(at, zero_bin);
        }
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for k in 0..bins.len().saturating_sub(1) {
            gl += bins[k].1;
            hl += bins[k].2;
            nl += bins[k].3;
            let nr = n_all - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (gr, hr) = (g_all - gl, h_all - hl);
            let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
            if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature,
                    threshold: 0.5 * (bins[k].0 + bins[k + 1].0),
                    gain,
                });
            }
        }
        start = end;
    }
    best
}

/// One damped Newton step per leaf over all rows reaching it.
fn set_leaf_values(tree: &mut Tree, data: &[LabeledVector], grad: &[(f64, f64)], margins: &[f64], params: &TreeParams) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
    for (i, d) in data.iter().enumerate() {
        members[leaf_index(tree, &d.vector)].push(i);
    }
    for (k, rows) in members.iter().enumerate() {
        if !matches!(tree.nodes[k], Node::Leaf(_)) {
            continue;
        }
        let (g, h) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), r| (g + grad[*r].0, h + grad[*r].1));
        let mut step = -params.learning_rate * g / (h + params.l2);
        let loss_at = |w: f64| -> f64 { rows.iter().map(|r| log_loss(margins[*r] + w, data[*r].label)).sum() };
        if step != 0.0 {
            let before = loss_at(0.0);
            let mut tries = 0;
            while loss_at(step) > before && tries < 30 {
                step *= 0.5;
                tries += 1;
            }
            if loss_at(step) > before {
                step = 0.0;
            }
        }
        tree.nodes[k] = Node::Leaf(if step.is_finite() { step } else { 0.0 });
    }
}

fn leaf_index(tree: &Tree, v: &crate::features::SparseVector) -> usize {
    let mut at = 0usize;
    loop {
        match tree.nodes[at] {
            Node::Leaf(_) => return at,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if v.get(feature as usize) >= threshold {
                    right as usize
                } else {
                    left as usize
                }
            }
        }
    }
}
