use crate::error::{Error, Result};
use crate::ingest::{sparsity, InteractionMatrix};

/// Allowed gap between target and achieved sparsity (0.05 percentage points).
pub const SLICE_TOLERANCE: f64 = 0.0005;

/// Editor offsets tried per target; all offsets are tried when fewer.
const MAX_EDITOR_OFFSETS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub target: f64,
    pub achieved: f64,
    /// Selected rows and columns of the input, in input order.
    pub editors: Vec<usize>,
    pub items: Vec<usize>,
    pub matrix: InteractionMatrix,
}

struct Candidate {
    editor_offset: usize,
    item_offset: usize,
    achieved: f64,
}

fn sorted_by_degree(degrees: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..degrees.len()).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
    order
}

struct Windows {
    editor_order: Vec<usize>,
    item_orders: Vec<(usize, Vec<usize>)>,
    candidates: Vec<Candidate>,
}

fn windows(m: &InteractionMatrix, budget: (usize, usize)) -> Result<Windows> {
    let (n_e, n_i) = budget;
    if n_e == 0 || n_i == 0 || n_e > m.n_editors() || n_i > m.n_items() {
        return Err(Error::InvalidArgument(format!(
            "budget {n_e}x{n_i} does not fit a {}x{} matrix",
            m.n_editors(),
            m.n_items()
        )));
    }
    let row_degrees: Vec<usize> = m.rows().iter().map(Vec::len).collect();
    let editor_order = sorted_by_degree(&row_degrees);
    let span = m.n_editors() - n_e;
    let offsets: Vec<usize> = if span < MAX_EDITOR_OFFSETS {
        (0..=span).collect()
    } else {
        let mut v: Vec<usize> = (0..MAX_EDITOR_OFFSETS).map(|k| k * span / (MAX_EDITOR_OFFSETS - 1)).collect();
        v.dedup();
        v
    };

    // For each editor window the item window sparsities follow from a
    // running sum over the restricted, sorted column degrees.
    let mut item_orders = Vec::with_capacity(offsets.len());
    let mut candidates = Vec::new();
    for &s in &offsets {
        let mut degrees = vec![0usize; m.n_items()];
        for &i in &editor_order[s..s + n_e] {
            for &j in m.row(i) {
                degrees[j as usize] += 1;
            }
        }
        let order = sorted_by_degree(&degrees);
        let mut window: usize = order[..n_i].iter().map(|&j| degrees[j]).sum();
        for t in 0..=m.n_items() - n_i {
            if t > 0 {
                window = window + degrees[order[t + n_i - 1]] - degrees[order[t - 1]];
            }
            candidates.push(Candidate {
                editor_offset: s,
                item_offset: t,
                achieved: sparsity(n_e, n_i, window),
            });
        }
        item_orders.push((s, order));
    }
    Ok(Windows {
        editor_order,
        item_orders,
        candidates,
    })
}

/// Lowest and highest sparsity reachable by [`sparsity_slices`] at `budget`.
pub fn sparsity_range(m: &InteractionMatrix, budget: (usize, usize)) -> Result<(f64, f64)> {
    let w = windows(m, budget)?;
    let lo = w.candidates.iter().map(|c| c.achieved).fold(f64::INFINITY, f64::min);
    let hi = w.candidates.iter().map(|c| c.achieved).fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Cuts `budget = (editors, items)` sized sub-matrices out of `m`, one per
/// target sparsity. Editors are taken as a window over the degree-sorted
/// editor list and items as a window over the degree-sorted item list
/// restricted to those editors; window offsets are chosen to land closest
/// to the target. Offset 0 on both is the greedy densest selection.
pub fn sparsity_slices(m: &InteractionMatrix, targets: &[f64], budget: (usize, usize)) -> Result<Vec<Slice>> {
    let (n_e, n_i) = budget;
    let Windows {
        editor_order,
        item_orders,
        candidates,
    } = windows(m, budget)?;

    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        let best = candidates
            .iter()
            .min_by(|a, b| {
                (a.achieved - target)
                    .abs()
                    .total_cmp(&(b.achieved - target).abs())
                    .then((a.editor_offset + a.item_offset).cmp(&(b.editor_offset + b.item_offset)))
            })
            .expect("at least one window");
        if (best.achieved - target).abs() > SLICE_TOLERANCE {
            return Err(Error::Unreachable(format!(
                "sparsity {target:.6} is not reachable at {n_e}x{n_i}; closest achievable is {:.6}",
                best.achieved
            )));
        }
        let order = &item_orders
            .iter()
            .find(|(s, _)| *s == best.editor_offset)
            .expect("offset recorded")
            .1;
        let mut editors = editor_order[best.editor_offset..best.editor_offset + n_e].to_vec();
        let mut items = order[best.item_offset..best.item_offset + n_i].to_vec();
        editors.sort_unstable();
        items.sort_unstable();
        let matrix = m.submatrix(&editors, &items);
        log::info!(
            "slice target {target:.6}: achieved {:.6} with {n_e}x{n_i}",
            matrix.sparsity()
        );
        out.push(Slice {
            target,
            achieved: best.achieved,
            editors,
            items,
            matrix,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> InteractionMatrix {
        // 6x6 with a dense 3x3 corner
        let mut pairs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                pairs.push((i, j));
            }
        }
        pairs.extend([(3, 4), (4, 5), (5, 3)]);
        let editors = (0..6).map(|i| format!("u{i}")).collect();
        let items = (0..6).map(|j| format!("Q{j}")).collect();
        let mut rows = vec![Vec::new(); 6];
        for (i, j) in pairs {
            rows[i].push(j as u32);
        }
        InteractionMatrix::from_rows(editors, items, rows).unwrap()
    }

    #[test]
    fn identity_slice() {
        let m = fixture();
        let s = sparsity_slices(&m, &[m.sparsity()], (6, 6)).unwrap();
        assert_eq!(s[0].matrix, m);
    }

    #[test]
    fn densest_corner() {
        let m = fixture();
        let s = sparsity_slices(&m, &[0.0], (3, 3)).unwrap();
        assert_eq!(s[0].matrix.sparsity(), 0.0);
        assert_eq!(s[0].items, vec![0, 1, 2]);
    }

    #[test]
    fn unreachable_names_closest() {
        let m = fixture();
        let err = sparsity_slices(&m, &[0.0], (6, 6)).unwrap_err().to_string();
        assert!(err.contains("closest achievable is 0.66"), "{err}");
    }
}
