//! From an ICA unmixing matrix to the instantaneous effect matrix `B_0` and
//! a causal order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension for which the causal order is found by trying every
/// permutation.
pub const EXHAUSTIVE_ORDER_MAX: usize = 8;

/// Minimum-cost perfect matching on a square cost matrix. Returns
/// `assign[row] = column`.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    // Potentials formulation, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Sum of squares of the entries that `order` would place on or above the
/// diagonal, i.e. effects pointing against the order.
fn upper_mass(b: &DMatrix<f64>, order: &[usize]) -> f64 {
    let mut s = 0.0;
    for (a, &target) in order.iter().enumerate() {
        for &source in &order[a..] {
            s += b[(target, source)].powi(2);
        }
    }
    s
}

/// Lexicographic next permutation; false once the last one is reached.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Causal order (roots first) that makes `b` as close as possible to
/// strictly lower triangular.
pub fn causal_order(b: &DMatrix<f64>) -> Vec<usize> {
    let d = b.nrows();
    if d <= EXHAUSTIVE_ORDER_MAX {
        let mut perm: Vec<usize> = (0..d).collect();
        let mut best = perm.clone();
        let mut best_cost = upper_mass(b, &perm);
        while next_permutation(&mut perm) {
            let c = upper_mass(b, &perm);
            if c < best_cost {
                best_cost = c;
                best.clone_from(&perm);
            }
        }
        best
    } else {
        // Repeatedly take the variable least influenced by those remaining.
        let mut remaining: Vec<usize> = (0..d).collect();
        let mut order = Vec::with_capacity(d);
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .map(|(pos, &i)| {
                    let s: f64 = remaining.iter().map(|&j| b[(i, j)].powi(2)).sum();
                    (pos, s)
                })
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            order.push(remaining.remove(pos));
        }
        order
    }
}

/// Returns `(B_0, order)` where `B_0[(i, j)]` is the instantaneous effect of
/// variable `j` on variable `i` and `order` lists variables from root to
/// sink. Entries pointing against the order are exactly zero.
pub fn estimate_b0(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let d = w.nrows();
    if d != w.ncols() || d == 0 {
        return Err(Error::Dimension(format!(
            "unmixing matrix must be square, got {}×{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("unmixing matrix"));
    }

    let finite_max = w
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| 1.0 / v.abs())
        .fold(0.0f64, f64::max);
    let big = (finite_max + 1.0) * (d as f64 + 1.0) * 1e3;
    let cost = w.map(|v| if v == 0.0 { big } else { 1.0 / v.abs() });
    let assign = hungarian(&cost);

    // Row `r` of W becomes row `assign[r]` of the permuted matrix.
    let mut permuted = DMatrix::zeros(d, d);
    for (r, &c) in assign.iter().enumerate() {
        permuted.set_row(c, &w.row(r));
    }
    for i in 0..d {
        let diag = permuted[(i, i)];
        if diag == 0.0 {
            return Err(Error::DegenerateUnmixing);
        }
        let mut row = permuted.row_mut(i);
        row /= diag;
    }

    let mut b0 = DMatrix::identity(d, d) - permuted;
    for i in 0..d {
        b0[(i, i)] = 0.0;
    }
    let order = causal_order(&b0);
    for (a, &target) in order.iter().enumerate() {
        for &source in &order[a..] {
            b0[(target, source)] = 0.0;
        }
    }
    Ok((b0, order))
}
