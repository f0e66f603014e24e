use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SimilarityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Candidate assigned to each query.
    pub permutation: Vec<usize>,
    pub total_score: f64,
}

/// Maximum-score one-to-one assignment. Among optimal assignments the
/// lexicographically smallest permutation is returned.
pub fn hungarian_assign(s: &SimilarityMatrix) -> Result<Assignment> {
    if s.rows() != s.cols() {
        return Err(Error::Parameter(format!(
            "assignment needs a square matrix, got {}×{}",
            s.rows(),
            s.cols()
        )));
    }
    let permutation = solve(s.scores(), s.rows(), &vec![false; s.scores().len()])?;
    let total_score = permutation.iter().enumerate().map(|(i, &j)| s.get(i, j)).sum();
    Ok(Assignment {
        permutation,
        total_score,
    })
}

/// Top-k under one-to-one retrieval: `k` successive optimal assignments, each
/// forbidding the (query, candidate) pairs used by earlier rounds. A query
/// counts as a hit if any round pairs it with a true-label candidate.
pub fn hungarian_top_k(s: &SimilarityMatrix, k: usize) -> Result<f64> {
    let rounds = hungarian_rounds(s, k)?;
    let n = s.rows();
    let hits = (0..n)
        .filter(|&i| rounds.iter().any(|perm| s.is_hit(i, perm[i])))
        .count();
    Ok(hits as f64 / n as f64)
}

/// The `k` disjoint assignments used by [`hungarian_top_k`], in round order.
pub fn hungarian_rounds(s: &SimilarityMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = s.rows();
    if n != s.cols() {
        return Err(Error::Parameter(format!(
            "assignment needs a square matrix, got {}×{}",
            n,
            s.cols()
        )));
    }
    if n == 0 || k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} outside 1..={n}")));
    }
    let mut forbidden = vec![false; n * n];
    let mut rounds = Vec::with_capacity(k);
    for _ in 0..k {
        let perm = solve(s.scores(), n, &forbidden)?;
        for (i, &j) in perm.iter().enumerate() {
            forbidden[i * n + j] = true;
        }
        rounds.push(perm);
    }
    Ok(rounds)
}

/// Shortest-augmenting-path assignment (Jonker–Volgenant / Kuhn–Munkres with
/// potentials) on `cost = −score`, then lexicographic extraction from the
/// equality subgraph of the optimal duals.
fn solve(scores: &[f64], n: usize, forbidden: &[bool]) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let cost = |i: usize, j: usize| -> f64 {
        if forbidden[i * n + j] {
            f64::INFINITY
        } else {
            -scores[i * n + j]
        }
    };
    // 1-based arrays; column 0 is the virtual root.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(Error::Parameter("no feasible one-to-one assignment remains".into()));
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }

    // Every optimal assignment uses only edges that are tight under the
    // optimal duals, and every perfect matching of tight edges is optimal.
    let scale = scores.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    let c = cost(i, j);
                    c.is_finite() && c - u[i + 1] - v[j + 1] <= tol
                })
                .collect()
        })
        .collect();
    Ok(lexicographic_matching(n, &tight, row_to_col))
}

/// Turns a perfect matching of the tight graph into the lexicographically
/// smallest one. Row by row, the smallest column is chosen that can still be
/// completed, found via an alternating cycle through the row's current column.
fn lexicographic_matching(n: usize, tight: &[Vec<usize>], mut row_to_col: Vec<usize>) -> Vec<usize> {
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    // Reverse adjacency: rows with a tight edge into each column.
    let mut into_col: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, cols) in tight.iter().enumerate() {
        for &j in cols {
            into_col[j].push(i);
        }
    }
    let mut fixed_row = vec![false; n];
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        let target = row_to_col[i];
        // Rows (other than i, unfixed) that reach column `target` by an
        // alternating path: r → tight col x → col_to_row[x] → … → target.
        // `next[r]` is the column r should take on that path.
        let mut next = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &r in &into_col[target] {
            if r != i && !fixed_row[r] && next[r] == usize::MAX {
                next[r] = target;
                queue.push_back(r);
            }
        }
        while let Some(r) = queue.pop_front() {
            let x = row_to_col[r];
            for &r2 in &into_col[x] {
                if r2 != i && !fixed_row[r2] && next[r2] == usize::MAX {
                    next[r2] = x;
                    queue.push_back(r2);
                }
            }
        }
        let choice = tight[i]
            .iter()
            .copied()
            .filter(|&j| !fixed_col[j])
            .find(|&j| j == target || next[col_to_row[j]] != usize::MAX)
            .expect("the current matching is always a candidate");
        if choice != target {
            // Rotate along the path: i takes `choice`, its old owner moves on.
            let mut r = col_to_row[choice];
            row_to_col[i] = choice;
            col_to_row[choice] = i;
            loop {
                let x = next[r];
                row_to_col[r] = x;
                let displaced = col_to_row[x];
                col_to_row[x] = r;
                if x == target {
                    break;
                }
                r = displaced;
            }
        }
        fixed_row[i] = true;
        fixed_col[choice] = true;
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(s: &SimilarityMatrix) -> (f64, Vec<usize>) {
        fn rec(s: &SimilarityMatrix, i: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
            let n = s.rows();
            if i == n {
                let total: f64 = cur.iter().enumerate().map(|(r, &c)| s.get(r, c)).sum();
                if total > best.0 + 1e-12 {
                    *best = (total, cur.clone());
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(s, i + 1, used, cur, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (f64::NEG_INFINITY, vec![]);
        rec(s, 0, &mut vec![false; s.rows()], &mut vec![], &mut best);
        best
    }

    #[test]
    fn three_by_three_example() {
        let s = SimilarityMatrix::new(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 1.0, 3.0, 1.0, 2.0]).unwrap();
        let a = hungarian_assign(&s).unwrap();
        let (best, perm) = brute(&s);
        assert_eq!(a.total_score, best);
        assert_eq!(a.permutation, perm);
        assert_eq!(a.permutation, vec![2, 1, 0]);
    }

    #[test]
    fn all_ties_give_identity() {
        let s = SimilarityMatrix::new(5, 5, vec![0.25; 25]).unwrap();
        assert_eq!(hungarian_assign(&s).unwrap().permutation, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn lexicographic_among_block_ties() {
        // Rows 0/1 may swap columns 2/3 freely; rows 2/3 take 0/1 either way.
        let s = SimilarityMatrix::new(
            4,
            4,
            vec![
                0.0, 0.0, 1.0, 1.0, //
                0.0, 0.0, 1.0, 1.0, //
                1.0, 1.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, 0.0, //
            ],
        )
        .unwrap();
        assert_eq!(hungarian_assign(&s).unwrap().permutation, vec![2, 3, 0, 1]);
    }

    #[test]
    fn identity_top_k_and_errors() {
        let mut scores = vec![0.0; 16];
        for i in 0..4 {
            scores[i * 5] = 1.0;
        }
        let s = SimilarityMatrix::new(4, 4, scores).unwrap();
        for k in 1..=4 {
            assert_eq!(hungarian_top_k(&s, k).unwrap(), 1.0);
        }
        assert!(matches!(hungarian_top_k(&s, 5), Err(Error::Parameter(_))));
        let rect = SimilarityMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(hungarian_assign(&rect), Err(Error::Parameter(_))));
    }

    #[test]
    fn rounds_are_disjoint() {
        let scores: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let s = SimilarityMatrix::new(6, 6, scores).unwrap();
        let rounds = hungarian_rounds(&s, 6).unwrap();
        for i in 0..6 {
            let mut cols: Vec<usize> = rounds.iter().map(|p| p[i]).collect();
            cols.sort_unstable();
            assert_eq!(cols, (0..6).collect::<Vec<_>>());
        }
    }
}
