use super::{Permutation, PermutationKind, SparseSpd};
use crate::error::Result;
use std::collections::VecDeque;

const NONE: usize = usize::MAX;

/// Nonzero pattern of a lower-triangular Cholesky factor, stored by column.
/// Each column lists its rows ascending, diagonal first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerPattern {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl LowerPattern {
    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub(crate) fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub(crate) fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }
}

/// Elimination tree of a matrix whose lower rows are given by `rows`.
pub(crate) fn etree(rows: &[Vec<usize>]) -> Vec<usize> {
    let n = rows.len();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &j in &rows[k] {
            let mut i = j;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Pattern of row `k` of `L` (strictly below the diagonal), in topological
/// order of the elimination tree. `mark` must be all false on entry and is
/// restored before returning.
pub(crate) fn ereach(
    row: &[usize],
    k: usize,
    parent: &[usize],
    mark: &mut [bool],
    out: &mut Vec<usize>,
) {
    out.clear();
    mark[k] = true;
    let mut path = Vec::new();
    for &start in row {
        if start >= k {
            continue;
        }
        let mut i = start;
        path.clear();
        while i != NONE && !mark[i] {
            path.push(i);
            mark[i] = true;
            i = parent[i];
        }
        // Deeper paths found later must come first, so prepend in blocks.
        out.splice(0..0, path.iter().copied());
    }
    for &i in out.iter() {
        mark[i] = false;
    }
    mark[k] = false;
}

/// Lower rows (columns `<= k`) of `Π A Πᵀ`, sorted, without values.
pub(crate) fn permuted_rows(m: &SparseSpd, perm: &Permutation) -> Vec<Vec<usize>> {
    let pos = perm.inverse();
    let pos = pos.order();
    let mut rows = vec![Vec::new(); m.dim()];
    for (i, j, _) in m.triplets() {
        let (a, b) = (pos[i], pos[j]);
        rows[a.max(b)].push(a.min(b));
    }
    for (k, r) in rows.iter_mut().enumerate() {
        r.push(k);
        r.sort_unstable();
        r.dedup();
    }
    rows
}

/// Symbolic Cholesky factorisation of `Π A Πᵀ`.
pub fn symbolic_cholesky(m: &SparseSpd, perm: &Permutation) -> Result<LowerPattern> {
    if perm.len() != m.dim() {
        return Err(crate::Error::DimensionMismatch {
            context: "symbolic factorisation",
            expected: m.dim(),
            found: perm.len(),
        });
    }
    let rows = permuted_rows(m, perm);
    Ok(symbolic_from_rows(&rows))
}

pub(crate) fn symbolic_from_rows(rows: &[Vec<usize>]) -> LowerPattern {
    let n = rows.len();
    let parent = etree(rows);
    let mut mark = vec![false; n];
    let mut reach = Vec::new();
    let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
    for k in 0..n {
        ereach(&rows[k], k, &parent, &mut mark, &mut reach);
        for &j in &reach {
            cols[j].push(k);
        }
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let mut row_idx = Vec::new();
    for c in cols {
        row_idx.extend(c);
        col_ptr.push(row_idx.len());
    }
    LowerPattern { col_ptr, row_idx }
}

/// Nonzeros of the Cholesky factor of `Π A Πᵀ`, diagonal included.
pub fn factor_nnz(m: &SparseSpd, perm: &Permutation) -> Result<usize> {
    Ok(symbolic_cholesky(m, perm)?.nnz())
}

/// Entries of the factor that are structurally zero in the lower triangle
/// of `Π A Πᵀ`.
pub fn fill_in(m: &SparseSpd, perm: &Permutation) -> Result<usize> {
    let rows = permuted_rows(m, perm);
    let lower: usize = rows.iter().map(Vec::len).sum();
    Ok(symbolic_from_rows(&rows).nnz() - lower)
}

fn adjacency(m: &SparseSpd) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m.dim()];
    for (i, j, _) in m.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// BFS levels from `root` restricted to unvisited vertices. Returns the
/// vertices grouped by level.
fn level_structure(adj: &[Vec<usize>], root: usize, done: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    seen[root] = true;
    let mut levels = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if !done[w] && !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        next.sort_unstable();
        levels.push(next);
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, done: &[bool]) -> usize {
    let mut root = start;
    let mut levels = level_structure(adj, root, done);
    loop {
        let last = levels.last().unwrap();
        let cand = *last
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .expect("level is non-empty");
        let cand_levels = level_structure(adj, cand, done);
        if cand_levels.len() > levels.len() {
            root = cand;
            levels = cand_levels;
        } else {
            return root;
        }
    }
}

/// Reverse Cuthill-McKee order of the graph of `m`. Ties are broken by
/// ascending vertex index so the result is deterministic.
fn reverse_cuthill_mckee(m: &SparseSpd) -> Vec<usize> {
    let n = m.dim();
    let adj = adjacency(m);
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !done[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap();
        let root = pseudo_peripheral(&adj, start, &done);
        let mut queue = VecDeque::from([root]);
        done[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !done[w]).collect();
            nbrs.sort_unstable_by_key(|&w| (adj[w].len(), w));
            for w in nbrs {
                done[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Fill-reducing permutation for the sparsity graph of `m`.
///
/// Reverse Cuthill-McKee is compared against the natural order and the one
/// with less fill is returned, so the result never has more fill than the
/// identity.
pub fn fill_reducing_order(m: &SparseSpd) -> Result<Permutation> {
    let rcm = Permutation::new(reverse_cuthill_mckee(m), PermutationKind::FillReducing)?;
    let id = Permutation::identity(m.dim());
    if fill_in(m, &rcm)? < fill_in(m, &id)? {
        Ok(rcm)
    } else {
        Ok(id)
    }
}

/// Ordering under which the triangular map is fitted: `Π*` followed by a
/// reversal, so `kr.order()[k] == star.order()[p-1-k]`.
pub fn kr_order(star: &Permutation) -> Permutation {
    star.then(&Permutation::reverse(star.len()))
        .expect("reverse has matching length")
}

/// Ordering and row patterns of the triangular transport map derived from
/// the Cholesky pattern of `Π* Λ Π*ᵀ`.
///
/// With `J` the reversal, `J L J` is upper triangular, so `C = (J L J)ᵀ`
/// is lower triangular and `Π_kr Λ Π_krᵀ = Cᵀ C` for `Π_kr = J Π*`.
/// Row `i` of `C` holds `p-1-r` for every row `r` of column `p-1-i` of `L`.
pub fn kr_order_from_cholesky(
    star: &Permutation,
    pattern: &LowerPattern,
) -> Result<(Permutation, Vec<Vec<usize>>)> {
    let p = star.len();
    if pattern.dim() != p {
        return Err(crate::Error::DimensionMismatch {
            context: "kr ordering",
            expected: p,
            found: pattern.dim(),
        });
    }
    let kr = kr_order(star);
    let rows = (0..p)
        .map(|i| {
            let mut r: Vec<usize> = pattern
                .column(p - 1 - i)
                .iter()
                .map(|&r| p - 1 - r)
                .collect();
            r.sort_unstable();
            r
        })
        .collect();
    Ok((kr, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force elimination game on a dense boolean adjacency matrix.
    fn elimination_game_fill(m: &SparseSpd, perm: &Permutation) -> usize {
        let n = m.dim();
        let pos = perm.inverse();
        let mut a = vec![vec![false; n]; n];
        for (i, j, _) in m.triplets() {
            let (x, y) = (pos.order()[i], pos.order()[j]);
            a[x][y] = true;
            a[y][x] = true;
        }
        let mut fill = 0;
        for k in 0..n {
            let later: Vec<usize> = (k + 1..n).filter(|&j| a[k][j]).collect();
            for &x in &later {
                for &y in &later {
                    if x != y && !a[x][y] {
                        a[x][y] = true;
                        if x > y {
                            fill += 1;
                        }
                    }
                }
            }
        }
        fill
    }

    fn star(p: usize) -> SparseSpd {
        let mut t: Vec<_> = (0..p).map(|i| (i, i, p as f64)).collect();
        t.extend((1..p).map(|i| (i, 0, 1.0)));
        SparseSpd::from_triplets(p, t).unwrap()
    }

    fn lattice(rows: usize, cols: usize) -> SparseSpd {
        let idx = |r: usize, c: usize| r * cols + c;
        let mut t = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                t.push((idx(r, c), idx(r, c), 5.0));
                if c + 1 < cols {
                    t.push((idx(r, c + 1), idx(r, c), -1.0));
                }
                if r + 1 < rows {
                    t.push((idx(r + 1, c), idx(r, c), -1.0));
                }
            }
        }
        SparseSpd::from_triplets(rows * cols, t).unwrap()
    }

    #[test]
    fn star_center_first_fills_completely() {
        let p = 10;
        let m = star(p);
        let id = Permutation::identity(p);
        let expected = (p - 1) * (p - 2) / 2;
        assert_eq!(elimination_game_fill(&m, &id), expected);
        assert_eq!(fill_in(&m, &id).unwrap(), expected);
    }

    #[test]
    fn star_fill_reducing_has_no_fill() {
        let m = star(12);
        let perm = fill_reducing_order(&m).unwrap();
        assert_eq!(fill_in(&m, &perm).unwrap(), 0);
        assert_eq!(elimination_game_fill(&m, &perm), 0);
    }

    #[test]
    fn lattice_fill_matches_elimination_game() {
        let m = lattice(5, 6);
        for perm in [
            Permutation::identity(30),
            Permutation::reverse(30),
            fill_reducing_order(&m).unwrap(),
        ] {
            assert_eq!(
                fill_in(&m, &perm).unwrap(),
                elimination_game_fill(&m, &perm)
            );
        }
    }

    #[test]
    fn fill_reducing_never_worse_than_identity() {
        let m = lattice(7, 4);
        let id = Permutation::identity(m.dim());
        let perm = fill_reducing_order(&m).unwrap();
        assert!(fill_in(&m, &perm).unwrap() <= fill_in(&m, &id).unwrap());
    }

    #[test]
    fn chain_has_no_fill_in_natural_order() {
        let t = (0..6)
            .map(|i| (i, i, 2.0))
            .chain((1..6).map(|i| (i, i - 1, -1.0)));
        let m = SparseSpd::from_triplets(6, t).unwrap();
        assert_eq!(fill_in(&m, &Permutation::identity(6)).unwrap(), 0);
        assert_eq!(factor_nnz(&m, &Permutation::identity(6)).unwrap(), 11);
    }

    #[test]
    fn kr_rows_are_lower_triangular() {
        let m = lattice(3, 3);
        let star = fill_reducing_order(&m).unwrap();
        let pat = symbolic_cholesky(&m, &star).unwrap();
        let (kr, rows) = kr_order_from_cholesky(&star, &pat).unwrap();
        assert_eq!(kr.order()[0], star.order()[8]);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(*r.last().unwrap(), i);
        }
    }
}
