//! Basis factorization for the revised simplex.
//!
//! The basis is permuted into block upper-triangular form by peeling column
//! singletons (an upper-triangular leading block) and row singletons (a
//! lower-triangular trailing block). Whatever remains is a small kernel that
//! gets a dense LU with partial pivoting. Basis changes between
//! refactorizations are kept as a product-form eta file.

/// Compressed sparse columns.
#[derive(Clone, Debug, Default)]
pub(crate) struct SparseCols {
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseCols {
    pub fn new() -> Self {
        Self { start: vec![0], idx: Vec::new(), val: Vec::new() }
    }

    pub fn push_col(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (i, v) in entries {
            if v != 0.0 {
                self.idx.push(i);
                self.val.push(v);
            }
        }
        self.start.push(self.idx.len());
    }

    pub fn num_cols(&self) -> usize {
        self.start.len() - 1
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.start[j], self.start[j + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }

    #[inline]
    pub fn dot(&self, j: usize, dense: &[f64]) -> f64 {
        let (idx, val) = self.col(j);
        idx.iter().zip(val).map(|(&i, &v)| v * dense[i]).sum()
    }
}

const SINGLETON_TOL: f64 = 1e-7;
const KERNEL_PIVOT_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    Upper,
    Kernel,
    Lower,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Positions that could not be pivoted and rows left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub dependent_positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct BasisFactor {
    m: usize,
    // (row, position, diagonal) in discovery order
    upper: Vec<(usize, usize, f64)>,
    lower: Vec<(usize, usize, f64)>,
    row_block: Vec<Block>,
    pos_block: Vec<Block>,
    kernel_rows: Vec<usize>,
    kernel_pos: Vec<usize>,
    kernel_lu: Vec<f64>,
    kernel_perm: Vec<usize>,
    // basis in row-major and column-major form, indexed by position
    row_start: Vec<usize>,
    row_entries: Vec<(usize, f64)>,
    col_start: Vec<usize>,
    col_entries: Vec<(usize, f64)>,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn factorize(m: usize, basis: &[usize], cols: &SparseCols) -> Result<Self, Singular> {
        debug_assert_eq!(basis.len(), m);
        let mut col_start = Vec::with_capacity(m + 1);
        let mut col_entries = Vec::new();
        col_start.push(0);
        let mut row_count = vec![0usize; m];
        for &j in basis {
            let (idx, val) = cols.col(j);
            for (&i, &v) in idx.iter().zip(val) {
                col_entries.push((i, v));
                row_count[i] += 1;
            }
            col_start.push(col_entries.len());
        }
        let mut row_start = vec![0usize; m + 1];
        for i in 0..m {
            row_start[i + 1] = row_start[i] + row_count[i];
        }
        let mut fill = row_start.clone();
        let mut row_entries = vec![(0usize, 0.0f64); col_entries.len()];
        for p in 0..m {
            for &(i, v) in &col_entries[col_start[p]..col_start[p + 1]] {
                row_entries[fill[i]] = (p, v);
                fill[i] += 1;
            }
        }

        let mut row_active = vec![true; m];
        let mut pos_active = vec![true; m];
        let mut col_cnt: Vec<usize> = (0..m).map(|p| col_start[p + 1] - col_start[p]).collect();
        let mut row_cnt = row_count;
        let mut row_block = vec![Block::Kernel; m];
        let mut pos_block = vec![Block::Kernel; m];

        // Column singletons.
        let mut upper = Vec::new();
        let mut queue: Vec<usize> = (0..m).filter(|&p| col_cnt[p] == 1).collect();
        queue.reverse();
        while let Some(p) = queue.pop() {
            if !pos_active[p] || col_cnt[p] != 1 {
                continue;
            }
            let Some(&(i, v)) = col_entries[col_start[p]..col_start[p + 1]]
                .iter()
                .find(|(i, _)| row_active[*i])
            else {
                continue;
            };
            if v.abs() < SINGLETON_TOL {
                continue;
            }
            upper.push((i, p, v));
            pos_active[p] = false;
            row_active[i] = false;
            row_block[i] = Block::Upper;
            pos_block[p] = Block::Upper;
            for &(i2, _) in &col_entries[col_start[p]..col_start[p + 1]] {
                row_cnt[i2] -= 1;
            }
            for &(p2, _) in &row_entries[row_start[i]..row_start[i + 1]] {
                if pos_active[p2] {
                    col_cnt[p2] -= 1;
                    if col_cnt[p2] == 1 {
                        queue.push(p2);
                    }
                }
            }
        }

        // Row singletons.
        let mut lower = Vec::new();
        let mut queue: Vec<usize> = (0..m).filter(|&i| row_active[i] && row_cnt[i] == 1).collect();
        queue.reverse();
        while let Some(i) = queue.pop() {
            if !row_active[i] || row_cnt[i] != 1 {
                continue;
            }
            let Some(&(p, v)) = row_entries[row_start[i]..row_start[i + 1]]
                .iter()
                .find(|(p, _)| pos_active[*p])
            else {
                continue;
            };
            if v.abs() < SINGLETON_TOL {
                continue;
            }
            lower.push((i, p, v));
            pos_active[p] = false;
            row_active[i] = false;
            row_block[i] = Block::Lower;
            pos_block[p] = Block::Lower;
            for &(p2, _) in &row_entries[row_start[i]..row_start[i + 1]] {
                if pos_active[p2] {
                    col_cnt[p2] -= 1;
                }
            }
            for &(i2, _) in &col_entries[col_start[p]..col_start[p + 1]] {
                if row_active[i2] {
                    row_cnt[i2] -= 1;
                    if row_cnt[i2] == 1 {
                        queue.push(i2);
                    }
                }
            }
        }

        let kernel_rows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
        let kernel_pos: Vec<usize> = (0..m).filter(|&p| pos_active[p]).collect();
        if kernel_rows.len() != kernel_pos.len() {
            // Structurally singular; report the surplus side.
            return Err(Singular {
                dependent_positions: kernel_pos,
                free_rows: kernel_rows,
            });
        }
        let k = kernel_rows.len();
        let mut row_kidx = vec![usize::MAX; m];
        for (r, &i) in kernel_rows.iter().enumerate() {
            row_kidx[i] = r;
        }
        let mut dense = vec![0.0f64; k * k];
        for (c, &p) in kernel_pos.iter().enumerate() {
            for &(i, v) in &col_entries[col_start[p]..col_start[p + 1]] {
                let r = row_kidx[i];
                if r != usize::MAX {
                    dense[r * k + c] += v;
                }
            }
        }
        let (perm, bad_cols) = dense_lu(&mut dense, k);
        if !bad_cols.is_empty() {
            let pivoted: Vec<bool> = {
                let mut used = vec![false; k];
                for (step, &r) in perm.iter().enumerate() {
                    if !bad_cols.contains(&step) {
                        used[r] = true;
                    }
                }
                used
            };
            return Err(Singular {
                dependent_positions: bad_cols.iter().map(|&c| kernel_pos[c]).collect(),
                free_rows: (0..k).filter(|&r| !pivoted[r]).map(|r| kernel_rows[r]).collect(),
            });
        }

        Ok(Self {
            m,
            upper,
            lower,
            row_block,
            pos_block,
            kernel_rows,
            kernel_pos,
            kernel_lu: dense,
            kernel_perm: perm,
            row_start,
            row_entries,
            col_start,
            col_entries,
            etas: Vec::new(),
        })
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut x = vec![0.0; m];
        for &(i, p, d) in &self.lower {
            let mut s = rhs[i];
            for &(q, v) in self.row(i) {
                if q != p {
                    s -= v * x[q];
                }
            }
            x[p] = s / d;
        }
        let k = self.kernel_rows.len();
        if k > 0 {
            let mut v = vec![0.0; k];
            for (r, &i) in self.kernel_rows.iter().enumerate() {
                let mut s = rhs[i];
                for &(q, a) in self.row(i) {
                    if self.pos_block[q] == Block::Lower {
                        s -= a * x[q];
                    }
                }
                v[r] = s;
            }
            let z = self.kernel_solve(&v);
            for (c, &p) in self.kernel_pos.iter().enumerate() {
                x[p] = z[c];
            }
        }
        for &(i, p, d) in self.upper.iter().rev() {
            let mut s = rhs[i];
            for &(q, v) in self.row(i) {
                if q != p {
                    s -= v * x[q];
                }
            }
            x[p] = s / d;
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
        x
    }

    /// Solves `B^T y = c`; `c` is indexed by basis position, the result by row.
    pub fn btran(&self, c: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; m];
        for &(i, p, d) in &self.upper {
            let mut s = c[p];
            for &(r, v) in self.column(p) {
                if r != i {
                    s -= v * y[r];
                }
            }
            y[i] = s / d;
        }
        let k = self.kernel_rows.len();
        if k > 0 {
            let mut w = vec![0.0; k];
            for (col, &p) in self.kernel_pos.iter().enumerate() {
                let mut s = c[p];
                for &(r, v) in self.column(p) {
                    if self.row_block[r] == Block::Upper {
                        s -= v * y[r];
                    }
                }
                w[col] = s;
            }
            let z = self.kernel_solve_transpose(&w);
            for (r, &i) in self.kernel_rows.iter().enumerate() {
                y[i] = z[r];
            }
        }
        for &(i, p, d) in self.lower.iter().rev() {
            let mut s = c[p];
            for &(r, v) in self.column(p) {
                if r != i {
                    s -= v * y[r];
                }
            }
            y[i] = s / d;
        }
        y
    }

    /// Records that basis position `pos` was replaced by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }

    #[inline]
    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.row_entries[self.row_start[i]..self.row_start[i + 1]]
    }

    #[inline]
    fn column(&self, p: usize) -> &[(usize, f64)] {
        &self.col_entries[self.col_start[p]..self.col_start[p + 1]]
    }

    fn kernel_solve(&self, v: &[f64]) -> Vec<f64> {
        let k = v.len();
        let lu = &self.kernel_lu;
        let mut z: Vec<f64> = self.kernel_perm.iter().map(|&r| v[r]).collect();
        for i in 0..k {
            let s = z[i];
            if s != 0.0 {
                for r in i + 1..k {
                    z[r] -= lu[r * k + i] * s;
                }
            }
        }
        for i in (0..k).rev() {
            let mut s = z[i];
            for c in i + 1..k {
                s -= lu[i * k + c] * z[c];
            }
            z[i] = s / lu[i * k + i];
        }
        z
    }

    fn kernel_solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        let k = v.len();
        let lu = &self.kernel_lu;
        let mut a = v.to_vec();
        // U^T a = v
        for i in 0..k {
            let s = a[i] / lu[i * k + i];
            a[i] = s;
            if s != 0.0 {
                for c in i + 1..k {
                    a[c] -= lu[i * k + c] * s;
                }
            }
        }
        // L^T b = a
        for i in (0..k).rev() {
            let s = a[i];
            if s != 0.0 {
                for r in 0..i {
                    a[r] -= lu[i * k + r] * s;
                }
            }
        }
        let mut w = vec![0.0; k];
        for (i, &r) in self.kernel_perm.iter().enumerate() {
            w[r] = a[i];
        }
        w
    }
}

/// In-place LU with partial pivoting of a row-major `k x k` matrix.
///
/// Returns the row permutation (`perm[step]` = original row) and the list of
/// elimination steps whose column had no acceptable pivot.
fn dense_lu(a: &mut [f64], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut bad = Vec::new();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for step in 0..k {
        let mut best = step;
        let mut best_val = a[step * k + step].abs();
        for r in step + 1..k {
            let v = a[r * k + step].abs();
            if v > best_val {
                best = r;
                best_val = v;
            }
        }
        if best_val <= KERNEL_PIVOT_TOL * scale {
            bad.push(step);
            a[step * k + step] = 1.0;
            for r in step + 1..k {
                a[r * k + step] = 0.0;
            }
            continue;
        }
        if best != step {
            for c in 0..k {
                a.swap(step * k + c, best * k + c);
            }
            perm.swap(step, best);
        }
        let piv = a[step * k + step];
        for r in step + 1..k {
            let f = a[r * k + step] / piv;
            if f != 0.0 {
                a[r * k + step] = f;
                let (top, bottom) = a.split_at_mut(r * k);
                let src = &top[step * k + step + 1..step * k + k];
                let dst = &mut bottom[step + 1..k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= f * s;
                }
            } else {
                a[r * k + step] = 0.0;
            }
        }
    }
    (perm, bad)
}
