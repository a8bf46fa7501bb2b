//! Dense contraction kernels for row-major `N^p` coefficient arrays, and a
//! packed symmetric form used on the energy hot path.

/// `Σ T[i1..ip] x[i1]…x[ip]`.
pub fn contract_full(t: &[f64], n: usize, p: u32, x: &[f64]) -> f64 {
    debug_assert_eq!(t.len(), n.pow(p));
    if p == 0 {
        return t[0];
    }
    let mut cur = contract_last(t, n, x);
    for _ in 1..p {
        cur = contract_last(&cur, n, x);
    }
    cur[0]
}

/// Contracts the trailing index: `out[a] = Σ_i t[a·n + i] x[i]`.
pub fn contract_last(t: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    if t.len() == n {
        return vec![dot(t, x)];
    }
    t.chunks_exact(n).map(|row| dot(row, x)).collect()
}

/// Contracts the leading index: `out[b] = Σ_i x[i] t[i·m + b]`.
fn contract_first(t: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let m = t.len() / n;
    let mut out = vec![0.0; m];
    for (row, &xi) in t.chunks_exact(m).zip(x) {
        if xi != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, r)| *o += xi * r);
        }
    }
    out
}

/// Adds `scale · ∇_x Σ T x…x` to `out`.
pub fn add_gradient(t: &[f64], n: usize, p: u32, x: &[f64], scale: f64, out: &mut [f64]) {
    if p == 0 {
        return;
    }
    // suffix[j] = T contracted on slots j..p, shape N^j
    let p = p as usize;
    let mut suffix: Vec<Vec<f64>> = vec![Vec::new(); p + 1];
    suffix[p] = t.to_vec();
    for j in (1..p).rev() {
        suffix[j] = contract_last(&suffix[j + 1], n, x);
    }
    for slot in 0..p {
        // slots slot+1.. contracted; leading `slot` indices remain to contract
        let mut cur = if slot + 1 == p { t.to_vec() } else { suffix[slot + 1].clone() };
        for _ in 0..slot {
            cur = contract_first(&cur, n, x);
        }
        debug_assert_eq!(cur.len(), n);
        out.iter_mut().zip(&cur).for_each(|(o, c)| *o += scale * c);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorise without reassociation flags
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (u, v) in ca.zip(cb) {
        acc[0] += u[0] * v[0];
        acc[1] += u[1] * v[1];
        acc[2] += u[2] * v[2];
        acc[3] += u[3] * v[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (u, v) in ra.iter().zip(rb) {
        s += u * v;
    }
    s
}

/// Symmetric coefficients over non-decreasing index tuples, stored in
/// lexicographic order: `S[i1≤…≤ip] = Σ_{distinct permutations} T[π(i)]`.
#[derive(Debug, Clone)]
pub struct Packed {
    n: usize,
    p: u32,
    data: Vec<f64>,
}

/// Number of multisets of size `r` drawn from `m` symbols.
fn multisets(m: usize, r: u32) -> usize {
    if r == 0 {
        return 1;
    }
    // C(m + r - 1, r) without overflow for desk-scale arguments
    let mut v: u128 = 1;
    for j in 0..r as u128 {
        v = v * (m as u128 + j) / (j + 1);
    }
    v as usize
}

impl Packed {
    pub fn from_dense(t: &[f64], n: usize, p: u32) -> Self {
        assert!(p >= 1);
        let len = multisets(n, p);
        let mut data = vec![0.0; len];
        // offsets[r][i]: start of the block whose first index is i among
        // multisets of size r over {i..n}, relative to the block starting at 0
        let offsets: Vec<Vec<usize>> = (0..=p)
            .map(|r| {
                let mut o = vec![0usize; n + 1];
                if r >= 1 {
                    for i in 0..n {
                        o[i + 1] = o[i] + multisets(n - i, r - 1);
                    }
                }
                o
            })
            .collect();
        let mut idx = vec![0usize; p as usize];
        for (flat, &v) in t.iter().enumerate() {
            let mut f = flat;
            for slot in (0..p as usize).rev() {
                idx[slot] = f % n;
                f /= n;
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            let mut rank = 0;
            let mut start = 0;
            for (level, &i) in sorted.iter().enumerate() {
                let r = p as usize - level;
                rank += offsets[r][i] - offsets[r][start];
                start = i;
            }
            data[rank] += v;
        }
        Packed { n, p, data }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut cursor = 0;
        self.rec(x, 0, self.p, &mut cursor)
    }

    fn rec(&self, x: &[f64], start: usize, r: u32, cursor: &mut usize) -> f64 {
        if r == 1 {
            let len = self.n - start;
            let s = dot(&self.data[*cursor..*cursor + len], &x[start..]);
            *cursor += len;
            return s;
        }
        let mut acc = 0.0;
        for i in start..self.n {
            let inner = self.rec(x, i, r - 1, cursor);
            acc += x[i] * inner;
        }
        acc
    }

    #[cfg(test)]
    fn len(&self) -> usize {
        self.data.len()
    }
}

/// All perfect matchings of `0..p` (`p` even), as lists of pairs.
pub fn matchings(p: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(rest: &[usize], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&a, tail)) = rest.split_first() else {
            out.push(cur.clone());
            return;
        };
        for (i, &b) in tail.iter().enumerate() {
            let mut next = tail.to_vec();
            next.remove(i);
            cur.push((a, b));
            go(&next, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let slots: Vec<usize> = (0..p).collect();
    go(&slots, &mut Vec::new(), &mut out);
    out
}
