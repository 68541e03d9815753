//! Additive functionals of a finite chain and their exact second moments.
//!
//! Every exact quantity in the crate reduces to functionals of the form
//! `Z = Σ_{p=start}^{end} f_p(X_p)`: partial sums of window arrays, block sums,
//! martingale differences built from state functions. The recursions below
//! carry, per state `s` at position `p`, the mass `P(X_p = s)` and the partial
//! statistics `E[Z_{≤p} 1{X_p = s}]`, `E[Z_{≤p} W_{≤p} 1{X_p = s}]`.

use crate::generators::chain::Chain;

/// `Z = Σ_{i} funcs[i](X_{start + i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct Additive {
    pub start: usize,
    pub funcs: Vec<Vec<f64>>,
}

impl Additive {
    pub fn zero(start: usize, len: usize, states: usize) -> Self {
        Additive { start, funcs: vec![vec![0.0; states]; len] }
    }

    /// Last position touched (meaningful only when non-empty).
    pub fn end(&self) -> usize {
        self.start + self.funcs.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn at(&self, p: usize) -> Option<&[f64]> {
        if p < self.start {
            return None;
        }
        self.funcs.get(p - self.start).map(|v| v.as_slice())
    }

    /// Adds `scale · f` at position `p`, growing the support as needed.
    pub fn add_at(&mut self, p: usize, f: &[f64], scale: f64) {
        let d = f.len();
        if self.funcs.is_empty() {
            self.start = p;
            self.funcs.push(vec![0.0; d]);
        }
        while p < self.start {
            self.funcs.insert(0, vec![0.0; d]);
            self.start -= 1;
        }
        while p > self.end() {
            self.funcs.push(vec![0.0; d]);
        }
        let dst = &mut self.funcs[p - self.start];
        for (a, &b) in dst.iter_mut().zip(f) {
            *a += scale * b;
        }
    }

    pub fn add(&mut self, other: &Additive, scale: f64) {
        for (i, f) in other.funcs.iter().enumerate() {
            self.add_at(other.start + i, f, scale);
        }
    }

    /// Evaluates `Z` on a chain path indexed by position.
    pub fn evaluate(&self, path: &[usize]) -> f64 {
        self.funcs.iter().enumerate().map(|(i, f)| f[path[self.start + i]]).sum()
    }
}

/// Forward state of the variance recursion at a position.
#[derive(Clone, Debug)]
pub(crate) struct Forward {
    pub p: usize,
    pub mass: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl Forward {
    /// Starts at position `p` with the marginal law and an empty sum.
    pub fn at(p: usize, marginal: &[f64]) -> Self {
        let d = marginal.len();
        Forward { p, mass: marginal.to_vec(), e1: vec![0.0; d], e2: vec![0.0; d] }
    }

    /// Moves to position `p + 1`, adding `h(X_{p+1})` to the sum.
    pub fn advance(&mut self, chain: &Chain, h: Option<&[f64]>) {
        let mat = chain.transition(self.p + 1);
        let d = self.mass.len();
        let mut mass = vec![0.0; d];
        let mut e1 = vec![0.0; d];
        let mut e2 = vec![0.0; d];
        for s in 0..d {
            let (m, a, b) = (self.mass[s], self.e1[s], self.e2[s]);
            if m == 0.0 && a == 0.0 && b == 0.0 {
                continue;
            }
            for (t, &pst) in mat.row(s).iter().enumerate() {
                mass[t] += m * pst;
                e1[t] += a * pst;
                e2[t] += b * pst;
            }
        }
        if let Some(h) = h {
            for t in 0..d {
                let v = h[t];
                e2[t] += 2.0 * v * e1[t] + mass[t] * v * v;
                e1[t] += mass[t] * v;
            }
        }
        self.p += 1;
        self.mass = mass;
        self.e1 = e1;
        self.e2 = e2;
    }

    /// Adds `h(X_p)` at the current position.
    pub fn add_current(&mut self, h: &[f64]) {
        for t in 0..self.mass.len() {
            let v = h[t];
            self.e2[t] += 2.0 * v * self.e1[t] + self.mass[t] * v * v;
            self.e1[t] += self.mass[t] * v;
        }
    }

    pub fn mean(&self) -> f64 {
        self.e1.iter().sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.e2.iter().sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }
}

/// Exact `E[Z W]` for two additive functionals.
pub fn cross_moment(chain: &Chain, marginals: &[Vec<f64>], z: &Additive, w: &Additive) -> f64 {
    if z.is_empty() || w.is_empty() {
        return 0.0;
    }
    let lo = z.start.min(w.start);
    let hi = z.end().max(w.end());
    let d = chain.states();
    let mut mass = marginals[lo].clone();
    let init = |f: &Additive| -> Vec<f64> {
        match f.at(lo) {
            Some(v) => mass.iter().zip(v).map(|(m, x)| m * x).collect(),
            None => vec![0.0; d],
        }
    };
    let mut ez = init(z);
    let mut ew = init(w);
    let mut ezw: Vec<f64> = match (z.at(lo), w.at(lo)) {
        (Some(a), Some(b)) => (0..d).map(|s| mass[s] * a[s] * b[s]).collect(),
        _ => vec![0.0; d],
    };
    for p in lo + 1..=hi {
        let mat = chain.transition(p);
        let mut nm = vec![0.0; d];
        let mut nz = vec![0.0; d];
        let mut nw = vec![0.0; d];
        let mut nzw = vec![0.0; d];
        for s in 0..d {
            let (m, a, b, c) = (mass[s], ez[s], ew[s], ezw[s]);
            if m == 0.0 && a == 0.0 && b == 0.0 && c == 0.0 {
                continue;
            }
            for (t, &pst) in mat.row(s).iter().enumerate() {
                nm[t] += m * pst;
                nz[t] += a * pst;
                nw[t] += b * pst;
                nzw[t] += c * pst;
            }
        }
        let hz = z.at(p);
        let hw = w.at(p);
        for t in 0..d {
            let a = hz.map_or(0.0, |v| v[t]);
            let b = hw.map_or(0.0, |v| v[t]);
            nzw[t] += a * nw[t] + b * nz[t] + nm[t] * a * b;
            nz[t] += nm[t] * a;
            nw[t] += nm[t] * b;
        }
        mass = nm;
        ez = nz;
        ew = nw;
        ezw = nzw;
    }
    ezw.iter().sum()
}

/// Exact `E[Z]`.
pub fn mean(marginals: &[Vec<f64>], z: &Additive) -> f64 {
    z.funcs
        .iter()
        .enumerate()
        .map(|(i, f)| marginals[z.start + i].iter().zip(f).map(|(p, v)| p * v).sum::<f64>())
        .sum()
}

/// Exact `Var(Z)`.
pub fn variance(chain: &Chain, marginals: &[Vec<f64>], z: &Additive) -> f64 {
    let m = mean(marginals, z);
    (cross_moment(chain, marginals, z, z) - m * m).max(0.0)
}

/// Conditional moments of the part of `Z` after position `u`, given `X_u`:
/// returns `(T, U)` with `T(s) = E[Σ_{p>u} f_p(X_p) | X_u = s]` and
/// `U(s) = E[(Σ_{p>u} f_p(X_p))² | X_u = s]`.
pub fn tail_moments(chain: &Chain, z: &Additive, u: usize) -> (Vec<f64>, Vec<f64>) {
    let d = chain.states();
    let mut t = vec![0.0; d];
    let mut q = vec![0.0; d];
    if z.is_empty() || z.end() <= u {
        return (t, q);
    }
    let mut nt = vec![0.0; d];
    let mut nq = vec![0.0; d];
    for p in (u + 1..=z.end()).rev() {
        let f = z.at(p);
        let mat = chain.transition(p);
        for s in 0..d {
            let row = mat.row(s);
            let mut a = 0.0;
            let mut b = 0.0;
            for y in 0..d {
                let fy = f.map_or(0.0, |v| v[y]);
                a += row[y] * (fy + t[y]);
                b += row[y] * (fy * fy + 2.0 * fy * t[y] + q[y]);
            }
            nt[s] = a;
            nq[s] = b;
        }
        std::mem::swap(&mut t, &mut nt);
        std::mem::swap(&mut q, &mut nq);
    }
    (t, q)
}

/// Exact raw moments `E[Z^k]`, `k = 0..=kmax`, by carrying
/// `E[Z_{≤p}^k 1{X_p = s}]` forward and expanding `(Z + v)^k` binomially.
pub fn raw_moments(chain: &Chain, marginals: &[Vec<f64>], z: &Additive, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    out[0] = 1.0;
    if z.is_empty() {
        return out;
    }
    let d = chain.states();
    let binom: Vec<Vec<f64>> = (0..=kmax)
        .map(|k| (0..=k).map(|i| crate::numeric::binomial(k, i)).collect())
        .collect();
    // e[k][s]
    let mut e = vec![vec![0.0; d]; kmax + 1];
    e[0] = marginals[z.start].clone();
    let add = |e: &mut Vec<Vec<f64>>, f: &[f64]| {
        for s in 0..d {
            let v = f[s];
            if v == 0.0 {
                continue;
            }
            let old: Vec<f64> = e.iter().map(|row| row[s]).collect();
            for k in 1..=kmax {
                let mut acc = 0.0;
                let mut vp = 1.0;
                for i in (0..=k).rev() {
                    acc += binom[k][i] * vp * old[i];
                    vp *= v;
                }
                e[k][s] = acc;
            }
        }
    };
    add(&mut e, &z.funcs[0]);
    for p in z.start + 1..=z.end() {
        let mat = chain.transition(p);
        let mut next = vec![vec![0.0; d]; kmax + 1];
        for s in 0..d {
            let row = mat.row(s);
            for k in 0..=kmax {
                let a = e[k][s];
                if a == 0.0 {
                    continue;
                }
                for (t, &pst) in row.iter().enumerate() {
                    next[k][t] += a * pst;
                }
            }
        }
        e = next;
        add(&mut e, &z.funcs[p - z.start]);
    }
    for (k, row) in e.iter().enumerate().skip(1) {
        out[k] = row.iter().sum();
    }
    out
}

/// `‖Z‖_p` and whether it is exact: exact for state functions (one
/// position) and for even integer `p`; otherwise the `L^q` norm for the next
/// even `q > p`, an upper bound.
pub fn lp_norm(chain: &Chain, marginals: &[Vec<f64>], z: &Additive, p: f64) -> (f64, bool) {
    if z.is_empty() {
        return (0.0, true);
    }
    if z.funcs.len() == 1 {
        let m = &marginals[z.start];
        let v: f64 = m.iter().zip(&z.funcs[0]).map(|(w, x)| w * x.abs().powf(p)).sum();
        return (v.powf(1.0 / p), true);
    }
    let even = p.fract() == 0.0 && (p as usize).is_multiple_of(2);
    let q = if even { p as usize } else { 2 * ((p / 2.0).floor() as usize + 1) };
    let m = raw_moments(chain, marginals, z, q);
    (m[q].max(0.0).powf(1.0 / q as f64), even)
}

/// `(min, max)` of `Σ_{p=lo}^{u} f_p(x_p) + terminal(x_u)` over paths
/// `x_lo..x_u` with positive probability (max-plus recursion along the chain).
/// Positions of `z` outside `lo..=u` are ignored.
pub fn path_extremes(chain: &Chain, marginals: &[Vec<f64>], z: &Additive, lo: usize, u: usize, terminal: &[f64]) -> (f64, f64) {
    let d = chain.states();
    let f = |p: usize, s: usize| z.at(p).map_or(0.0, |v| v[s]);
    let lo = lo.min(u);
    let mut hi: Vec<Option<f64>> = (0..d).map(|s| (marginals[lo][s] > 0.0).then(|| f(lo, s))).collect();
    let mut lw = hi.clone();
    for p in lo + 1..=u {
        let mat = chain.transition(p);
        let mut nh = vec![None; d];
        let mut nl = vec![None; d];
        for s in 0..d {
            let (Some(a), Some(b)) = (hi[s], lw[s]) else { continue };
            for (t, &pst) in mat.row(s).iter().enumerate() {
                if pst > 0.0 {
                    let v = f(p, t);
                    nh[t] = Some(nh[t].map_or(a + v, |x: f64| x.max(a + v)));
                    nl[t] = Some(nl[t].map_or(b + v, |x: f64| x.min(b + v)));
                }
            }
        }
        hi = nh;
        lw = nl;
    }
    let mut out = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..d {
        if let (Some(a), Some(b)) = (hi[s], lw[s]) {
            out.0 = out.0.min(b + terminal[s]);
            out.1 = out.1.max(a + terminal[s]);
        }
    }
    out
}

/// Variances of a family of functionals sharing one forward sweep.
///
/// Member `k` is `Σ_{p ≤ ends[k]} main(p) + Σ_{ends[k] < p ≤ ends[k] + replay} tail(k, p)`
/// plus `terminal(k)` at its last position; `ends` must be non-decreasing.
pub(crate) fn prefix_family_variances<M, T, E>(
    chain: &Chain,
    marginals: &[Vec<f64>],
    ends: &[usize],
    replay: usize,
    main: M,
    tail: T,
    terminal: E,
) -> Vec<f64>
where
    M: Fn(usize) -> Vec<f64>,
    T: Fn(usize, usize) -> Vec<f64>,
    E: Fn(usize) -> Vec<f64>,
{
    let last = marginals.len() - 1;
    let mut fwd = Forward::at(0, &marginals[0]);
    fwd.add_current(&main(0));
    ends.iter()
        .enumerate()
        .map(|(k, &e)| {
            while fwd.p < e {
                let h = main(fwd.p + 1);
                fwd.advance(chain, Some(&h));
            }
            let mut t = fwd.clone();
            for p in e + 1..=(e + replay).min(last) {
                let h = tail(k, p);
                t.advance(chain, Some(&h));
            }
            t.add_current(&terminal(k));
            t.variance()
        })
        .collect()
}
