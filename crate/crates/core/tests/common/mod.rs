//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use insense::SensingMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize, n: usize) -> SensingMatrix {
    SensingMatrix::new(DMatrix::from_fn(d, n, |_, _| rng.sample(StandardNormal))).unwrap()
}

/// Objective evaluated with explicit scalar loops, `G` built entry by entry.
pub fn objective_literal(phi: &SensingMatrix, z: &[f64], eps1: f64, eps2: f64) -> f64 {
    let (d, n) = (phi.sensors(), phi.atoms());
    let g = |i: usize, j: usize| -> f64 { (0..d).map(|r| z[r] * phi.get(r, i) * phi.get(r, j)).sum() };
    let diag: Vec<f64> = (0..n).map(|i| g(i, i)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let gij = g(i, j);
            total += (gij * gij + eps1) / (diag[i] * diag[j] + eps2);
        }
    }
    total
}

/// Objective as a function of the free (upper-triangle) entries of `G`.
pub fn objective_of_gram(g: &DMatrix<f64>, eps1: f64, eps2: f64) -> f64 {
    let n = g.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += (g[(i, j)].powi(2) + eps1) / (g[(i, i)] * g[(j, j)] + eps2);
        }
    }
    total
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_linf(a: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(reference).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Projection onto the scaled boxed simplex by bisection on the multiplier.
pub fn bisection_projection(y: &[f64], m: f64) -> Vec<f64> {
    let total = |l: f64| y.iter().map(|v| (v + l).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = -y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut hi = 1.0 - y.iter().cloned().fold(f64::INFINITY, f64::min);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    y.iter().map(|v| (v + l).clamp(0.0, 1.0)).collect()
}

/// Column coherence by explicit loops; `None` for a zero column.
pub fn coherence_loop(rows: &[Vec<f64>], i: usize, j: usize) -> Option<f64> {
    let (mut dot, mut ni, mut nj) = (0.0, 0.0, 0.0);
    for r in rows {
        dot += r[i] * r[j];
        ni += r[i] * r[i];
        nj += r[j] * r[j];
    }
    if ni <= 0.0 || nj <= 0.0 {
        None
    } else {
        Some(dot.abs() / (ni.sqrt() * nj.sqrt()))
    }
}

pub fn mu_avg_loop(rows: &[Vec<f64>]) -> Option<f64> {
    let n = rows[0].len();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += coherence_loop(rows, i, j)?.powi(2);
            pairs += 1;
        }
    }
    Some((sum / pairs as f64).sqrt())
}

pub fn fp_loop(rows: &[Vec<f64>]) -> f64 {
    let mut fp = 0.0;
    for a in 0..rows.len() {
        for b in (a + 1)..rows.len() {
            let ip: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
            fp += ip * ip;
        }
    }
    fp
}

pub fn rows_of(phi: &SensingMatrix, subset: &[usize]) -> Vec<Vec<f64>> {
    subset.iter().map(|&r| phi.row_vec(r)).collect()
}

/// All `k`-subsets of `0..n` in lexicographic order, by recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum-l1 solution by enumerating every `M`-column basis of a full-row-rank
/// `M x N` system. Returns the minimizer and whether it is unique.
pub fn l1_by_enumeration(a: &DMatrix<f64>, y: &[f64]) -> Option<(Vec<f64>, bool)> {
    let (m, n) = a.shape();
    let rhs = DVector::from_column_slice(y);
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for s in subsets(n, m) {
        let sub = a.select_columns(&s);
        let Some(sol) = sub.lu().solve(&rhs) else { continue };
        let mut x = vec![0.0; n];
        for (k, &j) in s.iter().enumerate() {
            x[j] = sol[k];
        }
        let resid = (a * DVector::from_column_slice(&x) - &rhs).norm();
        if resid > 1e-8 {
            continue;
        }
        candidates.push((x.iter().map(|v| v.abs()).sum(), x));
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let near: Vec<&Vec<f64>> =
        candidates.iter().filter(|c| c.0 <= best + 1e-9 * (1.0 + best)).map(|c| &c.1).collect();
    let first = near[0].clone();
    let unique = near
        .iter()
        .all(|x| x.iter().zip(&first).all(|(a, b)| (a - b).abs() <= 1e-7));
    Some((first, unique))
}
