//! Independent reference implementations used as oracles by the
//! integration tests. Nothing here calls into the library's solvers.

#![allow(dead_code)]

use chrono::NaiveDate;

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Ridge with an unpenalized intercept, from the centred normal equations.
/// Rows of `x` and `y` are samples. Returns `(weights D×K, intercept K)`.
pub fn ridge(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let k = y[0].len();
    let xm: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let ym: Vec<f64> = (0..k)
        .map(|j| y.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let mut gram = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += (r[i] - xm[i]) * (r[j] - xm[j]);
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let mut w = vec![vec![0.0; k]; d];
    for out in 0..k {
        let rhs: Vec<f64> = (0..d)
            .map(|i| {
                x.iter()
                    .zip(y)
                    .map(|(r, t)| (r[i] - xm[i]) * (t[out] - ym[out]))
                    .sum()
            })
            .collect();
        let col = solve(gram.clone(), rhs);
        for i in 0..d {
            w[i][out] = col[i];
        }
    }
    let intercept = (0..k)
        .map(|out| ym[out] - (0..d).map(|i| xm[i] * w[i][out]).sum::<f64>())
        .collect();
    (w, intercept)
}

pub fn ridge_predict(w: &[Vec<f64>], intercept: &[f64], x: &[f64]) -> Vec<f64> {
    (0..intercept.len())
        .map(|out| {
            intercept[out]
                + x.iter()
                    .enumerate()
                    .map(|(i, xi)| xi * w[i][out])
                    .sum::<f64>()
        })
        .collect()
}

/// Leave-one-out residuals by explicit refits.
pub fn loo_by_refit(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let xs: Vec<Vec<f64>> = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| r.clone())
                .collect();
            let ys: Vec<Vec<f64>> = y
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| r.clone())
                .collect();
            let (w, b) = ridge(&xs, &ys, lambda);
            let p = ridge_predict(&w, &b, &x[i]);
            y[i].iter().zip(p).map(|(t, p)| t - p).collect()
        })
        .collect()
}

/// Lambda with the lowest explicit-refit LOO squared error; ties to the larger.
pub fn select_lambda(x: &[Vec<f64>], y: &[Vec<f64>], grid: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, grid[0]);
    for &l in grid {
        let err: f64 = loo_by_refit(x, y, l)
            .iter()
            .flatten()
            .map(|r| r * r)
            .sum::<f64>()
            / x.len() as f64;
        if err < best.0 - 1e-12 * best.0.abs().max(1.0)
            || ((err - best.0).abs() <= 1e-12 * best.0.abs().max(1.0) && l > best.1)
        {
            best = (err, l);
        }
    }
    best.1
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Exact posterior over assignment vectors of the collapsed two-level
/// Dirichlet-multinomial model with `k` communities and no pooling.
/// `tokens[i] = (day, taxon)`; the result is indexed by the base-`k`
/// number whose digit `i` is token `i`'s community.
pub fn enumerate_posterior(
    tokens: &[(usize, usize)],
    n_days: usize,
    n_taxa: usize,
    k: usize,
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let n = tokens.len();
    let states = k.pow(n as u32);
    let mut logp = Vec::with_capacity(states);
    for s in 0..states {
        let mut z = vec![0; n];
        let mut r = s;
        for zi in z.iter_mut() {
            *zi = r % k;
            r /= k;
        }
        let mut n_tk = vec![vec![0.0; k]; n_days];
        let mut n_kv = vec![vec![0.0; n_taxa]; k];
        for (i, &(t, v)) in tokens.iter().enumerate() {
            n_tk[t][z[i]] += 1.0;
            n_kv[z[i]][v] += 1.0;
        }
        let mut lp = 0.0;
        for row in &n_tk {
            lp += row.iter().map(|&c| ln_gamma(c + alpha)).sum::<f64>();
        }
        for row in &n_kv {
            let nk: f64 = row.iter().sum();
            lp += row.iter().map(|&c| ln_gamma(c + beta)).sum::<f64>()
                - ln_gamma(nk + n_taxa as f64 * beta);
        }
        logp.push(lp);
    }
    let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn assert_stochastic_rows(what: &str, rows: impl IntoIterator<Item = Vec<f64>>) {
    for (i, r) in rows.into_iter().enumerate() {
        assert!(
            r.iter().all(|&x| x >= 0.0 && x.is_finite()),
            "{what} row {i} has a negative entry: {r:?}"
        );
        let s: f64 = r.iter().sum();
        assert!((s - 1.0).abs() <= 1e-9, "{what} row {i} sums to {s}");
    }
}
