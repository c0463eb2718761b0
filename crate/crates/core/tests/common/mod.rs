//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use cmdp_psrl::lp::LinearProgram;
use cmdp_psrl::rng::{stream_rng, Stream};
use cmdp_psrl::{StateActionTable, StochasticPolicy, TabularCmdp, TransitionKernel};
use rand::Rng;

/// Stationary distribution by power iteration on the lazy chain `(I + M) / 2`.
pub fn power_iteration(kernel: &TransitionKernel, policy: &StochasticPolicy, iters: usize) -> Vec<f64> {
    let n = kernel.num_states();
    let mut d = vec![1.0 / n as f64; n];
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for s in 0..n {
            for a in 0..kernel.num_actions() {
                let w = d[s] * policy.prob(s, a);
                for x in 0..n {
                    next[x] += w * kernel.prob(s, a, x);
                }
            }
        }
        let mut delta = 0.0f64;
        for x in 0..n {
            let v = 0.5 * (d[x] + next[x]);
            delta = delta.max((v - d[x]).abs());
            d[x] = v;
        }
        if delta < 1e-15 {
            break;
        }
    }
    d
}

/// One application of the induced chain: `(d M)(x)`.
pub fn push_forward(kernel: &TransitionKernel, policy: &StochasticPolicy, d: &[f64]) -> Vec<f64> {
    let n = kernel.num_states();
    let mut next = vec![0.0; n];
    for s in 0..n {
        for a in 0..kernel.num_actions() {
            for x in 0..n {
                next[x] += d[s] * policy.prob(s, a) * kernel.prob(s, a, x);
            }
        }
    }
    next
}

pub fn average(d: &[f64], policy: &StochasticPolicy, table: &StateActionTable) -> f64 {
    let mut total = 0.0;
    for (s, ds) in d.iter().enumerate() {
        for a in 0..policy.num_actions() {
            total += ds * policy.prob(s, a) * table.get(s, a);
        }
    }
    total
}

/// Gauss-Jordan with full pivoting; `None` when singular.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if m[i][j].abs() > best {
                    best = m[i][j].abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best < 1e-12 {
            return None;
        }
        m.swap(k, pi);
        b.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in 0..n {
            if i != k {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in 0..n {
        x[perm[k]] = b[k] / m[k][k];
    }
    Some(x)
}

/// Best objective over all basic feasible points of `max c.x, A x <= b, x >= 0`,
/// found by enumerating every choice of `n` active constraints.
pub fn vertex_enumeration(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for subset in combinations(all.len(), n) {
        let m: Vec<Vec<f64>> = subset.iter().map(|&i| all[i].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| all[i].1).collect();
        let Some(x) = solve_dense(m, b) else { continue };
        let feasible = all
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() <= b + 1e-9);
        if feasible {
            let v: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Parses the text produced by `LinearProgram::debug_listing`.
pub fn parse_listing(text: &str) -> LinearProgram {
    let mut lines = text.lines();
    let nums = |t: &[&str]| t.iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let mut lp = LinearProgram::new(nums(&header[1..]));
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        let coeffs = nums(&t[1..t.len() - 2]);
        let rhs: f64 = t[t.len() - 1].parse().unwrap();
        match t[0] {
            "eq" => lp.add_eq(coeffs, rhs),
            "le" => lp.add_le(coeffs, rhs),
            other => panic!("unknown row kind {other}"),
        };
    }
    lp
}

/// Mixed policy with `P(action 1 | s) = p[s]` for two-action models.
pub fn two_action_policy(p: &[f64]) -> StochasticPolicy {
    let probs = p.iter().flat_map(|&q| [1.0 - q, q]).collect();
    StochasticPolicy::new(p.len(), 2, probs).unwrap()
}

/// Stationary distribution from the balance equations, solved with [`solve_dense`].
pub fn stationary_exact(kernel: &TransitionKernel, policy: &StochasticPolicy) -> Vec<f64> {
    let n = kernel.num_states();
    let mut m = vec![vec![0.0; n]; n];
    for s in 0..n {
        for a in 0..kernel.num_actions() {
            for x in 0..n {
                // row x collects inflow into x
                m[x][s] += policy.prob(s, a) * kernel.prob(s, a, x);
            }
        }
    }
    for x in 0..n {
        m[x][x] -= 1.0;
    }
    m[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_dense(m, b).expect("ergodic chain")
}

/// Best feasible value over a 0.02 grid of randomized policies, refined by a
/// fine line search that randomizes one state while the others stay deterministic.
pub fn grid_oracle(cmdp: &TabularCmdp) -> f64 {
    let s_n = cmdp.num_states();
    let cost = &cmdp.costs()[0];
    let threshold = cmdp.thresholds()[0];
    let eval = |p: &[f64]| {
        let pi = two_action_policy(p);
        let d = stationary_exact(cmdp.kernel(), &pi);
        (average(&d, &pi, cmdp.reward()), average(&d, &pi, cost))
    };
    let mut best = f64::NEG_INFINITY;
    let steps = 50;
    let mut idx = vec![0usize; s_n];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        let (r, c) = eval(&p);
        if c <= threshold {
            best = best.max(r);
        }
        let mut k = 0;
        while k < s_n && idx[k] == steps {
            idx[k] = 0;
            k += 1;
        }
        if k == s_n {
            break;
        }
        idx[k] += 1;
    }
    let fine = 20_000;
    for mixed in 0..s_n {
        for mask in 0..(1u32 << s_n) {
            let mut p: Vec<f64> = (0..s_n).map(|s| f64::from((mask >> s) & 1)).collect();
            for i in 0..=fine {
                p[mixed] = i as f64 / fine as f64;
                let (r, c) = eval(&p);
                if c <= threshold {
                    best = best.max(r);
                }
            }
        }
    }
    best
}

/// Random fully mixed policy.
pub fn random_policy(seed: u64, s_n: usize, a_n: usize) -> StochasticPolicy {
    let mut rng = stream_rng(seed, Stream::Action);
    let mut probs = Vec::new();
    for _ in 0..s_n {
        let row: Vec<f64> = (0..a_n).map(|_| rng.random::<f64>() + 0.01).collect();
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|p| p / sum));
    }
    let mut pi = StochasticPolicy::new(s_n, a_n, probs.clone());
    if pi.is_err() {
        // fix rounding in the row sums
        for row in probs.chunks_mut(a_n) {
            let head: f64 = row[..a_n - 1].iter().sum();
            row[a_n - 1] = 1.0 - head;
        }
        pi = StochasticPolicy::new(s_n, a_n, probs);
    }
    pi.unwrap()
}

/// Inverse-CDF draw from `row`.
pub fn draw_next<R: Rng>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return x;
        }
    }
    row.len() - 1
}
