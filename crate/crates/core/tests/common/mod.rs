//! Reference implementations used as test oracles. Deliberately naive: plain
//! loops and dense solves, independent of the library's fast paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stm_rec::data::{Dataset, SocialGraph};
use stm_rec::l1qp::L1Qp;
use stm_rec::synth::{generate_planted, Planted, SynthConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `P = AᵀA + εI` with `A` having more rows than columns, `q` Gaussian, and
/// `λ` a random share of `‖q‖∞` so that some but usually not all
/// coordinates are active.
pub fn random_l1qp(k: usize, rng: &mut impl Rng) -> L1Qp {
    let a = gaussian(k + 5, k, rng);
    let mut p = a.transpose() * &a;
    for i in 0..k {
        p[(i, i)] += 0.05;
    }
    let q = DVector::from_fn(k, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
    let lambda = rng.random_range(0.0..0.8) * q.amax();
    L1Qp::new(p, q, lambda).unwrap()
}

/// `‖X − DV‖²_F` summed entry by entry.
pub fn naive_reconstruction(x: &DMatrix<f64>, d: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut fit = 0.0;
            for k in 0..d.ncols() {
                fit += d[(i, k)] * v[(k, j)];
            }
            total += (x[(i, j)] - fit).powi(2);
        }
    }
    total
}

fn project_columns(d: &mut DMatrix<f64>) {
    for mut c in d.column_iter_mut() {
        let n = c.norm();
        if n > 1.0 {
            c /= n;
        }
    }
}

/// Minimizes `‖X − DV‖²_F` over unit-ball columns by accelerated projected
/// gradient with adaptive restart, until the iterate stops moving.
pub fn projected_gradient_dictionary(x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = v * v.transpose();
    let cross = x * v.transpose();
    let lipschitz = 2.0 * gram.symmetric_eigenvalues().amax().max(1e-12);
    let step = 1.0 / lipschitz;
    let f = |d: &DMatrix<f64>| (x - d * v).norm_squared();

    let mut d = DMatrix::zeros(x.nrows(), v.nrows());
    let mut y = d.clone();
    let mut t: f64 = 1.0;
    let mut last = f(&d);
    for _ in 0..200_000 {
        let grad = (&y * &gram - &cross) * 2.0;
        let mut next = &y - grad * step;
        project_columns(&mut next);
        let value = f(&next);
        if value > last {
            // restart momentum
            y = d.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &d) * ((t - 1.0) / t_next);
        let moved = (&next - &d).amax();
        d = next;
        t = t_next;
        last = value;
        if moved < 1e-14 {
            break;
        }
    }
    d
}

/// `(Σ_i U_i U_iᵀ + (2λ_Z/λ_S) I)⁻¹ Σ_i U_i S_im` over the links `(i, m)`.
pub fn factor_oracle(
    users: &DMatrix<f64>,
    graph: &SocialGraph,
    m: usize,
    lambda_s: f64,
    lambda_z: f64,
) -> DVector<f64> {
    let k = users.nrows();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for i in 0..graph.n_users() {
        if let Some(s) = graph.get(i, m) {
            for r in 0..k {
                b[r] += users[(r, i)] * s;
                for c in 0..k {
                    a[(r, c)] += users[(r, i)] * users[(c, i)];
                }
            }
        }
    }
    for r in 0..k {
        a[(r, r)] += 2.0 * lambda_z / lambda_s;
    }
    a.lu().solve(&b).expect("regularized system is invertible")
}

/// `argmin ½‖x − Dv‖² + (λ_R/2)Σ_i (r_ij − U_iᵀv)² + λ_V‖v‖²` by a dense solve.
pub fn ridge_item_oracle(
    atoms: &DMatrix<f64>,
    x: &DVector<f64>,
    raters: &[(usize, f64)],
    users: &DMatrix<f64>,
    lambda_r: f64,
    lambda_v: f64,
) -> DVector<f64> {
    let k = atoms.ncols();
    let mut a = atoms.transpose() * atoms;
    let mut b = atoms.transpose() * x;
    for &(i, r) in raters {
        let u = users.column(i);
        a += u * u.transpose() * lambda_r;
        b += u * (lambda_r * r);
    }
    a += DMatrix::identity(k, k) * (2.0 * lambda_v);
    a.lu().solve(&b).expect("ridge system is invertible")
}

/// `argmin (λ_R/2)Σ_j (r_ij − uᵀV_j)² + λ_U‖u‖²` by a dense solve.
pub fn ridge_user_oracle(items: &DMatrix<f64>, rated: &[(usize, f64)], lambda_r: f64, lambda_u: f64) -> DVector<f64> {
    let k = items.nrows();
    let mut a = DMatrix::identity(k, k) * (2.0 * lambda_u);
    let mut b = DVector::zeros(k);
    for &(j, r) in rated {
        let v = items.column(j);
        a += v * v.transpose() * lambda_r;
        b += v * (lambda_r * r);
    }
    a.lu().solve(&b).expect("ridge system is invertible")
}

/// STM objective written out term by term.
pub fn naive_stm_objective(
    data: &Dataset,
    atoms: &DMatrix<f64>,
    users: &DMatrix<f64>,
    items: &DMatrix<f64>,
    h: &stm_rec::Hyperparams,
) -> f64 {
    let content = 0.5 * naive_reconstruction(data.features.matrix(), atoms, items);
    let mut ratings = 0.0;
    for r in data.ratings.entries() {
        let pred: f64 = (0..users.nrows())
            .map(|k| users[(k, r.user)] * items[(k, r.item)])
            .sum();
        ratings += (r.value - pred).powi(2);
    }
    let l1 = |m: &DMatrix<f64>| m.iter().map(|v| v.abs()).sum::<f64>();
    content + 0.5 * h.lambda_r * ratings + h.lambda_u * l1(users) + h.lambda_v * l1(items)
}

/// A planted dataset with standardized features.
pub fn planted(config: &SynthConfig) -> Planted {
    let mut p = generate_planted(config).unwrap();
    p.data.features.standardize();
    p
}

/// A reduced planted configuration for fast randomized tests.
pub fn tiny_config(seed: u64) -> SynthConfig {
    SynthConfig {
        dim: 16,
        topics: 4,
        users: 30,
        items: 60,
        rating_density: 0.15,
        seed,
        ..SynthConfig::small()
    }
}
