//! Block-coordinate descent shared by STM, SoSTM and CTR-I.
//!
//! Training starts from atoms sampled among the item features, refined by
//! content-only dictionary learning with users at zero. One outer sweep then
//! updates the dictionary, every item profile, every user profile, (with
//! social data) every factor profile, and finally the per-topic scale. Each
//! step exactly minimizes the objective over its block, so the objective is
//! non-increasing across sweeps.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, RatingMatrix, SocialGraph};
use crate::dictionary::{revive_dead_atoms, update_dictionary, used_atoms, TopicDictionary};
use crate::error::{Error, Result};
use crate::hyper::Hyperparams;
use crate::l1qp::{FeatureSign, L1Qp};

pub(crate) const SOLVER: FeatureSign = FeatureSign {
    tol: 1e-10,
    max_iter: 2000,
};

/// Cap on content-only dictionary rounds before the outer loop.
const CONTENT_ROUNDS: usize = 100;
const CONTENT_TOL: f64 = 1e-6;

/// How profile magnitudes are penalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Penalty {
    /// `λ‖·‖₁`, solved with feature-sign search.
    Sparse,
    /// `λ‖·‖²₂`, solved in closed form.
    Ridge,
}

pub(crate) struct Fitted {
    pub dictionary: TopicDictionary,
    pub users: DMatrix<f64>,
    pub items: DMatrix<f64>,
    pub factors: Option<DMatrix<f64>>,
    pub trace: Vec<f64>,
}

/// Current iterate, borrowed by the objective.
pub(crate) struct Profiles<'a> {
    pub atoms: &'a DMatrix<f64>,
    pub users: &'a DMatrix<f64>,
    pub items: &'a DMatrix<f64>,
    pub factors: Option<&'a DMatrix<f64>>,
}

pub(crate) fn objective(
    data: &Dataset,
    social: Option<&SocialGraph>,
    profiles: &Profiles<'_>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> f64 {
    let x = data.features.matrix();
    let content = 0.5 * (x - profiles.atoms * profiles.items).norm_squared();
    let ratings = 0.5 * hyper.lambda_r * rating_loss(&data.ratings, profiles.users, profiles.items);
    let reg = match penalty {
        Penalty::Sparse => hyper.lambda_u * profiles.users.lp_norm(1) + hyper.lambda_v * profiles.items.lp_norm(1),
        Penalty::Ridge => {
            hyper.lambda_u * profiles.users.norm_squared() + hyper.lambda_v * profiles.items.norm_squared()
        }
    };
    let mut total = content + ratings + reg;
    if let (Some(graph), Some(z)) = (social, profiles.factors) {
        if hyper.lambda_s != 0.0 {
            total += 0.5 * hyper.lambda_s * social_loss(graph, profiles.users, z);
        }
        if hyper.lambda_z != 0.0 {
            total += hyper.lambda_z * z.norm_squared();
        }
    }
    total
}

/// `Σ_{observed} (R_ij − U_iᵀV_j)²`.
pub(crate) fn rating_loss(ratings: &RatingMatrix, users: &DMatrix<f64>, items: &DMatrix<f64>) -> f64 {
    ratings
        .entries()
        .iter()
        .map(|r| (r.value - users.column(r.user).dot(&items.column(r.item))).powi(2))
        .sum()
}

/// `Σ_{(i,m) observed} (S_im − U_iᵀZ_m)²`, both orientations of every link.
pub(crate) fn social_loss(graph: &SocialGraph, users: &DMatrix<f64>, factors: &DMatrix<f64>) -> f64 {
    (0..graph.n_users())
        .flat_map(|i| graph.neighbors(i).iter().map(move |&(m, s)| (i, m, s)))
        .map(|(i, m, s)| (s - users.column(i).dot(&factors.column(m))).powi(2))
        .sum()
}

/// `P = DᵀD + λ_R Û Ûᵀ`, `q = DᵀX_j + λ_R Û R̂_·j` over the raters of one item.
pub(crate) fn item_system(
    dtd: &DMatrix<f64>,
    dtx: DVector<f64>,
    users: &DMatrix<f64>,
    raters: &[(usize, f64)],
    lambda_r: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut p = dtd.clone();
    let mut q = dtx;
    for &(i, r) in raters {
        let ui = users.column(i);
        p.ger(lambda_r, &ui, &ui, 1.0);
        q.axpy(lambda_r * r, &ui, 1.0);
    }
    (p, q)
}

/// Factor profiles, one user's links, and the social weight.
pub(crate) type SocialTerm<'a> = (&'a DMatrix<f64>, &'a [(usize, f64)], f64);

/// `P = λ_S ẐẐᵀ + λ_R V̂V̂ᵀ`, `q = λ_S Ẑ Ŝ_i·ᵀ + λ_R V̂ R̂_i·ᵀ` for one user. The
/// social part is skipped when `social` is `None` or its weight is zero.
pub(crate) fn user_system(
    items: &DMatrix<f64>,
    rated: &[(usize, f64)],
    lambda_r: f64,
    social: Option<SocialTerm<'_>>,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = items.nrows();
    let mut p = DMatrix::zeros(k, k);
    let mut q = DVector::zeros(k);
    if let Some((factors, links, lambda_s)) = social.filter(|s| s.2 != 0.0) {
        for &(m, s) in links {
            let zm = factors.column(m);
            p.ger(lambda_s, &zm, &zm, 1.0);
            q.axpy(lambda_s * s, &zm, 1.0);
        }
    }
    for &(j, r) in rated {
        let vj = items.column(j);
        p.ger(lambda_r, &vj, &vj, 1.0);
        q.axpy(lambda_r * r, &vj, 1.0);
    }
    (p, q)
}

/// `Z_i = (ÛÛᵀ + (2λ_Z/λ_S) I)⁻¹ Û Ŝ_·i` over the users linked to `i`.
pub(crate) fn factor_column(
    users: &DMatrix<f64>,
    links: &[(usize, f64)],
    lambda_s: f64,
    lambda_z: f64,
) -> Result<DVector<f64>> {
    let k = users.nrows();
    if links.is_empty() {
        return Ok(DVector::zeros(k));
    }
    let mut a = DMatrix::identity(k, k) * (2.0 * lambda_z / lambda_s);
    let mut b = DVector::zeros(k);
    for &(m, s) in links {
        let um = users.column(m);
        a.ger(1.0, &um, &um, 1.0);
        b.axpy(s, &um, 1.0);
    }
    solve_psd(a, &b)
}

/// Solves a symmetric positive semidefinite system, falling back to the
/// minimum-norm least-squares solution when it is singular.
pub(crate) fn solve_psd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let finite = |v: &DVector<f64>| v.iter().all(|e| e.is_finite());
    if let Some(x) = a.clone().cholesky().map(|c| c.solve(b)).filter(finite) {
        return Ok(x);
    }
    let eps = 1e-12 * a.amax().max(1e-300);
    a.svd(true, true)
        .solve(b, eps)
        .ok()
        .filter(finite)
        .ok_or_else(|| Error::Solver("singular normal equations".into()))
}

fn solve_profile(
    penalty: Penalty,
    p: DMatrix<f64>,
    q: DVector<f64>,
    weight: f64,
    warm: Option<DVector<f64>>,
) -> Result<DVector<f64>> {
    match penalty {
        Penalty::Sparse => {
            // inputs come from blocks already checked to be finite
            let problem = L1Qp::new_trusted(p, q, weight);
            Ok(SOLVER.solve(&problem, warm.as_ref())?.x)
        }
        Penalty::Ridge => {
            let mut p = p;
            for i in 0..p.nrows() {
                p[(i, i)] += 2.0 * weight;
            }
            solve_psd(p, &q)
        }
    }
}

/// Profile of an item from its content alone: `argmin ½‖x − Dv‖² + penalty(v)`.
pub(crate) fn encode_content(
    dictionary: &TopicDictionary,
    x: &DVector<f64>,
    weight: f64,
    penalty: Penalty,
) -> Result<DVector<f64>> {
    let d = dictionary.atoms();
    solve_profile(penalty, d.tr_mul(d), d.tr_mul(x), weight, None)
}

fn assemble_columns(k: usize, cols: Vec<DVector<f64>>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, cols.len());
    for (j, c) in cols.into_iter().enumerate() {
        m.set_column(j, &c);
    }
    m
}

pub(crate) fn item_phase(
    data: &Dataset,
    dictionary: &TopicDictionary,
    users: &DMatrix<f64>,
    items: &DMatrix<f64>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> Result<DMatrix<f64>> {
    let d = dictionary.atoms();
    let dtd = d.tr_mul(d);
    let dtx = d.tr_mul(data.features.matrix());
    let cols = (0..data.n_items())
        .into_par_iter()
        .map(|j| {
            let (p, q) = item_system(
                &dtd,
                dtx.column(j).into_owned(),
                users,
                data.ratings.item_ratings(j),
                hyper.lambda_r,
            );
            solve_profile(penalty, p, q, hyper.lambda_v, Some(items.column(j).into_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_columns(hyper.k, cols))
}

pub(crate) fn user_phase(
    data: &Dataset,
    social: Option<(&SocialGraph, &DMatrix<f64>)>,
    users: &DMatrix<f64>,
    items: &DMatrix<f64>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> Result<DMatrix<f64>> {
    let cols = (0..data.n_users())
        .into_par_iter()
        .map(|i| {
            let rated = data.ratings.user_ratings(i);
            let links = social
                .filter(|_| hyper.lambda_s != 0.0)
                .map(|(g, z)| (z, g.neighbors(i), hyper.lambda_s));
            if rated.is_empty() && links.is_none_or(|l| l.1.is_empty()) {
                // nothing observed: the zero profile is optimal
                return Ok(DVector::zeros(hyper.k));
            }
            let (p, q) = user_system(items, rated, hyper.lambda_r, links);
            solve_profile(penalty, p, q, hyper.lambda_u, Some(users.column(i).into_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_columns(hyper.k, cols))
}

pub(crate) fn factor_phase(graph: &SocialGraph, users: &DMatrix<f64>, hyper: &Hyperparams) -> Result<DMatrix<f64>> {
    let cols = (0..graph.n_users())
        .into_par_iter()
        .map(|i| factor_column(users, graph.neighbors(i), hyper.lambda_s, hyper.lambda_z))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_columns(hyper.k, cols))
}

fn dictionary_phase(
    x: &DMatrix<f64>,
    items: &DMatrix<f64>,
    current: &TopicDictionary,
    seed: u64,
) -> Result<TopicDictionary> {
    let candidate = if used_atoms(items).is_empty() {
        current.clone()
    } else {
        match update_dictionary(x, items, Some(current)) {
            Ok(d) => d,
            Err(Error::DualAscent { best, .. }) => *best,
            Err(e) => return Err(e),
        }
    };
    // keep the incumbent if the new atoms fit no better
    let next = if candidate.reconstruction_error(x, items) <= current.reconstruction_error(x, items) {
        candidate
    } else {
        current.clone()
    };
    Ok(revive_dead_atoms(&next, x, items, seed))
}

/// Rescales each topic along the direction that leaves every reconstruction
/// unchanged: atom `D_k / c`, item row `c V_k`, user row `U_k / c` and factor
/// row `c Z_k`. The scale `c ≥ ‖D_k‖` minimizes the profile penalties, which
/// alternating updates otherwise balance only slowly.
pub(crate) fn rebalance_topics(
    dictionary: TopicDictionary,
    users: &mut DMatrix<f64>,
    items: &mut DMatrix<f64>,
    mut factors: Option<&mut DMatrix<f64>>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> Result<TopicDictionary> {
    let (mut atoms, mut duals) = dictionary.into_parts();
    for k in 0..atoms.ncols() {
        let (a, b) = match penalty {
            Penalty::Sparse => (
                hyper.lambda_u * users.row(k).lp_norm(1),
                hyper.lambda_v * items.row(k).lp_norm(1),
            ),
            Penalty::Ridge => (
                hyper.lambda_u * users.row(k).norm_squared(),
                hyper.lambda_v * items.row(k).norm_squared(),
            ),
        };
        let c2 = match &factors {
            Some(z) if hyper.lambda_s != 0.0 => hyper.lambda_z * z.row(k).norm_squared(),
            _ => 0.0,
        };
        let lo = atoms.column(k).norm();
        if !(a > 0.0 && b > 0.0 && lo > 0.0) {
            continue;
        }
        let cost = |c: f64| match penalty {
            Penalty::Sparse => a / c + b * c + c2 * c * c,
            Penalty::Ridge => a / (c * c) + (b + c2) * c * c,
        };
        let c = best_scale(penalty, a, b, c2).max(lo);
        if !(cost(c) < cost(1.0) * (1.0 - 1e-12)) {
            continue;
        }
        atoms.column_mut(k).scale_mut(1.0 / c);
        items.row_mut(k).scale_mut(c);
        users.row_mut(k).scale_mut(1.0 / c);
        if let Some(z) = factors.as_deref_mut() {
            z.row_mut(k).scale_mut(c);
        }
        duals[k] *= c * c;
    }
    // rounding can leave a rescaled atom a hair outside the ball
    for mut col in atoms.column_iter_mut() {
        let n = col.norm();
        if n > 1.0 {
            col /= n;
        }
    }
    TopicDictionary::new(atoms, duals)
}

/// Unconstrained minimizer over `c > 0` of the rescaled penalty.
fn best_scale(penalty: Penalty, a: f64, b: f64, c2: f64) -> f64 {
    match (penalty, c2 == 0.0) {
        (Penalty::Sparse, true) => (a / b).sqrt(),
        (Penalty::Ridge, _) => (a / (b + c2)).sqrt().sqrt(),
        (Penalty::Sparse, false) => {
            // root of the increasing derivative -a/c² + b + 2 c2 c
            let slope = |c: f64| -a / (c * c) + b + 2.0 * c2 * c;
            let (mut lo, mut hi) = (0.0, (a / b).sqrt());
            while slope(hi) < 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    }
}

fn content_objective(
    x: &DMatrix<f64>,
    d: &TopicDictionary,
    items: &DMatrix<f64>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> f64 {
    d.reconstruction_error(x, items)
        + match penalty {
            Penalty::Sparse => hyper.lambda_v * items.lp_norm(1),
            Penalty::Ridge => hyper.lambda_v * items.norm_squared(),
        }
}

fn check_finite(m: &DMatrix<f64>, block: &'static str, iteration: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { block, iteration })
    }
}

/// Runs the full training schedule on `train`, whose ratings must already be
/// restricted to the training mask.
pub(crate) fn fit(
    train: &Dataset,
    social: Option<&SocialGraph>,
    hyper: &Hyperparams,
    penalty: Penalty,
) -> Result<Fitted> {
    hyper.validate()?;
    let x = train.features.matrix();
    let (k, n) = (hyper.k, train.n_users());
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);

    let mut dictionary = TopicDictionary::from_samples(x, k, &mut rng);
    let mut users = DMatrix::zeros(k, n);
    let mut items = item_phase(
        train,
        &dictionary,
        &users,
        &DMatrix::zeros(k, train.n_items()),
        hyper,
        penalty,
    )?;

    // fit the content alone first, so the outer loop starts from topics
    // that already describe the items
    let mut prev = f64::INFINITY;
    for round in 0..CONTENT_ROUNDS {
        dictionary = dictionary_phase(x, &items, &dictionary, hyper.seed.wrapping_sub(round as u64 + 1))?;
        items = item_phase(train, &dictionary, &users, &items, hyper, penalty)?;
        check_finite(&items, "content initialization", 0)?;
        let obj = content_objective(x, &dictionary, &items, hyper, penalty);
        if (prev - obj).abs() <= CONTENT_TOL * obj.abs() {
            break;
        }
        prev = obj;
    }
    let mut factors = social.map(|_| DMatrix::zeros(k, n));

    let eval =
        |dictionary: &TopicDictionary, users: &DMatrix<f64>, items: &DMatrix<f64>, factors: Option<&DMatrix<f64>>| {
            objective(
                train,
                social,
                &Profiles {
                    atoms: dictionary.atoms(),
                    users,
                    items,
                    factors,
                },
                hyper,
                penalty,
            )
        };

    let mut trace = vec![eval(&dictionary, &users, &items, factors.as_ref())];
    check_trace(&trace, "initialization", 0)?;

    for it in 1..=hyper.max_iters {
        dictionary = dictionary_phase(x, &items, &dictionary, hyper.seed.wrapping_add(it as u64))?;
        check_finite(dictionary.atoms(), "dictionary", it)?;

        items = item_phase(train, &dictionary, &users, &items, hyper, penalty)?;
        check_finite(&items, "item profiles", it)?;

        users = user_phase(train, social.zip(factors.as_ref()), &users, &items, hyper, penalty)?;
        check_finite(&users, "user profiles", it)?;

        if let (Some(graph), Some(z)) = (social, factors.as_mut()) {
            if hyper.lambda_s > 0.0 {
                *z = factor_phase(graph, &users, hyper)?;
                check_finite(z, "factor profiles", it)?;
            }
        }

        dictionary = rebalance_topics(dictionary, &mut users, &mut items, factors.as_mut(), hyper, penalty)?;
        check_finite(&items, "topic scales", it)?;

        let obj = eval(&dictionary, &users, &items, factors.as_ref());
        trace.push(obj);
        check_trace(&trace, "objective", it)?;

        let prev = trace[trace.len() - 2];
        if (prev - obj).abs() <= hyper.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    Ok(Fitted {
        dictionary,
        users,
        items,
        factors,
        trace,
    })
}

fn check_trace(trace: &[f64], block: &'static str, iteration: usize) -> Result<()> {
    if trace.last().is_some_and(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { block, iteration })
    }
}
