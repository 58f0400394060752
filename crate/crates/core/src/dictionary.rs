//! Topic dictionary update.
//!
//! For fixed item profiles `V` the dictionary solves
//!
//! ```text
//! minimize ½‖X − D V‖²_F   subject to ‖D_k‖² ≤ 1 for every atom k
//! ```
//!
//! through its Lagrange dual. Given duals `μ ≥ 0` the primal minimizer is
//! `D(μ) = X Vᵀ (V Vᵀ + diag μ)⁻¹`, and the dual function
//!
//! ```text
//! g(μ) = ½‖X‖² − ½ tr((V Vᵀ + diag μ)⁻¹ (X Vᵀ)ᵀ X Vᵀ) − ½ Σ μ_k
//! ```
//!
//! is concave with gradient `½(‖D_k‖² − 1)` and Hessian
//! `−(DᵀD)_kl ((V Vᵀ + diag μ)⁻¹)_kl`. It is maximized with a projected Newton
//! method on the nonnegative orthant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Slack allowed on the unit-norm constraint of each atom.
pub const NORM_SLACK: f64 = 1e-8;

const MAX_NEWTON_STEPS: usize = 200;
const DUAL_TOL: f64 = 1e-11;
/// Projected-gradient level at which a stalled line search still counts as converged.
const STALL_TOL: f64 = 1e-8;
const MAX_ATOM_SWEEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TopicDictionary {
    atoms: DMatrix<f64>,
    duals: DVector<f64>,
}

impl TopicDictionary {
    pub fn new(atoms: DMatrix<f64>, duals: DVector<f64>) -> Result<Self> {
        if duals.len() != atoms.ncols() {
            return Err(Error::Argument(format!(
                "{} duals for {} atoms",
                duals.len(),
                atoms.ncols()
            )));
        }
        if let Some(k) = atoms.column_iter().position(|c| c.norm_squared() > 1.0 + NORM_SLACK) {
            return Err(Error::Argument(format!("atom {k} lies outside the unit ball")));
        }
        if duals.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Argument("duals must be nonnegative".into()));
        }
        Ok(TopicDictionary { atoms, duals })
    }

    /// `k` atoms drawn uniformly from the unit sphere in `dim` dimensions.
    pub fn random(dim: usize, k: usize, rng: &mut impl Rng) -> Self {
        let mut atoms = DMatrix::zeros(dim, k);
        for mut col in atoms.column_iter_mut() {
            col.copy_from(&random_unit(dim, rng));
        }
        TopicDictionary {
            atoms,
            duals: DVector::zeros(k),
        }
    }

    /// Atoms set to `k` distinct normalized columns of `x`, chosen at random.
    /// Falls back to random directions for zero columns or when `x` has
    /// fewer than `k` columns.
    pub fn from_samples(x: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> Self {
        let picks = rand::seq::index::sample(rng, x.ncols(), k.min(x.ncols())).into_vec();
        let mut dict = TopicDictionary::random(x.nrows(), k, rng);
        for (col, j) in picks.into_iter().enumerate() {
            let n = x.column(j).norm();
            if n > 1e-12 {
                dict.atoms.set_column(col, &(x.column(j) / n));
            }
        }
        dict
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn duals(&self) -> &DVector<f64> {
        &self.duals
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_topics(&self) -> usize {
        self.atoms.ncols()
    }

    /// `½‖X − D V‖²_F`.
    pub fn reconstruction_error(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        0.5 * (x - &self.atoms * v).norm_squared()
    }

    /// `max_k |μ_k (‖D_k‖² − 1)|`.
    pub fn complementary_slackness(&self) -> f64 {
        self.atoms
            .column_iter()
            .zip(self.duals.iter())
            .map(|(c, m)| (m * (c.norm_squared() - 1.0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.atoms, self.duals)
    }
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Indices of atoms whose profile row is not identically zero.
pub fn used_atoms(v: &DMatrix<f64>) -> Vec<usize> {
    (0..v.nrows()).filter(|&k| v.row(k).iter().any(|&e| e != 0.0)).collect()
}

/// Optimal dictionary for fixed item profiles `v`.
///
/// Atoms whose profile row is zero do not affect the objective; they keep
/// their column from `previous` (or zero) with a zero dual. `previous` also
/// warm-starts the duals.
pub fn update_dictionary(
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    previous: Option<&TopicDictionary>,
) -> Result<TopicDictionary> {
    let (d, k) = (x.nrows(), v.nrows());
    if v.ncols() != x.ncols() {
        return Err(Error::Argument(format!(
            "profiles cover {} items, features {}",
            v.ncols(),
            x.ncols()
        )));
    }
    if let Some(p) = previous {
        if p.dim() != d || p.n_topics() != k {
            return Err(Error::Argument("previous dictionary has the wrong shape".into()));
        }
    }
    let used = used_atoms(v);
    if used.is_empty() {
        return Err(Error::Argument(
            "every item profile is zero; no atom can be fitted".into(),
        ));
    }

    let vu = v.select_rows(&used);
    let gram = &vu * vu.transpose();
    let cross = x * vu.transpose();
    let cross_gram = cross.transpose() * &cross;
    let x_sq = x.norm_squared();

    let mut mu = DVector::from_iterator(used.len(), used.iter().map(|&a| previous.map_or(0.0, |p| p.duals[a])));
    let outcome = maximize_dual(&gram, &cross_gram, x_sq, &mut mu);

    let mut fitted = match regularized_inverse(&gram, &mu) {
        Some(minv) => &cross * minv,
        None => DMatrix::zeros(d, used.len()),
    };
    project_to_ball(&mut fitted);
    let tol = STALL_TOL * (1.0 + cross.amax());
    let trusted = matches!(outcome, DualOutcome::Converged)
        && fitted.iter().all(|v| v.is_finite())
        && stationarity_residual(&cross, &gram, &fitted, &mu) <= tol;
    if !trusted {
        if !fitted.iter().all(|v| v.is_finite()) {
            fitted.fill(0.0);
        }
        mu = descend_by_atom(&cross, &gram, &mut fitted);
    }

    let mut atoms = match previous {
        Some(p) => p.atoms.clone(),
        None => DMatrix::zeros(d, k),
    };
    let mut duals = DVector::zeros(k);
    for (a, &kk) in used.iter().enumerate() {
        atoms.set_column(kk, &fitted.column(a));
        duals[kk] = mu[a];
    }
    let stationarity = stationarity_residual(&cross, &gram, &fitted, &mu);
    let dict = TopicDictionary { atoms, duals };
    if stationarity > tol {
        let iterations = match outcome {
            DualOutcome::Stalled { iterations } => iterations,
            DualOutcome::Converged => MAX_NEWTON_STEPS,
        };
        return Err(Error::DualAscent {
            iterations,
            residual: stationarity,
            best: Box::new(dict),
        });
    }
    Ok(dict)
}

fn project_to_ball(atoms: &mut DMatrix<f64>) {
    for mut col in atoms.column_iter_mut() {
        let n2 = col.norm_squared();
        if n2 > 1.0 {
            col /= n2.sqrt();
        }
    }
}

/// Largest entry of `D G − C + D diag μ`, the gradient of the Lagrangian.
fn stationarity_residual(cross: &DMatrix<f64>, gram: &DMatrix<f64>, atoms: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
    let mut r = atoms * gram - cross;
    for (mut col, (a, m)) in r.column_iter_mut().zip(atoms.column_iter().zip(mu.iter())) {
        col.axpy(*m, &a, 1.0);
    }
    r.amax()
}

/// Minimizes over one atom at a time, each exactly, until nothing moves.
/// Used when the dual is too ill-conditioned for Newton steps, as happens
/// with fewer items than atoms. Returns multipliers read off stationarity.
fn descend_by_atom(cross: &DMatrix<f64>, gram: &DMatrix<f64>, atoms: &mut DMatrix<f64>) -> DVector<f64> {
    let k = gram.nrows();
    let floor = 1e-15 * (1.0 + cross.amax());
    for _ in 0..MAX_ATOM_SWEEPS {
        let mut moved: f64 = 0.0;
        for c in 0..k {
            let g = gram[(c, c)];
            if g <= 0.0 {
                continue;
            }
            let mut target = (cross.column(c) - &*atoms * gram.column(c)) / g + atoms.column(c);
            let n = target.norm();
            if n > 1.0 {
                target /= n;
            }
            moved = moved.max((&target - atoms.column(c)).amax());
            atoms.set_column(c, &target);
        }
        if moved <= floor {
            break;
        }
    }
    let grad = &*atoms * gram - cross;
    DVector::from_fn(k, |c, _| {
        if atoms.column(c).norm_squared() >= 1.0 - 1e-9 {
            (-atoms.column(c).dot(&grad.column(c))).max(0.0)
        } else {
            0.0
        }
    })
}

enum DualOutcome {
    Converged,
    Stalled { iterations: usize },
}

fn regularized_inverse(gram: &DMatrix<f64>, mu: &DVector<f64>) -> Option<DMatrix<f64>> {
    let mut m = gram.clone();
    for (i, &mi) in mu.iter().enumerate() {
        m[(i, i)] += mi;
    }
    let inv = m.cholesky()?.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

fn dual_value(cross_gram: &DMatrix<f64>, x_sq: f64, mu: &DVector<f64>, minv: &DMatrix<f64>) -> f64 {
    0.5 * x_sq - 0.5 * minv.component_mul(cross_gram).sum() - 0.5 * mu.sum()
}

fn maximize_dual(gram: &DMatrix<f64>, cross_gram: &DMatrix<f64>, x_sq: f64, mu: &mut DVector<f64>) -> DualOutcome {
    let n = mu.len();
    // Near-singular starts give huge atoms and a dual too noisy to line-search.
    // Duals of ‖X Vᵀ‖ put every atom inside the ball, so start there instead.
    let far_outside = match regularized_inverse(gram, mu) {
        None => true,
        Some(minv) => (&minv * cross_gram * &minv).diagonal().amax() > 4.0,
    };
    if far_outside {
        let start = cross_gram.trace().sqrt().max(f64::MIN_POSITIVE);
        mu.apply(|m| *m = m.max(start));
    }

    for step in 0..MAX_NEWTON_STEPS {
        let Some(minv) = regularized_inverse(gram, mu) else {
            return DualOutcome::Stalled { iterations: step };
        };
        let value = dual_value(cross_gram, x_sq, mu, &minv);
        let dtd = &minv * cross_gram * &minv;
        let grad = DVector::from_fn(n, |k, _| 0.5 * (dtd[(k, k)] - 1.0));

        let residual = (0..n)
            .map(|k| if mu[k] > 0.0 { grad[k].abs() } else { grad[k].max(0.0) })
            .fold(0.0, f64::max);
        if residual <= DUAL_TOL {
            return DualOutcome::Converged;
        }

        let free: Vec<usize> = (0..n).filter(|&k| mu[k] > 0.0 || grad[k] > 0.0).collect();
        let neg_hess = dtd.component_mul(&minv).select_rows(&free).select_columns(&free);
        let grad_f = DVector::from_iterator(free.len(), free.iter().map(|&k| grad[k]));
        let direction = neg_hess
            .cholesky()
            .map(|c| c.solve(&grad_f))
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| grad_f.clone());

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = mu.clone();
            for (a, &k) in free.iter().enumerate() {
                trial[k] = (mu[k] + t * direction[a]).max(0.0);
            }
            if let Some(tinv) = regularized_inverse(gram, &trial) {
                let gain: f64 = (0..n).map(|k| grad[k] * (trial[k] - mu[k])).sum();
                let trial_value = dual_value(cross_gram, x_sq, &trial, &tinv);
                let noise = 1e-13 * (1.0 + value.abs());
                if trial_value + noise >= value + 1e-4 * gain {
                    *mu = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return if residual <= STALL_TOL {
                DualOutcome::Converged
            } else {
                DualOutcome::Stalled { iterations: step + 1 }
            };
        }
    }
    DualOutcome::Stalled {
        iterations: MAX_NEWTON_STEPS,
    }
}

/// Re-seeds atoms that no item uses.
///
/// Each unused atom becomes the normalized reconstruction residual of the
/// worst-reconstructed item not already claimed by another revived atom. When
/// every residual vanishes the atom is re-drawn uniformly from the unit sphere
/// using `seed`.
pub fn revive_dead_atoms(dict: &TopicDictionary, x: &DMatrix<f64>, v: &DMatrix<f64>, seed: u64) -> TopicDictionary {
    let used = used_atoms(v);
    let dead: Vec<usize> = (0..dict.n_topics()).filter(|k| !used.contains(k)).collect();
    if dead.is_empty() {
        return dict.clone();
    }
    let residual = x - &dict.atoms * v;
    let mut norms: Vec<f64> = residual.column_iter().map(|c| c.norm()).collect();
    let floor = 1e-12 * (1.0 + x.amax());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut out = dict.clone();
    for k in dead {
        let worst = norms
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (j, &n)| match best {
                Some((_, b)) if b >= n => best,
                _ => Some((j, n)),
            })
            .filter(|&(_, n)| n > floor);
        let atom = match worst {
            Some((j, n)) => {
                norms[j] = 0.0;
                residual.column(j) / n
            }
            None => random_unit(dict.dim(), &mut rng),
        };
        out.atoms.set_column(k, &atom);
        out.duals[k] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_columns(d: usize, m: usize) -> DMatrix<f64> {
        let mut x = DMatrix::from_fn(d, m, |i, j| ((i * 3 + j * 7) as f64 * 0.91).sin() + 0.1);
        for mut c in x.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        x
    }

    #[test]
    fn identity_profiles_reproduce_features() {
        let x = unit_columns(5, 4);
        let dict = update_dictionary(&x, &DMatrix::identity(4, 4), None).unwrap();
        assert!((dict.atoms() - &x).amax() < 1e-12);
        assert_eq!(dict.duals(), &DVector::zeros(4));
    }

    #[test]
    fn doubled_profiles_halve_atoms() {
        let x = unit_columns(5, 4);
        let dict = update_dictionary(&x, &(DMatrix::identity(4, 4) * 2.0), None).unwrap();
        assert!((dict.atoms() - &x / 2.0).amax() < 1e-12);
        assert_eq!(dict.duals(), &DVector::zeros(4));
    }

    #[test]
    fn large_targets_saturate_the_constraint() {
        // features of norm 3 reachable only with atoms of norm 3
        let x = unit_columns(6, 3) * 3.0;
        let dict = update_dictionary(&x, &DMatrix::identity(3, 3), None).unwrap();
        for (c, &m) in dict.atoms().column_iter().zip(dict.duals().iter()) {
            assert!((c.norm_squared() - 1.0).abs() < 1e-9);
            assert!(m > 0.0);
        }
        assert!(dict.complementary_slackness() < 1e-6);
        assert!((dict.atoms() - &x / 3.0).amax() < 1e-8);
    }

    #[test]
    fn unused_atoms_keep_previous_columns() {
        let x = unit_columns(4, 3);
        let mut v = DMatrix::identity(3, 3);
        v.row_mut(1).fill(0.0);
        let prev = TopicDictionary::random(4, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let dict = update_dictionary(&x, &v, Some(&prev)).unwrap();
        assert_eq!(dict.atoms().column(1), prev.atoms().column(1));
        assert_eq!(dict.duals()[1], 0.0);
    }

    #[test]
    fn more_atoms_than_items_still_reaches_stationarity() {
        // 20 atoms fitted to 6 items: V Vᵀ is singular
        let x = DMatrix::from_fn(7, 6, |i, j| ((i * 5 + j * 11) as f64 * 0.37).cos() * 3.0);
        let v = DMatrix::from_fn(20, 6, |i, j| ((i * 13 + j * 3) as f64 * 0.71).sin());
        let dict = update_dictionary(&x, &v, None).unwrap();
        let gram = &v * v.transpose();
        let cross = &x * v.transpose();
        assert!(stationarity_residual(&cross, &gram, dict.atoms(), dict.duals()) < 1e-7);
        assert!(dict.complementary_slackness() < 1e-9);
        assert!(dict.atoms().column_iter().all(|c| c.norm_squared() <= 1.0 + NORM_SLACK));
    }

    #[test]
    fn all_zero_profiles_are_rejected() {
        let x = unit_columns(4, 3);
        assert!(update_dictionary(&x, &DMatrix::zeros(2, 3), None).is_err());
    }

    #[test]
    fn revive_noop_when_all_atoms_used() {
        let x = unit_columns(4, 3);
        let dict = TopicDictionary::random(4, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let v = DMatrix::identity(3, 3);
        assert_eq!(revive_dead_atoms(&dict, &x, &v, 9), dict);
    }

    #[test]
    fn revive_uses_worst_residual() {
        let x = unit_columns(4, 2);
        let atoms = DMatrix::from_fn(4, 2, |i, j| if j == 0 { x[(i, 0)] } else { 0.0 });
        let dict = TopicDictionary::new(atoms, DVector::zeros(2)).unwrap();
        // item 0 reconstructed exactly by atom 0, item 1 not at all
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let revived = revive_dead_atoms(&dict, &x, &v, 3);
        assert!((revived.atoms().column(1) - x.column(1)).amax() < 1e-12);
        assert_eq!(revived.atoms().column(0), dict.atoms().column(0));
    }

    #[test]
    fn revive_falls_back_to_random_unit_vector() {
        let x = unit_columns(4, 1);
        let atoms = DMatrix::from_fn(4, 2, |i, j| if j == 0 { x[(i, 0)] } else { 0.0 });
        let dict = TopicDictionary::new(atoms, DVector::zeros(2)).unwrap();
        let v = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let a = revive_dead_atoms(&dict, &x, &v, 5);
        let b = revive_dead_atoms(&dict, &x, &v, 5);
        assert_eq!(a, b);
        assert!((a.atoms().column(1).norm() - 1.0).abs() < 1e-12);
    }
}
