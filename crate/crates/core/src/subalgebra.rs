//! Subalgebra discovery: principal directions of a reduced snapshot matrix,
//! closed under the bracket.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::fitting::ReducedSnapshotMatrix;
use crate::lie::{basis_orthonormalize, bracket, closure_residual, subspace_angle, AlgebraBasis, AlgebraElement, Subalgebra, DEFAULT_CLOSURE_TOL};

pub const DEFAULT_ENERGY_FRACTION: f64 = 0.99;
pub const DEFAULT_MAX_ROUNDS: usize = 16;
/// Largest subspace angle (radians) for a library match.
pub const LIBRARY_ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub subalgebra: Subalgebra,
    /// Bracket rounds evaluated, including the final verifying round.
    pub rounds: usize,
    /// Dimension before the first round and after every round.
    pub dims: Vec<usize>,
    pub closed: bool,
}

/// Extend `basis` by brackets until the span is closed to `closure_tol`
/// (relative out-of-span bracket norm).
pub fn bracket_closure(basis: &AlgebraBasis, closure_tol: f64, max_rounds: usize) -> Result<ClosureReport> {
    if !(closure_tol > 0.0) {
        return Err(invalid("closure tolerance must be positive"));
    }
    let n = basis.ambient_dim();
    let parent_dim = n * n;
    let mut current = if basis.dim() == 0 {
        AlgebraBasis::empty(n)
    } else {
        basis.orthonormalized()?
    };
    let mut dims = alloc::vec![current.dim()];
    let mut rounds = 0;
    let mut closed = false;
    while rounds < max_rounds {
        rounds += 1;
        let els = current.elements();
        let mut additions: Vec<AlgebraElement> = Vec::new();
        for i in 0..els.len() {
            for j in (i + 1)..els.len() {
                let r = current.residual(&bracket(&els[i], &els[j])?)?;
                let norm = r.norm();
                if norm > closure_tol * els[i].norm() * els[j].norm() {
                    additions.push(r.scaled(1.0 / norm));
                }
            }
        }
        if additions.is_empty() {
            closed = true;
            dims.push(current.dim());
            break;
        }
        let mut all: Vec<AlgebraElement> = current.elements().to_vec();
        all.extend(additions);
        let next = basis_orthonormalize(&all, closure_tol.max(1e-10))?;
        let grew = next.dim() > current.dim();
        current = next;
        dims.push(current.dim());
        if !grew {
            // Only directions below the rank tolerance remained.
            closed = true;
            break;
        }
    }
    let residual = closure_residual(&current)?;
    Ok(ClosureReport {
        subalgebra: Subalgebra {
            basis: current,
            parent_dim,
            closure_residual: residual,
        },
        rounds,
        dims,
        closed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub subalgebra: Subalgebra,
    /// Singular values of the snapshot matrix in descending order.
    pub singular_values: Vec<f64>,
    /// Number of kept singular directions.
    pub k: usize,
    /// `Σ_{i≤k} σ_i / Σ σ_i`.
    pub captured_energy: f64,
    /// Kept singular directions as algebra elements (unit Frobenius norm).
    pub directions: Vec<AlgebraElement>,
    pub closure: ClosureReport,
    /// Name of the matching standard subalgebra of `aff(3)`, if any.
    pub library_match: Option<&'static str>,
}

/// Smallest `k` with `Σ_{i≤k} σ_i > a·Σ σ_i` (0 when all σ vanish).
pub fn energy_rank(singular_values: &[f64], a: f64) -> usize {
    let total: f64 = singular_values.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s;
        if acc > a * total {
            return i + 1;
        }
    }
    singular_values.len()
}

/// Principal directions of `sg` capturing an `a` fraction of the singular
/// value sum, closed under the bracket.
pub fn subalgebra_search(sg: &ReducedSnapshotMatrix, a: f64, closure_tol: f64) -> Result<SearchReport> {
    if sg.is_empty() {
        return Err(crate::Error::Empty("reduced snapshot matrix has no columns".to_string()));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid("energy fraction must lie in (0, 1)"));
    }
    let n = sg.basis.ambient_dim();
    // Coordinates in an orthonormal basis make singular values Frobenius-meaningful.
    let ortho = if sg.basis.dim() == 0 {
        AlgebraBasis::empty(n)
    } else {
        sg.basis.orthonormalized()?
    };
    let d = ortho.dim();
    let mut m = DMatrix::zeros(d, sg.len());
    for j in 0..sg.len() {
        let coords = ortho.coordinates(&sg.element(j)?)?;
        m.column_mut(j).copy_from_slice(&coords);
    }
    let (singular_values, directions) = if d == 0 {
        (Vec::new(), Vec::new())
    } else {
        let svd = m.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|x, y| svd.singular_values[*y].total_cmp(&svd.singular_values[*x]));
        let sv: Vec<f64> = order.iter().map(|i| svd.singular_values[*i]).collect();
        let dirs = order.iter().map(|i| ortho.combine(u.column(*i).as_slice())).collect::<Result<Vec<_>>>()?;
        (sv, dirs)
    };
    let k = energy_rank(&singular_values, a);
    let total: f64 = singular_values.iter().sum();
    let captured_energy = if total > 0.0 {
        singular_values[..k].iter().sum::<f64>() / total
    } else {
        1.0
    };
    let kept: Vec<AlgebraElement> = directions.into_iter().take(k).collect();
    let start = if kept.is_empty() {
        AlgebraBasis::empty(n)
    } else {
        AlgebraBasis::new(kept.clone(), alloc::vec![None; kept.len()])?
    };
    let closure = bracket_closure(&start, closure_tol, DEFAULT_MAX_ROUNDS)?;
    let library_match = match_library(&closure.subalgebra.basis)?;
    Ok(SearchReport {
        subalgebra: closure.subalgebra.clone(),
        singular_values,
        k,
        captured_energy,
        directions: kept,
        closure,
        library_match,
    })
}

/// Search with the default energy fraction and closure tolerance.
pub fn subalgebra_search_default(sg: &ReducedSnapshotMatrix) -> Result<SearchReport> {
    subalgebra_search(sg, DEFAULT_ENERGY_FRACTION, DEFAULT_CLOSURE_TOL)
}

fn diagonal_scalings() -> AlgebraBasis {
    let els = (0..3)
        .map(|i| {
            let mut a = [[0.0; 3]; 3];
            a[i][i] = 1.0;
            AlgebraElement::affine(a, [0.0; 3])
        })
        .collect();
    AlgebraBasis::new(els, alloc::vec![None; 3]).expect("independent scalings")
}

fn sl3() -> AlgebraBasis {
    let mut els = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let mut a = [[0.0; 3]; 3];
                a[i][j] = 1.0;
                els.push(AlgebraElement::affine(a, [0.0; 3]));
            }
        }
    }
    els.push(AlgebraElement::affine([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]], [0.0; 3]));
    els.push(AlgebraElement::affine([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]], [0.0; 3]));
    AlgebraBasis::new(els, alloc::vec![None; 8]).expect("independent sl(3) generators")
}

/// Standard subalgebras of `aff(3)` used to name search results.
pub fn library() -> Vec<(&'static str, AlgebraBasis)> {
    let t3 = AlgebraBasis::translations3();
    alloc::vec![
        ("so(3)", AlgebraBasis::so3()),
        ("se(3)", AlgebraBasis::se3()),
        ("translations", t3.clone()),
        (
            "scalings+translations",
            AlgebraBasis::concat(&[diagonal_scalings(), t3.clone()]).expect("independent")
        ),
        ("sl(3)+translations", AlgebraBasis::concat(&[sl3(), t3]).expect("independent")),
        ("aff(3)", AlgebraBasis::aff3()),
    ]
}

/// First library subalgebra whose span is within [`LIBRARY_ANGLE_TOL`] of
/// `basis`; `None` for other ambient sizes or no match.
pub fn match_library(basis: &AlgebraBasis) -> Result<Option<&'static str>> {
    if basis.ambient_dim() != 4 || basis.dim() == 0 {
        return Ok(None);
    }
    for (name, lib) in library() {
        if lib.dim() == basis.dim() && subspace_angle(basis, &lib)? < LIBRARY_ANGLE_TOL {
            return Ok(Some(name));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::ReducedColumn;

    fn lx() -> AlgebraElement {
        AlgebraElement::twist([1.0, 0.0, 0.0], [0.0; 3])
    }
    fn ly() -> AlgebraElement {
        AlgebraElement::twist([0.0, 1.0, 0.0], [0.0; 3])
    }

    fn columns_from(elements: &[AlgebraElement]) -> ReducedSnapshotMatrix {
        let basis = AlgebraBasis::aff3();
        let cols = elements
            .iter()
            .enumerate()
            .map(|(k, e)| ReducedColumn {
                traj: 0,
                step: k,
                time: k as f64,
                dt: 1.0,
                coeffs: basis.coordinates(e).unwrap(),
                cost: 0.0,
                converged: true,
            })
            .collect();
        ReducedSnapshotMatrix::new(basis, cols).unwrap()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn closure_of_two_rotations_is_so3() {
        let basis = AlgebraBasis::new(alloc::vec![lx(), ly()], alloc::vec![None, None]).unwrap();
        let out = bracket_closure(&basis, DEFAULT_CLOSURE_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert!(out.closed);
        assert_eq!(out.subalgebra.dim(), 3);
        assert_eq!(match_library(&out.subalgebra.basis).unwrap(), Some("so(3)"));
        assert!(out.dims.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn closed_sets_are_fixed_points() {
        let out = bracket_closure(&AlgebraBasis::se3(), DEFAULT_CLOSURE_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_eq!((out.rounds, out.subalgebra.dim()), (1, 6));
        let t = AlgebraBasis::new(alloc::vec![AlgebraElement::twist([0.0; 3], [0.0, 0.0, 1.0])], alloc::vec![None]).unwrap();
        let out = bracket_closure(&t, DEFAULT_CLOSURE_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_eq!(out.subalgebra.dim(), 1);
    }

    #[test]
    fn closure_dimension_is_monotone_on_random_inputs() {
        for seed in 0..10u64 {
            let mut s = seed;
            let els: Vec<AlgebraElement> = (0..2)
                .map(|_| {
                    let mut a = [[0.0; 3]; 3];
                    for row in a.iter_mut() {
                        for v in row.iter_mut() {
                            *v = lcg(&mut s);
                        }
                    }
                    AlgebraElement::affine(a, [lcg(&mut s), lcg(&mut s), lcg(&mut s)])
                })
                .collect();
            let basis = AlgebraBasis::new(els, alloc::vec![None, None]).unwrap();
            let out = bracket_closure(&basis, DEFAULT_CLOSURE_TOL, DEFAULT_MAX_ROUNDS).unwrap();
            assert!(out.closed);
            assert!(out.dims.windows(2).all(|w| w[1] >= w[0]));
            assert!(out.subalgebra.dim() <= 12);
            assert!(out.subalgebra.closure_residual <= DEFAULT_CLOSURE_TOL);
        }
    }

    #[test]
    fn proportional_columns_give_a_line() {
        let a = AlgebraElement::twist([0.2, 0.1, -0.3], [1.0, 0.0, 0.5]);
        let cols: Vec<_> = (1..20).map(|k| a.scaled(k as f64 * 0.1)).collect();
        let out = subalgebra_search(&columns_from(&cols), 0.99, DEFAULT_CLOSURE_TOL).unwrap();
        assert_eq!(out.subalgebra.dim(), 1);
        assert_eq!(out.k, 1);
    }

    #[test]
    fn random_columns_terminate_at_aff3() {
        let mut s = 17u64;
        let cols: Vec<_> = (0..200)
            .map(|_| {
                let mut a = [[0.0; 3]; 3];
                for row in a.iter_mut() {
                    for v in row.iter_mut() {
                        *v = lcg(&mut s);
                    }
                }
                AlgebraElement::affine(a, [lcg(&mut s), lcg(&mut s), lcg(&mut s)])
            })
            .collect();
        let sg = columns_from(&cols);
        assert_eq!(sg.matrix().rank(1e-10), 12);
        let out = subalgebra_search(&sg, 0.99, DEFAULT_CLOSURE_TOL).unwrap();
        assert_eq!(out.subalgebra.dim(), 12);
        assert_eq!(out.library_match, Some("aff(3)"));
    }

    #[test]
    fn rigid_columns_find_se3_and_account_energy() {
        let mut s = 3u64;
        let cols: Vec<_> = (0..300)
            .map(|_| AlgebraElement::twist([lcg(&mut s), lcg(&mut s), lcg(&mut s)], [lcg(&mut s), lcg(&mut s), lcg(&mut s)]))
            .collect();
        let out = subalgebra_search(&columns_from(&cols), 0.99, DEFAULT_CLOSURE_TOL).unwrap();
        assert_eq!(out.subalgebra.dim(), 6);
        assert_eq!(out.library_match, Some("se(3)"));
        let total: f64 = out.singular_values.iter().sum();
        let captured: f64 = out.singular_values[..out.k].iter().sum::<f64>() / total;
        assert_eq!(captured, out.captured_energy);
        for d in &out.directions {
            assert!(out.subalgebra.basis.residual(d).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn energy_rank_examples() {
        assert_eq!(energy_rank(&[1.0, 0.0, 0.0], 0.99), 1);
        assert_eq!(energy_rank(&[1.0, 1.0], 0.99), 2);
        assert_eq!(energy_rank(&[0.0, 0.0], 0.99), 0);
    }
}
