//! Independent check of the catalog multiplicities: build the curvature tensor
//! of the model space, pick a random unit normal ξ and count the eigenvalues of
//! `v ↦ R(v, ξ)ξ` on the normal complement of ξ and on the tangent space of `F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubeflow_core::catalog_lookup;

type Vector = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Left multiplication by the imaginary units of ℂ (one unit) or ℍ (three)
/// acting on ℝ^{d·n}, blocks of `d` coordinates per scalar.
fn structures(d: usize, n: usize) -> Vec<Box<dyn Fn(&[f64]) -> Vector>> {
    let block = |f: fn(&[f64]) -> [f64; 4]| -> Box<dyn Fn(&[f64]) -> Vector> {
        Box::new(move |v: &[f64]| v.chunks(4).flat_map(|c| f(c).to_vec()).collect())
    };
    match d {
        1 => vec![],
        2 => vec![Box::new(move |v: &[f64]| {
            let mut out = vec![0.0; 2 * n];
            for j in 0..n {
                out[2 * j] = -v[2 * j + 1];
                out[2 * j + 1] = v[2 * j];
            }
            out
        })],
        4 => vec![
            block(|q| [-q[1], q[0], -q[3], q[2]]),
            block(|q| [-q[2], q[3], q[0], -q[1]]),
            block(|q| [-q[3], -q[2], q[1], q[0]]),
        ],
        _ => unreachable!(),
    }
}

/// `R(v, ξ)ξ` for holomorphic (resp. quaternionic) sectional curvature −4.
fn jacobi(js: &[Box<dyn Fn(&[f64]) -> Vector>], v: &[f64], xi: &[f64]) -> Vector {
    let mut out: Vector = v.iter().zip(xi).map(|(a, x)| -(a - dot(v, xi) * x)).collect();
    for j in js {
        let jx = j(xi);
        let c = 3.0 * dot(v, &jx);
        for (o, y) in out.iter_mut().zip(&jx) {
            *o -= c * y;
        }
    }
    out
}

fn gram_schmidt(vs: Vec<Vector>) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for mut v in vs {
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-9 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Counts of the eigenvalues −1 and −4 of the Jacobi operator restricted to
/// `span(basis)`, which it preserves.
fn eigen_counts(js: &[Box<dyn Fn(&[f64]) -> Vector>], basis: &[Vector], xi: &[f64]) -> (usize, usize) {
    // The operator is diagonalizable with spectrum in {−1, −4}; the trace
    // determines both counts.
    let trace: f64 = basis.iter().map(|b| dot(b, &jacobi(js, b, xi))).sum();
    let dim = basis.len() as f64;
    let four = ((-trace - dim) / 3.0).round();
    for b in basis {
        let img = jacobi(js, b, xi);
        let in_span: f64 = basis.iter().map(|c| dot(&img, c).powi(2)).sum();
        assert!((in_span - dot(&img, &img)).abs() < 1e-9, "operator leaves the subspace");
    }
    ((dim - four) as usize, four as usize)
}

fn check(name: &str, d: usize, m: usize, p: usize, seed: u64) {
    let total = d * m;
    let js = structures(d, m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // F spans the first p scalar coordinates, the normal space the rest.
    let tangent: Vec<Vector> = (0..d * p)
        .map(|i| (0..total).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let mut xi: Vector = (0..total).map(|j| if j >= d * p { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    let n = dot(&xi, &xi).sqrt();
    xi.iter_mut().for_each(|x| *x /= n);
    let mut normals = vec![xi.clone()];
    normals.extend((d * p..total).map(|i| (0..total).map(|j| (i == j) as u8 as f64).collect()));
    let normal_basis = gram_schmidt(normals);
    let complement: Vec<Vector> = normal_basis[1..].to_vec();
    let (v1, v2) = eigen_counts(&js, &complement, &xi);
    let (h1, h2) = eigen_counts(&js, &tangent, &xi);
    let e = catalog_lookup(name).unwrap();
    assert_eq!(e.params.mv, [v1 as u32, v2 as u32], "{name}");
    assert_eq!((e.params.m_h(), h2), (h1 as u32, 0), "{name}");
}

#[test]
fn real_hyperbolic_multiplicities() {
    for (n, p) in [(3, 1), (4, 1), (4, 2), (6, 3)] {
        check(&format!("RH{n}/RH{p}"), 1, n, p, n as u64 * 10 + p as u64);
    }
}

#[test]
fn complex_hyperbolic_multiplicities() {
    for (m, p) in [(2, 1), (3, 1), (3, 2), (5, 2)] {
        check(&format!("CH{m}/CH{p}"), 2, m, p, 100 + m as u64 * 10 + p as u64);
    }
}

#[test]
fn quaternionic_hyperbolic_multiplicities() {
    for (m, p) in [(2, 1), (3, 1), (3, 2)] {
        check(&format!("QH{m}/QH{p}"), 4, m, p, 200 + m as u64 * 10 + p as u64);
    }
}

#[test]
fn compact_duals_share_multiplicities() {
    for (nc, c) in [("CH3/CH1", "CP3/CP1"), ("QH2/QH1", "HP2/HP1"), ("OH2/OH1", "OP2/OP1"), ("RH4/RH2", "S4/S2")] {
        let (a, b) = (catalog_lookup(nc).unwrap(), catalog_lookup(c).unwrap());
        assert_eq!(a.params.mv, b.params.mv);
        assert_eq!(a.params.mh, b.params.mh);
        assert_eq!(a.params.epsilon(), -b.params.epsilon());
    }
}
