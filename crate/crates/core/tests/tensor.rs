mod common;

use common::for_each_index;
use proptest::prelude::*;
use tgp::tensor::{contract_all_but_one, full_contract, kron, reconstruct, reconstruct_with_limit};
use tgp::{DenseTensor, Matrix, TuckerWeights};

fn tensor_and_vectors() -> impl Strategy<Value = (DenseTensor, Vec<Vec<f64>>)> {
    prop::collection::vec(1usize..5, 1..=4).prop_flat_map(|dims| {
        let len: usize = dims.iter().product();
        let vecs: Vec<_> = dims.iter().map(|&n| prop::collection::vec(-2.0f64..2.0, n)).collect();
        (Just(dims), prop::collection::vec(-2.0f64..2.0, len), vecs)
            .prop_map(|(dims, data, vecs)| (DenseTensor::new(dims, data).unwrap(), vecs))
    })
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn full_contract_is_kron_dot((t, v) in tensor_and_vectors()) {
        let k = kron(&refs(&v)).unwrap();
        let want: f64 = k.iter().zip(t.data()).map(|(a, b)| a * b).sum();
        prop_assert!(close(full_contract(&t, &refs(&v)).unwrap(), want, 1e-12));
    }

    #[test]
    fn contract_all_but_one_dots_back((t, v) in tensor_and_vectors()) {
        let f = full_contract(&t, &refs(&v)).unwrap();
        for k in 0..t.order() {
            let c = contract_all_but_one(&t, &refs(&v), k).unwrap();
            prop_assert_eq!(c.len(), t.dims()[k]);
            let d: f64 = c.iter().zip(&v[k]).map(|(a, b)| a * b).sum();
            prop_assert!(close(d, f, 1e-12));
        }
    }

    #[test]
    fn contract_all_but_one_selects_unit_vectors((t, v) in tensor_and_vectors()) {
        for k in 0..t.order() {
            let c = contract_all_but_one(&t, &refs(&v), k).unwrap();
            for l in 0..t.dims()[k] {
                let mut w = v.clone();
                w[k] = vec![0.0; t.dims()[k]];
                w[k][l] = 1.0;
                prop_assert!(close(c[l], full_contract(&t, &refs(&w)).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn full_contract_is_multilinear((t, v) in tensor_and_vectors(), c in -3.0f64..3.0, d in 0usize..4) {
        let d = d % t.order();
        let base = full_contract(&t, &refs(&v)).unwrap();
        let mut w = v.clone();
        w[d].iter_mut().for_each(|x| *x *= c);
        prop_assert!(close(full_contract(&t, &refs(&w)).unwrap(), c * base, 1e-12));
    }

    #[test]
    fn kron_entries_are_products(v in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..4), 1..4)) {
        let k = kron(&refs(&v)).unwrap();
        let dims: Vec<usize> = v.iter().map(Vec::len).collect();
        let mut at = 0;
        for_each_index(&dims, |i| {
            let p: f64 = i.iter().enumerate().map(|(d, &j)| v[d][j]).product();
            assert_eq!(k[at], p);
            at += 1;
        });
        prop_assert_eq!(at, k.len());
    }

    #[test]
    fn reconstruction_commutes_with_contraction(
        n in prop::collection::vec(1usize..4, 1..=3),
        r in 1usize..3,
        seed in any::<u64>(),
    ) {
        let w = tgp::model::sample_prior(&n, r, 1.0, 1.0, seed).unwrap();
        let theta = reconstruct(&w).unwrap();
        let phi: Vec<Vec<f64>> = n.iter().enumerate().map(|(d, &m)| (0..m).map(|i| (i + d) as f64 * 0.3 - 0.4).collect()).collect();
        let psi: Vec<Vec<f64>> = w
            .factors
            .iter()
            .zip(&phi)
            .map(|(u, p)| (0..u.cols()).map(|j| (0..u.rows()).map(|i| u.row(i)[j] * p[i]).sum()).collect())
            .collect();
        let a = full_contract(&theta, &refs(&phi)).unwrap();
        let b = full_contract(&w.core, &refs(&psi)).unwrap();
        prop_assert!(close(a, b, 1e-10));
    }
}

#[test]
fn documented_examples() {
    let t = DenseTensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
    let ones = vec![vec![1.0, 1.0]; 3];
    assert_eq!(full_contract(&t, &refs(&ones)).unwrap(), 36.0);

    let m = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(contract_all_but_one(&m, &[&[1.0, 1.0], &[1.0, 0.0]], 1).unwrap(), vec![4.0, 6.0]);
    let id = DenseTensor::superdiagonal(2, 2).unwrap();
    assert_eq!(contract_all_but_one(&id, &[&[9.0, 9.0], &[3.0, 4.0]], 0).unwrap(), vec![3.0, 4.0]);

    let mut sel = DenseTensor::zeros(vec![2, 2]).unwrap();
    sel.set(&[0, 1], 1.0).unwrap();
    assert_eq!(full_contract(&sel, &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(), 1.0);

    assert_eq!(kron(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    assert_eq!(kron(&[&[2.0], &[3.0], &[5.0]]).unwrap(), vec![30.0]);
    assert_eq!(kron(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(), vec![3.0, 4.0, 6.0, 8.0]);
    assert!(kron(&[]).is_err());
}

#[test]
fn shape_errors() {
    let t = DenseTensor::zeros(vec![2, 3]).unwrap();
    assert!(full_contract(&t, &[&[1.0, 1.0], &[1.0, 1.0]]).is_err());
    assert!(contract_all_but_one(&t, &[&[1.0, 1.0], &[1.0, 1.0, 1.0]], 2).is_err());
    assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
}

#[test]
fn reconstruction_examples() {
    let id = TuckerWeights::new(DenseTensor::superdiagonal(2, 2).unwrap(), vec![Matrix::identity(2), Matrix::identity(2)]).unwrap();
    assert_eq!(reconstruct(&id).unwrap(), DenseTensor::superdiagonal(2, 2).unwrap());

    // D = 2 reconstruction is U W Vᵀ.
    let w = tgp::model::sample_prior(&[3, 4], 2, 1.0, 1.0, 8).unwrap();
    let uw = w.factors[0].matmul(&Matrix::from_vec(2, 2, w.core.data().to_vec()).unwrap()).unwrap();
    let uwv = uw.matmul(&w.factors[1].transpose()).unwrap();
    let theta = reconstruct(&w).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            assert!((theta.get(&[i, j]).unwrap() - uwv.row(i)[j]).abs() < 1e-12);
        }
    }

    // Triple-loop oracle for D = 3.
    let w = tgp::model::sample_prior(&[3, 3, 3], 2, 1.0, 1.0, 2).unwrap();
    let theta = reconstruct(&w).unwrap();
    for_each_index(&[3, 3, 3], |i| {
        let mut s = 0.0;
        for_each_index(&[2, 2, 2], |j| {
            s += w.core.get(j).unwrap() * w.factors[0].row(i[0])[j[0]] * w.factors[1].row(i[1])[j[1]] * w.factors[2].row(i[2])[j[2]];
        });
        assert!((theta.get(i).unwrap() - s).abs() < 1e-12);
    });
    assert!(reconstruct_with_limit(&w, 26).is_err());
}
