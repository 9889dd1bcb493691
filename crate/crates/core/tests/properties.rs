use proptest::prelude::*;
use std::f64::consts::PI;
use tenfold::class::{symmetry_class, verify_class};
use tenfold::clifford::{abs_index_group, check_graded_rep, exterior_rep, ko_group, stable_reduce, CliffordClass, Field};
use tenfold::linalg::{self, c, CMat};
use tenfold::model::{self, build, LatticeModel, ModelFile, SymmetryFile, SymmetryMatrices, TermFile};
use tenfold::pairing::{self, bounded_transform, kernel_count, KernelPolicy, PairingOptions};
use tenfold::symmetry::{self, classify, Realization, SymmetrySpec};

fn spec_strategy() -> impl Strategy<Value = SymmetrySpec> {
    (0usize..10).prop_map(|i| SymmetrySpec::all()[i])
}

fn herm(n: usize, vals: &[f64]) -> CMat {
    let m = CMat::from_fn(n, n, |i, j| c(vals[(i * n + j) % vals.len()], vals[(j * n + i + 1) % vals.len()]));
    linalg::herm_part(m.as_ref())
}

fn m2(a: [[f64; 2]; 2]) -> Vec<Vec<[f64; 2]>> {
    a.iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect()
}

fn chiral_chain(ws: &[(i64, f64)]) -> LatticeModel {
    let mut terms = Vec::new();
    for &(a, w) in ws {
        if a == 0 {
            terms.push(TermFile { offset: vec![0], matrix: m2([[0.0, w], [w, 0.0]]) });
        } else {
            terms.push(TermFile { offset: vec![a], matrix: m2([[0.0, w], [0.0, 0.0]]) });
            terms.push(TermFile { offset: vec![-a], matrix: m2([[0.0, 0.0], [w, 0.0]]) });
        }
    }
    let s = SymmetryMatrices { s: Some(m2([[1.0, 0.0], [0.0, -1.0]])), ..Default::default() };
    let sym = SymmetryFile { s: Some(true), realization: Realization::Explicit, matrices: Some(s), ..Default::default() };
    build(&ModelFile { dimension: 1, internal_rank: 2, terms, flux: None, mu: 0.0, symmetry: sym }).unwrap()
}

/// Winding of `q(k) = sum_a w_a e^{-i a k}` from accumulated phase
/// increments, evaluated from the coefficients without any model code.
fn winding_of(ws: &[(i64, f64)]) -> i64 {
    let n = 4096;
    let q = |k: f64| ws.iter().map(|&(a, w)| c(0.0, -(a as f64) * k).exp() * w).sum::<faer::c64>();
    let mut total = 0.0;
    let mut prev = q(0.0);
    for i in 1..=n {
        let z = q(2.0 * PI * i as f64 / n as f64);
        total += (z * prev.conj()).arg();
        prev = z;
    }
    (total / (2.0 * PI)).round() as i64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ko_group_has_period_8(k in -1000i64..1000) {
        prop_assert_eq!(ko_group(k), ko_group(k + 8));
        prop_assert_eq!(ko_group(k), ko_group(k - 16));
    }

    #[test]
    fn stable_reduce_is_idempotent(r in 0usize..16, s in 0usize..16) {
        let cl = CliffordClass::real(r, s);
        prop_assert_eq!(stable_reduce(stable_reduce(cl)), stable_reduce(cl));
        prop_assert!(cl.stable_eq(&stable_reduce(cl)));
        prop_assert_eq!(CliffordClass::real(r + 1, s + 1).stable_class(), cl.stable_class());
    }

    #[test]
    fn table_cell_is_ko_of_n_minus_d(i in 0usize..10, d in 0usize..12) {
        let spec = SymmetrySpec::all()[i];
        let cl = classify(&spec).unwrap();
        let n = cl.stable_class() as i64;
        let g = abs_index_group(cl.field, cl.stable_class(), d);
        match cl.field {
            Field::Real => prop_assert_eq!(g, ko_group(n - d as i64)),
            Field::Complex => prop_assert_eq!(g == tenfold::clifford::GroupTag::Zero, (n - d as i64) % 2 != 0),
        }
        // Bott periodicity in d
        prop_assert_eq!(g, abs_index_group(cl.field, cl.stable_class(), d + 8));
    }

    #[test]
    fn exterior_relations(d in 0usize..6) {
        let ext = exterior_rep(d);
        for rep in [&ext.left, &ext.right] {
            let r = check_graded_rep(rep).unwrap();
            prop_assert!(r.is_valid() && r.max_residual < 1e-12);
        }
        for i in 0..d {
            for j in 0..d {
                prop_assert!(linalg::anticomm_res(ext.rho(i).as_ref(), ext.gamma(j).as_ref()) < 1e-12);
            }
        }
    }

    #[test]
    fn bounded_transform_is_a_contraction(vals in prop::collection::vec(-5.0f64..5.0, 9..30), n in 2usize..6) {
        let t = herm(n, &vals);
        let f = bounded_transform(&t);
        let ev = linalg::eigvalsh(f.as_ref());
        prop_assert!(ev.iter().all(|x| x.abs() < 1.0));
        prop_assert!(linalg::comm_res(f.as_ref(), t.as_ref()) < 1e-10);
        let et = linalg::eigvalsh(t.as_ref());
        for (a, b) in et.iter().zip(&ev) {
            prop_assert!((a / (1.0 + a * a).sqrt() - b).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_count_is_scale_free(k in 1usize..4, rest in prop::collection::vec(0.2f64..1.0, 3..8), scale in 1e-3f64..1e3) {
        let mut sv: Vec<f64> = (0..k).map(|i| 1e-7 * (i + 1) as f64).collect();
        sv.extend(rest);
        sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let policy = KernelPolicy { floor: 0.0, ..KernelPolicy::default() };
        let a = kernel_count(&sv, &policy).unwrap();
        let scaled: Vec<f64> = sv.iter().map(|x| x * scale).collect();
        let b = kernel_count(&scaled, &policy).unwrap();
        prop_assert_eq!(a.dim, k);
        prop_assert_eq!(b.dim, k);
    }

    #[test]
    fn realify_is_multiplicative(a in prop::collection::vec(-1.0f64..1.0, 18), b in prop::collection::vec(-1.0f64..1.0, 18)) {
        let ma = CMat::from_fn(3, 3, |i, j| c(a[2 * (3 * i + j)], a[2 * (3 * i + j) + 1]));
        let mb = CMat::from_fn(3, 3, |i, j| c(b[2 * (3 * i + j)], b[2 * (3 * i + j) + 1]));
        let lhs = linalg::realify((&ma * &mb).as_ref());
        let rhs = &linalg::realify(ma.as_ref()) * &linalg::realify(mb.as_ref());
        prop_assert!(linalg::max_abs((&lhs - &rhs).as_ref()) < 1e-12);
    }

    #[test]
    fn dirac_squares_to_distance(x0 in prop::collection::vec(0.05f64..0.95, 2), l in 1usize..4) {
        let dd = pairing::dirac(2, l, 1, &x0).unwrap();
        let op = dd.operator();
        let sq = &op * &op;
        let r2: Vec<f64> = (0..dd.base_dim())
            .flat_map(|i| std::iter::repeat_n(dd.positions[0][i].powi(2) + dd.positions[1][i].powi(2), 4))
            .collect();
        prop_assert!(linalg::max_abs((&sq - &linalg::diag_real(&r2)).as_ref()) < 1e-12);
        prop_assert!(linalg::anticomm_res(op.as_ref(), dd.grading().as_ref()) < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn random_models_are_compatible_and_verify(spec in spec_strategy(), seed in 0u64..10_000, hop in 0.05f64..0.3) {
        let m = model::random_compatible(&spec, 1, 4, hop, seed).unwrap();
        let ht = model::truncate(&m, 2).unwrap();
        prop_assert!(symmetry::verify_compatibility(&ht, &m.ops).unwrap().pass);
        let f = model::fermi(&ht, 0.0).unwrap();
        let data = symmetry_class(&ht, &f, &m.ops).unwrap();
        prop_assert!(verify_class(&data).is_valid());
        prop_assert!(stable_reduce(data.class) == stable_reduce(classify(&spec).unwrap()));
    }

    #[test]
    fn disorder_is_seed_deterministic_and_symmetric(spec in spec_strategy(), seed in 0u64..1000) {
        let m = model::random_compatible(&spec, 1, 4, 0.2, 3).unwrap();
        let gap = model::bulk_gap_at(&m, 0.0, 64);
        let a = model::add_disorder(&m, 0.2 * gap, seed, gap).unwrap();
        let ha = model::truncate(&a, 3).unwrap();
        let hb = model::truncate(&model::add_disorder(&m, 0.2 * gap, seed, gap).unwrap(), 3).unwrap();
        prop_assert_eq!(linalg::max_abs((&ha.matrix - &hb.matrix).as_ref()), 0.0);
        prop_assert!(symmetry::verify_compatibility(&ha, &a.ops).unwrap().pass);
    }

    #[test]
    fn chiral_chain_index_is_the_winding(w0 in -1.5f64..1.5, w1 in -1.5f64..1.5, w2 in -1.5f64..1.5) {
        let ws = [(0, w0), (1, w1), (2, w2)];
        // roots of w0 + w1 z + w2 z^2 set the decay length of the end modes;
        // keep it short enough for the schedule to resolve
        let roots: Vec<f64> = if w2.abs() > 1e-3 {
            let disc = c(w1 * w1 - 4.0 * w2 * w0, 0.0).sqrt();
            vec![((disc - w1) / (2.0 * w2)).norm(), ((-disc - w1) / (2.0 * w2)).norm()]
        } else {
            vec![(w0 / w1).abs()]
        };
        prop_assume!(roots.iter().all(|r| !(0.5..=2.0).contains(r)));
        let m = chiral_chain(&ws);
        let r = pairing::invariant(&m, &[16, 20, 24], &PairingOptions::default()).unwrap();
        prop_assert!(r.stable, "{:?}", r.values());
        prop_assert_eq!(r.value, Some(winding_of(&ws)));
    }

    #[test]
    fn offset_independence_in_the_plane(ox in 0.1f64..0.9, oy in 0.1f64..0.9) {
        let m = tenfold::model::haldane(1.0, 0.3, PI / 2.0, 0.1).unwrap();
        let a = pairing::invariant(&m, &[6, 8], &PairingOptions { offset: Some(vec![0.5, 0.5]), ..Default::default() }).unwrap();
        let b = pairing::invariant(&m, &[6, 8], &PairingOptions { offset: Some(vec![ox, oy]), ..Default::default() }).unwrap();
        prop_assert_eq!(a.value, b.value);
    }
}
