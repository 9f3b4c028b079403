use proptest::prelude::*;

use spectree::charval::{contour_index, determinant_winding, FnFamily, IndexOptions};
use spectree::decomposition::SphericalBasis;
use spectree::linalg::identity_plus;
use spectree::operators::{adjacency, minimal_delta};
use spectree::resolvent::{free_kernel, SpectralPoint};
use spectree::{BirmanSchwinger, CMatrix, ContourSpec, PotentialSpec, Threshold, TreeGraph, C64};

fn small_tree() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![
        (Just(1usize), 0usize..12),
        (Just(2usize), 0usize..6),
        (Just(3usize), 0usize..4)
    ]
}

fn disk_point(r: f64) -> impl Strategy<Value = C64> {
    (0.01..r, 0.0..std::f64::consts::TAU).prop_map(|(m, a)| C64::from_polar(m, a))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parent_child_round_trip((k, depth) in small_tree()) {
        let t = TreeGraph::new(k, depth).unwrap();
        for v in 0..t.vertex_count() {
            for c in t.children(v).unwrap() {
                prop_assert_eq!(t.parent(c).unwrap(), v);
                prop_assert_eq!(t.vertex_depth(c).unwrap(), t.vertex_depth(v).unwrap() + 1);
            }
        }
        let a = adjacency(&t);
        prop_assert_eq!(a.sum() as usize, 2 * t.edge_count());
    }

    #[test]
    fn basis_is_orthonormal((k, depth) in small_tree()) {
        let t = TreeGraph::new(k, depth).unwrap();
        let b = SphericalBasis::build(&t).unwrap();
        let f = b.full_basis();
        let n = t.vertex_count();
        prop_assert_eq!(f.ncols(), n);
        prop_assert!((f.transpose() * &f - spectree::DMatrix::<f64>::identity(n, n)).norm() < 1e-10);
    }

    #[test]
    fn kernel_is_symmetric(l in disk_point(0.3), k in 1usize..4) {
        let depth = [0, 7, 4, 3][k];
        let t = TreeGraph::new(k, depth).unwrap();
        let b = SphericalBasis::build(&t).unwrap();
        let sp = SpectralPoint::from_lambda(k, l, Threshold::Minus, 0.3).unwrap();
        let v: Vec<usize> = (0..t.vertex_count()).collect();
        let (k0, _) = free_kernel(&b, &v, &sp, false).unwrap();
        prop_assert!((&k0 - k0.transpose()).norm() <= 1e-13 * k0.norm());
    }

    #[test]
    fn bs_linear_in_potential(l in disk_point(0.25), s in 0.1f64..3.0, re in -0.5f64..0.5, im in -0.5f64..0.5) {
        // M(0) = 1 cancels -d₀, so M̃ = s·M̃₀ and the sandwich scales by s
        let delta = minimal_delta(2);
        let one = C64::new(1.0, 0.0);
        let base = PotentialSpec::table([(0, one), (1, C64::new(re, im)), (3, C64::new(0.1, 0.0))], delta);
        let scaled = PotentialSpec::table([(0, one), (1, C64::new(re, im) * s), (3, C64::new(0.1 * s, 0.0))], delta);
        let a = BirmanSchwinger::new(2, &base, Threshold::Minus).unwrap();
        let b = BirmanSchwinger::new(2, &scaled, Threshold::Minus).unwrap();
        prop_assume!(a.support() == b.support() && !a.support().contains(&0));
        let (ta, _) = a.dense(l, false).unwrap();
        let (tb, _) = b.dense(l, false).unwrap();
        prop_assert!((ta * C64::new(s, 0.0) - tb).norm() < 1e-12);
    }

    #[test]
    fn radial_blocks_match_dense(l in disk_point(0.3), re in -0.6f64..0.6, im in -0.6f64..0.6, plus in any::<bool>()) {
        let th = if plus { Threshold::Plus } else { Threshold::Minus };
        let spec = PotentialSpec::radial_exp(C64::new(re, im), minimal_delta(2));
        let bs = BirmanSchwinger::new(2, &spec, th).unwrap();
        let (blocks, _) = bs.blocks(l, false).unwrap();
        let (dense, _) = bs.dense(l, false).unwrap();
        let mut e1 = blocks.eigenvalues();
        let mut e2 = spectree::linalg::eigenvalues(&dense);
        prop_assert_eq!(e1.len(), e2.len());
        let key = |a: &C64, b: &C64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        e1.sort_by(key);
        e2.sort_by(key);
        for (a, b) in e1.iter().zip(&e2) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn index_is_additive(a in disk_point(0.08), b in disk_point(0.08), c in (0.12f64..0.18, 0.0..std::f64::consts::TAU)) {
        // zeros a, b inside radius 0.1 and one more in the annulus
        let zc = C64::from_polar(c.0, c.1);
        let fam = FnFamily(move |l: C64| {
            let mut f = CMatrix::identity(3, 3);
            let mut d = CMatrix::zeros(3, 3);
            f[(0, 0)] = (l - a) * (l - zc);
            d[(0, 0)] = 2.0 * l - a - zc;
            f[(2, 2)] = l - b;
            d[(2, 2)] = C64::new(1.0, 0.0);
            (f, Some(d))
        });
        prop_assume!((a - b).norm() > 1e-3);
        let o = IndexOptions::default();
        let inner = contour_index(&fam, &ContourSpec::circle(0.1).unwrap(), &o).unwrap();
        let outer = contour_index(&fam, &ContourSpec::circle(0.2).unwrap(), &o).unwrap();
        prop_assert_eq!(inner.rounded, 2);
        prop_assert_eq!(outer.rounded, 3);
        let w = determinant_winding(&fam, &ContourSpec::circle(0.2).unwrap(), &o).unwrap();
        prop_assert!((w - 3.0).abs() < 1e-8);
    }

    #[test]
    fn potential_json_round_trip(re in -5.0f64..5.0, im in -5.0f64..5.0, delta in 0.1f64..10.0, radial in any::<bool>()) {
        let amp = C64::new(re, im);
        let spec = if radial {
            PotentialSpec::radial_exp(amp, delta)
        } else {
            PotentialSpec::table([(0, amp), (3, amp * 0.5)], delta)
        };
        let back = PotentialSpec::from_json(&spec.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn rank_one_determinant_winding(u in prop::collection::vec(-1.0f64..1.0, 4), v in prop::collection::vec(-1.0f64..1.0, 4)) {
        let uv = CMatrix::from_fn(4, 4, |i, j| C64::new(u[i] * v[j], 0.0));
        let s: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assume!(s.abs() > 0.05);
        // det(I + λ uvᵀ) = 1 + λ s vanishes at λ = -1/s
        let zero = -1.0 / s;
        prop_assume!((zero.abs() - 1.0).abs() > 0.05);
        let fam = FnFamily(move |l: C64| (identity_plus(&(&uv * l)), Some(uv.clone())));
        let c = ContourSpec::circle(1.0).unwrap();
        let rep = contour_index(&fam, &c, &IndexOptions::default()).unwrap();
        let expected = i64::from(zero.abs() < 1.0);
        prop_assert_eq!(rep.rounded, expected);
        let w = determinant_winding(&fam, &c, &IndexOptions::default()).unwrap();
        prop_assert!((w - expected as f64).abs() < 1e-6);
    }
}
