//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails for any reason other than a documented,
//! independently confirmed impossibility.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectree::birman_schwinger::BsOptions;
use spectree::charval::{
    absence_scan, contour_index, determinant_winding, resonance_indicator, riesz_multiplicity,
    spectrum, FnFamily, IPlusT, IndexOptions, ScanParams,
};
use spectree::decomposition::SphericalBasis;
use spectree::linalg::{relative_frobenius, symmetric_eigenvalues};
use spectree::operators::{
    adjacency, free_operator, m_tilde, minimal_delta, perturbed_laplacian, theta, weights,
    AssumptionCheck,
};
use spectree::quadrature::{cauchy_reconstruct, circle_nodes};
use spectree::resolvent::{
    boundary_corrected_resolvent, calibrate_sine_prefactor, weight_dense,
    weighted_resolvent_kernel, SpectralPoint,
};
use spectree::{
    t_minus, BirmanSchwinger, CMatrix, ContourSpec, DMatrix, Diagonal, PotentialSpec, Threshold,
    TreeGraph, C64,
};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
    /// The failure is the documented, closed-form-confirmed one.
    documented: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            documented: false,
        }
    }
}

fn kernel_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (k, depth) in [(1usize, 8usize), (2, 8), (3, 6)] {
        let delta = minimal_delta(k).max(1.0);
        let t = TreeGraph::new(k, depth).unwrap();
        let b = SphericalBasis::build(&t).unwrap();
        let (em, _) = weights(&t, delta).unwrap();
        let e: Diagonal = em.map(|x| c(x, 0.0));
        let lo = t_minus(k);
        let zs = [
            c(lo - 0.01, 0.0),
            c(lo - 0.3, 0.0),
            c(lo - 1.5, 0.0),
            c(lo + 0.4, 0.1),
            c(lo + 1.0, -0.1),
        ];
        for z in zs {
            let t0 = Instant::now();
            let sp = SpectralPoint::from_z(k, z).unwrap();
            let analytic = weighted_resolvent_kernel(&t, &b, &e, &e, &sp).unwrap();
            let dense = weight_dense(&boundary_corrected_resolvent(&t, &sp).unwrap(), &e, &e);
            worst = worst.max(relative_frobenius(&analytic.entries, &dense));
            slowest = slowest.max(t0.elapsed().as_secs_f64());
        }
    }
    Outcome::new(
        worst <= 1e-6 && slowest <= 60.0,
        format!("max relative Frobenius error {worst:.2e} (tol 1e-6), slowest point {slowest:.2}s"),
    )
}

fn prefactor_calibration() -> Outcome {
    let us = [
        c(0.5, 0.6),
        c(-1.0, -0.3),
        c(1.5, 0.2),
        c(-0.2, 0.9),
        c(3.0, -0.5),
        c(-2.6, 0.4),
    ];
    let cal = calibrate_sine_prefactor(&us, 4, 4096).unwrap();
    Outcome::new(
        cal.derived_passes(1e-10) && cal.spread < 1e-10,
        format!(
            "fitted constant {:.12} (spread {:.1e}); derived 1 error {:.1e} [{}], printed sqrt(2/pi) error {:.1e} [{}]",
            cal.fitted,
            cal.spread,
            cal.derived_error,
            if cal.derived_passes(1e-10) { "passes" } else { "fails" },
            cal.printed_error,
            if cal.printed_passes(1e-10) { "passes" } else { "fails" },
        ),
    )
}

fn decomposition_completeness() -> Outcome {
    let t = TreeGraph::new(2, 8).unwrap();
    let b = SphericalBasis::build(&t).unwrap();
    let f = b.full_basis();
    let n = f.ncols();
    let gram = (f.transpose() * &f - DMatrix::<f64>::identity(n, n)).amax();
    let triangular = (0..=8).all(|r| b.triangular_dims(r).iter().sum::<usize>() == 1 << r);
    Outcome::new(
        n == 511 && gram <= 1e-10 && triangular,
        format!("{n} basis vectors, Gram deviation {gram:.1e}, triangular dimensions exact: {triangular}"),
    )
}

fn jacobi_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, depth) in [(1usize, 8usize), (2, 8), (3, 7)] {
        let t = TreeGraph::new(k, depth).unwrap();
        let b = SphericalBasis::build(&t).unwrap();
        for n in 0..=6 {
            worst = worst.max(b.verify_jacobi_form(&t, n));
        }
    }
    Outcome::new(
        worst <= 1e-10,
        format!("max residual {worst:.1e} over n <= 6, k = 1, 2, 3"),
    )
}

fn spectrum_confinement() -> Outcome {
    let mut escape: f64 = 0.0;
    for (k, depth) in [(1usize, 20usize), (2, 10), (3, 6)] {
        let t = TreeGraph::new(k, depth).unwrap();
        let e = symmetric_eigenvalues(&adjacency(&t));
        let edge = 2.0 * (k as f64).sqrt();
        escape = escape.max(e.iter().map(|x| x.abs() - edge).fold(0.0, f64::max));
    }
    let n = 20;
    let path = TreeGraph::new(1, n).unwrap();
    let mut got = symmetric_eigenvalues(&adjacency(&path));
    got.sort_by(f64::total_cmp);
    let mut want: Vec<f64> = (1..=n + 1)
        .map(|j| 2.0 * (j as f64 * PI / (n + 2) as f64).cos())
        .collect();
    want.sort_by(f64::total_cmp);
    let path_err = got
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let t = TreeGraph::new(2, 10).unwrap();
    let e = symmetric_eigenvalues(&adjacency(&t));
    let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = e.iter().copied().fold(f64::INFINITY, f64::min);
    let edge = 2.0 * 2f64.sqrt();
    let gap = (edge - top).max(bottom + edge);
    // the radial sector is √2 times a path on 11 sites, whose top eigenvalue
    // is 2√2 cos(π/12); no other sector comes closer to the edge
    let closed_form = edge * (1.0 - (PI / 12.0).cos());
    let extremes_ok = gap <= 0.05;
    let containment_ok = escape <= 1e-10 && path_err <= 1e-10;
    Outcome {
        pass: containment_ok && extremes_ok,
        detail: format!(
            "containment excess {escape:.1e}, path closed form error {path_err:.1e}; \
             k = 2 depth 10 extremes {gap:.4} from +-2sqrt2 (tol 0.05, unattainable: exact gap 2sqrt2(1 - cos(pi/12)) = {closed_form:.4})"
        ),
        documented: containment_ok && !extremes_ok && (gap - closed_form).abs() < 1e-10,
    }
}

fn theta_reduction() -> Outcome {
    let mut matrix_res: f64 = 0.0;
    let mut bs_res: f64 = 0.0;
    for k in [1usize, 2] {
        let delta = minimal_delta(k).max(1.0);
        let spec = PotentialSpec::radial_exp(c(0.3, 0.2), delta);
        let t = TreeGraph::new(k, 5).unwrap();
        let mt = m_tilde(&t, &spec, AssumptionCheck::Enforce).unwrap();
        let n = t.vertex_count();
        let th = CMatrix::from_diagonal(&theta(&t).map(|x| c(x, 0.0)));
        let z = c(1.3, -0.4);
        let lhs = &th * (perturbed_laplacian(&t, &mt) - CMatrix::identity(n, n) * z) * &th;
        let rhs = -free_operator(&t)
            + CMatrix::from_diagonal(&mt)
            + CMatrix::identity(n, n) * (c(2.0 * (k + 1) as f64, 0.0) - z);
        matrix_res = matrix_res.max((lhs - rhs).norm());

        let bs = BirmanSchwinger::new(k, &spec, Threshold::Plus).unwrap();
        // physical sheet only: the direct solve takes the decaying root
        for l in [c(0.04, 0.1), c(-0.07, 0.02), c(0.1, 0.05)] {
            let op = bs.operator(l).unwrap();
            let sp = bs.point(l).unwrap();
            // physical resolvent at z = t₊ - λ²√k on the support tree
            let zsp = SpectralPoint::from_z(k, sp.z).unwrap();
            let tt = bs.tree();
            let g = boundary_corrected_resolvent(tt, &zsp).unwrap();
            let par = theta(tt);
            let s = &op.support;
            let direct = CMatrix::from_fn(s.len(), s.len(), |a, b| {
                op.j[a] * op.sqrt_abs[a] * op.sqrt_abs[b] * g[(s[a], s[b])] * par[s[a]] * par[s[b]]
            });
            bs_res = bs_res.max((&op.matrix - direct).norm());
        }
    }
    Outcome::new(
        matrix_res <= 1e-10 && bs_res <= 1e-10,
        format!("matrix identity residual {matrix_res:.1e}, plus-threshold operator vs parity-conjugated direct solve {bs_res:.1e}"),
    )
}

fn holomorphy() -> Outcome {
    let spec = PotentialSpec::radial_exp(c(0.3, 0.15), minimal_delta(2));
    let mut cauchy: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    let mut split: f64 = 0.0;
    for th in [Threshold::Minus, Threshold::Plus] {
        let bs = BirmanSchwinger::new(2, &spec, th).unwrap();
        let nodes = circle_nodes(C64::default(), 0.05, 128, 0.5);
        let vals: Vec<CMatrix> = nodes
            .iter()
            .map(|&(z, _)| bs.dense(z, false).unwrap().0)
            .collect();
        let l0 = c(0.01, 0.01);
        let direct = bs.dense(l0, false).unwrap().0;
        for a in 0..direct.nrows() {
            for b in 0..direct.ncols() {
                let v: Vec<C64> = vals.iter().map(|m| m[(a, b)]).collect();
                cauchy = cauchy.max((cauchy_reconstruct(&nodes, &v, l0) - direct[(a, b)]).norm());
            }
        }
        let norms: Vec<f64> = (0..=12)
            .map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 12.0))
            .flat_map(|r| [c(r, 0.0), c(0.0, r), c(-r * 0.6, r * 0.8)])
            .map(|l| bs.dense(l, false).unwrap().0.norm())
            .collect();
        let (mx, mn) = norms
            .iter()
            .fold((0.0f64, f64::INFINITY), |(a, b), &x| (a.max(x), b.min(x)));
        ratio = ratio.max(mx / mn);
        for l in [c(1e-3, 0.0), c(0.0, 0.01), c(0.05, -0.08), c(-0.1, 0.2)] {
            split = split.max(bs.hol_split(l).unwrap().1.unwrap());
        }
    }
    Outcome::new(
        cauchy <= 1e-7 && ratio <= 2.0 && split <= 1e-8,
        format!("Cauchy reconstruction error {cauchy:.1e}, norm ratio {ratio:.3}, hol split residual {split:.1e}"),
    )
}

fn corpus() -> Vec<(usize, PotentialSpec)> {
    let d2 = minimal_delta(2);
    vec![
        (2, PotentialSpec::radial_exp(c(0.3, 0.15), d2)),
        (2, PotentialSpec::radial_exp(c(0.5, 0.0), d2)),
        (2, PotentialSpec::radial_exp(c(0.0, 0.4), d2)),
        (
            2,
            PotentialSpec::table([(0, c(0.6, 0.0)), (1, c(0.2, 0.0)), (4, c(0.05, 0.0))], d2),
        ),
        (
            2,
            PotentialSpec::table([(0, c(0.2, 0.3)), (2, c(0.0, 0.1))], d2),
        ),
        (1, PotentialSpec::radial_exp(c(0.0, 0.2), 1.0)),
        (1, PotentialSpec::radial_exp(c(0.8, 0.0), 2.0)),
        (1, PotentialSpec::radial_exp(c(0.0, 1.0), 2.0)),
        (
            1,
            PotentialSpec::table([(0, c(0.6, 0.3)), (1, c(0.1, 0.0))], 2.0),
        ),
    ]
}

fn absence() -> Outcome {
    let mut runs = 0;
    let mut bad = Vec::new();
    let mut min_sv = f64::INFINITY;
    let mut max_res: f64 = 0.0;
    let ladder = [0.02, 0.04, 0.08, 0.16];
    for (i, (k, spec)) in corpus().into_iter().enumerate() {
        for th in [Threshold::Minus, Threshold::Plus] {
            let bs = BirmanSchwinger::new(k, &spec, th).unwrap();
            // circles must sit inside the working disk min(δ/8, 0.3)
            let eps0 = bs.disk_radius();
            let mut p = ScanParams::new(0.02, 0.2f64.min(0.99 * eps0), 32);
            p.ladder = Some(ladder.iter().copied().filter(|&r| r < eps0).collect());
            let rep = absence_scan(&bs, &p).unwrap();
            runs += 1;
            min_sv = min_sv.min(rep.min_sv);
            for e in &rep.ladder {
                if let Ok(r) = &e.report {
                    max_res = max_res.max(r.residual);
                }
            }
            if !rep.all_zero(0.05) || rep.min_sv <= 1e-4 {
                bad.push(format!("#{i} {th}"));
            }
        }
    }
    // negative control: strong potential, eigenvalues far from the threshold
    let strong = PotentialSpec::radial_exp(c(50.0, 0.0), minimal_delta(2));
    let bs = BirmanSchwinger::new(2, &strong, Threshold::Minus).unwrap();
    let rep = absence_scan(&bs, &ScanParams::new(0.02, 0.2, 16)).unwrap();
    let t = TreeGraph::new(2, 6).unwrap();
    let outside = spectrum(&t, &strong, AssumptionCheck::Enforce)
        .unwrap()
        .iter()
        .filter(|p| !p.in_band)
        .count();
    let control = rep.all_zero(0.05) && outside > 0;
    Outcome::new(
        bad.is_empty() && runs >= 12 && control,
        format!(
            "{runs} scans ({} potentials x 2 thresholds), failures {bad:?}, min grid sv {min_sv:.3e}, max residual {max_res:.1e}; control: indices 0, {outside} eigenvalues outside the band",
            runs / 2
        ),
    )
}

fn embedded_and_planted() -> Outcome {
    let d2 = minimal_delta(2);
    let real = [
        (2, PotentialSpec::radial_exp(c(0.5, 0.0), d2)),
        (
            2,
            PotentialSpec::table([(0, c(0.6, 0.0)), (1, c(0.2, 0.0)), (4, c(0.05, 0.0))], d2),
        ),
        (1, PotentialSpec::radial_exp(c(0.8, 0.0), 2.0)),
        (1, PotentialSpec::radial_exp(c(-0.4, 0.0), 2.0)),
    ];
    let mut min_dist = f64::INFINITY;
    for (k, spec) in &real {
        for th in [Threshold::Minus, Threshold::Plus] {
            let bs = BirmanSchwinger::new(*k, spec, th).unwrap();
            let top = 0.1f64.min(0.999 * bs.disk_radius());
            for i in 1..=200 {
                let l = c(top * i as f64 / 200.0, 0.0);
                min_dist = min_dist.min(resonance_indicator(&bs, l).unwrap().dist_to_minus_one);
            }
        }
    }

    // planted: M(0) = -5 on k = 2; M(v) = -6 on S_1 for k = 3 (doubly degenerate)
    let mut planted = Vec::new();
    let mut planted_ok = true;
    for (k, spec) in [
        (2usize, PotentialSpec::table([(0, c(-5.0, 0.0))], d2)),
        (
            3,
            PotentialSpec::table((1..=3).map(|v| (v, c(-6.0, 0.0))), minimal_delta(3)),
        ),
    ] {
        let t = TreeGraph::new(k, 4).unwrap();
        let pts = spectrum(&t, &spec, AssumptionCheck::Enforce).unwrap();
        let h = perturbed_laplacian(&t, &m_tilde(&t, &spec, AssumptionCheck::Enforce).unwrap());
        let bs = BirmanSchwinger::with_options(
            k,
            &spec,
            Threshold::Minus,
            BsOptions {
                disk_radius: Some(1.95),
                ..Default::default()
            },
        )
        .unwrap();
        let lo = t_minus(k);
        let mut seen: Vec<f64> = Vec::new();
        for p in pts.iter().filter(|p| !p.in_band && p.re < lo - 0.5) {
            if seen.iter().any(|s| (s - p.re).abs() < 1e-6) {
                continue;
            }
            seen.push(p.re);
            let z0 = c(p.re, 0.0);
            let riesz =
                riesz_multiplicity(&h, z0, &ContourSpec::new(z0, 0.05, 64).unwrap()).unwrap();
            // z = t₋ + λ²√k with λ on the positive imaginary axis
            let lam = c(0.0, ((lo - p.re) / (k as f64).sqrt()).sqrt());
            let idx = contour_index(
                &IPlusT(&bs),
                &ContourSpec::new(lam, 0.05, 256).unwrap(),
                &IndexOptions::default(),
            )
            .unwrap();
            planted_ok &= riesz as i64 == idx.rounded && idx.residual < 0.05;
            planted.push(format!(
                "k={k} z={:.4} riesz {riesz} index {}",
                p.re, idx.rounded
            ));
        }
        planted_ok &= !seen.is_empty();
    }
    Outcome::new(
        min_dist > 1e-3 && planted_ok,
        format!(
            "min dist to -1 on real lambda in (0, 0.1]: {min_dist:.3e}; planted: {}",
            planted.join(", ")
        ),
    )
}

fn argument_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut exact = 0;
    let mut agree = 0;
    let trials = 50;
    for i in 0..trials {
        let mult = 1 + i % 3;
        let n = 8;
        let center = c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let radius = 0.1;
        let zero = center
            + C64::from_polar(
                rng.gen_range(0.0..0.5) * radius,
                rng.gen_range(0.0..2.0 * PI),
            );
        let far = center
            + C64::from_polar(
                rng.gen_range(2.0..3.0) * radius,
                rng.gen_range(0.0..2.0 * PI),
            );
        // split the multiplicity into partial multiplicities
        let parts: Vec<u32> = match (mult, rng.gen_bool(0.5)) {
            (1, _) => vec![1],
            (2, true) => vec![2],
            (2, false) => vec![1, 1],
            (_, true) => vec![3],
            (_, false) => vec![2, 1],
        };
        let mut rand_mat = |scale: f64| {
            CMatrix::from_fn(n, n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
            })
        };
        let b = CMatrix::identity(n, n) * c(2.0, 0.0) + rand_mat(0.2);
        let cm = rand_mat(0.1);
        let mut diag: Vec<(u32, C64)> = vec![(0, C64::default()); n];
        for (slot, &p) in parts.iter().enumerate() {
            diag[slot] = (p, zero);
        }
        diag[n - 1] = (1, far);
        let fam = FnFamily(move |l: C64| {
            // A(λ) = I + (λ - center)·C stays invertible on the disk
            let a = CMatrix::identity(n, n) + &cm * (l - center);
            let (mut d, mut dd) = (CMatrix::identity(n, n), CMatrix::zeros(n, n));
            for (j, &(p, r)) in diag.iter().enumerate() {
                if p > 0 {
                    d[(j, j)] = (l - r).powu(p);
                    dd[(j, j)] = (l - r).powu(p - 1) * p as f64;
                }
            }
            let f = &a * &d * &b;
            let df = &cm * &d * &b + &a * &dd * &b;
            (f, Some(df))
        });
        let spec = ContourSpec::new(center, radius, 256).unwrap();
        let o = IndexOptions::default();
        if let Ok(rep) = contour_index(&fam, &spec, &o) {
            if rep.rounded == mult as i64 && rep.residual < 0.05 {
                exact += 1;
            }
        }
        if let Ok(w) = determinant_winding(&fam, &spec, &o) {
            if (w - mult as f64).abs() < 1e-6 {
                agree += 1;
            }
        }
    }
    Outcome::new(
        exact == trials && agree == trials,
        format!("{exact}/{trials} counted exactly, {agree}/{trials} determinant windings agree"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "kernel-oracle equivalence", kernel_oracle),
        (2, "prefactor calibration", prefactor_calibration),
        (3, "decomposition completeness", decomposition_completeness),
        (4, "Jacobi form", jacobi_form),
        (5, "spectrum confinement", spectrum_confinement),
        (6, "parity reduction", theta_reduction),
        (7, "holomorphy at zero", holomorphy),
        (8, "absence of threshold resonances", absence),
        (
            9,
            "embedded eigenvalues and planted bound states",
            embedded_and_planted,
        ),
        (10, "argument-principle self-test", argument_principle),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (n, name, run) in criteria {
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {verdict} {name}: {} [{:.1}s]",
            out.detail,
            t0.elapsed().as_secs_f64()
        );
        if out.pass {
            passed += 1;
        } else if !out.documented {
            unexpected.push(n);
        }
    }
    println!("{passed}/10 criteria pass");
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
