mod common;

use common::*;
use kmsforge::cone::{DEFAULT_DELTA, DEFAULT_THETA};
use kmsforge::diagram::{simplex_seed, DSequence, LevelBlock, LeveledDiagram};
use kmsforge::glue::{build_glued, IntervalSpec};
use kmsforge::spectral::{phi, transfer_matrix, triviality_report};
use kmsforge::uhf::extend::T_TOL;
use kmsforge::uhf::{
    embed_into_uhf, epsilon_schedule, epsilon_schedule_from_logs, extend_potential, intertwine_s,
    intertwine_t, realize_on_uhf, realized_report, roundtrip_steps, BetaChoice, Embedding,
    ExtendedDiagram, MatrixSystem, UhfSpec, DEFAULT_WINDOW_CAP,
};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;
use rand::RngExt;

fn twos() -> UhfSpec {
    UhfSpec {
        d: DSequence::repeat(vec![2]),
    }
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

#[test]
fn single_path_uses_one_factor_per_level() {
    let (e, cert) = embed_into_uhf(
        &LeveledDiagram::single_path(0.0),
        &twos(),
        8,
        DEFAULT_WINDOW_CAP,
    )
    .unwrap();
    cert.verify().unwrap();
    for (j, l) in cert.levels.iter().enumerate() {
        let w = &l.window;
        assert_eq!((w.start, w.end), (j, j + 1));
        assert_eq!(
            (w.s.clone(), w.r.clone()),
            (BigUint::from(2u32), BigUint::from(0u32))
        );
        assert_eq!(l.uhf_count, BigUint::from(2u32).pow(j as u32 + 1));
    }
    assert_eq!(e.extra_counts(1).unwrap(), vec![vec![BigUint::from(1u32)]]);
}

#[test]
fn two_vertex_level_takes_the_smallest_sufficient_window() {
    let d = LeveledDiagram::stationary(
        LevelBlock::all_single_unit(1, 2),
        LevelBlock::all_single_unit(2, 2),
    )
    .unwrap();
    let (_, cert) = embed_into_uhf(&d, &twos(), 4, DEFAULT_WINDOW_CAP).unwrap();
    let w = &cert.levels[0].window;
    // 2^2 = 2·2 + 0 is the first product whose quotient reaches 2·(max entry 1).
    assert_eq!(
        (w.end, w.s.to_u64().unwrap(), w.r.to_u64().unwrap()),
        (2, 2, 0)
    );
    assert_eq!(w.product, &w.s * BigUint::from(2u32) + &w.r);
}

/// Windows by plain integer search: extend until `⌊Π d / #Br_j⌋ >= 2·max entry`.
fn oracle_windows(
    d: &LeveledDiagram,
    seq: &DSequence,
    depth: usize,
) -> Vec<(usize, BigUint, BigUint)> {
    let mut out = Vec::new();
    let mut end = 0;
    for j in 1..=depth {
        let b = d.block(j).unwrap();
        let max = b.counts().into_iter().max().unwrap();
        let n = BigUint::from(b.cols());
        let mut p = BigUint::one();
        loop {
            end += 1;
            p *= seq.get(end).unwrap();
            if &p / &n >= &max * 2u32 {
                break;
            }
        }
        out.push((end, &p / &n, &p % &n));
    }
    out
}

#[test]
fn certificates_hold_on_random_diagrams() {
    let mut r = rng(41);
    for case in 0..12 {
        let d = random_diagram(&mut r, 5, 3, (-1.0, 1.0), 3, u64::MAX);
        let seq = DSequence::repeat(vec![2 + case % 4, 3]);
        let (e, cert) =
            embed_into_uhf(&d, &UhfSpec { d: seq.clone() }, 5, DEFAULT_WINDOW_CAP).unwrap();
        cert.verify().unwrap();
        for (l, (end, s, rem)) in cert.levels.iter().zip(oracle_windows(&d, &seq, 5)) {
            assert_eq!(
                (l.window.end, l.window.s.clone(), l.window.r.clone()),
                (end, s, rem)
            );
            let j = l.window.level;
            let extra = e.extra_counts(j).unwrap();
            let m = DMatrix::from_fn(extra.len(), extra[0].len(), |a, b| {
                extra[a][b].to_f64().unwrap()
            });
            assert!(oracle_phi(&m) >= 0.25 - 1e-12);
            // Rows of Br' are constant, so φ(Br') = 1.
            let full = transfer_matrix(e.diagram(), j, 0.0).unwrap().matrix;
            assert!((oracle_phi(&full) - 1.0).abs() < 1e-12);
            assert_eq!(
                l.path_count,
                oracle_path_counts(e.diagram(), j)
                    .into_iter()
                    .sum::<BigUint>()
            );
        }
    }
}

#[test]
fn window_cap_is_reported() {
    let d = LeveledDiagram::stationary(
        LevelBlock::from_counts(1, 1, &[1000], 0.0),
        LevelBlock::from_counts(1, 1, &[1000], 0.0),
    )
    .unwrap();
    let e = Embedding::new(&d, DSequence::repeat(vec![2]), 4).unwrap();
    assert!(e.certificate(1).is_err());
}

#[test]
fn epsilon_for_constant_two() {
    let blk = LevelBlock::from_counts(1, 1, &[2], 0.0);
    let d = LeveledDiagram::stationary(blk.clone(), blk).unwrap();
    let s = epsilon_schedule(&d, BetaChoice::Fixed(0.8), 1, 12).unwrap();
    for k in 2..=12 {
        assert!(
            rel_close(s.eps(k).unwrap(), 3f64.powi(-(k as i32 - 1)), 1e-12),
            "k = {k}"
        );
    }
    let e1 = s.eps(1).unwrap();
    assert!(e1 < 1.0 && e1 > 1.0 - 1e-15);
}

/// `2^{-k} (L_k Π_{j<k}(‖A^(j)‖ + 1))^{-1}` with `L_k = √#Br_k max_w 1/ρ_k(w)`;
/// the schedule takes the running minimum of these.
fn oracle_eps(mats: &[DMatrix<f64>], k: usize) -> f64 {
    let mut row = mats[0].row(0).transpose();
    for m in &mats[1..k] {
        row = m.transpose() * row;
    }
    let l = (row.len() as f64).sqrt() / row.iter().cloned().fold(f64::INFINITY, f64::min);
    let prod: f64 = mats[..k - 1].iter().map(|m| op_norm(m) + 1.0).product();
    (2f64.powi(-(k as i32)) / (l * prod)).min(1.0)
}

#[test]
fn epsilon_schedule_matches_direct_formula() {
    let d = random_positive_stationary(&mut rng(7), 3, 4, 0.8);
    for beta in [0.3, 1.7] {
        let s = epsilon_schedule(&d, BetaChoice::Fixed(beta), 1, 8).unwrap();
        let mats: Vec<DMatrix<f64>> = (1..=8).map(|j| oracle_transfer(&d, j, beta)).collect();
        for k in 1..=8 {
            let rhs = oracle_eps(&mats, k);
            let want = (1..=k)
                .map(|i| oracle_eps(&mats, i))
                .fold(f64::INFINITY, f64::min);
            assert!(
                rel_close(s.eps(k).unwrap(), want, 1e-10),
                "β = {beta}, k = {k}"
            );
            assert!(s.eps(k).unwrap() <= rhs * (1.0 + 1e-12));
            if k > 1 {
                assert!(
                    s.eps(k).unwrap() <= s.eps(k - 1).unwrap(),
                    "β = {beta}, k = {k}: {:?}",
                    (1..=8).map(|i| s.eps(i).unwrap()).collect::<Vec<_>>()
                );
            }
        }
    }
    // The range schedule sits below the fixed one at both ends of [1/k, k], with the safety factor.
    let range = epsilon_schedule(&d, BetaChoice::Range, 1, 6).unwrap();
    for k in 1..=6 {
        for beta in [1.0 / k as f64, k as f64] {
            let fixed = epsilon_schedule(&d, BetaChoice::Fixed(beta), 1, k).unwrap();
            assert!(range.ln_eps(k).unwrap() <= fixed.ln_eps(k).unwrap() + 0.5f64.ln() + 1e-12);
        }
    }
    assert!(epsilon_schedule(&d, BetaChoice::Fixed(1.0), 0, 4).is_err());
    assert!(epsilon_schedule(&d, BetaChoice::Explicit, 1, 4).is_err());
}

#[test]
fn trivial_potential_matches_closed_form() {
    let d = LeveledDiagram::single_path(0.0);
    let emb = Embedding::new(&d, DSequence::repeat(vec![2]), 64).unwrap();
    let l = extend_potential(&d, &emb, 1).unwrap();
    // ε_1 = 2^{-1}·(safety 1/2) = 1/4 against one extra arrow at β = 1 gives
    // t ≥ ln 4; the second condition at β = -1 only needs t ≥ ln 2.
    assert!((l.t - 4f64.ln()).abs() <= 2.0 * T_TOL, "t_1 = {}", l.t);

    let ext = ExtendedDiagram::new(emb);
    let ts: Vec<f64> = (1..=8).map(|k| ext.t(k).unwrap()).collect();
    for w in ts.windows(2) {
        assert!(w[1] >= w[0] - T_TOL, "{ts:?}");
    }
}

fn check_conditions(base: &LeveledDiagram, seq: DSequence, levels: usize) {
    let emb = Embedding::new(base, seq, DEFAULT_WINDOW_CAP).unwrap();
    let ext = ExtendedDiagram::new(emb.clone());
    for k in 1..=levels {
        let l = ext.level(k).unwrap();
        let extra = emb.extra_counts(k).unwrap();
        let b = DMatrix::from_fn(extra.len(), extra[0].len(), |r, c| {
            extra[r][c].to_f64().unwrap()
        });
        let kf = k as f64;
        let eps = l.ln_eps.exp();
        for i in 0..=100 {
            let pos = 1.0 / kf + (kf - 1.0 / kf) * i as f64 / 100.0;
            // A'(β) - A(β) = e^{-βt} B.
            let gap = (-pos * l.t).exp() * op_norm(&b);
            assert!(
                gap <= eps * (1.0 + 1e-9),
                "k = {k}, β = {pos}: {gap:e} > {eps:e}"
            );
            let neg = -pos;
            let a = oracle_transfer(base, k, neg);
            for r in 0..a.nrows() {
                for c in 0..a.ncols() {
                    let ratio = a[(r, c)] / ((-neg * l.t).exp() * b[(r, c)]);
                    assert!(
                        ratio <= 0.5 * (1.0 + 1e-9),
                        "k = {k}, β = {neg}: ratio {ratio}"
                    );
                }
            }
            let ext_t = oracle_transfer(ext.diagram(), k, neg);
            assert!(
                oracle_phi(&ext_t) >= 1.0 / 9.0 - 1e-12,
                "k = {k}, β = {neg}"
            );
        }
    }
}

#[test]
fn extended_levels_satisfy_both_conditions_on_a_grid() {
    check_conditions(
        &LeveledDiagram::single_path(0.0),
        DSequence::repeat(vec![2]),
        5,
    );
    check_conditions(
        &simplex_seed(2, 4).unwrap(),
        DSequence::repeat(vec![3, 2]),
        4,
    );
    let d = random_diagram(&mut rng(9), 4, 3, (-0.5, 0.5), 2, u64::MAX);
    check_conditions(&d, DSequence::repeat(vec![5]), 4);
}

#[test]
fn negative_temperatures_grow_the_triviality_sums() {
    let base = simplex_seed(2, 4).unwrap();
    let ext = ExtendedDiagram::new(
        Embedding::new(&base, DSequence::repeat(vec![2]), DEFAULT_WINDOW_CAP).unwrap(),
    );
    let depth = 6;
    // Levels `k` with `1/k <= |β| <= k` all satisfy φ >= 1/9 at β = -1.
    let r = triviality_report(ext.diagram(), -1.0, depth).unwrap();
    assert!(r.flagged.is_empty());
    for (j, t) in r.terms.iter().enumerate().skip(1) {
        assert!(t.unwrap() >= 1.0 / 3.0 - 1e-9, "level {}: {t:?}", j + 1);
    }
    for j in 1..depth {
        assert!(r.partial_sums[j] - r.partial_sums[0] >= j as f64 / 3.0 - 1e-9);
    }
}

fn random_system(seed: u64, depth: usize) -> MatrixSystem {
    let mut r = rng(seed);
    let mut sizes = vec![1usize];
    for _ in 0..depth {
        sizes.push(r.random_range(1..=3));
    }
    MatrixSystem::new(
        (0..depth)
            .map(|j| DMatrix::from_fn(sizes[j], sizes[j + 1], |_, _| r.random_range(0.5..2.0)))
            .collect(),
    )
    .unwrap()
}

#[test]
fn identical_systems_intertwine_to_the_identity() {
    let a = random_system(1, 24);
    let sched = epsilon_schedule_from_logs(&a.log_matrices(), 1).unwrap();
    let top = vec![1.0; a.get(24).ncols()];
    let psi = a.family(24, &top);
    let tol = psi[0][0] * 1e-4;
    for res in [
        intertwine_t(&psi, &a, &a, &sched, tol).unwrap(),
        intertwine_s(&psi, &a, &a, &sched, tol).unwrap(),
    ] {
        assert!(!res.levels.is_empty());
        for (j, level) in res.levels.iter().enumerate() {
            for (x, y) in level.iter().zip(&psi[j]) {
                assert!(rel_close(*x, *y, 1e-12));
            }
            assert!(res.bounds[j] <= tol && res.bounds[j] > 0.0);
        }
    }
    let zero: Vec<Vec<f64>> = psi.iter().map(|l| vec![0.0; l.len()]).collect();
    let res = intertwine_s(&zero, &a, &a, &sched, 1e-3).unwrap();
    assert!(res.levels.iter().flatten().all(|x| *x == 0.0));
}

#[test]
fn perturbed_systems_obey_the_cauchy_and_roundtrip_bounds() {
    for seed in 0..6 {
        let a = random_system(100 + seed, 22);
        let n = 1 + seed as usize % 2;
        let sched = epsilon_schedule_from_logs(&a.log_matrices(), n).unwrap();
        let b = MatrixSystem::new(
            (1..=22)
                .map(|j| {
                    let m = a.get(j);
                    let scale = if j < n {
                        0.5
                    } else {
                        0.9 * sched.eps(j).unwrap()
                    };
                    let e = DMatrix::from_element(
                        m.nrows(),
                        m.ncols(),
                        scale / ((m.nrows() * m.ncols()) as f64).sqrt(),
                    );
                    m + e
                })
                .collect(),
        )
        .unwrap();
        let psi = a.family(22, &vec![1.0; a.get(22).ncols()]);
        let tol = psi[0][0] * 1e-3;
        let t = intertwine_t(&psi, &a, &b, &sched, tol).unwrap();
        assert!(!t.steps.is_empty());
        for s in &t.steps {
            assert!(s.diff <= s.bound * (1.0 + 1e-9), "seed {seed}: {s:?}");
        }
        for s in roundtrip_steps(&psi, &a, &b, n) {
            assert!(s.diff <= s.bound * (1.0 + 1e-9), "seed {seed}: {s:?}");
        }
        let phi_b = b.family(22, &vec![1.0; b.get(22).ncols()]);
        let s = intertwine_s(&phi_b, &a, &b, &sched, phi_b[0][0] * 1e-3).unwrap();
        for st in &s.steps {
            assert!(st.diff <= st.bound * (1.0 + 1e-9));
        }
        // Swapping the roles breaks domination.
        assert!(intertwine_t(&psi, &b, &a, &sched, tol).is_err());
    }
}

#[test]
fn distant_systems_are_rejected() {
    let a = random_system(5, 12);
    let sched = epsilon_schedule_from_logs(&a.log_matrices(), 1).unwrap();
    let b = MatrixSystem::new(a.mats.iter().map(|m| m * 2.0).collect()).unwrap();
    let psi = a.family(12, &vec![1.0; a.get(12).ncols()]);
    assert!(intertwine_t(&psi, &a, &b, &sched, 1.0).is_err());
    assert!(MatrixSystem::new(vec![DMatrix::from_element(2, 2, 1.0)]).is_err());
    assert!(MatrixSystem::new(vec![DMatrix::from_element(1, 2, -1.0)]).is_err());
}

#[test]
fn real_line_realizes_a_single_ray() {
    let g = build_glued(
        vec![IntervalSpec::real_line()],
        vec![LeveledDiagram::single_path(0.0)],
        30,
    )
    .unwrap();
    let r = realize_on_uhf(&g, &twos(), DEFAULT_WINDOW_CAP).unwrap();
    for j in 1..=8 {
        let (count, want) = r.path_count_check(j).unwrap();
        assert_eq!(count, want);
    }
    for beta in [-2.0, -0.5, 0.5, 2.0] {
        let rep = realized_report(&r, beta, 30, DEFAULT_THETA, DEFAULT_DELTA).unwrap();
        assert_eq!(rep.extreme_rays, 1, "β = {beta}");
        assert!(rep.stable);
    }
    assert!(realized_report(&r, 0.0, 30, DEFAULT_THETA, DEFAULT_DELTA).is_err());
}

#[test]
fn realized_counts_follow_the_intervals() {
    let g = build_glued(
        vec![IntervalSpec::real_line(), IntervalSpec::closed(1.0, 2.0)],
        vec![
            LeveledDiagram::single_path(0.0),
            simplex_seed(2, 4).unwrap(),
        ],
        30,
    )
    .unwrap();
    let r = realize_on_uhf(
        &g,
        &UhfSpec {
            d: DSequence::repeat(vec![2, 3]),
        },
        DEFAULT_WINDOW_CAP,
    )
    .unwrap();
    let inside = realized_report(&r, 1.5, 30, DEFAULT_THETA, DEFAULT_DELTA).unwrap();
    let outside = realized_report(&r, 3.0, 30, DEFAULT_THETA, DEFAULT_DELTA).unwrap();
    assert_eq!((inside.extreme_rays, outside.extreme_rays), (3, 1));
    assert!(inside.stable && outside.stable);
    assert_eq!(inside.active_factor, "plus");
    let (count, want) = r.path_count_check(5).unwrap();
    assert_eq!(count, want);
    assert!(realize_on_uhf(
        &g,
        &UhfSpec {
            d: DSequence::Explicit(vec![2])
        },
        DEFAULT_WINDOW_CAP
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embedded_diagrams_count_uhf_products(seed in any::<u64>(), pattern in proptest::collection::vec(2u64..=5, 1..=3)) {
        let d = random_diagram(&mut rng(seed), 4, 3, (-1.0, 1.0), 3, u64::MAX);
        let seq = DSequence::repeat(pattern);
        let (e, cert) = embed_into_uhf(&d, &UhfSpec { d: seq.clone() }, 4, DEFAULT_WINDOW_CAP).unwrap();
        for l in &cert.levels {
            let want: BigUint = (1..=l.window.end).map(|i| BigUint::from(seq.get(i).unwrap())).product();
            let got: BigUint = oracle_path_counts(e.diagram(), l.window.level).into_iter().sum();
            prop_assert_eq!(got, want);
            prop_assert!(l.phi_extra >= 0.25 - 1e-12);
            let phi_extra = {
                let x = e.extra_counts(l.window.level).unwrap();
                phi(&DMatrix::from_fn(x.len(), x[0].len(), |a, b| x[a][b].to_f64().unwrap())).unwrap()
            };
            prop_assert!(rel_close(phi_extra, l.phi_extra, 1e-12));
        }
    }
}
