mod common;

use common::{close, instance, sizes, torus, torus_form};
use proptest::prelude::*;
use rand::Rng;
use twisted_hj::cover::CoverWindow;
use twisted_hj::forms::{Cocycle, VertexPath};
use twisted_hj::space::GraphSpace;
use twisted_hj::testing::random_field;
use twisted_hj::Error;

/// All shifts in `{-r..=r}^rank`.
fn shifts(rank: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..rank {
        out = out
            .into_iter()
            .flat_map(|s| (-r..=r).map(move |a| [s.clone(), vec![a]].concat()))
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn primitive_is_exact_upstairs((n, extra, seed) in sizes(), beta in 0.2..3.0f64) {
        let (s, mut rng) = instance(n, extra, seed);
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let cover = CoverWindow::build(&s, &w, 1, beta).unwrap();
        prop_assert!(cover.exactness_defect(&w) <= 1e-12);
        for idx in 0..cover.lifted_vertex_count() {
            prop_assert!(close(cover.weighted_measure(idx),
                (2.0 * beta * cover.phi(idx)).exp() * s.measure()[cover.project(idx)], 1e-14));
        }
    }

    #[test]
    fn deck_maps_are_isometries_translating_the_primitive((n, extra, seed) in sizes()) {
        let (s, mut rng) = instance(n, extra, seed);
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let cover = CoverWindow::build(&s, &w, 1, 1.0).unwrap();
        let k = cover.rank();
        for shift in shifts(k, 1) {
            let expected: f64 = shift.iter().zip(cover.periods().iter()).map(|(&a, p)| a as f64 * p).sum();
            for idx in 0..cover.lifted_vertex_count() {
                let Some(image) = cover.deck(idx, &shift) else { continue };
                prop_assert_eq!(cover.project(image), cover.project(idx));
                prop_assert_eq!(cover.lifted_measure(image), cover.lifted_measure(idx));
                prop_assert!(close(cover.phi(image), cover.phi(idx) + expected, 1e-13));
                for nb in cover.neighbors(idx) {
                    if let Some(moved) = cover.deck(nb.vertex, &shift) {
                        prop_assert!(cover
                            .neighbors(image)
                            .iter()
                            .any(|m| m.vertex == moved && m.base_edge == nb.base_edge && m.sign == nb.sign));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_sheet_translates_tile_the_window((n, extra, seed) in sizes()) {
        let (s, mut rng) = instance(n, extra, seed);
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let cover = CoverWindow::build(&s, &w, 1, 1.0).unwrap();
        let mut hits = vec![0; cover.lifted_vertex_count()];
        for &d in &cover.fundamental_domain() {
            for shift in shifts(cover.rank(), 1) {
                if let Some(img) = cover.deck(d, &shift) {
                    hits[img] += 1;
                    prop_assert_eq!(cover.translate_of(img), shift.clone());
                }
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
        // Distinct lifts of a base vertex differ by a nonzero deck shift.
        for x in 0..n {
            let fiber: Vec<usize> = (0..cover.lifted_vertex_count()).filter(|&i| cover.project(i) == x).collect();
            for (i, &a) in fiber.iter().enumerate() {
                for &b in &fiber[i + 1..] {
                    prop_assert_ne!(cover.translate_of(a), cover.translate_of(b));
                }
            }
        }
    }

    #[test]
    fn sheets_are_copies_of_the_base((n, extra, seed) in sizes()) {
        let (s, mut rng) = instance(n, extra, seed);
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let cover = CoverWindow::build(&s, &w, 2, 1.0).unwrap();
        for &idx in &cover.fundamental_domain() {
            let x = cover.project(idx);
            let mut projected: Vec<usize> = cover.neighbors(idx).iter().map(|nb| cover.project(nb.vertex)).collect();
            let mut base: Vec<usize> = s.neighbors(x).iter().map(|nb| nb.vertex).collect();
            projected.sort_unstable();
            base.sort_unstable();
            prop_assert_eq!(projected, base);
        }
    }

    #[test]
    fn lifted_paths_integrate_the_form((n, extra, seed) in sizes(), steps in 0usize..12) {
        let (s, mut rng) = instance(n, extra, seed);
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let cover = CoverWindow::build(&s, &w, steps.max(1), 1.0).unwrap();
        let zero = vec![0; cover.rank()];
        let p = VertexPath::random(&s, rng.random_range(0..n), steps, &mut rng);
        let lift = cover.lift_path(&s, &p, &zero).unwrap();
        prop_assert_eq!(lift.iter().map(|&i| cover.project(i)).collect::<Vec<_>>(), p.vertices().to_vec());
        let diff = cover.phi(*lift.last().unwrap()) - cover.phi(lift[0]);
        prop_assert!(close(diff, w.integrate(&s, &p), 1e-12));
        // Lifting a concatenation continues from the end sheet of the first lift.
        let q = VertexPath::random(&s, p.end(), steps, &mut rng);
        let big = CoverWindow::build(&s, &w, 2 * steps.max(1), 1.0).unwrap();
        let lp = big.lift_path(&s, &p, &zero).unwrap();
        let lpq = big.lift_path(&s, &p.concat(&q).unwrap(), &zero).unwrap();
        let sheet = big.translate_of(*lp.last().unwrap());
        let lq = big.lift_path(&s, &q, &sheet).unwrap();
        prop_assert_eq!(&lpq[..lp.len()], &lp[..]);
        prop_assert_eq!(&lpq[lp.len() - 1..], &lq[..]);
    }

    #[test]
    fn exact_forms_have_a_trivial_cover((n, extra, seed) in sizes(), steps in 0usize..10) {
        let (s, mut rng) = instance(n, extra, seed);
        let f = random_field(n, -1.0, 1.0, &mut rng);
        let df = Cocycle::exact(&s, &f).unwrap();
        let cover = CoverWindow::build(&s, &df, 3, 1.0).unwrap();
        prop_assert_eq!(cover.rank(), 0);
        prop_assert_eq!(cover.lifted_vertex_count(), n);
        let p = VertexPath::random(&s, rng.random_range(0..n), steps, &mut rng);
        let lift = cover.lift_path(&s, &p, &[]).unwrap();
        prop_assert!(close(cover.phi(*lift.last().unwrap()) - cover.phi(lift[0]), df.integrate(&s, &p), 1e-12));
    }
}

#[test]
fn cycle_window_unrolls_the_circle() {
    let n = 8;
    let c = 1.5;
    let s = GraphSpace::cycle(n, 1.0).unwrap();
    let w = Cocycle::constant(&s, c);
    let cover = CoverWindow::build(&s, &w, 2, 1.0).unwrap();
    assert_eq!(cover.rank(), 1);
    assert_eq!(cover.lifted_vertex_count(), 5 * n);
    // A path graph: two endpoints of degree one, every other vertex of degree two.
    let degrees: Vec<usize> = (0..5 * n).map(|i| cover.neighbors(i).len()).collect();
    assert_eq!(degrees.iter().filter(|&&d| d == 1).count(), 2);
    assert_eq!(degrees.iter().filter(|&&d| d == 2).count(), 5 * n - 2);
    assert!((cover.periods()[0].abs() - c).abs() < 1e-12);
    let lp = VertexPath::new(&s, (0..=n).map(|i| i % n).collect()).unwrap();
    let lift = cover.lift_path(&s, &lp, &[0]).unwrap();
    let end = *lift.last().unwrap();
    assert_eq!(cover.project(end), 0);
    assert_eq!(cover.translate_of(end).len(), 1);
    assert_eq!(cover.translate_of(end)[0].abs(), 1);
    assert!((cover.phi(end) - cover.phi(lift[0]) - c).abs() < 1e-12);
    let still = VertexPath::new(&s, vec![3, 3, 3]).unwrap();
    let lift = cover.lift_path(&s, &still, &[0]).unwrap();
    assert!(lift.iter().all(|&i| i == lift[0]));
}

#[test]
fn walking_off_the_window_is_an_error() {
    let s = GraphSpace::cycle(4, 1.0).unwrap();
    let w = Cocycle::constant(&s, 1.0);
    let cover = CoverWindow::build(&s, &w, 1, 1.0).unwrap();
    let long = VertexPath::new(&s, (0..=12).map(|i| i % 4).collect()).unwrap();
    assert_eq!(cover.lift_path(&s, &long, &[0]), Err(Error::WindowExceeded { h_max: 1 }));
    assert!(cover.check_reach(&s, 4).is_ok());
    assert_eq!(cover.check_reach(&s, 12), Err(Error::WindowExceeded { h_max: 1 }));
}

#[test]
fn torus_cover_has_rank_two() {
    let k = 4;
    let (s, faces) = torus(k);
    let w = torus_form(&s, k, 0.25, 0.5).with_faces(&s, faces).unwrap();
    let cover = CoverWindow::build(&s, &w, 2, 1.0).unwrap();
    assert_eq!(cover.rank(), 2);
    assert_eq!(cover.lifted_vertex_count(), 25 * k * k);
    let mut periods: Vec<f64> = cover.periods().iter().map(|p| p.abs()).collect();
    periods.sort_by(f64::total_cmp);
    assert!((periods[0] - 1.0).abs() < 1e-12 && (periods[1] - 2.0).abs() < 1e-12);
    assert!(cover.exactness_defect(&w) < 1e-12);
}
