//! Property tests of the structural invariants.
#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use proptest::prelude::*;

use magwell::assemble2d::{assemble_general, assemble_montgomery, Bivariate, Grid2D};
use magwell::band1d::{band_minimum, band_value, default_bracket, DomainKind, Grid1D};
use magwell::eigensolve::{sparse_smallest, tridiag_smallest, SymTridiag};
use magwell::par::{par_map, seq_map};
use magwell::studies::report::{read_rows, write_rows};
use magwell::studies::{fit_exp_rate, fit_poly, fit_power, parse_inverse_range, Row, StudyKind, SweepConfig};
use magwell::wkb::{smooth_step, WellProfile};

fn coeffs() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 1..4), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn general_assembly_is_exactly_hermitian(c in coeffs(), h in 0.05..1.5f64, nx in 8usize..14, ny in 8usize..14, neumann in any::<bool>()) {
        let g = if neumann {
            Grid2D::half_strip(1.3, 2.0, nx, ny).unwrap()
        } else {
            Grid2D::dirichlet_box(1.3, 2.0, nx, ny).unwrap()
        };
        let m = assemble_general(&Bivariate::new(c), h, &g).unwrap();
        let d = m.to_dense();
        prop_assert_eq!(d.len(), g.dim());
        for i in 0..d.len() {
            for j in 0..d.len() {
                prop_assert_eq!(d[i][j], d[j][i].conj());
            }
        }
    }

    #[test]
    fn sparse_solver_matches_dense(c in coeffs(), h in 0.2..1.0f64) {
        let g = Grid2D::dirichlet_box(1.0, 1.0, 14, 12).unwrap();
        let m = assemble_general(&Bivariate::new(c), h, &g).unwrap();
        let d = m.to_dense();
        let n = d.len();
        let mut dense: Vec<f64> = DMatrix::from_fn(n, n, |i, j| d[i][j]).symmetric_eigen().eigenvalues.iter().cloned().collect();
        dense.sort_by(f64::total_cmp);
        let shift = m.gershgorin_lower() - 1.0;
        let sp = sparse_smallest(&m, 3, shift, 1e-11, 3000).unwrap();
        for (a, b) in sp.eigenvalues.iter().zip(&dense) {
            prop_assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn sturm_count_agrees_with_dense(diag in prop::collection::vec(-5.0..5.0f64, 3..30), off_seed in prop::collection::vec(-2.0..2.0f64, 29), x in -8.0..8.0f64) {
        let n = diag.len();
        let off = off_seed[..n - 1].to_vec();
        let t = SymTridiag::new(diag.clone(), off.clone()).unwrap();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            if i == j { diag[i] } else if i + 1 == j { off[i] } else if j + 1 == i { off[j] } else { 0.0 }
        });
        let mut ev: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        // Skip shifts that sit on an eigenvalue.
        prop_assume!(ev.iter().all(|e| (e - x).abs() > 1e-9));
        prop_assert_eq!(t.sturm_count(x), ev.iter().filter(|&&e| e < x).count());
        let low = tridiag_smallest(&diag, &off, 2.min(n), 1e-13).unwrap();
        for (a, b) in low.eigenvalues.iter().zip(&ev) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn power_and_poly_fits_recover_exact_data(a in 0.1..10.0f64, r in -3.0..3.0f64, c in prop::collection::vec(-5.0..5.0f64, 3)) {
        let xs: Vec<f64> = (1..=8).map(|i| 0.05 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a * x.powf(r)).collect();
        let f = fit_power(&xs, &ys).unwrap();
        prop_assert!((f.param("r").unwrap() - r).abs() < 1e-9);
        prop_assert!((f.param("A").unwrap() / a - 1.0).abs() < 1e-9);
        let ys: Vec<f64> = xs.iter().map(|x| c[0] + c[1] * x.sqrt() + c[2] * x).collect();
        let f = fit_poly(&xs, &xs, &ys, &[0.0, 0.5, 1.0]).unwrap();
        prop_assert!((f.param("c0").unwrap() - c[0]).abs() < 1e-8);
        prop_assert!((f.param("c0.5").unwrap() - c[1]).abs() < 1e-8);
        prop_assert!((f.param("c1").unwrap() - c[2]).abs() < 1e-8);
    }

    #[test]
    fn exp_rate_fit_recovers_rate(c in 0.2..3.0f64, amp in 0.01..100.0f64) {
        let hs: Vec<f64> = (6..14).map(|i| 1.0 / i as f64).collect();
        let gaps: Vec<f64> = hs.iter().map(|h| amp * (-c / h).exp()).collect();
        let f = fit_exp_rate(&hs, &gaps).unwrap();
        prop_assert!((f.param("c").unwrap() - c).abs() < 1e-9);
    }

    #[test]
    fn inverse_ranges_decrease(first in 1u32..50, step in 1u32..10, count in 0u32..20) {
        let last = first + step * count;
        let h = parse_inverse_range(&format!("{first}:{step}:{last}")).unwrap();
        prop_assert_eq!(h.len(), count as usize + 1);
        prop_assert!(h.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((1.0 / h[h.len() - 1] - last as f64).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips_through_json(inv in prop::collection::btree_set(2u32..200, 4..10), seed in any::<u64>(), eigs in 1usize..5) {
        let mut c = SweepConfig::preset(StudyKind::DoubleWell, 0);
        c.h_list = inv.iter().map(|&v| 1.0 / v as f64).collect();
        c.seed = seed;
        c.n_eigs = eigs;
        let text = serde_json::to_string(&c).unwrap();
        let back: SweepConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn rows_round_trip_through_csv(lams in prop::collection::vec(0.0..10.0f64, 1..6), h in prop::option::of(0.01..0.5f64)) {
        let rows: Vec<Row> = lams.iter().enumerate().map(|(i, &l)| Row {
            study: "band-table".into(),
            k: 1,
            h,
            n: i + 1,
            lambda: l,
            residual: 1e-12,
            nx: 101,
            ny: None,
            a: 1.0,
            b: 2.0,
        }).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        write_rows(&p, &rows).unwrap();
        prop_assert_eq!(read_rows(&p).unwrap(), rows);
    }

    #[test]
    fn smooth_step_is_monotone_in_unit_interval(x in -1.0..2.0f64, dx in 0.0..0.5f64) {
        let (a, b) = (smooth_step(x), smooth_step(x + dx));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn par_map_preserves_order(xs in prop::collection::vec(any::<i32>(), 0..200)) {
        prop_assert_eq!(par_map(&xs, |x| x.wrapping_mul(3)), seq_map(&xs, |x| x.wrapping_mul(3)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The band function stays above its minimum on the same grid.
    #[test]
    fn band_lies_above_its_minimum(k in 0u32..3, z in -2.0..3.0f64) {
        let grid = if k == 0 {
            Grid1D::new(DomainKind::HalfLineNeumann, 0.0, 14.0, 801).unwrap()
        } else {
            Grid1D::new(DomainKind::FullLine, -9.0, 9.0, 801).unwrap()
        };
        let m = band_minimum(k, &grid, default_bracket(k), 1e-12).unwrap();
        let p = band_value(k, z, &grid, 1e-12).unwrap();
        prop_assert!(p.nu >= m.nu0 - 1e-10, "ν({z}) = {} < ν₀ = {}", p.nu, m.nu0);
        prop_assert!(p.residual < 1e-8);
    }

    /// Dirichlet monotonicity: on aligned grids the smaller box gives a
    /// principal submatrix, so every low eigenvalue can only go up.
    #[test]
    fn shrinking_the_box_raises_eigenvalues(h in 0.1..0.4f64, ma in 6usize..10, extra_a in 0usize..4, mb in 8usize..14, extra_b in 0usize..4) {
        let (ds, dt) = (0.1, 0.2);
        let well = WellProfile::simple();
        let solve = |ma: usize, mb: usize| {
            let g = Grid2D::dirichlet_box(ma as f64 * ds, mb as f64 * dt, 2 * ma + 1, 2 * mb + 1).unwrap();
            let m = assemble_montgomery(1, &well, h, &g).unwrap();
            sparse_smallest(&m, 2, 0.0, 1e-10, 3000).unwrap().eigenvalues
        };
        let small = solve(ma, mb);
        let big = solve(ma + extra_a, mb + extra_b);
        for (s, b) in small.iter().zip(&big) {
            prop_assert!(*b <= *s + 1e-9, "{b} > {s}");
        }
    }
}
