//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` cannot be met as stated (see the
//! decisions ledger); the run fails if any other criterion fails, or if a
//! known failure unexpectedly starts passing.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magwell::assemble2d::{assemble_general, assemble_montgomery, Bivariate, Grid2D, HermitianSparse};
use magwell::band1d::{band_derivative_fh, band_taylor, band_value, moment_c1, moment_check_lemma58, Grid1D};
use magwell::eigensolve::{sparse_smallest, tridiag_smallest};
use magwell::studies::runs::default_band_minimum;
use magwell::studies::{run_agmon, run_camel, run_domain_convergence, run_double_well, run_simple_well, Bumps};
use magwell::studies::{StudyKind, StudyReport, SweepConfig};
use magwell::wkb::{eikonal_taylor, WellProfile};

const KNOWN_FAILURES: &[usize] = &[2];

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn verdict_line(r: &StudyReport, name: &str) -> (bool, String) {
    match r.verdict(name) {
        Some(v) if v.expected == (1.0, 1.0) => (v.pass, format!("{name} {}", if v.pass { "holds" } else { "(no)" })),
        Some(v) => (
            v.pass,
            format!(
                "{name} = {:.5} in [{:.4}, {:.4}]{}",
                v.measured,
                v.expected.0,
                v.expected.1,
                if v.pass { "" } else { " (no)" }
            ),
        ),
        None => (false, format!("{name} missing")),
    }
}

fn verdicts(r: &StudyReport, names: &[&str]) -> (bool, Vec<String>) {
    let mut ok = r.failures.is_empty();
    let mut parts = Vec::new();
    for n in names {
        let (p, s) = verdict_line(r, n);
        ok &= p;
        parts.push(s);
    }
    for f in &r.failures {
        parts.push(format!("failure: {}", f.message));
    }
    (ok, parts)
}

fn preset(kind: StudyKind, k: u32, dir: &std::path::Path) -> SweepConfig {
    let mut c = SweepConfig::preset(kind, k);
    c.output_dir = dir.to_path_buf();
    c
}

fn c1_band_constants() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, target) in [(0, 0.59010), (1, 0.5698)] {
        let t = Instant::now();
        let m = default_band_minimum(k).unwrap();
        let dt = t.elapsed();
        let p = (m.nu0 - target).abs() <= 5e-4 && dt < Duration::from_secs(5);
        ok &= p;
        parts.push(format!("ν̄[{k}] = {:.6} (target {target} ± 5e-4, {:.2?})", m.nu0, dt));
    }
    outcome(ok, parts.join("; "))
}

fn c2_moment_constant() -> Outcome {
    let t = Instant::now();
    let m = default_band_minimum(0).unwrap();
    let c1 = moment_c1(&m.ground).unwrap();
    let lhs = m.nu2 / 2.0;
    let rhs = 3.0 * c1 * m.nu0.sqrt();
    let rel = (lhs - rhs).abs() / lhs;
    let dt = t.elapsed();
    let literal = (c1 - 0.873043).abs() <= 1e-3;
    let identity = rel <= 1e-3;
    outcome(
        literal && identity && dt < Duration::from_secs(10),
        format!(
            "C₁ = {c1:.6} vs 0.873043 ± 1e-3 {}; ν″/2 = {lhs:.6}, 3C₁Θ₀^(1/2) = {rhs:.6}, rel {rel:.1e} {} ({dt:.2?})",
            if literal { "ok" } else { "(no)" },
            if identity { "ok" } else { "(no)" }
        ),
    )
}

fn c3_lemma58() -> Outcome {
    let t = Instant::now();
    let m = default_band_minimum(0).unwrap();
    let r = moment_check_lemma58(&m, 1e-3, 1e-13).unwrap().as_array();
    let dt = t.elapsed();
    let worst = r.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 1e-3 && dt < Duration::from_secs(30),
        format!(
            "residuals {:.1e} {:.1e} {:.1e} {:.1e} ({dt:.2?})",
            r[0], r[1], r[2], r[3]
        ),
    )
}

fn c4_feynman_hellmann() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 1e-4;
    let mut worst: f64 = 0.0;
    for k in [0, 1] {
        let grid = Grid1D::default_for(k);
        for _ in 0..20 {
            let z: f64 = rng.random_range(-1.0..2.0);
            let fh = band_derivative_fh(&band_value(k, z, &grid, 1e-14).unwrap());
            let up = band_value(k, z + d, &grid, 1e-14).unwrap().nu;
            let dn = band_value(k, z - d, &grid, 1e-14).unwrap().nu;
            worst = worst.max((fh - (up - dn) / (2.0 * d)).abs());
        }
    }
    let dt = t.elapsed();
    outcome(
        worst <= 1e-5 && dt < Duration::from_secs(30),
        format!("max |FH − central difference| = {worst:.1e} over 40 points ({dt:.2?})"),
    )
}

fn dense_eigenvalues(m: &HermitianSparse, n: usize) -> Vec<f64> {
    let d = m.to_dense();
    let dim = d.len();
    let a = DMatrix::from_fn(dim, dim, |i, j| d[i][j]);
    let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(n);
    ev
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dirichlet second difference with `n` interior nodes and spacing `d`, times `c`.
fn laplacian_1d(n: usize, d: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![2.0 * c / (d * d); n], vec![-c / (d * d); n - 1])
}

fn c5_eigensolver_oracles() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();

    // −u″ + τ²u on [−12, 12]
    let n = 12001;
    let dx = 24.0 / (n + 1) as f64;
    let (mut diag, off) = laplacian_1d(n, dx, 1.0);
    for (i, v) in diag.iter_mut().enumerate() {
        let x = -12.0 + dx * (i + 1) as f64;
        *v += x * x;
    }
    let osc = tridiag_smallest(&diag, &off, 3, 1e-13).unwrap().eigenvalues;
    let e_osc = max_diff(&osc, &[1.0, 3.0, 5.0]);
    parts.push(format!("oscillator {:.1e}", e_osc));

    // Sparse against dense on a non-trivial potential and on the Neumann model.
    let a1 = Bivariate::new(vec![vec![0.3, 0.0, -0.5], vec![0.0, 1.0], vec![0.2]]);
    let g = Grid2D::dirichlet_box(2.0, 2.0, 34, 34).unwrap();
    let m = assemble_general(&a1, 0.7, &g).unwrap();
    let sp = sparse_smallest(&m, 6, 0.0, 1e-11, 3000).unwrap().eigenvalues;
    let e_dense1 = max_diff(&sp, &dense_eigenvalues(&m, 6));
    let g = Grid2D::half_strip(2.0, 4.0, 34, 33).unwrap();
    let m = assemble_montgomery(0, &WellProfile::simple(), 0.5, &g).unwrap();
    let sp = sparse_smallest(&m, 6, 0.0, 1e-11, 3000).unwrap().eigenvalues;
    let e_dense2 = max_diff(&sp, &dense_eigenvalues(&m, 6));
    parts.push(format!(
        "sparse vs dense {e_dense1:.1e}, {e_dense2:.1e} (dim 1024, 1024)"
    ));

    // Zero field: the spectrum is the Kronecker sum of the two 1D Laplacians.
    let (h, a, b, nx, ny) = (0.6, 1.5, 2.5, 61, 81);
    let g = Grid2D::dirichlet_box(a, b, nx, ny).unwrap();
    let (d1, o1) = laplacian_1d(nx - 2, g.ds(), h * h);
    let (d2, o2) = laplacian_1d(ny - 2, g.dt(), 1.0);
    let mu = tridiag_smallest(&d1, &o1, 6, 1e-14).unwrap().eigenvalues;
    let nu = tridiag_smallest(&d2, &o2, 6, 1e-14).unwrap().eigenvalues;
    let mut sums: Vec<f64> = mu.iter().flat_map(|x| nu.iter().map(move |y| x + y)).collect();
    sums.sort_by(f64::total_cmp);
    sums.truncate(6);
    let m = assemble_general(&Bivariate::default(), h, &g).unwrap();
    let sp = sparse_smallest(&m, 6, 0.0, 1e-11, 3000).unwrap().eigenvalues;
    let e_kron = max_diff(&sp, &sums);
    parts.push(format!("Kronecker sum {e_kron:.1e}"));

    // Constant unit field, A₁ = −t. At h = 1 the walls s = ±3 sit three
    // magnetic lengths from the orbit and lift λ₁ by ~5e-3; h = 0.5 halves that.
    let g = Grid2D::dirichlet_box(3.0, 12.0, 200, 200).unwrap();
    let m = assemble_general(&Bivariate::new(vec![vec![0.0, -1.0]]), 0.5, &g).unwrap();
    let landau = sparse_smallest(&m, 1, 0.0, 1e-10, 3000).unwrap().eigenvalues[0];
    parts.push(format!("Landau λ₁ = {landau:.6} (h = 0.5)"));

    let dt = t.elapsed();
    parts.push(format!("{dt:.2?}"));
    outcome(
        e_osc <= 1e-5
            && e_dense1 <= 1e-10
            && e_dense2 <= 1e-10
            && e_kron <= 1e-10
            && (landau - 1.0).abs() <= 1e-3
            && dt < Duration::from_secs(120),
        parts.join("; "),
    )
}

fn c6_simple_well(dir: &std::path::Path) -> Outcome {
    let t = Instant::now();
    let r = run_simple_well(&preset(StudyKind::SimpleWell, 1, dir)).unwrap();
    let (ok, mut parts) = verdicts(&r, &["lambda0", "lambda-1-1"]);
    parts.push(format!("{:.1?}", t.elapsed()));
    outcome(ok, parts.join("; "))
}

fn c7_double_well(dir: &std::path::Path) -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [0, 1] {
        let r = run_double_well(&preset(StudyKind::DoubleWell, k, &dir.join(format!("k{k}")))).unwrap();
        let rate = format!("rate-c{k}");
        let (p, s) = verdicts(&r, &[&rate, "parity"]);
        ok &= p;
        parts.extend(s);
        parts.push(
            verdict_line(&r, &format!("rate-c{k}-stretch"))
                .1
                .replace(" (no)", " (stretch, not met)"),
        );
    }
    parts.push(format!("{:.1?}", t.elapsed()));
    outcome(ok && t.elapsed() < Duration::from_secs(1800), parts.join("; "))
}

fn c8_camel_one(dir: &std::path::Path) -> Outcome {
    let t = Instant::now();
    let r = run_camel(&preset(StudyKind::Camel1Bump, 0, dir), Bumps::One).unwrap();
    let (ok, mut parts) = verdicts(&r, &["slope-c2", "lambda3"]);
    if let Some(v) = r.verdict("slope-c2-literal") {
        parts.push(format!(
            "reference −6.98 {}",
            if v.pass {
                "matched"
            } else {
                "not matched (uses u(0) for C₁)"
            }
        ));
    }
    parts.push(format!("{:.1?}", t.elapsed()));
    outcome(ok && t.elapsed() < Duration::from_secs(900), parts.join("; "))
}

fn c9_camel_two(dir: &std::path::Path) -> Outcome {
    let t = Instant::now();
    let r = run_camel(&preset(StudyKind::Camel2Bump, 0, dir), Bumps::Two).unwrap();
    let (ok, mut parts) = verdicts(&r, &["rate-C", "superpolynomial"]);
    for n in ["plateau-C", "rate-C-stretch"] {
        parts.push(verdict_line(&r, n).1.replace(" (no)", " (informational, not met)"));
    }
    parts.push(format!("{:.1?}", t.elapsed()));
    outcome(ok && t.elapsed() < Duration::from_secs(900), parts.join("; "))
}

fn c10_agmon(dir: &std::path::Path) -> Outcome {
    let mut cfg = preset(StudyKind::Agmon, 0, &dir.join("solve"));
    cfg.dump_vectors = true;
    let first = run_agmon(&cfg).unwrap();
    first.write(&cfg.output_dir, false).unwrap();
    let t = Instant::now();
    let mut cfg2 = preset(StudyKind::Agmon, 0, &dir.join("stored"));
    cfg2.agmon.as_mut().unwrap().vectors = Some(cfg.output_dir.clone());
    let r = run_agmon(&cfg2).unwrap();
    let dt = t.elapsed();
    let (ok, mut parts) = verdicts(&r, &["agmon-ratio", "agmon-symmetry", "agmon-monotone"]);
    parts.push(format!("floor 0.2 is empirical; {dt:.2?} from stored vectors"));
    outcome(ok && dt < Duration::from_secs(60), parts.join("; "))
}

fn exact_hermitian(m: &HermitianSparse) -> bool {
    let d = m.to_dense();
    (0..d.len()).all(|i| (0..d.len()).all(|j| d[i][j] == d[j][i].conj()))
}

/// `|γ^{2/(k+2)}ν_T(ζ₀ + iγ^{−1/(k+2)}Φ′) − γ₀^{2/(k+2)}ν₀|` with the Taylor
/// polynomial `ν_T` of the band and the truncated phase.
fn eikonal_residual(k: u32, well: &WellProfile, bt: &[f64], phi: &[Complex64], s: f64) -> f64 {
    let kk = k as f64 + 2.0;
    let m = well.minima[0];
    let g = well.eval(m.s + s);
    let dphi: Complex64 = phi
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * (i as f64) * s.powi(i as i32 - 1))
        .sum();
    let w = Complex64::i() * g.powf(-1.0 / kk) * dphi;
    let nu: Complex64 = bt.iter().enumerate().map(|(j, b)| w.powi(j as i32) * b).sum();
    (nu * g.powf(2.0 / kk) - well.gamma0.powf(2.0 / kk) * bt[0]).norm()
}

fn c11_structural(dir: &std::path::Path) -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();

    let a1 = Bivariate::new(vec![vec![0.1, -1.0, 0.3], vec![0.5, 0.0, 0.0, 0.2]]);
    let herm = [
        assemble_general(&a1, 0.3, &Grid2D::dirichlet_box(1.0, 1.5, 30, 25).unwrap()).unwrap(),
        assemble_montgomery(
            0,
            &WellProfile::double(),
            0.2,
            &Grid2D::half_strip(2.0, 3.0, 25, 30).unwrap(),
        )
        .unwrap(),
        assemble_montgomery(
            1,
            &WellProfile::simple(),
            0.1,
            &Grid2D::dirichlet_box(1.0, 3.0, 25, 31).unwrap(),
        )
        .unwrap(),
    ]
    .iter()
    .all(exact_hermitian);
    parts.push(format!("Hermitian {herm}"));

    let r = run_domain_convergence(&preset(StudyKind::DomainConvergence, 1, dir)).unwrap();
    let (boxes, s) = verdicts(&r, &["monotone"]);
    parts.extend(s);

    let mut eik = true;
    for (k, well) in [
        (0, WellProfile::simple()),
        (1, WellProfile::simple()),
        (1, WellProfile::double()),
    ] {
        let order = 6;
        let m = default_band_minimum(k).unwrap();
        let mut bt = band_taylor(k, m.zeta0, &m.ground.grid, order, 1e-14).unwrap();
        // ζ₀ is a critical point; the ~1e-8 numerical ν′ would leave an O(s) floor.
        bt[1] = 0.0;
        let phi = eikonal_taylor(k, &well, &bt, order).unwrap();
        // O(s^{order+1}): each halving of s divides the residual by ~2^{order+1}.
        let r: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&s| eikonal_residual(k, &well, &bt, &phi, s))
            .collect();
        let slopes = [(r[0] / r[1]).log2(), (r[1] / r[2]).log2()];
        let p = slopes.iter().all(|&q| q > order as f64 + 0.5);
        parts.push(format!(
            "eikonal k={k} γ={:?}: residual {:.1e} at s = 0.1, orders {:.2} {:.2}",
            well.gamma, r[0], slopes[0], slopes[1]
        ));
        eik &= p;
    }
    let dt = t.elapsed();
    parts.push(format!("{dt:.2?}"));
    outcome(herm && boxes && eik && dt < Duration::from_secs(60), parts.join("; "))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |n: &str| tmp.path().join(n);
    let criteria: Vec<Criterion<'_>> = vec![
        ("band constants", Box::new(c1_band_constants)),
        ("moment constant C₁", Box::new(c2_moment_constant)),
        ("moment identities", Box::new(c3_lemma58)),
        ("Feynman-Hellmann", Box::new(c4_feynman_hellmann)),
        ("eigensolver oracles", Box::new(c5_eigensolver_oracles)),
        ("simple well", Box::new(move || c6_simple_well(&d("simple")))),
        ("double-well tunneling", Box::new(move || c7_double_well(&d("double")))),
        ("camel one bump", Box::new(move || c8_camel_one(&d("camel1")))),
        ("camel two bumps", Box::new(move || c9_camel_two(&d("camel2")))),
        ("Agmon decay", Box::new(move || c10_agmon(&d("agmon")))),
        ("structural invariants", Box::new(move || c11_structural(&d("domain")))),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        let o = f();
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?} (known failures: {KNOWN_FAILURES:?})");
        std::process::exit(1);
    }
}
