//! One-dimensional quadrature rules.

/// Composite trapezoid weights for `n` equispaced nodes with spacing `dx`.
pub fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; n];
    if n > 0 {
        w[0] = 0.5 * dx;
        w[n - 1] = 0.5 * dx;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// `∫ f` from equispaced samples.
pub fn trapezoid(samples: &[f64], dx: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => dx * (samples[1..n - 1].iter().sum::<f64>() + 0.5 * (samples[0] + samples[n - 1])),
    }
}

/// Adaptive trapezoid on `[a, b]` to relative tolerance `rtol`. Each panel is
/// bisected until the halved rule agrees with the coarse one; accepted panels
/// carry the Richardson correction `(T₂ − T₁)/3`.
pub fn adaptive_trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    // Seed with a coarse composite rule so the global scale is known.
    let seed = 16;
    let h = (b - a) / seed as f64;
    let xs: Vec<f64> = (0..=seed).map(|i| a + h * i as f64).collect();
    let mut fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    fs[0] = fa;
    fs[seed] = fb;
    let scale = fs.iter().map(|v| v.abs()).sum::<f64>() * h.abs() + f64::MIN_POSITIVE;
    let atol = rtol * scale;
    let mut total = 0.0;
    for i in 0..seed {
        total += panel(&f, xs[i], xs[i + 1], fs[i], fs[i + 1], atol / seed as f64, 0);
    }
    total
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, atol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let fm = f(m);
    let t1 = 0.5 * (b - a) * (fa + fb);
    let t2 = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
    if (t2 - t1).abs() <= 3.0 * atol || depth >= 40 {
        return t2 + (t2 - t1) / 3.0;
    }
    panel(f, a, m, fa, fm, 0.5 * atol, depth + 1) + panel(f, m, b, fm, fb, 0.5 * atol, depth + 1)
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

/// Composite 8-point Gauss-Legendre rule on panels no wider than `max_panel`.
/// For smooth integrands.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, max_panel: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = ((b - a).abs() / max_panel).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let c = a + h * (i as f64 + 0.5);
        let r = 0.5 * h;
        for &(x, w) in &GL8 {
            total += w * r * (f(c - r * x) + f(c + r * x));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear() {
        let dx = 0.1;
        let s: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * dx + 1.0).collect();
        assert!((trapezoid(&s, dx) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = adaptive_trapezoid(|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let v = adaptive_trapezoid(|x: f64| x.cos(), 1.0, 0.0, 1e-10);
        assert!((v + 1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_exact_for_degree_15() {
        let v = gauss_legendre(|x: f64| x.powi(15) + x.powi(4), 0.0, 2.0, 10.0);
        assert!((v - (2f64.powi(16) / 16.0 + 32.0 / 5.0)).abs() < 1e-10, "{v}");
    }
}
