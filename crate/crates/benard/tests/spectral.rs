//! Oracle tests for transforms and spectral operators: direct-summation
//! transforms, finite-difference derivatives, exact convolution, adaptive
//! quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use benard::spectral::{
    ddx1, ddx2, dealias, l2_inner, project_low_modes, to_physical, to_spectral, Grid,
    PhysicalField,
};
use num_complex::Complex64;

fn grid(nx1: usize, nx2: usize, lx: f64) -> Arc<Grid> {
    Grid::new(nx1, nx2, lx).unwrap()
}

/// Slow direct-summation analysis: DFT in x1, cosine sums in x2.
/// Independent of the FFT/DCT code paths.
fn slow_analysis(f: &PhysicalField) -> Vec<Vec<Complex64>> {
    let g = f.grid();
    let (nx1, nx2, nk) = (g.nx1, g.nx2, g.nk());
    let n = nx2 - 1;
    let mut out = vec![vec![Complex64::default(); nx2]; nk];
    for k in 0..nk {
        // DFT per x2 level.
        let mut level = vec![Complex64::default(); nx2];
        for (i, lv) in level.iter_mut().enumerate() {
            let mut s = Complex64::default();
            for j in 0..nx1 {
                let th = -2.0 * PI * (k * j) as f64 / nx1 as f64;
                s += f.values[[j, i]] * Complex64::new(th.cos(), th.sin());
            }
            *lv = s / nx1 as f64;
        }
        // Chebyshev analysis with halved-ends convention on the reversed column.
        for m in 0..nx2 {
            let mut s = Complex64::default();
            for j in 0..=n {
                let tau = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += tau * level[n - j] * (PI * (m * j) as f64 / n as f64).cos();
            }
            out[k][m] = s * 2.0 / n as f64;
        }
    }
    out
}

/// Slow synthesis back to point values.
fn slow_synthesis(coeffs: &[Vec<Complex64>], g: &Arc<Grid>) -> Vec<Vec<f64>> {
    let (nx1, nx2) = (g.nx1, g.nx2);
    let n = nx2 - 1;
    let nk = g.nk();
    let mut vals = vec![vec![0.0; nx2]; nx1];
    for (j, row) in vals.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for m in 0..nx2 {
                let sigma = if m == 0 || m == n { 0.5 } else { 1.0 };
                let t = (PI * (m * (n - i)) as f64 / n as f64).cos();
                // Fourier synthesis of the m-th coefficient at x1_j.
                let mut fsum = coeffs[0][m].re;
                for k in 1..nk - 1 {
                    let th = 2.0 * PI * (k * j) as f64 / nx1 as f64;
                    fsum += 2.0 * (coeffs[k][m] * Complex64::new(th.cos(), th.sin())).re;
                }
                fsum += if j % 2 == 0 { 1.0 } else { -1.0 } * coeffs[nk - 1][m].re;
                s += sigma * t * fsum;
            }
            *v = s;
        }
    }
    vals
}

fn smooth_random_field(g: &Arc<Grid>, seed: u64) -> PhysicalField {
    // Deterministic quasi-random smooth field: a handful of low modes.
    let mut amps = vec![];
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for _ in 0..12 {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        amps.push(((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5);
    }
    let lx = g.lx;
    PhysicalField::from_fn(g, |x1, x2| {
        let t = 2.0 * PI * x1 / lx;
        amps[0]
            + amps[1] * t.cos()
            + amps[2] * t.sin()
            + amps[3] * (2.0 * t).cos()
            + amps[4] * (3.0 * t).sin()
            + (amps[5] + amps[6] * t.cos() + amps[7] * (2.0 * t).sin())
                * (2.5 * x2 + 0.3).sin()
            + (amps[8] + amps[9] * t.sin()) * (1.7 * x2).cos()
            + amps[10] * x2 * x2
            + amps[11] * (x2 * (3.0 + t.cos())).sin() * 0.3
    })
}

#[test]
fn roundtrip_matches_direct_summation_oracle() {
    let g = grid(8, 9, 2.0);
    let f = smooth_random_field(&g, 17);
    let spec = to_spectral(&f);

    let oracle = slow_analysis(&f);
    for k in 0..g.nk() {
        for m in 0..g.nx2 {
            let d = (spec.coeffs[[k, m]] - oracle[k][m]).norm();
            assert!(d < 1e-12, "coeff ({k},{m}) differs by {d:e}");
        }
    }

    let back = to_physical(&spec).unwrap();
    let resynth = slow_synthesis(&oracle, &g);
    for j in 0..g.nx1 {
        for i in 0..g.nx2 {
            assert!((back.values[[j, i]] - f.values[[j, i]]).abs() < 1e-12);
            assert!((resynth[j][i] - f.values[[j, i]]).abs() < 1e-11);
        }
    }
}

#[test]
fn roundtrip_random_field_1e12() {
    for (nx1, nx2) in [(8, 9), (64, 33), (128, 65)] {
        let g = grid(nx1, nx2, 2.0);
        let f = smooth_random_field(&g, nx1 as u64);
        let back = to_physical(&to_spectral(&f)).unwrap();
        let mut max = 0.0f64;
        for (a, b) in back.values.iter().zip(f.values.iter()) {
            max = max.max((a - b).abs());
        }
        assert!(max < 1e-12, "{nx1}x{nx2}: roundtrip error {max:e}");
    }
}

#[test]
fn constant_field_transforms_to_single_coefficient() {
    let g = grid(16, 9, 2.0);
    let f = PhysicalField::from_fn(&g, |_, _| 1.0);
    let spec = to_spectral(&f);
    for k in 0..g.nk() {
        for m in 0..g.nx2 {
            let c = spec.coeffs[[k, m]];
            if k == 0 && m == 0 {
                // Halved-ends storage: constant 1 has a_0 = 2.
                assert!((c.re - 2.0).abs() < 1e-14 && c.im.abs() < 1e-14);
            } else {
                assert!(c.norm() < 1e-14, "({k},{m}) = {c}");
            }
        }
    }
}

#[test]
fn pure_cosine_mode_lands_on_single_pair() {
    let g = grid(16, 9, 2.0);
    let lx = g.lx;
    let f = PhysicalField::from_fn(&g, |x1, _| (2.0 * PI * x1 / lx).cos());
    let spec = to_spectral(&f);
    for k in 0..g.nk() {
        for m in 0..g.nx2 {
            let c = spec.coeffs[[k, m]];
            if k == 1 && m == 0 {
                // cos x = Re(0.5 e^{ix} * 2): stored half-spectrum holds 0.5,
                // doubled by a_0 halving to give amplitude 1.
                assert!((c.re - 1.0).abs() < 1e-14 && c.im.abs() < 1e-14, "{c}");
            } else {
                assert!(c.norm() < 1e-13, "({k},{m}) = {c}");
            }
        }
    }
}

#[test]
fn single_coefficient_synthesizes_basis_function() {
    let g = grid(16, 9, 2.0);
    let lx = g.lx;
    let mut spec = to_spectral(&PhysicalField::zeros(&g));
    spec.coeffs[[1, 1]] = Complex64::new(0.5, 0.0);
    let f = to_physical(&spec).unwrap();
    for (j, &x1) in g.x1.iter().enumerate() {
        for (i, &x2) in g.x2.iter().enumerate() {
            let expect = (2.0 * PI * x1 / lx).cos() * (2.0 * x2 - 1.0);
            assert!((f.values[[j, i]] - expect).abs() < 1e-13);
        }
    }
}

#[test]
fn zero_coefficients_give_zero_field() {
    let g = grid(16, 9, 2.0);
    let spec = to_spectral(&PhysicalField::zeros(&g));
    let f = to_physical(&spec).unwrap();
    assert_eq!(f.max_abs(), 0.0);
}

#[test]
fn to_physical_rejects_nonreal_input() {
    let g = grid(16, 9, 2.0);
    let mut spec = to_spectral(&smooth_random_field(&g, 3));
    spec.coeffs[[0, 2]] = Complex64::new(0.0, 1.0);
    assert!(to_physical(&spec).is_err());
}

/// 6th-order centered finite difference of an analytic function.
fn fd6(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (45.0 * (f(x + h) - f(x - h)) - 9.0 * (f(x + 2.0 * h) - f(x - 2.0 * h))
        + (f(x + 3.0 * h) - f(x - 3.0 * h)))
        / (60.0 * h)
}

#[test]
fn ddx1_constant_and_analytic() {
    let g = grid(32, 9, 2.0);
    let lx = g.lx;
    let c = to_spectral(&PhysicalField::from_fn(&g, |_, _| 3.5));
    assert!(to_physical(&ddx1(&c)).unwrap().max_abs() < 1e-13);

    let f = PhysicalField::from_fn(&g, |x1, _| (2.0 * PI * x1 / lx).sin());
    let d = to_physical(&ddx1(&to_spectral(&f))).unwrap();
    for (j, &x1) in g.x1.iter().enumerate() {
        let expect = (2.0 * PI / lx) * (2.0 * PI * x1 / lx).cos();
        assert!((d.values[[j, 0]] - expect).abs() < 1e-12);
    }
}

#[test]
fn ddx1_matches_finite_difference_oracle() {
    let g = grid(32, 9, 2.0);
    let lx = g.lx;
    // Band-limited analytic field, constant in x2.
    let func = |x1: f64| {
        let t = 2.0 * PI * x1 / lx;
        0.7 * t.cos() + 0.2 * (3.0 * t).sin() - 0.4 * (5.0 * t).cos()
    };
    let f = PhysicalField::from_fn(&g, |x1, _| func(x1));
    let d = to_physical(&ddx1(&to_spectral(&f))).unwrap();
    let h = lx / 4096.0;
    let mut max_rel = 0.0f64;
    for (j, &x1) in g.x1.iter().enumerate() {
        let oracle = fd6(func, x1, h);
        let rel = (d.values[[j, 4]] - oracle).abs() / oracle.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    assert!(max_rel < 1e-8, "relative error {max_rel:e}");
}

#[test]
fn ddx2_constant_and_polynomial() {
    let g = grid(8, 17, 2.0);
    let c = to_spectral(&PhysicalField::from_fn(&g, |_, _| -2.0));
    assert!(to_physical(&ddx2(&c)).unwrap().max_abs() < 1e-13);

    let f = PhysicalField::from_fn(&g, |_, x2| x2 * x2);
    let d = to_physical(&ddx2(&to_spectral(&f))).unwrap();
    for (i, &x2) in g.x2.iter().enumerate() {
        assert!(
            (d.values[[3, i]] - 2.0 * x2).abs() < 1e-13,
            "at {x2}: {} vs {}",
            d.values[[3, i]],
            2.0 * x2
        );
    }
}

#[test]
fn ddx2_matches_finite_difference_oracle() {
    let g = grid(8, 33, 2.0);
    let func = |x2: f64| (2.5 * x2 + 0.3).sin() + 0.5 * (1.3 * x2).cos();
    let f = PhysicalField::from_fn(&g, |_, x2| func(x2));
    let d = to_physical(&ddx2(&to_spectral(&f))).unwrap();
    let h = 0.01;
    let mut max_rel = 0.0f64;
    for (i, &x2) in g.x2.iter().enumerate() {
        if x2 < 3.5 * h || x2 > 1.0 - 3.5 * h {
            continue;
        }
        let oracle = fd6(func, x2, h);
        let rel = (d.values[[0, i]] - oracle).abs() / oracle.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    assert!(max_rel < 1e-8, "relative error {max_rel:e}");
}

#[test]
fn dealias_truncation_behavior() {
    let g = grid(16, 9, 2.0);
    let lx = g.lx;
    // Supported on |k| <= 5 = floor(16/3): unchanged.
    let f = PhysicalField::from_fn(&g, |x1, _| (2.0 * PI * 5.0 * x1 / lx).cos());
    let spec = to_spectral(&f);
    let da = dealias(&spec);
    for (a, b) in da.as_slice().iter().zip(spec.as_slice()) {
        assert!((a - b).norm() < 1e-15);
    }
    // Pure Nyquist content: zeroed.
    let f = PhysicalField::from_fn(&g, |x1, _| (2.0 * PI * 8.0 * x1 / lx).cos());
    let da = dealias(&to_spectral(&f));
    assert!(da.max_abs() < 1e-15);
}

#[test]
fn dealiased_product_matches_exact_convolution() {
    let g = grid(16, 9, 2.0);
    let lx = g.lx;
    // Two real band-limited factors with |k| <= 5, constant in x2.
    let a_modes: Vec<(usize, Complex64)> = vec![
        (0, Complex64::new(0.3, 0.0)),
        (1, Complex64::new(0.25, -0.1)),
        (3, Complex64::new(-0.2, 0.05)),
        (5, Complex64::new(0.1, 0.2)),
    ];
    let b_modes: Vec<(usize, Complex64)> = vec![
        (0, Complex64::new(-0.4, 0.0)),
        (2, Complex64::new(0.15, 0.3)),
        (4, Complex64::new(0.2, -0.25)),
        (5, Complex64::new(-0.05, 0.1)),
    ];
    let eval = |modes: &[(usize, Complex64)], x1: f64| -> f64 {
        let mut s = 0.0;
        for &(k, c) in modes {
            let th = 2.0 * PI * k as f64 * x1 / lx;
            let e = Complex64::new(th.cos(), th.sin());
            s += if k == 0 { c.re } else { 2.0 * (c * e).re };
        }
        s
    };
    let fa = PhysicalField::from_fn(&g, |x1, _| eval(&a_modes, x1));
    let fb = PhysicalField::from_fn(&g, |x1, _| eval(&b_modes, x1));

    // Pseudo-spectral product with dealiasing.
    let mut prod = PhysicalField::zeros(&g);
    for ((p, &x), &y) in prod
        .values
        .iter_mut()
        .zip(fa.values.iter())
        .zip(fb.values.iter())
    {
        *p = x * y;
    }
    let prod_spec = dealias(&to_spectral(&prod));

    // Exact convolution over the full-spectrum representation.
    let full = |modes: &[(usize, Complex64)]| -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); 16];
        for &(k, c) in modes {
            v[k] = c;
            if k > 0 {
                v[16 - k] = c.conj();
            }
        }
        v
    };
    let av = full(&a_modes);
    let bv = full(&b_modes);
    let kc = g.k_cut() as i64;
    for k in 0..=kc {
        let mut s = Complex64::default();
        for p in -8i64..8 {
            let q = k - p;
            if !(-8..8).contains(&q) {
                continue;
            }
            let pi = p.rem_euclid(16) as usize;
            let qi = q.rem_euclid(16) as usize;
            s += av[pi] * bv[qi];
        }
        let got = prod_spec.coeffs[[k as usize, 0]] * 0.5; // a_0 storage doubling
        let d = (got - s).norm();
        assert!(d < 1e-12, "mode {k}: {got} vs {s}");
    }
}

#[test]
fn projection_identity_idempotence_support() {
    let g = grid(32, 17, 2.0);
    let f = smooth_random_field(&g, 5);
    let spec = to_spectral(&f);

    let full = project_low_modes(&spec, g.nx1 / 2, g.nx2).unwrap();
    for (a, b) in full.as_slice().iter().zip(spec.as_slice()) {
        assert_eq!(a, b);
    }

    let once = project_low_modes(&spec, 6, 8).unwrap();
    let twice = project_low_modes(&once, 6, 8).unwrap();
    for (a, b) in twice.as_slice().iter().zip(once.as_slice()) {
        assert_eq!(a, b);
    }

    for k in 0..g.nk() {
        for m in 0..g.nx2 {
            if k > 6 || m >= 8 {
                assert_eq!(once.coeffs[[k, m]], Complex64::default());
            }
        }
    }
    assert!(project_low_modes(&spec, 0, 8).is_err());
    assert!(project_low_modes(&spec, 17, 8).is_err());
    assert!(project_low_modes(&spec, 6, 18).is_err());
}

/// Adaptive Simpson quadrature for the l2_inner oracle.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth > 40 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth + 1) + rec(f, m, b, right, tol / 2.0, depth + 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, 0)
}

#[test]
fn l2_inner_constants_analytic_and_oracle() {
    let g = grid(32, 17, 2.0);
    let lx = g.lx;
    let one = PhysicalField::from_fn(&g, |_, _| 1.0);
    assert!((l2_inner(&one, &one).unwrap() - lx).abs() < 1e-13);

    let s = PhysicalField::from_fn(&g, |x1, _| (2.0 * PI * x1 / lx).sin());
    assert!((l2_inner(&s, &s).unwrap() - lx / 2.0).abs() < 1e-13);

    // Separable integrand: band-limited in x1 times polynomial in x2.
    let fx = |x1: f64| 0.3 + (2.0 * PI * x1 / 2.0).cos() * 0.5;
    let fy = |x2: f64| 1.0 + 2.0 * x2 - 3.4 * x2.powi(3) + 0.7 * x2.powi(6);
    let f = PhysicalField::from_fn(&g, |x1, x2| fx(x1) * fy(x2));
    let got = l2_inner(&f, &f).unwrap();
    let ix = adaptive_simpson(&|x| fx(x) * fx(x), 0.0, 2.0, 1e-13);
    let iy = adaptive_simpson(&|y| fy(y) * fy(y), 0.0, 1.0, 1e-13);
    let oracle = ix * iy;
    assert!(
        ((got - oracle) / oracle).abs() < 1e-10,
        "{got} vs {oracle}"
    );

    let g2 = grid(16, 17, 2.0);
    let other = PhysicalField::zeros(&g2);
    assert!(l2_inner(&one, &other).is_err());
}

#[test]
fn parseval_in_x1_direction() {
    let g = grid(32, 17, 2.0);
    let f = smooth_random_field(&g, 23);
    let spec = to_spectral(&f);

    // Rebuild per-mode x2 values via slow cosine synthesis, then compare
    // sum_k weight |c_k(x2)|^2 against the x1-mean of f^2 at each level.
    let n = g.nx2 - 1;
    for i in 0..g.nx2 {
        let mut sum_modes = 0.0;
        for k in 0..g.nk() {
            let mut c = Complex64::default();
            for m in 0..g.nx2 {
                let sigma = if m == 0 || m == n { 0.5 } else { 1.0 };
                c += sigma
                    * spec.coeffs[[k, m]]
                    * (PI * (m * (n - i)) as f64 / n as f64).cos();
            }
            let w = if k == 0 || k == g.nk() - 1 { 1.0 } else { 2.0 };
            sum_modes += w * c.norm_sqr();
        }
        let mean_sq: f64 =
            (0..g.nx1).map(|j| f.values[[j, i]].powi(2)).sum::<f64>() / g.nx1 as f64;
        assert!(
            ((sum_modes - mean_sq) / mean_sq.max(1e-30)).abs() < 1e-12,
            "level {i}: {sum_modes} vs {mean_sq}"
        );
    }
}
