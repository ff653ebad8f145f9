//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always shown.

use std::time::Instant;

use hyperinv::exact_poly::{build_a_exact, build_b_exact, criterion_coefficient, mul_tri, BiPoly};
use hyperinv::genfun::{self, GfParams};
use hyperinv::inversion::{
    apply_tri, build_a_mp, build_b, build_b_mp, build_system, q_coeff, q_via_m, solve_e0, solve_tri, MatrixParams, Seq,
};
use hyperinv::mp::DEFAULT_BITS;
use hyperinv::operators::{self as ops, Analytic, Branch, ContourSpec, FnH0, H0Series, OperatorParams};
use hyperinv::special_fn::{confluent_phi, d_closed, d_sum, identity_suite, IDENTITY_TOLERANCE};
use hyperinv::Cx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria that cannot hold as written. Each is still evaluated and printed;
/// the test requires that it keeps failing so the record stays accurate.
const UNATTAINABLE: &[&str] = &["11", "13"];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn c(re: f64) -> Cx {
    Cx::new(re, 0.0)
}

fn rel(a: Cx, b: Cx) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_disk(rng: &mut ChaCha8Rng, radius: f64) -> Cx {
    Cx::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn params() -> OperatorParams {
    OperatorParams::new(c(0.5), c(-2.0)).unwrap()
}

/// `z e^{a z}` with exponential coefficients `l a^{l-1}`.
fn z_exp(a: Cx, order: usize) -> H0Series {
    H0Series::new((1..=order).map(|l| l as f64 * a.powu(l as u32 - 1)).collect())
}

/// `z + z^3/6` at order 24.
fn cubic() -> H0Series {
    let mut v = vec![c(0.0); 24];
    v[0] = c(1.0);
    v[2] = c(1.0);
    H0Series::new(v)
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let mut bad = Vec::new();
    for n in 1..=10 {
        let (a, b) = (build_a_exact(n), build_b_exact(n));
        let ab = mul_tri(&a, &b).unwrap();
        let ba = mul_tri(&b, &a).unwrap();
        if !ab.is_identity() || !ba.is_identity() {
            bad.push(n);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line { id: "1", pass: bad.is_empty() && secs < 60.0, detail: format!("exact A B = B A = Id for n <= 10; failing orders {bad:?}; {secs:.2} s") }
}

fn criterion_2() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<MatrixParams> =
        (0..20).map(|_| MatrixParams::new(random_disk(&mut rng, 2.0), random_disk(&mut rng, 3.0), 30).unwrap()).collect();
    let worst = samples
        .par_iter()
        .map(|p| build_a_mp(p, DEFAULT_BITS).mul(&build_b_mp(p, DEFAULT_BITS)).unwrap().identity_residual())
        .reduce(|| 0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Line { id: "2", pass: worst <= 1e-10 && secs < 10.0, detail: format!("max ||A B - Id|| = {worst:.2e} at n = 30 over 20 samples; {secs:.2} s") }
}

fn criterion_3() -> Line {
    let mut bad = Vec::new();
    for n in 1..=8 {
        for k in 1..=n {
            let u = criterion_coefficient(n, k, n - k).unwrap();
            let expect = if k == n { BiPoly::one() } else { BiPoly::zero() };
            if u != expect {
                bad.push((n, k));
            }
        }
    }
    Line { id: "3", pass: bad.is_empty(), detail: format!("U_(n-k)^(n,k) = 0 for k < n <= 8 and 1 at n = k; failing {bad:?}") }
}

fn criterion_4() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = rng.gen_range(1..=6);
        let mut lambda = Cx::new(rng.gen_range(-2.5..2.5), rng.gen_range(-0.5..0.5));
        let mut mu = Cx::new(rng.gen_range(-2.5..2.5), rng.gen_range(-0.5..0.5));
        match i % 4 {
            1 => mu = lambda,
            2 => {
                lambda = c(rng.gen_range(-3..=6) as f64);
                mu = lambda;
            }
            3 => lambda = c(rng.gen_range(-3..=6) as f64),
            _ => {}
        }
        worst = worst.max((d_closed(n, lambda, mu) - d_sum(n, lambda, mu)).norm());
    }
    Line { id: "4", pass: worst <= 1e-11, detail: format!("max |D closed - D sum| = {worst:.2e} over 200 points") }
}

fn criterion_5() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for nu in [c(-2.0), c(-1.0), c(-0.5), Cx::new(0.3, 0.1)] {
        let r = genfun::radius_r(nu);
        for _ in 0..20 {
            let w = Cx::from_polar(rng.gen_range(0.0..0.5 * r), rng.gen_range(-3.1..3.1));
            let s = genfun::sigma_series(w, nu, 80).unwrap().value;
            worst = worst.max((s - genfun::sigma_closed(w, nu).unwrap()).norm());
        }
    }
    // Sigma(w) = (1/sqrt(1 - 4w) - 1)/2 at nu = -1
    let spot = genfun::sigma_series(c(0.1), c(-1.0), 40).unwrap().value;
    let oracle = 0.5 * (1.0 / 0.6f64.sqrt() - 1.0);
    let r = genfun::radius_r(c(-1.0));
    let pass = worst <= 1e-10 && (spot.re - 0.145_497_2).abs() <= 1e-6 && (spot.re - oracle).abs() <= 1e-6 && (r - 0.25).abs() <= 1e-12;
    Line { id: "5", pass, detail: format!("max |series - closed| = {worst:.2e}; Sigma(0.1) = {:.7}; R(-1) = {r}", spot.re) }
}

fn criterion_6() -> Line {
    let mut worst: f64 = 0.0;
    for nu in [c(-2.0), c(-1.0), c(-0.5), Cx::new(0.3, 0.1)] {
        let r = genfun::radius_r(nu);
        for i in 1..=5 {
            for j in 0..8 {
                let w = Cx::from_polar(0.1 * i as f64 * r, std::f64::consts::PI * j as f64 / 4.0);
                worst = worst.max(genfun::ode_residual(w, nu).unwrap());
            }
        }
    }
    Line { id: "6", pass: worst <= 1e-6, detail: format!("max ODE residual = {worst:.2e}") }
}

fn criterion_7() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for (x, nu) in [(c(0.5), c(-1.0)), (c(0.5), c(-2.0)), (Cx::new(0.3, 0.1), c(-1.2))] {
        let p = GfParams::new(x, nu, 12).unwrap();
        for _ in 0..30 {
            let z = random_disk(&mut rng, 0.1);
            let back = genfun::omega(genfun::xi(z, &p).unwrap(), &p).unwrap();
            worst = worst.max((back - z).norm());
        }
    }
    let hand = genfun::omega(c(0.2), &GfParams::new(c(0.5), c(-1.0), 12).unwrap()).unwrap();
    let pass = worst <= 1e-9 && (hand - c(-0.290_994_4)).norm() <= 1e-6;
    Line { id: "7", pass, detail: format!("max |Omega(Xi(z)) - z| = {worst:.2e}; Omega(0.2) = {:.7}", hand.re) }
}

fn criterion_8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = GfParams::new(c(0.4), c(-1.3), 12).unwrap();
    let mut ogf: f64 = 0.0;
    let mut egf: f64 = 0.0;
    for _ in 0..5 {
        let t = Seq::new((0..12).map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        ogf = ogf.max(genfun::ogf_relation_residual(&t, &p).unwrap());
        // direct EGF of S = B T, with T padded far beyond the series' reach
        let mut long = t.values().to_vec();
        long.resize(80, c(0.0));
        let s = apply_tri(&build_b(&MatrixParams::new(p.x, p.nu, 80).unwrap()).unwrap(), &Seq::new(long)).unwrap();
        for z in [c(0.5), Cx::new(0.0, 0.5), Cx::from_polar(0.5, 2.0)] {
            let mut direct = c(0.0);
            let mut pow = c(1.0);
            for n in 1..=80 {
                pow *= z / n as f64;
                direct += s.get(n) * pow;
            }
            egf = egf.max((genfun::egf_s(z, &t, &p).unwrap() - direct).norm());
        }
    }
    Line { id: "8", pass: ogf <= 1e-8 && egf <= 1e-8, detail: format!("OGF residual {ogf:.2e}; EGF mismatch {egf:.2e}") }
}

fn criterion_9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut solve: f64 = 0.0;
    for (x, nu) in [(c(0.5), c(-2.0)), (Cx::new(0.3, 0.2), Cx::new(-1.5, 0.4))] {
        let k = Seq::new((0..20).map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        let e = solve_e0(&k, x, nu).unwrap();
        let direct = solve_tri(&build_system(&MatrixParams::new(x, nu, 20).unwrap()).unwrap(), &k).unwrap();
        for b in 1..=20 {
            solve = solve.max(rel(e.get(b), direct.get(b)));
        }
    }
    let mut q: f64 = 0.0;
    for (x, nu) in [(c(0.5), c(-2.0)), (c(0.3), c(-0.7)), (Cx::new(0.6, 0.3), Cx::new(-1.2, 0.5))] {
        for b in 1..=8 {
            for l in 1..=b {
                q = q.max(rel(q_via_m(b, l, x, nu).unwrap(), q_coeff(b, l, x, nu).unwrap()));
            }
        }
    }
    Line { id: "9", pass: solve <= 1e-10 && q <= 1e-8, detail: format!("solve_e0 vs elimination {solve:.2e}; q_coeff vs q_via_m {q:.2e}") }
}

fn criterion_10() -> Line {
    let p = params();
    let f = z_exp(1.0 - p.x(), 40);
    let g = FnH0(|z: Cx| z.sin() + z * z);
    let mut worst: f64 = 0.0;
    for z in [c(0.5), c(1.0), Cx::new(1.0, 0.5)] {
        for h in [&f as &dyn Analytic, &g] {
            let (l, m) = ops::factorization_sides(h, z, &p).unwrap();
            worst = worst.max((l - m).norm() / l.norm().max(1.0));
        }
    }
    Line { id: "10", pass: worst <= 1e-7, detail: format!("max |L f - c0 delta M f| (relative) = {worst:.2e}") }
}

fn criterion_11() -> Vec<Line> {
    let p = params();
    let f = z_exp(1.0 - p.x(), 40);
    let a = 1.0 - 1.0 / p.nu();
    let mut stated: f64 = 0.0;
    let mut corrected: f64 = 0.0;
    for z in [c(0.5), c(1.0), Cx::new(1.0, 0.5)] {
        let v = ops::apply_l_quad(&f, z, &p).unwrap();
        stated = stated.max(rel(v, -z * (-z).exp() / (1.0 - p.x())));
        corrected = corrected.max(rel(v, -z / (1.0 - p.x()) * confluent_phi(a, a + 1.0, -z).unwrap()));
    }
    vec![
        Line { id: "11", pass: stated <= 1e-8, detail: format!("L(z e^((1-x)z)) vs -z e^(-z)/(1-x): max rel err {stated:.2e}") },
        Line {
            id: "11 (Phi(1-1/nu; 2-1/nu; -z) form)",
            pass: corrected <= 1e-8,
            detail: format!("L(z e^((1-x)z)) vs -z/(1-x) Phi(1-1/nu; 2-1/nu; -z): max rel err {corrected:.2e}"),
        },
    ]
}

fn criterion_12() -> Line {
    let start = Instant::now();
    let p = params();
    let f = cubic();
    let k = ops::apply_l_series(&f, &p).unwrap();
    let mut round: f64 = 0.0;
    for j in 0..16 {
        let z = Cx::from_polar(0.0625 * (j + 1) as f64, 0.9 * j as f64);
        round = round.max(rel(ops::linv_contour(&k, z, &p).unwrap().value, f.value(z)));
    }
    let spec = ContourSpec::default();
    let mut phi: f64 = 0.0;
    for (b, nu, z) in [(2.0, -0.5, 0.7), (2.0, -0.35, 0.7), (3.0, -0.8, -1.1)] {
        let v = ops::phi_contour(c(b * nu), c(b), c(z), &spec).unwrap();
        phi = phi.max(rel(v, confluent_phi(c(b * nu), c(b), c(z)).unwrap()));
    }
    let mut alt: f64 = 0.0;
    for z in [c(0.7), Cx::new(0.3, -0.6)] {
        let u = ops::linv_contour(&k, z, &p).unwrap().value;
        alt = alt.max(rel(ops::linv_contour_alt(&k, z, &p).unwrap().value, u));
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: "12",
        pass: round <= 1e-6 && phi <= 1e-8 && alt <= 1e-8 && secs < 30.0,
        detail: format!("round trip {round:.2e}; Phi loop {phi:.2e}; alternative {alt:.2e}; {secs:.2} s"),
    }
}

fn criterion_13() -> Vec<Line> {
    let p = params();
    let mut kv = vec![c(0.0); 16];
    kv[0] = c(1.0);
    kv[1] = c(0.5);
    kv[3] = c(-0.25);
    let k = H0Series::new(kv);
    let e = H0Series::new(solve_e0(&Seq::new(k.to_signed()), p.x(), p.nu()).unwrap().values().to_vec());
    let k1 = ops::k1_from_k(&k, &p);
    let mut volterra: f64 = 0.0;
    for z in [c(0.5), c(1.0), Cx::new(0.4, 0.3)] {
        volterra = volterra.max(rel(ops::volterra_lhs(&e, z, &p).unwrap(), z / p.x() * k1.value(z)));
    }
    // tau in [0.9 tau_hat, 0.999 tau_hat] means 1 - tau/tau_hat in [1e-3, 0.1]
    let stated = ops::singularity_exponent(c(0.5), &p, Some(Branch::Minus), 1e-3, 0.1, 24).unwrap();
    let near = ops::singularity_exponent(c(0.5), &p, Some(Branch::Minus), 1e-6, 1e-3, 24).unwrap();
    let full = ops::singularity_exponent(c(0.5), &p, None, 1e-6, 1e-3, 24).unwrap();
    vec![
        Line {
            id: "13",
            pass: volterra <= 1e-6 && (stated + 0.5).abs() <= 0.02,
            detail: format!("Volterra {volterra:.2e}; Psi_- exponent on [0.9, 0.999] tau_hat = {stated:.4}"),
        },
        Line {
            id: "13 (exponent next to tau_hat)",
            pass: volterra <= 1e-6 && (near + 0.5).abs() <= 0.02 && (full + 0.5).abs() <= 0.02,
            detail: format!("Psi_- exponent {near:.4}, Psi_- - Psi_+ exponent {full:.4} on 1 - tau/tau_hat in [1e-6, 1e-3]"),
        },
    ]
}

fn criterion_14() -> Line {
    let report = identity_suite(14, 50);
    let names: Vec<&str> = report.outcomes.iter().map(|o| o.identity).collect();
    let pass = report.passed() && report.outcomes.len() == 6 && report.tolerance <= IDENTITY_TOLERANCE;
    Line { id: "14", pass, detail: format!("{names:?}: max residual {:.2e} over 50 draws", report.max_residual()) }
}

fn main() {
    let mut lines = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    lines.extend(criterion_11());
    lines.push(criterion_12());
    lines.extend(criterion_13());
    lines.push(criterion_14());

    for l in &lines {
        println!("{} criterion {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    let unexpected: Vec<&str> = lines.iter().filter(|l| l.pass == UNATTAINABLE.contains(&l.id)).map(|l| l.id).collect();
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
