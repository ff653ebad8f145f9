//! Verification suites behind `hyperinv verify`.

use clap::ValueEnum;
use hyperinv::exact_poly::{build_a_exact, build_b_exact, criterion_coefficient, mul_tri, BiPoly};
use hyperinv::genfun::{self, GfParams};
use hyperinv::inversion::{build_a_mp, build_b_mp, MatrixParams, Seq};
use hyperinv::mp::DEFAULT_BITS;
use hyperinv::operators::{self as ops, Analytic, Branch, ContourSpec, H0Series, OperatorParams};
use hyperinv::special_fn::{confluent_phi, d_closed, d_sum, identity_suite};
use hyperinv::Cx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Exact,
    Numeric,
    Operators,
    Genfun,
    Special,
    All,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub suite: &'static str,
    pub cases: usize,
    pub max_residual: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

/// Accumulates named residual checks against their tolerances.
struct Tally {
    suite: &'static str,
    cases: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Tally {
    fn new(suite: &'static str) -> Self {
        Self { suite, cases: 0, worst: 0.0, failures: Vec::new() }
    }

    fn check(&mut self, name: &str, residual: f64, tol: f64) {
        self.cases += 1;
        self.worst = self.worst.max(residual);
        if !(residual <= tol) {
            self.failures.push(format!("{name}: residual {residual:.3e} > {tol:.0e}"));
        }
    }

    fn result<T>(&mut self, name: &str, r: hyperinv::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.cases += 1;
                self.failures.push(format!("{name}: {e}"));
                None
            }
        }
    }

    fn finish(self) -> Report {
        Report { suite: self.suite, cases: self.cases, max_residual: self.worst, pass: self.failures.is_empty(), failures: self.failures }
    }
}

fn c(re: f64) -> Cx {
    Cx::new(re, 0.0)
}

fn rel(a: Cx, b: Cx) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn run(suite: Suite, n: Option<usize>, seed: u64) -> Vec<Report> {
    match suite {
        Suite::Exact => vec![exact(n.unwrap_or(8))],
        Suite::Numeric => vec![numeric(n.unwrap_or(30), seed)],
        Suite::Operators => vec![operators()],
        Suite::Genfun => vec![generating(seed)],
        Suite::Special => vec![special(seed)],
        Suite::All => vec![exact(n.unwrap_or(8)), numeric(n.unwrap_or(30), seed), operators(), generating(seed), special(seed)],
    }
}

pub fn print(reports: &[Report], pretty: bool) {
    if pretty {
        println!("{:<10} {:>6} {:>12}  result", "suite", "cases", "residual");
        for r in reports {
            println!("{:<10} {:>6} {:>12.3e}  {}", r.suite, r.cases, r.max_residual, if r.pass { "pass" } else { "FAIL" });
            for f in &r.failures {
                println!("    {f}");
            }
        }
    } else if reports.len() == 1 {
        println!("{}", serde_json::to_string(&reports[0]).expect("serializable"));
    } else {
        println!("{}", serde_json::to_string(reports).expect("serializable"));
    }
}

/// `A B = B A = Id` exactly for every order up to `n`, and the vanishing
/// criterion coefficients.
fn exact(n: usize) -> Report {
    let mut t = Tally::new("exact");
    let n = n.max(1);
    let a = build_a_exact(n);
    let b = build_b_exact(n);
    for (name, prod) in [("A B", mul_tri(&a, &b)), ("B A", mul_tri(&b, &a))] {
        if let Some(p) = t.result(name, prod) {
            let mut wrong = 0;
            for r in 1..=n {
                for col in 1..=r {
                    let expect = if r == col { BiPoly::one() } else { BiPoly::zero() };
                    if p.get(r, col) != expect {
                        wrong += 1;
                    }
                }
            }
            t.check(name, wrong as f64, 0.0);
        }
    }
    for nn in 1..=n.min(8) {
        for k in 1..=nn {
            let name = format!("U_{}^({nn},{k})", nn - k);
            if let Some(u) = t.result(&name, criterion_coefficient(nn, k, nn - k)) {
                let expect = if k == nn { BiPoly::one() } else { BiPoly::zero() };
                t.check(&name, if u == expect { 0.0 } else { 1.0 }, 0.0);
            }
        }
    }
    t.finish()
}

/// `||A B - Id||_max` at random `|x| <= 2`, `|nu| <= 3`, in multiprecision.
fn numeric(n: usize, seed: u64) -> Report {
    let mut t = Tally::new("numeric");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let x = Cx::from_polar(2.0 * rng.gen::<f64>().sqrt(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let nu = Cx::from_polar(3.0 * rng.gen::<f64>().sqrt(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let name = format!("x={x:.3}, nu={nu:.3}");
        let Some(p) = t.result(&name, MatrixParams::new(x, nu, n.max(1))) else { continue };
        let a = build_a_mp(&p, DEFAULT_BITS);
        let b = build_b_mp(&p, DEFAULT_BITS);
        if let Some(ab) = t.result(&name, a.mul(&b)) {
            t.check(&name, ab.identity_residual(), 1e-10);
        }
    }
    t.finish()
}

fn z_exp(a: Cx, order: usize) -> H0Series {
    H0Series::new((1..=order).map(|l| l as f64 * a.powu(l as u32 - 1)).collect())
}

fn operators() -> Report {
    let mut t = Tally::new("operators");
    let Some(p) = t.result("params", OperatorParams::new(c(0.5), c(-2.0))) else { return t.finish() };
    let grid = [c(0.5), c(1.0), Cx::new(1.0, 0.5)];

    let f = z_exp(1.0 - p.x(), 40);
    let a = 1.0 - 1.0 / p.nu();
    for &z in &grid {
        if let Some(v) = t.result("closed form", ops::apply_l_quad(&f, z, &p)) {
            if let Some(phi) = t.result("closed form", confluent_phi(a, a + 1.0, -z)) {
                t.check(&format!("closed form z={z}"), rel(v, -z / (1.0 - p.x()) * phi), 1e-8);
            }
        }
    }
    let g = ops::FnH0(|z: Cx| z.sin() + z * z);
    for &z in &grid {
        for (name, h) in [("z e^(1-x)z", &f as &dyn Analytic), ("sin z + z^2", &g)] {
            if let Some((l, m)) = t.result("factorization", ops::factorization_sides(h, z, &p)) {
                t.check(&format!("factorization {name} z={z}"), (l - m).norm() / l.norm().max(1.0), 1e-7);
            }
        }
    }

    let mut cubic = vec![c(0.0); 24];
    cubic[0] = c(1.0);
    cubic[2] = c(1.0);
    let cubic = H0Series::new(cubic);
    if let Some(k) = t.result("L series", ops::apply_l_series(&cubic, &p)) {
        for j in 0..8 {
            let z = Cx::from_polar(0.125 * (j + 1) as f64, 0.8 * j as f64);
            if let Some(v) = t.result("contour", ops::linv_contour(&k, z, &p)) {
                t.check(&format!("contour round trip z={z}"), rel(v.value, cubic.value(z)), 1e-6);
            }
        }
        let z = c(0.7);
        if let (Some(u), Some(v)) = (t.result("contour", ops::linv_contour(&k, z, &p)), t.result("alt", ops::linv_contour_alt(&k, z, &p))) {
            t.check("alternative contour", rel(v.value, u.value), 1e-8);
        }
        let k1 = ops::k1_from_k(&k, &p);
        if let Some(lhs) = t.result("volterra", ops::volterra_lhs(&cubic, c(0.5), &p)) {
            t.check("volterra", rel(lhs, c(0.5) / p.x() * k1.value(c(0.5))), 1e-6);
        }
    }
    let spec = ContourSpec::default();
    for (b, nu, z) in [(2.0, -0.5, 0.7), (2.0, -0.35, 0.7)] {
        if let (Some(v), Some(s)) = (
            t.result("phi contour", ops::phi_contour(c(b * nu), c(b), c(z), &spec)),
            t.result("phi series", confluent_phi(c(b * nu), c(b), c(z))),
        ) {
            t.check(&format!("phi loop b={b} nu={nu}"), rel(v, s), 1e-8);
        }
    }
    for (name, branch) in [("kernel exponent", None), ("Psi_- exponent", Some(Branch::Minus))] {
        if let Some(s) = t.result(name, ops::singularity_exponent(c(0.5), &p, branch, 1e-6, 1e-3, 16)) {
            t.check(name, (s + 0.5).abs(), 0.02);
        }
    }
    t.finish()
}

fn generating(seed: u64) -> Report {
    let mut t = Tally::new("genfun");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for nu in [c(-2.0), c(-1.0), c(-0.5), Cx::new(0.3, 0.1)] {
        let r = genfun::radius_r(nu);
        for _ in 0..5 {
            let w = Cx::from_polar(rng.gen_range(0.0..0.5 * r), rng.gen_range(-3.1..3.1));
            if let (Some(s), Some(cl)) = (t.result("sigma series", genfun::sigma_series(w, nu, 80)), t.result("sigma", genfun::sigma_closed(w, nu))) {
                t.check(&format!("sigma nu={nu} w={w:.3}"), (s.value - cl).norm(), 1e-10);
            }
            if let Some(res) = t.result("ode", genfun::ode_residual(w, nu)) {
                t.check(&format!("ode nu={nu} w={w:.3}"), res, 1e-6);
            }
        }
    }
    for (x, nu) in [(c(0.5), c(-1.0)), (c(0.5), c(-2.0)), (Cx::new(0.3, 0.1), c(-1.2))] {
        let Some(p) = t.result("params", GfParams::new(x, nu, 12)) else { continue };
        for _ in 0..10 {
            let z = Cx::from_polar(rng.gen_range(0.0..0.1), rng.gen_range(-3.1..3.1));
            let back = genfun::xi(z, &p).and_then(|v| genfun::omega(v, &p));
            if let Some(b) = t.result("omega", back) {
                t.check(&format!("omega x={x} nu={nu}"), (b - z).norm(), 1e-9);
            }
        }
    }
    if let Some(p) = t.result("params", GfParams::new(c(0.4), c(-1.3), 12)) {
        let seq = Seq::new((0..12).map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        if let Some(r) = t.result("ogf", genfun::ogf_relation_residual(&seq, &p)) {
            t.check("ogf relation", r, 1e-8);
        }
    }
    t.finish()
}

fn special(seed: u64) -> Report {
    let mut t = Tally::new("special");
    let report = identity_suite(seed, 50);
    for o in &report.outcomes {
        t.cases += o.cases.saturating_sub(1);
        t.check(o.identity, o.max_residual, report.tolerance);
        t.failures.extend(o.failures.iter().cloned());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // generic points, the diagonal mu = lambda, and integer lambda on it
    for i in 0..60 {
        let n = rng.gen_range(1..=8);
        let mut lambda = Cx::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
        let mut mu = Cx::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
        if i % 3 == 2 {
            lambda = c(rng.gen_range(-3..=8) as f64);
        }
        if i % 3 != 0 {
            mu = lambda;
        }
        let s = d_sum(n, lambda, mu);
        t.check(&format!("D_{n}({lambda:.3}, {mu:.3})"), (d_closed(n, lambda, mu) - s).norm() / s.norm().max(1.0), 1e-11);
    }
    t.finish()
}
