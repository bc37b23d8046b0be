//! ODE systems: parsed right-hand sides, symbolic Jacobians and Hessian
//! bounds, time inversion, adaptive Runge–Kutta integration and the bundled
//! benchmark registry.

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::linalg::Mat;
use crate::zonotope::{IntervalBox, Zonotope};
use serde::{Deserialize, Serialize};

/// Autonomous system `x' = f(x)` with componentwise expression trees.
/// First and second symbolic derivatives are derived once at construction;
/// Jacobian evaluation and Hessian bounds only walk the cached trees.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub dim: usize,
    pub rhs: Vec<Expr>,
    jac_exprs: Vec<Vec<Expr>>,
    hess_exprs: Vec<Vec<Vec<Expr>>>,
}

impl System {
    pub fn new(name: impl Into<String>, dim: usize, rhs: Vec<Expr>) -> Result<Self> {
        if rhs.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} right-hand sides for dimension {dim}",
                rhs.len()
            )));
        }
        for (i, e) in rhs.iter().enumerate() {
            if let Some(v) = e.max_var() {
                if v >= dim {
                    return Err(Error::Invalid(format!(
                        "component {i} references x{} beyond dimension {dim}",
                        v + 1
                    )));
                }
            }
        }
        let jac_exprs: Vec<Vec<Expr>> = rhs
            .iter()
            .map(|e| (0..dim).map(|j| e.differentiate(j)).collect())
            .collect();
        let hess_exprs: Vec<Vec<Vec<Expr>>> = jac_exprs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| (0..dim).map(|k| d.differentiate(k)).collect())
                    .collect()
            })
            .collect();
        Ok(System { name: name.into(), dim, rhs, jac_exprs, hess_exprs })
    }

    pub fn from_strings(name: impl Into<String>, dim: usize, rhs: &[String]) -> Result<Self> {
        let exprs = rhs
            .iter()
            .map(|s| parse_expr(s, dim))
            .collect::<Result<Vec<_>>>()?;
        System::new(name, dim, exprs)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.rhs.iter().map(|e| e.eval(x)).collect()
    }

    pub fn interval_eval(&self, b: &IntervalBox) -> Result<Vec<crate::interval::Interval>> {
        self.rhs.iter().map(|e| e.interval_eval(b)).collect()
    }

    /// Jacobian matrix at a point.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        let n = self.dim;
        let mut j = Mat::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                j.set(i, k, self.jac_exprs[i][k].eval(x)?);
            }
        }
        Ok(j)
    }

    /// Per-component bound on the absolute second derivatives over a box:
    /// entry `(j, k)` of matrix `i` bounds `|d²f_i / dx_j dx_k|` on `b`.
    pub fn hessian_bound(&self, b: &IntervalBox) -> Result<Vec<Mat>> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut h = Mat::zeros(n, n);
            for j in 0..n {
                for k in j..n {
                    let iv = self.hess_exprs[i][j][k].interval_eval(b)?;
                    let bound = iv.magnitude();
                    h.set(j, k, bound);
                    h.set(k, j, bound);
                }
            }
            out.push(h);
        }
        Ok(out)
    }

    /// The time-inverted system `x' = -f(x)`.
    pub fn time_invert(&self) -> System {
        System::new(
            format!("{}-reversed", self.name),
            self.dim,
            self.rhs.iter().map(|e| Expr::Neg(Box::new(e.clone()))).collect(),
        )
        .expect("negation preserves well-formedness")
    }
}

/// Dormand–Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `x' = f(x)` from `x0` over time `t` with an adaptive
/// Dormand–Prince 5(4) pair controlling the per-step error at `abs_tol`.
pub fn integrate(system: &System, x0: &[f64], t: f64, abs_tol: f64) -> Result<Vec<f64>> {
    if x0.len() != system.dim {
        return Err(Error::DimensionMismatch("integrate initial state".into()));
    }
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let sign = t.signum();
    let t_end = t.abs();
    let mut x = x0.to_vec();
    let mut time = 0.0;
    let mut h = (t_end / 10.0).clamp(1e-6, 0.1);
    let min_step = t_end * 1e-14;
    let mut steps = 0usize;
    while time < t_end {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Integration("step cap exceeded".into()));
        }
        h = h.min(t_end - time);
        let mut k = Vec::with_capacity(7);
        let f0 = eval_signed(system, &x, sign)?;
        k.push(f0);
        for stage in 0..6 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    crate::linalg::axpy(&mut xs, a * h, kj);
                }
            }
            let _ = DP_C; // stage times are implicit for autonomous systems
            k.push(eval_signed(system, &xs, sign)?);
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                crate::linalg::axpy(&mut x5, DP_B5[j] * h, kj);
            }
            if DP_B4[j] != 0.0 {
                crate::linalg::axpy(&mut x4, DP_B4[j] * h, kj);
            }
        }
        let err = x5
            .iter()
            .zip(&x4)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        if err <= abs_tol || h <= min_step {
            time += h;
            x = x5;
        }
        let scale = if err > 0.0 {
            0.9 * (abs_tol / err).powf(0.2)
        } else {
            5.0
        };
        h *= scale.clamp(0.2, 5.0);
        if h < min_step {
            h = min_step;
        }
    }
    Ok(x)
}

fn eval_signed(system: &System, x: &[f64], sign: f64) -> Result<Vec<f64>> {
    let mut f = system.eval(x)?;
    if sign < 0.0 {
        for v in &mut f {
            *v = -*v;
        }
    }
    Ok(f)
}

/// A named system with its initial set and default step/horizon.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub system: System,
    pub x0: Zonotope,
    pub h: f64,
    pub horizon: f64,
}

/// On-disk schema of a system/benchmark config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub name: String,
    pub dim: usize,
    pub rhs: Vec<String>,
    pub x0_center: Vec<f64>,
    pub x0_radius: Vec<f64>,
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl BenchmarkSpec {
    pub fn build(&self) -> Result<Benchmark> {
        let system = System::from_strings(&self.name, self.dim, &self.rhs)?;
        if self.x0_center.len() != self.dim || self.x0_radius.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "benchmark {}: initial set does not match dim {}",
                self.name, self.dim
            )));
        }
        let x0 = Zonotope::from_box(self.x0_center.clone(), &self.x0_radius)?;
        Ok(Benchmark { system, x0, h: self.h, horizon: self.horizon })
    }
}

const BUNDLED: &str = include_str!("../data/benchmarks.json");

/// All bundled benchmark specs, in file order.
pub fn benchmark_specs() -> Vec<BenchmarkSpec> {
    serde_json::from_str(BUNDLED).expect("bundled benchmark file is well-formed")
}

/// Look up a bundled benchmark by name.
pub fn benchmark(name: &str) -> Result<Benchmark> {
    benchmark_specs()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownBenchmark(name.to_string()))?
        .build()
}

/// Parse a benchmark spec from a JSON string (the CLI file format).
pub fn benchmark_from_json(text: &str) -> Result<Benchmark> {
    let spec: BenchmarkSpec =
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("system config: {e}")))?;
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decay() -> System {
        System::from_strings("decay", 1, &["-x1".into()]).unwrap()
    }

    #[test]
    fn integrate_exponential_decay() {
        let x = integrate(&decay(), &[1.0], 1.0, 1e-9).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn integrate_harmonic_oscillator_period() {
        let sys = System::from_strings("oscillator", 2, &["x2".into(), "-x1".into()]).unwrap();
        let x0 = [1.0, 0.0];
        let x = integrate(&sys, &x0, 2.0 * std::f64::consts::PI, 1e-10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!(x[1].abs() < 1e-6);
    }

    #[test]
    fn integrate_rossler_self_convergence() {
        let b = benchmark("Rossler").unwrap();
        let x0 = b.x0.center.clone();
        let full = integrate(&b.system, &x0, 0.1, 1e-9).unwrap();
        // Richardson-style check: two half-intervals at a tighter tolerance
        let mid = integrate(&b.system, &x0, 0.05, 1e-11).unwrap();
        let two = integrate(&b.system, &mid, 0.05, 1e-11).unwrap();
        for (a, c) in full.iter().zip(&two) {
            assert!((a - c).abs() < 1e-7, "self-convergence failed: {a} vs {c}");
        }
    }

    #[test]
    fn time_invert_roundtrip() {
        let b = benchmark("ElectroOsc").unwrap();
        let inv = b.system.time_invert();
        let twice = inv.time_invert();
        for (e, f) in twice.rhs.iter().zip(&b.system.rhs) {
            // double negation normalizes away in evaluation
            let x = [0.3, 2.7];
            assert!((e.eval(&x).unwrap() - f.eval(&x).unwrap()).abs() < 1e-12);
        }
        // flow forward then backward returns to the start
        let x0 = [0.1, 3.0];
        let fwd = integrate(&b.system, &x0, 0.5, 1e-10).unwrap();
        let back = integrate(&inv, &fwd, 0.5, 1e-10).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_system_jacobian_is_constant() {
        let sys =
            System::from_strings("linear", 2, &["2*x1 - x2".into(), "x1 + 3*x2".into()]).unwrap();
        let j = sys.jacobian(&[0.37, -4.2]).unwrap();
        assert_eq!(j.get(0, 0), 2.0);
        assert_eq!(j.get(0, 1), -1.0);
        assert_eq!(j.get(1, 0), 1.0);
        assert_eq!(j.get(1, 1), 3.0);
    }

    #[test]
    fn hessian_bound_quadratic() {
        let sys = System::from_strings("quad", 2, &["x1^2 + x1*x2".into(), "0".into()]).unwrap();
        let b = IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let h = sys.hessian_bound(&b).unwrap();
        assert!((h[0].get(0, 0) - 2.0).abs() < 1e-9);
        assert!((h[0].get(0, 1) - 1.0).abs() < 1e-9);
        assert!(h[1].norm_inf() < 1e-12);
    }

    #[test]
    fn registry_contents() {
        let e = benchmark("ElectroOsc").unwrap();
        assert_eq!(e.x0.center, vec![0.0, 3.0]);
        assert_eq!(benchmark("Tank12").unwrap().system.dim, 12);
        let lv = benchmark("Lotka-Volterra").unwrap();
        assert_eq!(lv.x0.center, vec![0.6, 0.6, 0.6, 0.6]);
        let hull = lv.x0.interval_hull();
        for l in &hull.lower {
            assert!((l - 0.4).abs() < 1e-12);
        }
        assert!(matches!(
            benchmark("NoSuchSystem"),
            Err(Error::UnknownBenchmark(_))
        ));
        assert_eq!(benchmark_specs().len(), 7);
    }

    #[test]
    fn derivatives_match_finite_differences_on_benchmarks() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for spec in benchmark_specs() {
            let b = spec.build().unwrap();
            let hull = b.x0.interval_hull();
            let points = if b.system.dim <= 4 { 1000 } else { 150 };
            for _ in 0..points {
                let x: Vec<f64> = (0..b.system.dim)
                    .map(|i| rng.random_range(hull.lower[i]..=hull.upper[i]))
                    .collect();
                for comp in &b.system.rhs {
                    for k in 0..b.system.dim {
                        let d = comp.differentiate(k);
                        let h = 1e-5;
                        let mut xp = x.clone();
                        xp[k] += h;
                        let mut xm = x.clone();
                        xm[k] -= h;
                        let fd =
                            (comp.eval(&xp).unwrap() - comp.eval(&xm).unwrap()) / (2.0 * h);
                        let sym = d.eval(&x).unwrap();
                        assert!(
                            (sym - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                            "{}: d/dx{} mismatch {sym} vs {fd}",
                            b.system.name,
                            k + 1
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn interval_eval_contains_samples_on_benchmarks() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for spec in benchmark_specs() {
            let b = spec.build().unwrap();
            let hull = b.x0.interval_hull();
            let ivs = b.system.interval_eval(&hull).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..b.system.dim)
                    .map(|i| rng.random_range(hull.lower[i]..=hull.upper[i]))
                    .collect();
                let f = b.system.eval(&x).unwrap();
                for (iv, v) in ivs.iter().zip(&f) {
                    assert!(iv.contains(*v), "{}: {v} outside [{}, {}]", b.system.name, iv.lo, iv.hi);
                }
            }
        }
    }

    #[test]
    fn print_parse_fixpoint_on_benchmark_strings() {
        for spec in benchmark_specs() {
            for s in &spec.rhs {
                let t = crate::expr::parse_expr(s, spec.dim).unwrap();
                let printed = t.to_string();
                let back = crate::expr::parse_expr(&printed, spec.dim).unwrap();
                assert_eq!(back, t, "fixpoint broken for {s}");
            }
        }
    }
}
