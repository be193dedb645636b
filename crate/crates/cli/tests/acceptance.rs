//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values are recomputed here from closed forms (softmax and
//! log-sum-exp for kl, the affine chi-squared posterior, the logistic
//! reference world) rather than taken from the library.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdr_core::divergence::{catalog, check_generator, log_grid};
use fdr_core::generr::{generalization_error_direct, generalization_error_theorem5, generalization_report};
use fdr_core::oracle::{
    brute_force_constrained, brute_force_regularized, divergence, total_variation, MirrorDescentOptions,
};
use fdr_core::solver::MONOTONE_SLACK;
use fdr_core::{Atom, DivergenceGenerator, FdrProblem, LossTable, ModelSupport, StochasticAlgorithm, TabulatedLaw};

type Verdict = Result<String, String>;

fn support(weights: &[f64]) -> ModelSupport {
    let atoms = (0..weights.len()).map(|i| Atom::named(format!("m{i}"))).collect();
    ModelSupport::finite(atoms, weights.to_vec()).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn random_losses(rng: &mut ChaCha8Rng, m: usize, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(0.0..hi)).collect()
}

fn table(v: &[f64]) -> LossTable {
    LossTable::new(v.to_vec()).unwrap()
}

fn expect(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// `λ·(log E_Q[exp(−L/λ)] − 1)` with the maximum exponent factored out.
fn kl_normalization(q: &[f64], l: &[f64], lambda: f64) -> f64 {
    let e: Vec<f64> = l.iter().map(|x| -x / lambda).collect();
    let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = q.iter().zip(&e).map(|(q, e)| q * (e - m).exp()).sum();
    lambda * (m + s.ln() - 1.0)
}

fn softmax(q: &[f64], l: &[f64], lambda: f64) -> Vec<f64> {
    let e: Vec<f64> = l.iter().map(|x| -x / lambda).collect();
    let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = q.iter().zip(&e).map(|(q, e)| q * (e - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Chi-squared posterior `q·(1 − (L − E_Q L)/(2λ))`, valid above the threshold.
fn chi_squared_posterior(q: &[f64], l: &[f64], lambda: f64) -> Vec<f64> {
    let mean = expect(q, l);
    q.iter().zip(l).map(|(q, l)| q * (1.0 - (l - mean) / (2.0 * lambda))).collect()
}

/// `Σ_z P(z)·(E_{P̄}[L_z] − E_{P_z}[L_z])` with `P̄ = Σ_z P(z)·P_z`.
fn direct_generalization_error(probs: &[f64], tables: &[Vec<f64>], conditionals: &[Vec<f64>]) -> f64 {
    let m = conditionals[0].len();
    let marginal: Vec<f64> =
        (0..m).map(|i| probs.iter().zip(conditionals).map(|(p, c)| p * c[i]).sum()).collect();
    probs
        .iter()
        .zip(tables)
        .zip(conditionals)
        .map(|((p, l), c)| p * (expect(l, &marginal) - expect(l, c)))
        .sum()
}

fn random_admissible(rng: &mut ChaCha8Rng, problem: &FdrProblem) -> f64 {
    let star = problem.lambda_star().unwrap();
    star * rng.gen_range(1.1..2.0) + rng.gen_range(0.05..3.0)
}

fn criterion_1() -> Verdict {
    let grid = log_grid(1e-2, 1e2, 50);
    let mut worst: f64 = 0.0;
    for gen in catalog() {
        let report = check_generator(&gen, &grid);
        let fenchel = report.max_fenchel_residual();
        worst = worst.max(fenchel);
        if !report.passed() || fenchel >= 1e-9 {
            return Err(format!("{gen}: conformance={} fenchel={fenchel:e}", report.passed()));
        }
    }
    Ok(format!("{} generators, max Fenchel residual {worst:.2e}", catalog().len()))
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut dn, mut dtv): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let m = rng.gen_range(1..=16);
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 10.0);
        let lambda = rng.gen_range(0.05..10.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(DivergenceGenerator::kl(), &s, &t).unwrap();
        let (n, _) = p.normalization_constant(lambda).map_err(|e| e.to_string())?;
        let post = p.posterior(lambda).map_err(|e| e.to_string())?;
        dn = dn.max((n - kl_normalization(&q, &l, lambda)).abs());
        dtv = dtv.max(total_variation(&post.weights, &softmax(&q, &l, lambda)));
    }
    let detail = format!("max |ΔN| {dn:.2e}, max TV {dtv:.2e}");
    if dn < 1e-8 && dtv <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Smallest factor keeping every chi-squared density nonnegative, by
/// bisection on the sign of the smallest density.
fn chi_squared_threshold_bisection(q: &[f64], l: &[f64]) -> f64 {
    let feasible = |lambda: f64| chi_squared_posterior(q, l, lambda).iter().all(|w| *w >= 0.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    while !feasible(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut db, mut ds): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let m = rng.gen_range(2..=12);
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 5.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(DivergenceGenerator::chi_squared(), &s, &t).unwrap();
        let star = p.lambda_star().map_err(|e| e.to_string())?;
        let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let closed = (max - expect(&q, &l)) / 2.0;
        ds = ds.max((star - closed).abs()).max((star - chi_squared_threshold_bisection(&q, &l)).abs());
        let lambda = star * rng.gen_range(1.05..3.0);
        let (beta, _) = p.normalization_constant(lambda).map_err(|e| e.to_string())?;
        db = db.max((beta + expect(&q, &l)).abs());
    }
    let detail = format!("max |Δβ| {db:.2e}, max |Δλ*| {ds:.2e}");
    if db <= 1e-10 && ds <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Gap and root/dual agreement over 100 instances spread across the catalog.
fn criteria_4_5() -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gens = catalog();
    let (mut gap, mut dbeta): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let gen = gens[k % gens.len()];
        let m = rng.gen_range(1..=16);
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 5.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(gen, &s, &t).unwrap();
        let lambda = random_admissible(&mut rng, &p);
        let post = match p.posterior(lambda) {
            Ok(post) => post,
            Err(e) => return (Err(format!("{gen}: {e}")), Err(format!("{gen}: {e}"))),
        };
        // primal at the posterior against dual at its normalization
        let primal = expect(&post.weights, &l) + lambda * divergence(&gen, &q, &post.weights);
        let dual = -p.dual_objective(post.n_of_lambda, lambda).unwrap();
        gap = gap.max((primal - dual).abs()).max(p.duality_gap(&post));
        let (_, diag) = p.normalization_constant(lambda).unwrap();
        dbeta = dbeta.max((diag.beta_root - diag.beta_dual).abs());
    }
    let c4 = if gap < 1e-8 { Ok(format!("max gap {gap:.2e}")) } else { Err(format!("max gap {gap:.2e}")) };
    let c5 = if dbeta <= 1e-9 { Ok(format!("max |Δβ| {dbeta:.2e}")) } else { Err(format!("max |Δβ| {dbeta:.2e}")) };
    (c4, c5)
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for gen in [DivergenceGenerator::kl(), DivergenceGenerator::reverse_kl(), DivergenceGenerator::hellinger_sq()] {
        let m = rng.gen_range(2..=8);
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 4.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(gen, &s, &t).unwrap();
        for _ in 0..5 {
            let lambda = random_admissible(&mut rng, &p);
            let dn = p.normalization_derivative(lambda).map_err(|e| e.to_string())?;
            let h = 1e-5 * lambda;
            let n = |x: f64| {
                if gen.is_kl() {
                    Ok(kl_normalization(&q, &l, x))
                } else {
                    p.normalization_constant(x).map(|r| r.0).map_err(|e| e.to_string())
                }
            };
            let fd = (n(lambda + h)? - n(lambda - h)?) / (2.0 * h);
            let rel = (dn - fd).abs() / fd.abs();
            worst = worst.max(rel);
            if rel >= 1e-4 {
                return Err(format!("{gen} at λ={lambda}: dN={dn} fd={fd}"));
            }
        }
    }
    Ok(format!("15 points, max relative error {worst:.2e}"))
}

fn criterion_7() -> Verdict {
    let grid = log_grid(0.25, 8.0, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    let mut sweeps = 0;
    for gen in catalog() {
        for _ in 0..3 {
            let m = rng.gen_range(2..=6);
            let q = random_weights(&mut rng, m);
            let l = random_losses(&mut rng, m, 3.0);
            let (s, t) = (support(&q), table(&l));
            let p = FdrProblem::new(gen, &s, &t).unwrap();
            let recs = p.sweep(&grid).map_err(|e| e.to_string())?;
            sweeps += 1;
            let ns: Vec<(f64, f64)> = recs.iter().filter(|r| r.admissible).map(|r| (r.lambda, r.n)).collect();
            if let Some(w) = ns.windows(2).find(|w| w[1].1 - w[0].1 < -MONOTONE_SLACK) {
                violations.push(format!("{gen}: N({:.3})={:.6} > N({:.3})={:.6}", w[0].0, w[0].1, w[1].0, w[1].1));
                break;
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("{sweeps} sweeps nondecreasing"))
    } else {
        Err(format!("{} generators decrease, e.g. {}", violations.len(), violations[0]))
    }
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gens = catalog();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let gen = gens[k % gens.len()];
        let m = rng.gen_range(2..=8);
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 4.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(gen, &s, &t).unwrap();
        let lambda = random_admissible(&mut rng, &p);
        let post = p.posterior(lambda).map_err(|e| e.to_string())?;
        let res = brute_force_regularized(&gen, &s, &t, lambda, &MirrorDescentOptions::default(), None)
            .map_err(|e| format!("{gen}: {e}"))?;
        let tv = total_variation(&res.weights, &post.weights);
        worst = worst.max(tv);
        if tv > 1e-4 {
            return Err(format!("{gen} on {m} atoms: TV {tv:e}"));
        }
    }
    Ok(format!("20 instances, max TV {worst:.2e}"))
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gens = [
        DivergenceGenerator::chi_squared(),
        DivergenceGenerator::kl(),
        DivergenceGenerator::hellinger_sq(),
        DivergenceGenerator::reverse_kl(),
        DivergenceGenerator::alpha(0.5).unwrap(),
    ];
    let (mut dr, mut dc): (f64, f64) = (0.0, 0.0);
    for (k, gen) in gens.into_iter().enumerate() {
        let m = 3 + k % 2;
        let q = random_weights(&mut rng, m);
        let l = random_losses(&mut rng, m, 3.0);
        let (s, t) = (support(&q), table(&l));
        let p = FdrProblem::new(gen, &s, &t).unwrap();
        let lambda = random_admissible(&mut rng, &p);
        let post = p.posterior(lambda).map_err(|e| e.to_string())?;
        let eta = divergence(&gen, &q, &post.weights);
        let res = brute_force_constrained(&gen, &s, &t, eta, None).map_err(|e| format!("{gen}: {e}"))?;
        let risk_gap = (res.risk - expect(&post.weights, &l)).abs();
        let slack = (res.divergence - eta).abs();
        dr = dr.max(risk_gap);
        dc = dc.max(slack);
        if risk_gap > 1e-4 || slack > 1e-4 {
            return Err(format!("{gen}: risk gap {risk_gap:e}, constraint slack {slack:e}"));
        }
    }
    Ok(format!("5 instances, max risk gap {dr:.2e}, max slack {dc:.2e}"))
}

fn criterion_10() -> Verdict {
    let sigma = 1.0 / (1.0 + (-1f64).exp());
    let reference = sigma - 0.5;
    let q = support(&[0.5, 0.5]);
    let law = TabulatedLaw::new(
        vec!["z1".into(), "z2".into()],
        vec![0.5, 0.5],
        vec![table(&[0.0, 1.0]), table(&[1.0, 0.0])],
    )
    .unwrap();
    let rep = generalization_report(&DivergenceGenerator::kl(), 1.0, &q, &law, None).map_err(|e| e.to_string())?;
    for (name, v) in rep.routes() {
        let v = v.ok_or(format!("route {name} missing"))?;
        if (v - reference).abs() > 1e-9 {
            return Err(format!("reference world {name}={v}, expected {reference}"));
        }
    }
    if (reference - 0.2310586).abs() > 1e-7 {
        return Err(format!("reference value {reference}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let gen = if k % 2 == 0 { DivergenceGenerator::kl() } else { DivergenceGenerator::chi_squared() };
        let m = rng.gen_range(2..=4);
        let d = rng.gen_range(2..=4);
        let w = random_weights(&mut rng, m);
        let probs = random_weights(&mut rng, d);
        let tables: Vec<Vec<f64>> = (0..d).map(|_| random_losses(&mut rng, m, 3.0)).collect();
        let s = support(&w);
        let mut lambda: f64 = 0.0;
        for l in &tables {
            let t = table(l);
            lambda = lambda.max(FdrProblem::new(gen, &s, &t).unwrap().lambda_star().unwrap());
        }
        lambda = lambda * 1.5 + rng.gen_range(0.1..2.0);
        let ids = (0..d).map(|z| format!("z{z}")).collect();
        let law = TabulatedLaw::new(ids, probs.clone(), tables.iter().map(|l| table(l)).collect()).unwrap();
        let rep = generalization_report(&gen, lambda, &s, &law, None).map_err(|e| e.to_string())?;
        let conditionals: Vec<Vec<f64>> = tables
            .iter()
            .map(|l| if gen.is_kl() { softmax(&w, l, lambda) } else { chi_squared_posterior(&w, l, lambda) })
            .collect();
        let independent = direct_generalization_error(&probs, &tables, &conditionals);
        let mut spread = rep.max_disagreement();
        for (_, v) in rep.routes() {
            if let Some(v) = v {
                spread = spread.max((v - independent).abs());
            }
        }
        worst = worst.max(spread);
        if spread > 1e-9 {
            return Err(format!("{gen} world {k}: spread {spread:e}"));
        }
    }
    Ok(format!("reference {reference:.7}, 10 random worlds, max spread {worst:.2e}"))
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..6 {
        let m = rng.gen_range(1..=5);
        let d = rng.gen_range(1..=4);
        let w = random_weights(&mut rng, m);
        let s = support(&w);
        let probs = random_weights(&mut rng, d);
        let tables: Vec<LossTable> = (0..d).map(|_| table(&random_losses(&mut rng, m, 3.0))).collect();
        let law = TabulatedLaw::new((0..d).map(|z| format!("z{z}")).collect(), probs, tables).unwrap();

        let fixed = random_weights(&mut rng, m);
        let alg = StochasticAlgorithm::data_independent(fixed, d).unwrap();
        let direct = generalization_error_direct(&alg, &law).map_err(|e| e.to_string())?.value;
        let t5 = generalization_error_theorem5(&alg, &law, &DivergenceGenerator::kl(), 5.0, &s)
            .map_err(|e| e.to_string())?;
        if direct != 0.0 || t5 != 0.0 {
            return Err(format!("data-independent world {k}: direct={direct:e} theorem5={t5:e}"));
        }

        let c = rng.gen_range(0.0..3.0);
        let constant = table(&vec![c; m]);
        for gen in catalog() {
            let p = FdrProblem::new(gen, &s, &constant).unwrap();
            let post = p.posterior(rng.gen_range(0.1..5.0)).map_err(|e| e.to_string())?;
            if post.weights != s.weights() {
                return Err(format!("{gen}: constant loss posterior differs from Q"));
            }
        }
        let flat = TabulatedLaw::new(
            (0..d).map(|z| format!("z{z}")).collect(),
            random_weights(&mut rng, d),
            vec![constant.clone(); d],
        )
        .unwrap();
        let single =
            TabulatedLaw::new(vec!["only".into()], vec![1.0], vec![table(&random_losses(&mut rng, m, 3.0))]).unwrap();
        for (what, law) in [("constant-loss", &flat), ("single-dataset", &single)] {
            for gen in [DivergenceGenerator::kl(), DivergenceGenerator::chi_squared()] {
                let star = FdrProblem::new(gen, &s, &law.tables()[0]).unwrap().lambda_star().unwrap();
                let rep = generalization_report(&gen, star + 1.0, &s, law, None).map_err(|e| e.to_string())?;
                if rep.direct != 0.0 {
                    return Err(format!("{what} world {k} ({gen}): direct={:e}", rep.direct));
                }
                if let Some((name, v)) = rep.routes().into_iter().find(|(_, v)| v.is_some_and(|v| v.abs() > 1e-12)) {
                    return Err(format!("{what} world {k} ({gen}): {name}={v:?}"));
                }
            }
        }
    }
    Ok("6 worlds, exact zeros".into())
}

fn criterion_12() -> Verdict {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_fdr"))
            .args(["verify", "--seed", "12"])
            .current_dir(dir.path())
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    if a.status.code() != Some(0) {
        return Err(format!("verify exited with {:?}", a.status.code()));
    }
    if a.stdout != b.stdout {
        return Err("reports differ between runs".into());
    }
    Ok(format!("{} identical report bytes", a.stdout.len()))
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let (c4, c5) = criteria_4_5();
    let results: Vec<(u32, &str, Verdict)> = vec![
        (1, "conjugate conformance", criterion_1()),
        (2, "kl closed form", criterion_2()),
        (3, "chi-squared closed form", criterion_3()),
        (4, "zero duality gap", c4),
        (5, "dual minimizer equals normalization", c5),
        (6, "normalization sensitivity", criterion_6()),
        (7, "normalization monotonicity", criterion_7()),
        (8, "regularized oracle equivalence", criterion_8()),
        (9, "constrained equivalence", criterion_9()),
        (10, "generalization-error routes", criterion_10()),
        (11, "degenerate cases", criterion_11()),
        (12, "verify determinism", criterion_12()),
    ];
    let mut failed = Vec::new();
    for (n, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n:>2} {name}: PASS ({detail})"),
            Err(detail) => {
                println!("criterion {n:>2} {name}: FAIL ({detail})");
                failed.push(*n);
            }
        }
    }
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
