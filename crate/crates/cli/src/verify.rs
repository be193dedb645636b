//! Seeded randomized property harness.
//!
//! Every instance draws a generator, a finite reference measure, a loss table
//! and an admissible factor, plus a small finite world for the
//! generalization-error routes. Instances are serializable so a failure can
//! be replayed from JSON.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fdr_core::divergence::{catalog, check_generator, log_grid};
use fdr_core::generr::{generalization_report, ROUTE_TOLERANCE};
use fdr_core::oracle::{brute_force_regularized, total_variation, MirrorDescentOptions, MAX_REGULARIZED_ATOMS};
use fdr_core::{Atom, DivergenceGenerator, FdrProblem, LossTable, ModelSupport, TabulatedLaw};

pub const FENCHEL_TOLERANCE: f64 = 1e-9;
pub const GAP_TOLERANCE: f64 = 1e-8;
pub const BETA_TOLERANCE: f64 = 1e-9;
pub const ORACLE_TV_TOLERANCE: f64 = 1e-4;
/// Relative part of the finite-difference bound on `dN/dλ`.
pub const SENSITIVITY_RELATIVE: f64 = 1e-4;
/// Absolute floor of the same bound, for derivatives near zero.
pub const SENSITIVITY_ABSOLUTE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyCaps {
    pub instances: usize,
    pub atoms: usize,
    pub datasets: usize,
}

impl Default for VerifyCaps {
    fn default() -> Self {
        Self { instances: 24, atoms: 8, datasets: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub lambda: f64,
    pub probabilities: Vec<f64>,
    pub tables: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub index: usize,
    pub divergence: String,
    pub weights: Vec<f64>,
    pub losses: Vec<f64>,
    pub lambda: f64,
    pub world: World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub property: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub text: String,
    pub passed: usize,
    pub failed: usize,
    pub failures: Vec<Instance>,
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn support_of(weights: &[f64]) -> fdr_core::Result<ModelSupport> {
    let atoms = (0..weights.len()).map(|i| Atom::named(format!("m{i}"))).collect();
    ModelSupport::finite(atoms, weights.to_vec())
}

/// Admissible factor strictly above every `λ*` of the given tables.
fn admissible_lambda(
    rng: &mut ChaCha8Rng,
    gen: DivergenceGenerator,
    support: &ModelSupport,
    tables: &[Vec<f64>],
) -> fdr_core::Result<f64> {
    let mut star: f64 = 0.0;
    for t in tables {
        let loss = LossTable::new(t.clone())?;
        star = star.max(FdrProblem::new(gen, support, &loss)?.lambda_star()?);
    }
    Ok(star * rng.gen_range(1.1..2.0) + rng.gen_range(0.1..2.0))
}

/// Draws the instances for `seed` under `caps`.
pub fn generate(seed: u64, caps: &VerifyCaps) -> fdr_core::Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens = catalog();
    let mut out = Vec::with_capacity(caps.instances);
    for index in 0..caps.instances {
        let gen = gens[rng.gen_range(0..gens.len())];
        let m = rng.gen_range(1..=caps.atoms.max(1));
        let weights = normalized((0..m).map(|_| rng.gen_range(0.05..1.0)).collect());
        let losses: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
        let support = support_of(&weights)?;
        let lambda = admissible_lambda(&mut rng, gen, &support, std::slice::from_ref(&losses))?;

        let d = rng.gen_range(1..=caps.datasets.max(1));
        let probabilities = normalized((0..d).map(|_| rng.gen_range(0.05..1.0)).collect());
        let tables: Vec<Vec<f64>> = (0..d).map(|_| (0..m).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
        let world_lambda = admissible_lambda(&mut rng, gen, &support, &tables)?;
        out.push(Instance {
            index,
            divergence: gen.to_string(),
            weights,
            losses,
            lambda,
            world: World { lambda: world_lambda, probabilities, tables },
        });
    }
    Ok(out)
}

fn outcome(property: &'static str, res: Result<String, String>) -> PropertyOutcome {
    match res {
        Ok(detail) => PropertyOutcome { property, passed: true, detail },
        Err(detail) => PropertyOutcome { property, passed: false, detail },
    }
}

fn check_conjugate(gen: &DivergenceGenerator) -> Result<String, String> {
    let report = check_generator(gen, &log_grid(1e-2, 1e2, 50));
    let fenchel = report.max_fenchel_residual();
    if report.passed() && fenchel < FENCHEL_TOLERANCE {
        Ok(format!("fenchel={fenchel:.3e}"))
    } else {
        Err(format!("conformance failed, fenchel={fenchel:.3e}"))
    }
}

fn check_duality(problem: &FdrProblem, lambda: f64) -> Result<String, String> {
    let post = problem.posterior(lambda).map_err(|e| e.to_string())?;
    let gap = problem.duality_gap(&post);
    let (_, diag) = problem.normalization_constant(lambda).map_err(|e| e.to_string())?;
    let dbeta = (diag.beta_root - diag.beta_dual).abs();
    if gap < GAP_TOLERANCE && dbeta <= BETA_TOLERANCE {
        Ok(format!("gap={gap:.3e} dbeta={dbeta:.3e}"))
    } else {
        Err(format!("gap={gap:.3e} dbeta={dbeta:.3e}"))
    }
}

fn check_oracle(problem: &FdrProblem, lambda: f64) -> Result<String, String> {
    if problem.support().len() > MAX_REGULARIZED_ATOMS {
        return Ok("skipped".into());
    }
    let post = problem.posterior(lambda).map_err(|e| e.to_string())?;
    let res = brute_force_regularized(
        &problem.generator(),
        problem.support(),
        problem.loss(),
        lambda,
        &MirrorDescentOptions::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    let tv = total_variation(&res.weights, &post.weights);
    if tv <= ORACLE_TV_TOLERANCE {
        Ok(format!("tv={tv:.3e}"))
    } else {
        Err(format!("tv={tv:.3e}"))
    }
}

/// Closed-form `dN/dλ` against a central difference with step `10⁻⁵λ`.
pub fn check_sensitivity(problem: &FdrProblem, lambda: f64) -> Result<String, String> {
    let dn = problem.normalization_derivative(lambda).map_err(|e| e.to_string())?;
    let h = 1e-5 * lambda;
    let up = problem.normalization_constant(lambda + h).map_err(|e| e.to_string())?.0;
    let down = problem.normalization_constant(lambda - h).map_err(|e| e.to_string())?.0;
    let fd = (up - down) / (2.0 * h);
    let err = (dn - fd).abs();
    let detail = format!("dN={dn:.6e} fd={fd:.6e}");
    if err <= SENSITIVITY_RELATIVE * dn.abs() + SENSITIVITY_ABSOLUTE {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check_routes(gen: &DivergenceGenerator, support: &ModelSupport, world: &World) -> Result<String, String> {
    let tables = world
        .tables
        .iter()
        .enumerate()
        .map(|(z, t)| LossTable::for_dataset(t.clone(), format!("z{z}")))
        .collect::<fdr_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let ids = (0..tables.len()).map(|z| format!("z{z}")).collect();
    let law = TabulatedLaw::new(ids, world.probabilities.clone(), tables).map_err(|e| e.to_string())?;
    let report = generalization_report(gen, world.lambda, support, &law, None).map_err(|e| e.to_string())?;
    let worst = report.max_disagreement();
    let detail = format!("ge={:.9e} spread={worst:.3e}", report.direct);
    if report.routes_agree(ROUTE_TOLERANCE) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs the whole property suite on one instance.
pub fn check_instance(inst: &Instance) -> Vec<PropertyOutcome> {
    let gen: DivergenceGenerator = match inst.divergence.parse() {
        Ok(g) => g,
        Err(e) => return vec![outcome("instance", Err(e.to_string()))],
    };
    let setup = support_of(&inst.weights).and_then(|s| LossTable::new(inst.losses.clone()).map(|l| (s, l)));
    let (support, loss) = match setup {
        Ok(v) => v,
        Err(e) => return vec![outcome("instance", Err(e.to_string()))],
    };
    let problem = match FdrProblem::new(gen, &support, &loss) {
        Ok(p) => p,
        Err(e) => return vec![outcome("instance", Err(e.to_string()))],
    };
    vec![
        outcome("conjugate", check_conjugate(&gen)),
        outcome("duality_gap", check_duality(&problem, inst.lambda)),
        outcome("oracle_tv", check_oracle(&problem, inst.lambda)),
        outcome("sensitivity", check_sensitivity(&problem, inst.lambda)),
        outcome("generr_routes", check_routes(&gen, &support, &inst.world)),
    ]
}

/// Checks every instance and renders the report text. Output depends only on
/// the instances.
pub fn run_instances(instances: &[Instance]) -> VerifyReport {
    let mut text = String::new();
    let mut passed = 0;
    let mut failed = 0;
    let mut failures = Vec::new();
    for inst in instances {
        let outcomes = check_instance(inst);
        let mut any_failed = false;
        for o in &outcomes {
            let verdict = if o.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(
                text,
                "instance={} divergence={} atoms={} property={} {verdict} {}",
                inst.index,
                inst.divergence,
                inst.weights.len(),
                o.property,
                o.detail
            );
            if o.passed {
                passed += 1;
            } else {
                failed += 1;
                any_failed = true;
            }
        }
        if any_failed {
            failures.push(inst.clone());
        }
    }
    let _ = writeln!(text, "passed={passed} failed={failed}");
    VerifyReport { text, passed, failed, failures }
}

pub fn run_seeded(seed: u64, caps: &VerifyCaps) -> fdr_core::Result<VerifyReport> {
    let instances = generate(seed, caps)?;
    let mut report = run_instances(&instances);
    report.text = format!(
        "seed={seed} instances={} max_atoms={} max_datasets={}\n{}",
        caps.instances, caps.atoms, caps.datasets, report.text
    );
    Ok(report)
}
