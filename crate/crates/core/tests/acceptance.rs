//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};

use born_lab::born::{
    compare_with_outcomes, consistency_residual, macro_micro_test, uniqueness_scan,
    ProbabilityRule, Verdict,
};
use born_lab::ensemble::{sum_distribution, ProductEnsemble};
use born_lab::hilbert::{
    decompose, expectation, random_instance, uncertainty, Observable, StateVector,
};
use born_lab::measurement::{
    evolve_joint, orthogonal_weight, postselect_pointer, MeasurementConfig, PostSelection,
    DEFAULT_OVERLAP_FLOOR,
};
use born_lab::pointer::{gaussian_init, PointerGrid, PointerWavefunction};
use born_lab::sweeps::{fit_power_law, run_sweep, InstanceSpec, Quantity, SweepPlan};
use born_lab::{Complex64, Error};
use common::brute_sum_distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn symmetric_qubit() -> (StateVector, Observable) {
    let h = 0.5f64.sqrt();
    (
        StateVector::from_real(&[h, h]).unwrap(),
        Observable::new(vec![1.0, -1.0]).unwrap(),
    )
}

fn biased_qubit() -> (StateVector, Observable) {
    (
        StateVector::from_real(&[0.3f64.sqrt(), 0.7f64.sqrt()]).unwrap(),
        Observable::new(vec![2.0, 5.0]).unwrap(),
    )
}

fn unit_pointer() -> PointerWavefunction {
    gaussian_init(PointerGrid::for_sigma(1.0).unwrap(), 0.0, 1.0).unwrap()
}

fn doubling_counts() -> Vec<usize> {
    (0..8).map(|k| 25 << k).collect()
}

fn decomposition_identity() -> Outcome {
    let mut worst_residual = 0.0f64;
    let mut worst_overlap = 0.0f64;
    for seed in 0..1000u64 {
        let dim = 2 + (seed % 15) as usize;
        let (psi, a) = random_instance(dim, seed).map_err(|e| e.to_string())?;
        let dec = decompose(&psi, &a).map_err(|e| e.to_string())?;
        worst_residual = worst_residual.max(dec.reconstruction_residual(&psi, &a).unwrap());
        worst_overlap = worst_overlap.max(dec.orthogonality(&psi).unwrap());
    }
    check(
        worst_residual <= 1e-10 && worst_overlap <= 1e-10,
        format!("1000 instances, max residual {worst_residual:.2e}, max |<psi|perp>| {worst_overlap:.2e}"),
    )
}

fn collective_moments() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut cases = 0;
    for dim in 1..=4usize {
        let max_count = if dim == 4 { 200 } else { 400 };
        for count in [1, 2, 3, 7, 25, 100, 200, 400]
            .into_iter()
            .filter(|&n| n <= max_count)
        {
            for seed in 0..3u64 {
                let (psi, a) = random_instance(dim, 1000 * dim as u64 + seed).unwrap();
                let ens = ProductEnsemble::new(psi.clone(), count).unwrap();
                let dist = sum_distribution(&ens, &a, &ProbabilityRule::Born)
                    .map_err(|e| e.to_string())?;
                let n = count as f64;
                let mean = n * expectation(&psi, &a).unwrap();
                let var = n * uncertainty(&psi, &a).unwrap().powi(2);
                worst_rel = worst_rel
                    .max((dist.mean() - mean).abs() / mean.abs().max(1.0))
                    .max((dist.variance() - var).abs() / var.abs().max(1.0));
                cases += 1;
            }
        }
    }
    // d = 4 at N = 400 needs C(403, 3) > 10^7 compositions and must be refused
    let (psi, a) = random_instance(4, 0).unwrap();
    let refused = matches!(
        sum_distribution(
            &ProductEnsemble::new(psi, 400).unwrap(),
            &a,
            &ProbabilityRule::Born
        ),
        Err(Error::EnumerationBudget { .. })
    );

    let mut worst_brute = 0.0f64;
    for dim in 1..=4usize {
        for count in (1..=16 / dim).take(8) {
            let (psi, a) = random_instance(dim, 77 + (dim * 16 + count) as u64).unwrap();
            let ens = ProductEnsemble::new(psi.clone(), count).unwrap();
            let dist = sum_distribution(&ens, &a, &ProbabilityRule::Born).unwrap();
            let brute = brute_sum_distribution(&a.weights(&psi).unwrap(), a.eigenvalues(), count);
            if brute.len() != dist.len() {
                return Err(format!(
                    "d={dim} N={count}: {} vs {} support points",
                    dist.len(),
                    brute.len()
                ));
            }
            for (entry, (value, prob)) in dist.entries().iter().zip(&brute) {
                worst_brute = worst_brute
                    .max((entry.value - value).abs())
                    .max((entry.prob - prob).abs());
            }
        }
    }
    check(
        worst_rel <= 1e-9 && worst_brute <= 1e-12 && refused,
        format!(
            "{cases} cases, max relative moment error {worst_rel:.2e}; brute-force max deviation {worst_brute:.2e}; d=4 N=400 refused: {refused}"
        ),
    )
}

fn orthogonal_scaling() -> Outcome {
    let (state, observable) = symmetric_qubit();
    let plan = SweepPlan::new(
        InstanceSpec::Explicit {
            state: state.clone(),
            observable: observable.clone(),
        },
        doubling_counts(),
        vec![Quantity::OrthogonalWeight],
    );
    let table = run_sweep(&plan).map_err(|e| e.to_string())?;
    let fit = fit_power_law(&table, "orthogonal_weight").map_err(|e| e.to_string())?;

    let count = 10_000;
    let cfg = MeasurementConfig::new(1.0, 1.0, count).unwrap();
    let ens = ProductEnsemble::new(state, count).unwrap();
    let ev = evolve_joint(&ens, &observable, &cfg, &unit_pointer()).unwrap();
    let ratio = orthogonal_weight(&ev) / ev.leading_order_weight();
    check(
        (fit.slope + 1.0).abs() <= 0.15 && (ratio - 1.0).abs() <= 0.05,
        format!(
            "slope {:.4} (r2 {:.6}), W/leading at N=10^4 = {ratio:.6}",
            fit.slope, fit.r2
        ),
    )
}

fn pointer_shift() -> Outcome {
    let mut worst_shift = 0.0f64;
    let mut slope = f64::NAN;
    for (label, (state, observable)) in
        [("symmetric", symmetric_qubit()), ("biased", biased_qubit())]
    {
        let expected = expectation(&state, &observable).unwrap();
        let plan = SweepPlan::new(
            InstanceSpec::Explicit { state, observable },
            doubling_counts(),
            vec![Quantity::PointerMean, Quantity::Infidelity],
        );
        let table = run_sweep(&plan).map_err(|e| e.to_string())?;
        for (n, shift) in table.column("pointer_mean").unwrap() {
            let err = (shift - expected).abs();
            if err > 1e-6 {
                return Err(format!("{label}: N={n} shift {shift} vs {expected}"));
            }
            worst_shift = worst_shift.max(err);
        }
        if label == "symmetric" {
            slope = fit_power_law(&table, "infidelity")
                .map_err(|e| e.to_string())?
                .slope;
        }
    }
    check(
        (slope + 1.0).abs() <= 0.15,
        format!("max |shift - lambda tau A| {worst_shift:.2e}; infidelity slope {slope:.4}"),
    )
}

fn perturbed_posts(psi: &StateVector, count: usize, epsilon: f64, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let amps: Vec<Complex64> = psi
                .amplitudes()
                .iter()
                .map(|b| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    b + epsilon * Complex64::new(re, im)
                })
                .collect();
            StateVector::normalized(amps).unwrap()
        })
        .collect()
}

fn postselected_deviation(
    post: &PostSelection,
    psi: &StateVector,
    a: &Observable,
    count: usize,
) -> born_lab::Result<f64> {
    let w = unit_pointer();
    let cfg = MeasurementConfig::new(1.0, 1.0, count)?;
    let ens = ProductEnsemble::new(psi.clone(), count)?;
    let ev = evolve_joint(&ens, a, &cfg, &w)?;
    let density = postselect_pointer(&ev, post, DEFAULT_OVERLAP_FLOOR)?;
    Ok((density.mean() - ev.initial_mean() - ev.mean()).abs())
}

fn postselection_invariance() -> Outcome {
    let (psi, a) = biased_qubit();
    let bound = 1e-2 * uncertainty(&psi, &a).unwrap();
    let counts = [25, 50, 100, 200, 400];

    let exact: Vec<f64> = counts
        .iter()
        .map(|&n| postselected_deviation(&PostSelection::Uniform(psi.clone()), &psi, &a, n))
        .collect::<born_lab::Result<_>>()
        .map_err(|e| e.to_string())?;
    let exact_ok = exact.windows(2).all(|w| w[1] < w[0]) && exact[exact.len() - 1] <= bound;

    let epsilon = 0.05;
    let perturbed_counts = [25, 100, 400];
    let mut rms = Vec::new();
    let mut worst_at_400 = 0.0f64;
    for &n in &perturbed_counts {
        let mut sum_sq = 0.0;
        for seed in 0..10u64 {
            let post = PostSelection::PerParticle(perturbed_posts(&psi, n, epsilon, seed));
            let dev = postselected_deviation(&post, &psi, &a, n)
                .map_err(|e| format!("N={n} seed {seed}: {e}"))?;
            sum_sq += dev * dev;
            if n == 400 {
                worst_at_400 = worst_at_400.max(dev);
            }
        }
        rms.push((sum_sq / 10.0).sqrt());
    }
    let perturbed_ok = rms.windows(2).all(|w| w[1] < w[0]) && worst_at_400 <= bound;
    let fmt = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.2e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(
        exact_ok && perturbed_ok,
        format!(
            "post=psi deviations [{}]; perturbed rms [{}], worst at N=400 {worst_at_400:.2e} (bound {bound:.2e})",
            fmt(&exact),
            fmt(&rms)
        ),
    )
}

fn born_consistency() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let dim = 1 + (seed % 16) as usize;
        let (psi, a) = random_instance(dim, seed).unwrap();
        worst = worst.max(consistency_residual(&ProbabilityRule::Born, &psi, &a).unwrap());
    }
    let mut exhibits = Vec::new();
    for rule in [
        ProbabilityRule::AbsAmplitude,
        ProbabilityRule::Quartic,
        ProbabilityRule::Uniform,
    ] {
        let found = (0..100u64).find_map(|seed| {
            let (psi, a) = random_instance(3, seed).ok()?;
            let r = consistency_residual(&rule, &psi, &a).ok()?;
            (r >= 0.1).then_some((seed, r))
        });
        match found {
            Some((seed, r)) => exhibits.push(format!("{rule}: seed {seed} residual {r:.3}")),
            None => {
                return Err(format!(
                    "no seeded instance with residual >= 0.1 for {rule}"
                ))
            }
        }
    }

    type ScanCase = (Vec<f64>, Vec<Vec<f64>>, f64);
    let scan_cases: [ScanCase; 2] = [
        (vec![0.3, 0.7], vec![vec![2.0, 5.0]], 0.01),
        (
            vec![0.2, 0.3, 0.5],
            vec![vec![2.0, 5.0, -1.0], vec![0.0, 1.0, 3.0]],
            0.02,
        ),
    ];
    for (born, spectra, step) in scan_cases {
        let amps: Vec<f64> = born.iter().map(|p| p.sqrt()).collect();
        let psi = StateVector::from_real(&amps).unwrap();
        let hits = uniqueness_scan(&psi, &spectra, step).map_err(|e| e.to_string())?;
        let unique = hits.len() == 1
            && hits[0]
                .iter()
                .zip(&born)
                .all(|(h, b)| (h - b).abs() <= 1e-12);
        if !unique {
            return Err(format!(
                "scan d={} step {step} returned {hits:?}",
                born.len()
            ));
        }
    }
    check(
        worst <= 1e-12,
        format!(
            "born max residual {worst:.2e}; {}; scans unique at d=2 and d=3",
            exhibits.join(", ")
        ),
    )
}

fn macro_micro() -> Outcome {
    let (psi, a) = biased_qubit();
    let count = 10_000;
    let cfg = MeasurementConfig::new(1.0, 1.0, count).unwrap();
    let w = unit_pointer();
    let reference = macro_micro_test(&ProbabilityRule::Born, &psi, &a, &cfg, &w, 0)
        .map_err(|e| e.to_string())?;
    let macro_mean = reference.macro_mean;

    let mut born_false = 0;
    let mut abs_detected = 0;
    for seed in 0..100u64 {
        let born = compare_with_outcomes(
            &ProbabilityRule::Born,
            &psi,
            &a,
            count as u64,
            macro_mean,
            seed,
        )
        .unwrap();
        if seed == 0 && born != reference {
            return Err("seed 0 report differs from the full macro/micro run".into());
        }
        if born.verdict == Verdict::Inconsistent {
            born_false += 1;
        }
        let abs = compare_with_outcomes(
            &ProbabilityRule::AbsAmplitude,
            &psi,
            &a,
            count as u64,
            macro_mean,
            seed,
        )
        .unwrap();
        if abs.verdict == Verdict::Inconsistent {
            abs_detected += 1;
        }
    }
    check(
        born_false <= 1 && abs_detected >= 99,
        format!("macro mean {macro_mean:.9}; born inconsistent {born_false}/100; abs_amplitude inconsistent {abs_detected}/100"),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_born-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    let artifact = std::fs::read(out).map_err(|e| e.to_string())?;
    Ok((output.stdout, artifact))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let invocations: [&[&str]; 6] = [
        &["decompose", "--dim", "5", "--seed", "3"],
        &["decompose", "--dim", "4", "--seed", "8", "--format", "json"],
        &[
            "evolve",
            "--state",
            "[[0.5477225575051661,0],[0.8366600265340756,0]]",
            "--eigenvalues",
            "2,5",
            "--particles",
            "200",
        ],
        &[
            "sweep",
            "--dim",
            "3",
            "--seed",
            "2",
            "--particles",
            "25,50,100,200",
            "--quantities",
            "orthogonal_weight,infidelity,pointer_mean,macro_micro",
        ],
        &[
            "sweep",
            "--dim",
            "2",
            "--seed",
            "4",
            "--particles",
            "25,50,100",
            "--format",
            "json",
        ],
        &[
            "born-check",
            "--dim",
            "2",
            "--seed",
            "6",
            "--particles",
            "2000",
            "--rule",
            "quartic",
        ],
    ];
    for (k, args) in invocations.iter().enumerate() {
        let first = run_cli(args, &dir.path().join(format!("a{k}")))?;
        let second = run_cli(args, &dir.path().join(format!("b{k}")))?;
        if first != second {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    Ok(format!(
        "{} invocations byte-identical in stdout and artifact",
        invocations.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("decomposition identity", decomposition_identity),
        ("collective moments", collective_moments),
        ("orthogonal-branch scaling", orthogonal_scaling),
        ("pointer shift", pointer_shift),
        ("post-selection invariance", postselection_invariance),
        ("born consistency", born_consistency),
        ("macro/micro test", macro_micro),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, criterion)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}; {secs:.1}s)", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} [{name}]: FAIL ({detail}; {secs:.1}s)", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
