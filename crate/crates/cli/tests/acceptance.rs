//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every check compares the library or the binary against values computed
//! here from first principles (direct index sums over small matrices), never
//! against the library's own derived quantities.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steerdim::analysis::{degenerate_analysis, nosignaling_residual, span_rank, usd_feasible};
use steerdim::harness::{parse_report, run_once, MeasurementSpec, ScenarioConfig, StateSpec};
use steerdim::quantum::{random_density, random_pure_state, random_two_outcome};
use steerdim::{
    analyze, run_preparation, BranchLabel, Complex64, PreparationScenario, PureState, Tolerances,
    TwoOutcomeMeasurement,
};

type C = Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_steerdim")
}

fn run_binary(args: &[&str]) -> std::process::Output {
    let out = Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "steerdim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn vdot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `ρ_B = Σ_a ρ[(a,b),(a,b')]`, by direct summation.
fn oracle_partial_trace(rho: &steerdim::ComplexMatrix, dim_a: usize, dim_b: usize) -> Vec<Vec<C>> {
    let mut out = vec![vec![C::new(0.0, 0.0); dim_b]; dim_b];
    for a in 0..dim_a {
        for b in 0..dim_b {
            for bp in 0..dim_b {
                out[b][bp] += rho[(a * dim_b + b, a * dim_b + bp)];
            }
        }
    }
    out
}

/// Unnormalized steered vector `Σ_a conj(χ_a) Ψ_{ab}`.
fn oracle_steer(psi: &[C], chi: &[C], dim_b: usize) -> Vec<C> {
    (0..dim_b)
        .map(|b| {
            chi.iter()
                .enumerate()
                .map(|(a, x)| x.conj() * psi[a * dim_b + b])
                .sum()
        })
        .collect()
}

fn criterion_1(dir: &Path) -> Outcome {
    let scenario = write_file(
        dir,
        "ideal.yaml",
        "state: bell\nmeasurements: [computational, hadamard]\n",
    );
    let out = dir.join("ideal_report.yaml");
    let start = Instant::now();
    run_binary(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    let doc = parse_report(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let max_dp = doc
        .probabilities
        .iter()
        .flatten()
        .map(|p| (p - 0.5).abs())
        .fold(0.0, f64::max);
    let fids: Vec<f64> = doc
        .report
        .bb84_fidelities
        .map(|f| f.iter().map(|x| x.unwrap_or(0.0)).collect())
        .unwrap_or_default();
    let min_f = fids.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        max_dp <= 1e-12
            && fids.len() == 4
            && min_f >= 1.0 - 1e-12
            && elapsed < Duration::from_secs(1),
        format!("max |p-0.5| = {max_dp:.1e}, min fidelity = {min_f:.15}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let dims = [2, 3, 4];
    let mut trials = 0;
    let mut max_residual: f64 = 0.0;
    let mut max_oracle_dev: f64 = 0.0;
    for &dim_a in &dims {
        for &dim_b in &dims {
            for _ in 0..112 {
                let rank = rng.random_range(1..=dim_a * dim_b);
                let rho = random_density(dim_a * dim_b, rank, &mut rng).unwrap();
                let m0 = random_two_outcome(dim_a, &mut rng).unwrap();
                let m1 = random_two_outcome(dim_a, &mut rng).unwrap();
                let oracle = oracle_partial_trace(rho.matrix(), dim_a, dim_b);
                let ensemble =
                    run_preparation(&PreparationScenario::new(rho, m0, m1).unwrap()).unwrap();
                max_residual = max_residual.max(nosignaling_residual(&ensemble).unwrap());
                for i in 0..2 {
                    let avg = ensemble.averaged(i).matrix();
                    for (r, row) in oracle.iter().enumerate() {
                        for (c, x) in row.iter().enumerate() {
                            max_oracle_dev = max_oracle_dev.max((avg[(r, c)] - x).norm());
                        }
                    }
                }
                trials += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        trials >= 1000 && max_residual <= 1e-11 && max_oracle_dev <= 1e-12 && elapsed < Duration::from_secs(30),
        format!(
            "{trials} scenarios, max residual = {max_residual:.1e}, max deviation from direct partial trace = {max_oracle_dev:.1e}, {elapsed:.2?}"
        ),
    )
}

/// Shared population for criteria 3 to 5.
struct PureTrial {
    rank: usize,
    usd: bool,
    witness_residuals: [f64; 2],
    identity_errors: [f64; 2],
    state_errors: f64,
    degenerate: bool,
}

fn pure_population(n: usize) -> (Vec<PureTrial>, Duration) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let tol = Tolerances::default();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let psi = random_pure_state(4, &mut rng).unwrap();
        let chis = [
            random_pure_state(2, &mut rng).unwrap(),
            random_pure_state(2, &mut rng).unwrap(),
        ];
        let scenario = PreparationScenario::new(
            psi.projector(),
            TwoOutcomeMeasurement::from_projector(&chis[0]),
            TwoOutcomeMeasurement::from_projector(&chis[1]),
        )
        .unwrap();
        let ensemble = run_preparation(&scenario).unwrap();
        let report = analyze(&ensemble, &tol).unwrap();

        // Independent steering: outcome 0 projects onto χ, outcome 1 onto χ⊥.
        let mut s = [[vec![], vec![]], [vec![], vec![]]];
        let mut p = [[0.0; 2]; 2];
        let mut state_errors: f64 = 0.0;
        for i in 0..2 {
            let a = chis[i].amplitudes();
            let perp = [-a[1].conj(), a[0].conj()];
            for (j, chi) in [a, &perp[..]].into_iter().enumerate() {
                let v = oracle_steer(psi.amplitudes(), chi, 2);
                p[i][j] = vnorm(&v).powi(2);
                let unit: Vec<C> = v.iter().map(|x| x / p[i][j].sqrt()).collect();
                let lib = ensemble
                    .branch(BranchLabel::new(i as u8, j as u8))
                    .conditional
                    .as_ref()
                    .unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        state_errors = state_errors
                            .max((lib.matrix()[(r, c)] - unit[r] * unit[c].conj()).norm());
                    }
                }
                s[i][j] = unit;
            }
        }
        let overlap_sq = vdot(&s[1][0], &s[1][1]).norm_sqr();
        let degenerate = 1.0 - overlap_sq < tol.degenerate_tol;

        // Σ_j p(j|0)⟨s0j|perp⟩ s0j = p(k|1)‖perp‖² s1k, with perp ⟂ the partner.
        let mut identity_errors = [0.0; 2];
        for (k, err) in identity_errors.iter_mut().enumerate() {
            let (target, partner) = (&s[1][k], &s[1][1 - k]);
            let ov = vdot(partner, target);
            let perp: Vec<C> = target
                .iter()
                .zip(partner)
                .map(|(t, q)| t - ov * q)
                .collect();
            let lhs: Vec<C> = (0..2)
                .map(|r| {
                    (0..2)
                        .map(|j| p[0][j] * vdot(&s[0][j], &perp) * s[0][j][r])
                        .sum()
                })
                .collect();
            let scale = p[1][k] * vnorm(&perp).powi(2);
            let diff: Vec<C> = lhs.iter().zip(target).map(|(l, t)| l - t * scale).collect();
            *err = vnorm(&diff);
        }

        let witnesses = report.witnesses.as_ref().unwrap();
        out.push(PureTrial {
            rank: report.span_rank.unwrap(),
            usd: report.usd_feasible.unwrap(),
            witness_residuals: [
                witnesses[0].residual.unwrap_or(f64::INFINITY),
                witnesses[1].residual.unwrap_or(f64::INFINITY),
            ],
            identity_errors,
            state_errors,
            degenerate,
        });
    }
    (out, start.elapsed())
}

fn criterion_3(pop: &[PureTrial], elapsed: Duration) -> Outcome {
    let kept: Vec<&PureTrial> = pop.iter().filter(|t| !t.degenerate).collect();
    let max_w = kept
        .iter()
        .flat_map(|t| t.witness_residuals)
        .fold(0.0, f64::max);
    let max_i = kept
        .iter()
        .flat_map(|t| t.identity_errors)
        .fold(0.0, f64::max);
    let max_s = kept.iter().map(|t| t.state_errors).fold(0.0, f64::max);
    verdict(
        kept.len() >= 500 && max_w <= 1e-9 && max_i <= 1e-9 && max_s <= 1e-10 && elapsed < Duration::from_secs(30),
        format!(
            "{} non-degenerate trials, max witness residual = {max_w:.1e}, max identity error = {max_i:.1e}, max state error = {max_s:.1e}, {elapsed:.2?}",
            kept.len()
        ),
    )
}

fn criterion_4(pop: &[PureTrial]) -> Outcome {
    let bounded = pop.iter().filter(|t| t.rank <= 2).count();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let full = (0..100)
        .filter(|_| {
            let states: Vec<PureState> = (0..4)
                .map(|_| random_pure_state(4, &mut rng).unwrap())
                .collect();
            span_rank(&states, Tolerances::default().rank_rel_tol)
                .unwrap()
                .rank
                == 4
        })
        .count();
    verdict(
        bounded == pop.len() && full >= 99,
        format!(
            "rank <= 2 in {bounded}/{} trials, negative control rank 4 in {full}/100",
            pop.len()
        ),
    )
}

fn criterion_5(pop: &[PureTrial]) -> Outcome {
    let infeasible = pop.iter().filter(|t| !t.usd).count();
    let plus = PureState::normalized(vec![C::new(FRAC_1_SQRT_2, 0.0), C::new(FRAC_1_SQRT_2, 0.0)])
        .unwrap();
    let zero = PureState::normalized(vec![C::new(1.0, 0.0), C::new(0.0, 0.0)]).unwrap();
    let control = usd_feasible(&[zero, plus], Tolerances::default().rank_rel_tol).unwrap();
    verdict(
        infeasible == pop.len() && control,
        format!(
            "usd infeasible for {infeasible}/{} quartets, control pair feasible = {control}",
            pop.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let tol = Tolerances::default();
    let mut ok = 0;
    let mut max_theta_err: f64 = 0.0;
    for k in 0..20 {
        let a = random_pure_state(2, &mut rng).unwrap().into_amplitudes();
        let b = random_pure_state(2, &mut rng).unwrap().into_amplitudes();
        let config = ScenarioConfig {
            state: StateSpec::Product { a, b: b.clone() },
            measurements: [
                MeasurementSpec::Tilted {
                    alpha: rng.random_range(0.0..PI),
                },
                MeasurementSpec::Tilted {
                    alpha: rng.random_range(0.0..PI),
                },
            ],
            ..ScenarioConfig::ideal()
        };
        let report = run_once(&config).unwrap().report;
        let identical = report.degenerate.as_ref().is_some_and(|d| d.all_identical);

        // Constructed phase: |1,1⟩ = e^{iθ}|1,0⟩ with θ spread over (−π, π].
        let theta = -PI + TAU * (k as f64 + 0.5) / 20.0;
        let phase = C::from_polar(1.0, theta);
        let rotated: Vec<C> = b.iter().map(|x| x * phase).collect();
        let quartet: Vec<&[C]> = vec![&b, &b, &b, &rotated];
        let d = degenerate_analysis(&b, &rotated, &quartet, &tol).unwrap();
        let err = d.theta.map_or(f64::INFINITY, |t| {
            let diff = (t - theta).rem_euclid(TAU);
            diff.min(TAU - diff)
        });
        max_theta_err = max_theta_err.max(err);
        if identical && report.span_rank == Some(1) && d.all_identical && err <= 1e-9 {
            ok += 1;
        }
    }
    verdict(
        ok == 20,
        format!("{ok}/20 cases identical with rank 1, max theta error = {max_theta_err:.1e}"),
    )
}

/// Conditional state of the Werner state for a real projector `χ` on A₁.
fn werner_oracle(v: f64, chi: [f64; 2]) -> (f64, [[f64; 2]; 2]) {
    let bell = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
    let w = |r: usize, c: usize| v * bell[r] * bell[c] + if r == c { (1.0 - v) / 4.0 } else { 0.0 };
    let mut sigma = [[0.0; 2]; 2];
    for (b, row) in sigma.iter_mut().enumerate() {
        for (bp, x) in row.iter_mut().enumerate() {
            for a in 0..2 {
                for ap in 0..2 {
                    *x += chi[a] * chi[ap] * w(2 * a + b, 2 * ap + bp);
                }
            }
        }
    }
    let p = sigma[0][0] + sigma[1][1];
    (p, sigma.map(|row| row.map(|x| x / p)))
}

fn criterion_7(dir: &Path) -> Outcome {
    let scenario = write_file(
        dir,
        "werner_sweep.yaml",
        "state: {werner: {v: 0.5}}\nmeasurements: [computational, hadamard]\nsweep: {parameter: state.werner.v, from: 0, to: 1, steps: 11}\n",
    );
    let out = run_binary(&["sweep", "--scenario", scenario.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let h = FRAC_1_SQRT_2;
    let chis = [[1.0, 0.0], [0.0, 1.0], [h, h], [h, -h]];
    let mut rows = 0;
    let mut max_pur: f64 = 0.0;
    let mut max_fid: f64 = 0.0;
    let mut max_closed: f64 = 0.0;
    for line in text.lines().skip(1) {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.parse().unwrap_or(f64::NAN))
            .collect();
        let v = cells[0];
        for (k, chi) in chis.iter().enumerate() {
            let (_, rho) = werner_oracle(v, *chi);
            let purity: f64 = rho.iter().flatten().map(|x| x * x).sum();
            let fid: f64 = (0..2)
                .map(|r| (0..2).map(|c| chi[r] * rho[r][c] * chi[c]).sum::<f64>())
                .sum();
            max_closed = max_closed
                .max((purity - (1.0 + v * v) / 2.0).abs())
                .max((fid - (1.0 + v) / 2.0).abs());
            max_pur = max_pur.max((cells[7 + k] - purity).abs());
            max_fid = max_fid.max((cells[12 + k] - fid).abs());
        }
        rows += 1;
    }
    let ok = rows == 11 && max_pur <= 1e-9 && max_fid <= 1e-9 && max_closed <= 1e-12;
    verdict(
        ok,
        format!("{rows} grid points, max purity error = {max_pur:.1e}, max fidelity error = {max_fid:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let config = ScenarioConfig {
        seed: 20_260_101,
        sample_shots: Some(1_000_000),
        ..ScenarioConfig::ideal()
    };
    let first = run_once(&config).unwrap();
    let second = run_once(&config).unwrap();
    let max_dev = first
        .probabilities
        .iter()
        .flatten()
        .map(|p| (p - 0.5).abs())
        .fold(0.0, f64::max);
    verdict(
        first.probabilities_estimated && max_dev <= 0.002 && first == second,
        format!(
            "max |p_hat-0.5| = {max_dev:.2e}, reproducible = {}",
            first == second
        ),
    )
}

fn criterion_9(dir: &Path) -> Outcome {
    let run_cfg = write_file(
        dir,
        "det_run.yaml",
        "state: {random_pure: {seed: 9, dim_b: 3}}\nmeasurements: [{tilted: {alpha: 0.4}}, hadamard]\nsample_shots: 5000\nseed: 3\n",
    );
    let sweep_cfg = write_file(
        dir,
        "det_sweep.yaml",
        "state: {random_pure: {seed: 1}}\nmeasurements: [computational, {tilted: {alpha: 0.1}}]\nseed: 77\nsweep: {parameter: measurements.1.tilted.alpha, from: 0.1, to: 1.2, steps: 6, trials_per_step: 4, sample_shots: 2000}\n",
    );
    let mut cases = 0;
    let mut identical = 0;
    for (sub, cfg) in [("run", &run_cfg), ("sweep", &sweep_cfg)] {
        for format in ["structured", "tabular"] {
            let outputs: Vec<Vec<u8>> = (0..2)
                .map(|n| {
                    let out = dir.join(format!("{sub}_{format}_{n}.out"));
                    run_binary(&[
                        sub,
                        "--scenario",
                        cfg.to_str().unwrap(),
                        "--format",
                        format,
                        "--out",
                        out.to_str().unwrap(),
                    ]);
                    std::fs::read(out).unwrap()
                })
                .collect();
            cases += 1;
            if outputs[0] == outputs[1] && !outputs[0].is_empty() {
                identical += 1;
            }
        }
    }
    verdict(
        identical == cases,
        format!("{identical}/{cases} invocations byte-identical across two executions"),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let (population, pop_time) = pure_population(600);
    let results = [
        ("1 ideal reproduction", criterion_1(dir.path())),
        ("2 no-signaling", criterion_2()),
        ("3 span identity", criterion_3(&population, pop_time)),
        ("4 rank bound", criterion_4(&population)),
        ("5 usd infeasible", criterion_5(&population)),
        ("6 degenerate branch", criterion_6()),
        ("7 werner sweep oracle", criterion_7(dir.path())),
        ("8 finite statistics", criterion_8()),
        ("9 determinism", criterion_9(dir.path())),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} ({})", outcome.detail);
        failed += usize::from(!outcome.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
