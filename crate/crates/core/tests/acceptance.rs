//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false`. The process exits non-zero when a criterion
//! fails that is not listed in `KNOWN_DIVERGENCES`, or when a listed one
//! unexpectedly passes (so the list cannot go stale silently).

use std::process::ExitCode;
use std::time::Instant;

use pro_core::eval::{auc_score, roc_curve};
use pro_core::glm::{deviance, deviance_r2_from, fit_logistic, predict_eta, predict_prob, score, FittedModel};
use pro_core::io::{study_aggregate_json, sweep_trends_json, write_replications_csv, write_sweep_grid_csv};
use pro_core::lif::{simulate_lif, simulate_sweep, LifParams};
use pro_core::pointproc::{build_design, sf_extrema, Dataset, DesignMatrix, Term};
use pro_core::rng::{mix_seed, rng_from_seed};
use pro_core::studies::{
    default_multipliers, run_auc_study, run_parameter_sweep, run_significance_study, StudyConfig, StudyResult,
    SweepParam, SweepResult,
};
use rand::Rng;

/// Criteria that fail under the specified feature and neuron semantics.
/// Every simulated spike falls in a flash bin, so PF = 0 on all spike rows
/// and the PF coefficient is quasi-completely separated in every replication.
const KNOWN_DIVERGENCES: &[u8] = &[5, 7];

struct Outcome {
    id: u8,
    title: &'static str,
    checks: Vec<(String, bool)>,
    secs: f64,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn check(checks: &mut Vec<(String, bool)>, ok: bool, msg: String) {
    checks.push((msg, ok));
}

/// All compositions of `m` into `k` non-negative parts.
fn compositions(m: u64, k: u64, prefix: &mut Vec<u64>, out: &mut dyn FnMut(&[u64])) {
    if k == 1 {
        prefix.push(m);
        out(prefix);
        prefix.pop();
        return;
    }
    for a in 0..=m {
        prefix.push(a);
        compositions(m - a, k - 1, prefix, out);
        prefix.pop();
    }
}

fn criterion_1() -> Vec<(String, bool)> {
    let mut checks = Vec::new();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for m in 1..=12u64 {
        for k in 1..=m.min(5) {
            let (mut lo, mut hi) = (u64::MAX, 0u64);
            let mut lo_sorted: Vec<Vec<u64>> = Vec::new();
            let mut hi_sorted: Vec<Vec<u64>> = Vec::new();
            compositions(m, k, &mut Vec::new(), &mut |a| {
                let l: u64 = a.iter().map(|x| x * x).sum();
                let mut s = a.to_vec();
                s.sort_unstable_by(|x, y| y.cmp(x));
                if l < lo {
                    lo = l;
                    lo_sorted = vec![s.clone()];
                } else if l == lo && !lo_sorted.contains(&s) {
                    lo_sorted.push(s.clone());
                }
                if l > hi {
                    hi = l;
                    hi_sorted = vec![s];
                } else if l == hi && !hi_sorted.contains(&s) {
                    hi_sorted.push(s);
                }
            });
            let e = sf_extrema(m, k).expect("valid (M, K)");
            let fp = k * m.div_ceil(k) - m;
            let balanced: Vec<u64> = std::iter::repeat_n(m.div_ceil(k), (k - fp) as usize)
                .chain(std::iter::repeat_n(m / k, fp as usize))
                .collect();
            let ok = e.max_value == hi
                && e.min_value == lo
                && hi == m * m
                && lo == balanced.iter().map(|a| a * a).sum::<u64>()
                && hi_sorted == vec![e.argmax.clone()]
                && lo_sorted == vec![balanced.clone()]
                && e.argmin == balanced
                && e.floor_parts() == fp;
            cases += 1;
            if !ok {
                mismatches.push(format!("(M={m},K={k})"));
            }
        }
    }
    check(
        &mut checks,
        mismatches.is_empty(),
        format!("{cases} (M,K) cases vs exhaustive enumeration; mismatches: {mismatches:?}"),
    );
    checks
}

fn two_group() -> DesignMatrix<f64> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, successes) in [(0.0, 2), (1.0, 8)] {
        for i in 0..10 {
            rows.push(vec![x]);
            y.push(i < successes);
        }
    }
    DesignMatrix::from_rows(vec!["x".into()], &rows, y).unwrap()
}

fn random_design(seed: u64, n: usize, p: usize) -> DesignMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let beta: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let eta = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        rows.push(x);
    }
    DesignMatrix::from_rows((0..p).map(|j| format!("x{j}")).collect(), &rows, y).unwrap()
}

fn criterion_2() -> Vec<(String, bool)> {
    let mut checks = Vec::new();

    let m = fit_logistic(&two_group()).unwrap();
    let b0 = (0.2f64 / 0.8).ln();
    let b1 = (0.8f64 / 0.2).ln() - b0;
    let se1 = (1.0 / 2.0 + 1.0 / 8.0 + 1.0 / 8.0 + 1.0 / 2.0f64).sqrt();
    let err =
        (m.coefficients[0] - b0).abs().max((m.coefficients[1] - b1).abs()).max((m.standard_errors[1] - se1).abs());
    check(&mut checks, m.converged && err < 1e-6, format!("two-group closed form, max error {err:.2e}"));

    let rows = vec![vec![]; 10];
    let d = DesignMatrix::<f64>::from_rows(vec![], &rows, (0..10).map(|i| i < 3).collect()).unwrap();
    let m = fit_logistic(&d).unwrap();
    let err = (m.coefficients[0] - (0.3f64 / 0.7).ln()).abs();
    check(&mut checks, m.converged && err < 1e-6, format!("intercept-only closed form, error {err:.2e}"));

    let mut designs: Vec<DesignMatrix<f64>> =
        (0..40).map(|s| random_design(s, 300 + 10 * s as usize, 1 + s as usize % 4)).collect();
    designs.push(two_group());
    for s in 0..20 {
        let sweep = simulate_sweep(&LifParams::<f64>::default(), 5000, 0.14, mix_seed(77, s), 0).unwrap();
        designs.push(build_design::<f64>(&Dataset::single(sweep), &Term::pro_model()).unwrap());
    }
    let (mut converged, mut worst) = (0, 0.0f64);
    for d in &designs {
        let m = fit_logistic(d).unwrap();
        if m.converged {
            converged += 1;
            worst = worst.max(score(d, &m.coefficients).iter().fold(0.0, |a, g| a.max(g.abs())));
        }
    }
    check(
        &mut checks,
        converged > 0 && worst < 1e-6,
        format!("score equations on {converged}/{} converged fits, max |X'(y-p)| = {worst:.2e}", designs.len()),
    );

    // d(log L)/d(beta) = -dD/d(beta) / 2, central differences
    let h = 1e-5;
    let mut worst_rel = 0.0f64;
    for (s, d) in designs.iter().step_by(3).enumerate() {
        let mut rng = rng_from_seed(1000 + s as u64);
        let beta: Vec<f64> = (0..d.n_cols()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let g = score(d, &beta);
        for j in 0..beta.len() {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = -(deviance(d, &up) - deviance(d, &dn)) / (4.0 * h);
            worst_rel = worst_rel.max((g[j] - fd).abs() / g[j].abs().max(1.0));
        }
    }
    check(
        &mut checks,
        worst_rel < 1e-4,
        format!("analytic vs finite-difference gradient, max relative error {worst_rel:.2e}"),
    );
    checks
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

fn criterion_3() -> Vec<(String, bool)> {
    let mut rng = rng_from_seed(3);
    let (mut done, mut worst) = (0, 0.0f64);
    while done < 200 {
        let n = rng.gen_range(2..=100);
        // coarse grid so that ties are common
        let levels = rng.gen_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..levels)) / 7.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let oracle = pairwise_auc(&scores, &labels);
        let trap = roc_curve(&scores, &labels).unwrap().auc;
        let mw = auc_score(&scores, &labels).unwrap();
        worst = worst.max((trap - oracle).abs()).max((mw - oracle).abs());
        done += 1;
    }
    vec![(format!("{done} random instances (n <= 100, with ties), max |AUC - pairwise| = {worst:.1e}"), worst <= 1e-12)]
}

fn criterion_4() -> Vec<(String, bool)> {
    let mut checks = Vec::new();
    let base = LifParams::<f64>::default();
    let ir = base.stimulus_height * base.r;
    let exact = base.r * base.c * (ir / (ir - base.v_th)).ln();
    let tr = simulate_lif(&base, &[true; 4]).unwrap();
    let t0 = tr.spike_times_ms[0];
    check(
        &mut checks,
        (t0 - exact).abs() < 0.1 && !tr.spikes[0] && tr.spikes[1],
        format!(
            "first spike at {t0:.4} ms vs analytic {exact:.4} ms, recorded in bin {}",
            tr.spikes.iter().position(|&s| s).unwrap_or(usize::MAX)
        ),
    );

    let mut isolated = vec![false; 10];
    isolated[0] = true;
    let tr = simulate_lif(&base, &isolated).unwrap();
    let expected = ir * (1.0 - (-base.bin_ms / (base.r * base.c)).exp());
    check(
        &mut checks,
        (tr.peak_potential - 0.6357).abs() < 0.01 && (tr.peak_potential - expected).abs() < 0.01 && tr.spike_count == 0,
        format!("isolated flash peak V = {:.4} (closed form {expected:.4}), no spike", tr.peak_potential),
    );

    let errors: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&k| (simulate_lif(&base.with_substeps(k), &[true; 4]).unwrap().spike_times_ms[0] - exact).abs())
        .collect();
    check(
        &mut checks,
        errors[1] < errors[0] && errors[2] < errors[1],
        format!("crossing-time error at 100/200/400 substeps: {:.4}/{:.4}/{:.4} ms", errors[0], errors[1], errors[2]),
    );
    checks
}

fn study_files(res: &StudyResult) -> (String, Vec<u8>) {
    let mut csv = Vec::new();
    write_replications_csv(&res.term_names, &res.records, false, &mut csv).unwrap();
    (study_aggregate_json(res), csv)
}

fn sweep_files(res: &SweepResult) -> (String, Vec<u8>, Vec<u8>) {
    let (mut grid, mut reps) = (Vec::new(), Vec::new());
    write_sweep_grid_csv(res, &mut grid).unwrap();
    write_replications_csv(&res.term_names, &res.records, true, &mut reps).unwrap();
    (sweep_trends_json(res), grid, reps)
}

fn criterion_5(cfg: &StudyConfig) -> (Vec<(String, bool)>, StudyResult) {
    let mut checks = Vec::new();
    let res = run_significance_study(cfg).unwrap();
    let a = &res.aggregate;
    check(
        &mut checks,
        a.n_used > 0,
        format!(
            "{} replications, {} used, {} dropped, {} with quasi-complete separation",
            a.n_replications, a.n_used, a.n_dropped, a.n_quasi_separated
        ),
    );
    for term in ["CF", "SF", "CF*SF"] {
        let f = res.frequency(term).unwrap();
        check(&mut checks, f >= 0.995, format!("{term} significant in {:.1}% (target >= 99.5%)", 100.0 * f));
    }
    let f = res.frequency("PF").unwrap();
    check(&mut checks, (f - 0.88).abs() <= 0.04, format!("PF significant in {:.1}% (target 88% +/- 4)", 100.0 * f));
    let r2 = a.deviance_r2.unwrap();
    check(
        &mut checks,
        (r2.mean - 0.5681).abs() <= 0.01,
        format!("mean deviance R^2 = {:.4} (SE {:.4}) (target 0.5681 +/- 0.01)", r2.mean, r2.se),
    );
    (checks, res)
}

fn criterion_6(cfg: &StudyConfig) -> (Vec<(String, bool)>, StudyResult) {
    let res = run_auc_study(cfg).unwrap();
    let auc = res.aggregate.auc.unwrap();
    let ok = (0.970..=0.980).contains(&auc.mean);
    let msg = format!(
        "mean test AUC = {:.2}% (SE {:.2}) over {} replications (target [97.0, 98.0])",
        100.0 * auc.mean,
        100.0 * auc.se,
        auc.n
    );
    (vec![(msg, ok)], res)
}

fn criterion_7(cfg: &StudyConfig) -> (Vec<(String, bool)>, SweepResult, SweepResult) {
    let mut checks = Vec::new();
    let grid = default_multipliers();
    let c = run_parameter_sweep(SweepParam::C, cfg, &grid).unwrap();
    let r = run_parameter_sweep(SweepParam::R, cfg, &grid).unwrap();
    let expected = [
        (&c, "C", [("PF", 1.0), ("CF", -1.0), ("SF", 1.0), ("CF*SF", 1.0)]),
        (&r, "R", [("PF", -1.0), ("CF", 1.0), ("SF", 1.0), ("CF*SF", -1.0)]),
    ];
    for (res, name, signs) in expected {
        for (term, sign) in signs {
            let t = res.trend(term).unwrap();
            let (ok, msg) = match &t.fit {
                Some(f) => (
                    f.slope * sign > 0.0 && f.slope_p_value < 0.01,
                    format!("slope {:+.4} (p = {:.2e})", f.slope, f.slope_p_value),
                ),
                None => (false, format!("no fit ({} of {} estimates retained)", t.retained, t.retained + t.dropped)),
            };
            let want = if sign > 0.0 { '+' } else { '-' };
            check(&mut checks, ok, format!("varying {name}: {term} expected {want}, {msg}"));
        }
    }
    let pf = c.trend("PF").unwrap().dropped_fraction;
    check(
        &mut checks,
        (pf - 0.0927).abs() <= 0.05,
        format!("varying C: PF dropped fraction {:.2}% (target 9.27% +/- 5)", 100.0 * pf),
    );
    (checks, c, r)
}

fn criterion_8() -> Vec<(String, bool)> {
    let mut checks = Vec::new();
    let r2 = deviance_r2_from(1400.80f64, 895.38).unwrap();
    let oracle = 1.0 - 895.38 / 1400.80;
    check(&mut checks, r2 == oracle && (r2 - 0.3608).abs() < 5e-5, format!("deviance_r2(1400.80, 895.38) = {r2:.6}"));

    let names: Vec<String> = ["(Intercept)", "PF", "CF", "SF", "CF*SF"].map(String::from).to_vec();
    let mut m = FittedModel::from_coefficients(names.clone(), vec![-24.310, -1.447, 15.719, 10.347, -7.108]).unwrap();
    let (pf, cf, sf) = (2f64.ln(), 3f64.ln(), 11f64.ln().ln());
    let d = DesignMatrix::from_rows(names[1..].to_vec(), &[vec![pf, cf, sf, cf * sf]], vec![false]).unwrap();
    let eta = predict_eta(&m, &d).unwrap()[0];
    let eta_hand = -24.310 - 1.447 * pf + 15.719 * cf + 10.347 * sf - 7.108 * cf * sf;
    let p = predict_prob(&m, &d).unwrap()[0];
    check(
        &mut checks,
        (eta - eta_hand).abs() < 1e-12 && (eta + 5.8242).abs() < 1e-4 && (p - 0.00295).abs() < 1e-4,
        format!("published coefficients at (PF, CF, SF) = (ln 2, ln 3, ln ln 11): eta = {eta:.4}, p = {p:.5}"),
    );

    m.standard_errors = vec![4.115, 0.134, 2.821, 2.204, 1.507];
    m.z_values = vec![-5.907, -10.796, 5.572, 4.696, -4.716];
    m.p_values = vec![3.47e-9, 1e-20, 2.52e-8, 2.66e-6, 2.41e-6];
    m.null_deviance = 1400.80;
    m.residual_deviance = 895.38;
    m.null_df = 4867;
    m.residual_df = 4863;
    m.converged = true;
    let table = m.summary_table();
    let printed = [
        ["-24.310", "4.115", "-5.907", "3.47e-09"],
        ["-1.447", "0.134", "-10.796", "< 2e-16"],
        ["15.719", "2.821", "5.572", "2.52e-08"],
        ["10.347", "2.204", "4.696", "2.66e-06"],
        ["-7.108", "1.507", "-4.716", "2.41e-06"],
    ];
    let lines: Vec<&str> = table.lines().collect();
    let header_ok = ["Coefficients", "Estimate", "SE", "Z value", "P-value"].iter().all(|h| lines[0].contains(h));
    let rows_ok = printed.iter().enumerate().all(|(i, cells)| {
        let line = lines[i + 1];
        let mut rest = line;
        cells.iter().all(|c| match rest.find(c) {
            Some(k) => {
                rest = &rest[k + c.len()..];
                true
            }
            None => false,
        })
    });
    let dev_ok = table.contains("1400.80") && table.contains("895.38") && table.contains("df=4867");
    check(
        &mut checks,
        header_ok && rows_ok && dev_ok,
        "coefficient table renders the published coefficient values verbatim".into(),
    );
    checks
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut run = |id: u8, title: &'static str, f: &mut dyn FnMut() -> Vec<(String, bool)>| {
        let t = Instant::now();
        let checks = f();
        outcomes.push(Outcome { id, title, checks, secs: t.elapsed().as_secs_f64() });
    };

    run(1, "SF extrema vs exhaustive enumeration", &mut criterion_1);
    run(2, "logistic GLM correctness", &mut criterion_2);
    run(3, "AUC vs pairwise Mann-Whitney oracle", &mut criterion_3);
    run(4, "LIF analytic checks", &mut criterion_4);

    let sig_cfg = StudyConfig { n_replications: 1000, n_bins: 5000, base_seed: 20_240_501, ..StudyConfig::default() };
    let auc_cfg = StudyConfig { n_replications: 20, n_bins: 10_000, base_seed: 20_240_502, ..StudyConfig::default() };
    let sweep_cfg = StudyConfig { n_replications: 30, n_bins: 5000, base_seed: 20_240_503, ..StudyConfig::default() };

    let mut sig = None;
    run(5, "significance frequencies and deviance R^2 (1000 replications)", &mut || {
        let (c, r) = criterion_5(&sig_cfg);
        sig = Some(r);
        c
    });
    let mut auc = None;
    run(6, "train/test AUC (20 replications, 10000 bins)", &mut || {
        let (c, r) = criterion_6(&auc_cfg);
        auc = Some(r);
        c
    });
    let mut sweeps = None;
    run(7, "parameter sweep slope signs (11 values x 30 replications)", &mut || {
        let (c, rc, rr) = criterion_7(&sweep_cfg);
        sweeps = Some((rc, rr));
        c
    });
    run(8, "substituted real-data checks", &mut criterion_8);

    let (sig, auc, (sweep_c, sweep_r)) = (sig.unwrap(), auc.unwrap(), sweeps.unwrap());
    run(9, "determinism across worker counts", &mut || {
        let mut checks = Vec::new();
        for threads in [1, 3] {
            let again = run_significance_study(&StudyConfig { parallelism: threads, ..sig_cfg.clone() }).unwrap();
            check(
                &mut checks,
                study_files(&again) == study_files(&sig),
                format!("significance study, {threads} worker(s): identical aggregate JSON and CSV"),
            );
            let again = run_auc_study(&StudyConfig { parallelism: threads, ..auc_cfg.clone() }).unwrap();
            check(
                &mut checks,
                study_files(&again) == study_files(&auc),
                format!("AUC study, {threads} worker(s): identical aggregate JSON and CSV"),
            );
            for (which, base) in [(SweepParam::C, &sweep_c), (SweepParam::R, &sweep_r)] {
                let cfg = StudyConfig { parallelism: threads, ..sweep_cfg.clone() };
                let again = run_parameter_sweep(which, &cfg, &default_multipliers()).unwrap();
                check(
                    &mut checks,
                    sweep_files(&again) == sweep_files(base),
                    format!(
                        "sweep-{}, {threads} worker(s): identical trend JSON and CSVs",
                        which.kind().name().trim_start_matches("sweep-")
                    ),
                );
            }
        }
        checks
    });

    let mut unexpected = Vec::new();
    println!();
    for o in &outcomes {
        let pass = o.passed();
        let known = KNOWN_DIVERGENCES.contains(&o.id);
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known divergence)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {tag} - {} [{:.1}s]", o.id, o.title, o.secs);
        for (msg, ok) in &o.checks {
            println!("    [{}] {msg}", if *ok { "ok" } else { "x" });
        }
        if pass == known {
            unexpected.push(o.id);
        }
    }
    let n_pass = outcomes.iter().filter(|o| o.passed()).count();
    println!("\n{n_pass}/{} criteria passed", outcomes.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}; update KNOWN_DIVERGENCES or fix the regression");
        ExitCode::FAILURE
    }
}
