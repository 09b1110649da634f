use num_complex::Complex64;
use rayon::prelude::*;

use rmf_core::euler::{self, ParsevalCheck};
use rmf_core::harness::{
    self, ExperimentConfig, Rerun, SequenceSpec, Simulation, TrialResult, TrialSummary, WeightSpec, YSequence,
};
use rmf_core::quad::QuadConfig;
use rmf_core::stats::{MomentReport, OracleReport, Quantiles};
use rmf_core::sums::{self, ORACLE_CAP};
use rmf_core::{derive_seed, Error, Model, PrimeTables, Result, SampledFunction};

use crate::args::*;
use crate::output::{float_text, Cell, Sink};

/// Columns shared by every check command.
pub const CHECK_COLUMNS: [&str; 14] = [
    "experiment",
    "model",
    "case",
    "x",
    "m",
    "t",
    "estimate",
    "std_error",
    "bound",
    "exact",
    "trials",
    "violated",
    "reran",
    "detail",
];

pub const SIMULATE_COLUMNS: [&str; 11] =
    ["row_kind", "trial", "seed", "x", "m_re", "m_im", "v", "normalized", "variance_ratio", "statistic", "value"];

#[derive(Debug, Clone, Default)]
pub struct CheckRow {
    pub experiment: String,
    pub model: Option<Model>,
    pub case: String,
    pub x: Option<u64>,
    pub m: Option<u64>,
    pub t: Option<f64>,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub bound: Option<f64>,
    pub exact: Option<f64>,
    pub trials: Option<u64>,
    pub violated: bool,
    pub reran: bool,
    pub detail: String,
}

impl CheckRow {
    fn new(experiment: &str, model: Option<Model>, case: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), model, case: case.into(), ..Default::default() }
    }

    fn moment(mut self, r: &MomentReport) -> Self {
        self.estimate = r.estimate;
        self.std_error = Some(r.std_error);
        self.bound = Some(r.bound);
        self.trials = Some(r.trials);
        self.violated = r.violated;
        self
    }

    fn oracle(mut self, r: &OracleReport) -> Self {
        self.estimate = r.estimate;
        self.std_error = Some(r.std_error);
        self.exact = Some(r.exact);
        self.trials = Some(r.trials);
        self.violated = !r.agrees;
        self
    }

    fn info(mut self, value: f64) -> Self {
        self.estimate = value;
        self
    }

    fn x(mut self, x: u64) -> Self {
        self.x = Some(x);
        self
    }

    fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    fn reran(mut self, reran: bool) -> Self {
        self.reran = reran;
        self
    }

    fn detail(mut self, pairs: &[(&str, f64)]) -> Self {
        let parts: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={}", float_text(*v))).collect();
        self.detail = parts.join(";");
        self
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::from(self.experiment.as_str()),
            Cell::from(self.model.map(|m| m.name())),
            Cell::from(self.case.as_str()),
            self.x.into(),
            self.m.into(),
            self.t.into(),
            self.estimate.into(),
            self.std_error.into(),
            self.bound.into(),
            self.exact.into(),
            self.trials.into(),
            self.violated.into(),
            self.reran.into(),
            Cell::from(self.detail.as_str()),
        ]
    }
}

/// Writes check rows and returns how many are violated.
pub fn emit(g: &Global, rows: &[CheckRow]) -> Result<u64> {
    let mut sink = Sink::open(g.format, g.out.as_deref(), &CHECK_COLUMNS)?;
    for r in rows {
        sink.row(r.cells())?;
    }
    sink.finish()?;
    Ok(rows.iter().filter(|r| r.violated).count() as u64)
}

fn models(g: &Global) -> Vec<Model> {
    g.model.map_or_else(|| Model::ALL.to_vec(), |m| vec![m])
}

fn quad(g: &Global) -> QuadConfig {
    let q = QuadConfig::default().with_rel_tol(g.quad_tol);
    match g.tcut {
        Some(t) => q.with_t_cut(t),
        None => q,
    }
}

fn config(g: &Global, model: Model, trials: u64, x_max: u64) -> ExperimentConfig {
    ExperimentConfig {
        epsilon: g.epsilon,
        model,
        seed_base: g.seed,
        trials: g.trials.unwrap_or(trials),
        x_max: g.x_max.unwrap_or(x_max),
        quad: quad(g),
        t_param: g.t_param,
        oracle_cap: ORACLE_CAP,
    }
}

fn rerun<R>(
    enabled: bool,
    trials: u64,
    suite: impl Fn(u64) -> Result<R>,
    failed: impl Fn(&R) -> bool,
) -> Result<Rerun<R>> {
    if enabled {
        harness::rerun_on_failure(trials, suite, failed)
    } else {
        Ok(Rerun { result: suite(trials)?, trials, reran: false })
    }
}

pub fn progress(g: &Global, msg: &str) {
    if !g.quiet {
        eprintln!("rmflab: {msg}");
    }
}

pub fn simulate(g: &Global, a: &SimulateArgs, tables: &PrimeTables) -> Result<u64> {
    let cfg = config(g, g.model.unwrap_or(Model::Rademacher), 100, 10_000);
    let sim = Simulation::new(cfg, tables)?;
    progress(g, &format!("simulate: {} trials, {} grid points up to {}", cfg.trials, sim.grid().len(), cfg.x_max));
    let mut sink = Sink::open(g.format, g.out.as_deref(), &SIMULATE_COLUMNS)?;
    let summaries: Vec<TrialSummary> = if a.summary_only {
        let s = sim.summaries()?;
        for (j, t) in s.iter().enumerate() {
            summary_rows(&mut sink, j as u64, t)?;
        }
        s
    } else {
        // Full trials are held a few at a time to bound memory.
        let chunk = rayon::current_num_threads().max(1) as u64;
        let mut out = Vec::with_capacity(cfg.trials as usize);
        let mut start = 0;
        while start < cfg.trials {
            let end = (start + chunk).min(cfg.trials);
            let batch: Vec<TrialResult> =
                (start..end).into_par_iter().map(|j| sim.run_trial(sim.trial_seed(j))).collect::<Result<_>>()?;
            for (j, r) in (start..end).zip(batch) {
                point_rows(&mut sink, j, &r, cfg.epsilon)?;
                let s = r.summary(cfg.epsilon);
                summary_rows(&mut sink, j, &s)?;
                out.push(s);
            }
            start = end;
        }
        out
    };
    let trend = harness::trend_report(&cfg, &summaries)?;
    let mut ens = |name: String, value: f64| -> Result<()> {
        sink.row(vec![
            "ensemble".into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            name.into(),
            value.into(),
        ])
    };
    ens("trials".into(), trend.trials as f64)?;
    ens("seed_base".into(), trend.seed_base as f64)?;
    ens("x_max".into(), trend.x_max as f64)?;
    ens("epsilon".into(), trend.epsilon)?;
    ens("constant".into(), trend.constant)?;
    ens("exceedance_fraction".into(), trend.exceedance_fraction)?;
    ens("degenerate_trials".into(), trend.degenerate_trials as f64)?;
    for (prefix, q) in [("normalized_sup", &trend.normalized_sup), ("variance_sup", &trend.variance_sup)] {
        for (k, v) in quantile_fields(q) {
            ens(format!("{prefix}.{k}"), v)?;
        }
    }
    sink.finish()?;
    Ok(0)
}

fn quantile_fields(q: &Quantiles) -> [(&'static str, f64); 9] {
    [
        ("min", q.min),
        ("q05", q.q05),
        ("q25", q.q25),
        ("median", q.median),
        ("q75", q.q75),
        ("q95", q.q95),
        ("max", q.max),
        ("mean", q.mean),
        ("median_se", q.median_se),
    ]
}

fn point_rows(sink: &mut Sink, trial: u64, r: &TrialResult, epsilon: f64) -> Result<()> {
    for ((&x, m), &v) in r.grid.iter().zip(&r.m_values).zip(&r.v_values) {
        sink.row(vec![
            "point".into(),
            trial.into(),
            r.seed.into(),
            x.into(),
            m.re.into(),
            m.im.into(),
            v.into(),
            (m.norm() / harness::sup_scale(x, epsilon)).into(),
            (v * harness::variance_scale(x)).into(),
            Cell::Empty,
            Cell::Empty,
        ])?;
    }
    Ok(())
}

fn summary_rows(sink: &mut Sink, trial: u64, s: &TrialSummary) -> Result<()> {
    let rows: [(&str, Option<u64>, f64); 4] = [
        ("normalized_sup", Some(s.normalized_sup_at), s.normalized_sup),
        ("variance_sup", Some(s.variance_sup_at), s.variance_sup),
        ("exceeds_constant", None, f64::from(u8::from(s.exceeds_constant()))),
        ("degenerate", None, f64::from(u8::from(s.degenerate))),
    ];
    for (name, x, value) in rows {
        sink.row(vec![
            "summary".into(),
            trial.into(),
            s.seed.into(),
            x.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            name.into(),
            value.into(),
        ])?;
    }
    Ok(())
}

struct OracleOutcome {
    m_diff: f64,
    v_diff: f64,
    mismatches: u64,
}

fn oracle_one(model: Model, seed: u64, x_max: u64, lpf: &[u32], tables: &PrimeTables) -> Result<OracleOutcome> {
    let f = SampledFunction::new(model, seed, tables);
    let mut scan = Vec::with_capacity(x_max as usize + 1);
    scan.push((Complex64::new(0.0, 0.0), 0.0));
    sums::scan_large_prime_sums(&f, x_max, lpf, |_, m, v| scan.push((m, v)))?;
    let tol = match model {
        Model::Rademacher => 0.0,
        Model::Steinhaus => 1e-9,
    };
    let mut out = OracleOutcome { m_diff: 0.0, v_diff: 0.0, mismatches: 0 };
    for x in 1..=x_max {
        let brute = sums::large_prime_sum_bruteforce(&f, x)?;
        let fast = sums::large_prime_sum(&f, x)?;
        let v = sums::conditional_variance(&f, x)?;
        let (m_scan, v_scan) = scan[x as usize];
        let dm = (fast - brute).norm().max((m_scan - brute).norm());
        let dv = (v - v_scan).abs() / v.abs().max(1.0);
        if dm > tol || dv > tol {
            out.mismatches += 1;
        }
        out.m_diff = out.m_diff.max(dm);
        out.v_diff = out.v_diff.max(dv);
    }
    Ok(out)
}

pub fn oracle_check(g: &Global, a: &OracleArgs, tables: &PrimeTables) -> Result<u64> {
    let x_max = g.x_max.unwrap_or(3000);
    if x_max > ORACLE_CAP || x_max > tables.limit() {
        return Err(Error::InvalidArgument(format!(
            "oracle-check needs x-max <= {}, got {x_max}",
            ORACLE_CAP.min(tables.limit())
        )));
    }
    if a.seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let lpf = tables.largest_prime_factor_table(x_max)?;
    let mut rows = Vec::new();
    for model in models(g) {
        progress(g, &format!("oracle-check: {model}, {} seeds, x <= {x_max}", a.seeds));
        let outcomes: Vec<OracleOutcome> = (0..a.seeds)
            .into_par_iter()
            .map(|i| oracle_one(model, derive_seed(g.seed, i), x_max, &lpf, tables))
            .collect::<Result<_>>()?;
        for (i, o) in outcomes.iter().enumerate() {
            let mut r = CheckRow::new("decomposition", Some(model), format!("seed_index={i}"))
                .x(x_max)
                .info(o.m_diff)
                .detail(&[("v_rel_diff", o.v_diff), ("mismatched_x", o.mismatches as f64)]);
            r.bound = Some(if model == Model::Rademacher { 0.0 } else { 1e-9 });
            r.trials = Some(x_max);
            r.violated = o.mismatches > 0;
            rows.push(r);
        }
    }
    emit(g, &rows)
}

pub fn moments(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<u64> {
    let rows = match a.suite {
        Suite::Hypercontractive => hypercontractive(g, a, tables)?,
        Suite::Hoeffding => hoeffding(g, a, tables)?,
        Suite::Doob => doob(g, a, tables)?,
        Suite::SubmartingaleZ => submartingale_z(g, a, tables)?,
        Suite::SubmartingaleY => submartingale_y(g, a, tables)?,
    };
    emit(g, &rows)
}

/// Weight families for the hypercontractive suite.
pub fn weight_specs(n: u64, tables: &PrimeTables) -> Vec<WeightSpec> {
    let primes: Vec<u64> = tables.primes_between(0, n).iter().map(|&p| p as u64).collect();
    let mut specs = vec![WeightSpec::Ones(n)];
    if !primes.is_empty() {
        specs.push(WeightSpec::Indicator(primes));
    }
    specs
}

fn hypercontractive(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<Vec<CheckRow>> {
    let ms = a.m.map_or_else(|| vec![1, 2, 3], |m| vec![m]);
    let ns = a.n.map_or_else(|| vec![10, 100, 1000], |n| vec![n]);
    let trials = g.trials.unwrap_or(10_000);
    let mut rows = Vec::new();
    for model in models(g) {
        for &n in &ns {
            for spec in weight_specs(n, tables) {
                for &m in &ms {
                    let r = rerun(
                        !a.no_rerun,
                        trials,
                        |k| harness::hypercontractive_check(&spec, model, m, k, g.seed, tables),
                        |r| r.violated,
                    )?;
                    let mut row = CheckRow::new("hypercontractive", Some(model), spec.label())
                        .moment(&r.result)
                        .reran(r.reran)
                        .detail(&[("z", r.result.z_score())]);
                    row.m = Some(u64::from(m));
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

fn hoeffding(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<Vec<CheckRow>> {
    let trials = g.trials.unwrap_or(10_000);
    let mut rows = Vec::new();
    for model in models(g) {
        let cfg = config(g, model, trials, 10_000);
        for &x in &a.x {
            progress(g, &format!("hoeffding: {model}, x = {x}"));
            for c in 0..a.cond_seeds {
                let r = rerun(
                    !a.no_rerun,
                    trials,
                    |k| harness::hoeffding_tail_check(&cfg, x, c, k, a.t, tables),
                    |r| r.report.violated || r.component_tails.is_some_and(|(u, v)| u.violated || v.violated),
                )?;
                let h = &r.result;
                let case = format!("cond_seed={c}");
                rows.push(
                    CheckRow::new("hoeffding", Some(model), case.clone())
                        .moment(&h.report)
                        .x(x)
                        .t(h.t)
                        .reran(r.reran)
                        .detail(&[
                            ("v0", h.v0),
                            ("displayed_bound", h.displayed_bound),
                            ("degenerate", f64::from(u8::from(h.degenerate))),
                        ]),
                );
                if let Some((re, im)) = h.component_tails {
                    for (name, rep) in [("hoeffding.re", re), ("hoeffding.im", im)] {
                        rows.push(
                            CheckRow::new(name, Some(model), case.clone())
                                .moment(&rep)
                                .x(x)
                                .t(h.t / std::f64::consts::SQRT_2)
                                .reran(r.reran),
                        );
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn y_sequence(g: &Global, a: &MomentsArgs) -> Result<YSequence> {
    YSequence::second_block(g.epsilon, a.y_max, &quad(g))
}

fn doob(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<Vec<CheckRow>> {
    let kinds = a.sequence.map_or_else(|| vec![SequenceKind::Z, SequenceKind::Y], |k| vec![k]);
    let lambdas = (!a.lambda.is_empty()).then_some(a.lambda.as_slice());
    let mut rows = Vec::new();
    for model in models(g) {
        for &kind in &kinds {
            let (spec, default_trials) = match kind {
                SequenceKind::Z => {
                    (SequenceSpec::ZWindow { x_base: a.x_base, k_end: a.x_base.saturating_mul(4) }, 10_000)
                }
                SequenceKind::Y => (SequenceSpec::YGrid(y_sequence(g, a)?), 2000),
            };
            progress(g, &format!("doob: {model}, {}", spec.label()));
            let trials = g.trials.unwrap_or(default_trials);
            let r = rerun(
                !a.no_rerun,
                trials,
                |k| harness::doob_check(&spec, model, lambdas, Some(a.p), k, g.seed, tables),
                |r| r.violated(),
            )?;
            let d = &r.result;
            for mx in &d.maximal {
                rows.push(
                    CheckRow::new("doob.maximal", Some(model), d.label.clone())
                        .moment(&mx.report)
                        .reran(r.reran)
                        .detail(&[
                            ("lambda", mx.lambda),
                            ("lhs", mx.lhs),
                            ("rhs", mx.rhs),
                            ("length", d.length as f64),
                            ("expected_last", d.expected_last),
                        ]),
                );
            }
            if let Some(lp) = &d.lp {
                rows.push(
                    CheckRow::new("doob.lp", Some(model), d.label.clone()).moment(&lp.report).reran(r.reran).detail(&[
                        ("p", lp.p),
                        ("lhs", lp.lhs),
                        ("rhs", lp.rhs),
                        ("argmax", lp.argmax as f64),
                    ]),
                );
            }
        }
    }
    Ok(rows)
}

fn submartingale_z(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<Vec<CheckRow>> {
    let resamples = g.trials.unwrap_or(2000);
    let x_hi = g.x_max.unwrap_or(10_000);
    let steps = harness::z_step_sample(g.seed, a.steps, 100, x_hi, tables)?;
    let mut rows = Vec::new();
    for model in models(g) {
        progress(g, &format!("submartingale-z: {model}, {} steps", steps.len()));
        let cfg = config(g, model, resamples, x_hi);
        for (i, &(x_base, k)) in steps.iter().enumerate() {
            let cond = derive_seed(g.seed, i as u64);
            let r = rerun(
                !a.no_rerun,
                resamples,
                |n| harness::submartingale_check_z(&cfg, x_base, k, k + 1, cond, n, tables),
                |s| s.iter().any(|z| z.deficit.violated || !z.increment.agrees),
            )?;
            for z in &r.result {
                let case = format!("x_base={};k={}", z.x_base, z.k);
                let detail = [("new_prime", z.new_prime.map_or(0.0, |p| p as f64)), ("z_before", z.z_before)];
                rows.push(
                    CheckRow::new("submartingale-z.deficit", Some(model), case.clone())
                        .moment(&z.deficit)
                        .x(z.x_base)
                        .reran(r.reran)
                        .detail(&detail),
                );
                rows.push(
                    CheckRow::new("submartingale-z.increment", Some(model), case)
                        .oracle(&z.increment)
                        .x(z.x_base)
                        .reran(r.reran)
                        .detail(&detail),
                );
            }
        }
    }
    Ok(rows)
}

fn submartingale_y(g: &Global, a: &MomentsArgs, tables: &PrimeTables) -> Result<Vec<CheckRow>> {
    let resamples = g.trials.unwrap_or(2000);
    let seq = y_sequence(g, a)?;
    let mut rows = Vec::new();
    for model in models(g) {
        progress(
            g,
            &format!("submartingale-y: {model}, {} points, {} conditioning seeds", seq.points.len(), a.cond_seeds),
        );
        for c in 0..a.cond_seeds {
            let cond = derive_seed(g.seed, c);
            let r = rerun(
                !a.no_rerun,
                resamples,
                |n| harness::submartingale_check_y(&seq, model, cond, n, g.seed, tables),
                |s| s.iter().any(|y| y.deficit.violated || !y.conditional_mean.agrees),
            )?;
            for y in &r.result {
                let case = format!("cond_seed={c};x_prev={}", y.x_prev);
                let detail = [
                    ("new_primes", y.new_primes.len() as f64),
                    ("y_before", y.y_before),
                    ("quadrature_error", y.quadrature_error),
                ];
                rows.push(
                    CheckRow::new("submartingale-y.deficit", Some(model), case.clone())
                        .moment(&y.deficit)
                        .x(y.x)
                        .reran(r.reran)
                        .detail(&detail),
                );
                rows.push(
                    CheckRow::new("submartingale-y.mean", Some(model), case)
                        .oracle(&y.conditional_mean)
                        .x(y.x)
                        .reran(r.reran)
                        .detail(&detail),
                );
            }
        }
    }
    Ok(rows)
}

/// Random sequence `i` for the Parseval check: length, `sigma` and
/// coefficients, all derived from `(seed, i)`.
pub fn parseval_sequence(seed: u64, i: u64) -> (Vec<Complex64>, f64) {
    let s = derive_seed(seed, i);
    let unit = |u: u64| (u >> 11) as f64 / (1u64 << 53) as f64;
    let len = 1 + (derive_seed(s, 0) % 30) as usize;
    let sigma = 0.25 + 1.75 * unit(derive_seed(s, 1));
    let coeffs = (0..len as u64)
        .map(|k| {
            Complex64::new(2.0 * unit(derive_seed(s, 2 + 2 * k)) - 1.0, 2.0 * unit(derive_seed(s, 3 + 2 * k)) - 1.0)
        })
        .collect();
    (coeffs, sigma)
}

fn parseval_row(case: String, c: &ParsevalCheck) -> CheckRow {
    let mut r = CheckRow::new("parseval", None, case).info(c.rhs).detail(&[
        ("quadrature_error", c.quadrature_error_bound),
        ("tail_bound", c.tail_bound),
        ("abs_diff", (c.lhs - c.rhs).abs()),
    ]);
    r.exact = Some(c.lhs);
    r.bound = Some(c.combined_error_bound());
    r.violated = !c.agrees();
    r
}

pub fn euler_cmd(g: &Global, a: &EulerArgs, tables: &PrimeTables) -> Result<u64> {
    let rows = match a.check {
        EulerCheck::Parseval => {
            let q = QuadConfig::default().with_rel_tol(g.quad_tol).with_t_cut(g.tcut.unwrap_or(2000.0));
            let mut rows = vec![parseval_row(
                "unit;len=1;sigma=0.5".into(),
                &euler::parseval_identity_check(&[Complex64::new(1.0, 0.0)], 0.5, &q)?,
            )];
            let checks: Vec<(usize, f64, ParsevalCheck)> = (0..a.sequences)
                .into_par_iter()
                .map(|i| {
                    let (coeffs, sigma) = parseval_sequence(g.seed, i);
                    Ok((coeffs.len(), sigma, euler::parseval_identity_check(&coeffs, sigma, &q)?))
                })
                .collect::<Result<_>>()?;
            for (i, (len, sigma, c)) in checks.iter().enumerate() {
                rows.push(parseval_row(format!("sequence={i};len={len};sigma={}", float_text(*sigma)), c));
            }
            rows
        }
        EulerCheck::ProductExpectation => {
            let trials = g.trials.unwrap_or(10_000);
            let mut rows = Vec::new();
            for model in models(g) {
                for &x in &a.x {
                    progress(g, &format!("product-expectation: {model}, x = {x}"));
                    let mut reports = Vec::new();
                    for &t in &a.t {
                        let r = rerun(
                            !a.no_rerun,
                            trials,
                            |k| euler::expected_product_identity_check(0, x, t, model, k, g.seed, tables),
                            |r| !r.agrees,
                        )?;
                        rows.push(
                            CheckRow::new("product-expectation", Some(model), format!("primes<={x}"))
                                .oracle(&r.result)
                                .x(x)
                                .t(t)
                                .reran(r.reran),
                        );
                        reports.push((t, r.result));
                    }
                    // Pairwise drift across heights; the exact value does not depend on t.
                    if let Some(&(t0, r0)) = reports.first() {
                        for &(t, r) in &reports[1..] {
                            let d = MomentReport::new(
                                (r.estimate - r0.estimate).abs(),
                                r.std_error.hypot(r0.std_error),
                                0.0,
                                r.trials.min(r0.trials),
                            );
                            rows.push(
                                CheckRow::new(
                                    "product-expectation.drift",
                                    Some(model),
                                    format!("t0={}", float_text(t0)),
                                )
                                .moment(&d)
                                .x(x)
                                .t(t),
                            );
                        }
                    }
                }
            }
            rows
        }
        EulerCheck::SigmaEvent => {
            let trials = g.trials.unwrap_or(200);
            let mut rows = Vec::new();
            for model in models(g) {
                progress(g, &format!("sigma-event: {model}, X_prev = {}", a.x_prev));
                let cfg = config(g, model, trials, 10_000);
                let r = rerun(
                    !a.no_rerun,
                    trials,
                    |k| harness::sigma_event_statistic(&cfg, a.x_prev, k, tables),
                    |s| !s.mean.agrees,
                )?;
                let (s, trials) = (&r.result, r.trials);
                rows.push(
                    CheckRow::new("sigma-event.mean", Some(model), "integral")
                        .oracle(&s.mean)
                        .x(s.x_prev)
                        .reran(r.reran),
                );
                let mut ex = CheckRow::new("sigma-event", Some(model), "exceedance_fraction")
                    .info(s.exceedance_fraction)
                    .x(s.x_prev)
                    .detail(&[("threshold", s.threshold), ("t_param", s.t_param)]);
                ex.bound = Some(s.budget);
                ex.trials = Some(trials);
                rows.push(ex);
                for (k, v) in quantile_fields(&s.integrals) {
                    rows.push(CheckRow::new("sigma-event", Some(model), format!("integral.{k}")).info(v).x(s.x_prev));
                }
                let mut low = CheckRow::new("sigma-event", Some(model), "low_moment_ratio")
                    .info(s.low_moment_ratio.0)
                    .x(s.x_prev);
                low.std_error = Some(s.low_moment_ratio.1);
                rows.push(low);
            }
            rows
        }
    };
    emit(g, &rows)
}

pub fn variance(g: &Global, a: &VarianceArgs, tables: &PrimeTables) -> Result<u64> {
    let mut rows = Vec::new();
    for model in models(g) {
        let cfg = config(g, model, 2000, 100_000);
        progress(g, &format!("variance: {model}, {} trials", cfg.trials));
        let e = if a.at.is_empty() {
            harness::variance_ratio_ensemble(&cfg, tables)?
        } else {
            cfg.validate(tables)?;
            harness::variance_ensemble_at(&cfg, &a.at, tables)?
        };
        for c in &e.checkpoints {
            rows.push(CheckRow::new("variance.mean", Some(model), "V").oracle(&c.mean).x(c.x));
            let mut r = CheckRow::new("variance.ratio", Some(model), "median")
                .info(c.ratio.median)
                .x(c.x)
                .detail(&quantile_fields(&c.ratio));
            r.std_error = Some(c.ratio.median_se);
            r.trials = Some(c.ratio.count as u64);
            rows.push(r);
        }
        rows.push(CheckRow::new("variance.trend", Some(model), "last_over_first_median").info(e.trend));
    }
    emit(g, &rows)
}
