//! Subcommand implementations and the `run` pipeline.

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use exactdim::analysis::{Margin, SCHEMA_VERSION};
use exactdim::diophantine::{annulus_hits, gap_experiment, violation_search, AnnulusParams, GapExperiment, GapReport, Point};
use exactdim::layer::Regime;
use exactdim::numeric::log_space;
use exactdim::spectral::inductive_bound;
use exactdim::*;

use crate::config::{ExperimentConfig, ParamsSection, SchemaError};
use crate::io::{read_csv, write_csv, CsvError};
use crate::{Cli, Command, ParamArgs};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_SCHEMA: u8 = 3;
pub const EXIT_ADMISSIBILITY: u8 = 4;
pub const EXIT_BUDGET: u8 = 5;
pub const EXIT_STRICT: u8 = 6;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<SchemaError>().is_some() || e.downcast_ref::<CsvError>().is_some() {
        return EXIT_SCHEMA;
    }
    if let Some(err) = e.downcast_ref::<Error>() {
        return match err {
            Error::Inadmissible { .. } => EXIT_ADMISSIBILITY,
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::HypothesisViolated { .. } => EXIT_STRICT,
            Error::InvalidInput(_) | Error::Domain(_) => EXIT_USAGE,
            _ => EXIT_IO,
        };
    }
    EXIT_IO
}

struct Ctx<'a> {
    mode: Mode,
    seed: u64,
    out_dir: &'a Path,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    /// Writes `name` under the output directory; returns the text.
    fn report<T: Serialize>(&self, name: &str, command: &str, body: T) -> anyhow::Result<String> {
        let mut doc = serde_json::Map::new();
        doc.insert("schema_version".into(), SCHEMA_VERSION.into());
        doc.insert("command".into(), command.into());
        doc.insert("mode".into(), serde_json::to_value(self.mode)?);
        match serde_json::to_value(body)? {
            serde_json::Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        let path = self.out_dir.join(name);
        std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        Ok(text)
    }

    fn print<T: Serialize>(&self, name: &str, command: &str, body: T) -> anyhow::Result<()> {
        print!("{}", self.report(name, command, body)?);
        Ok(())
    }
}

fn parse_range(s: &str) -> anyhow::Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| Error::InvalidInput(format!("expected lo:hi, got {s:?}")))?;
    let lo: f64 = a.trim().parse().map_err(|_| Error::InvalidInput(format!("bad number {a:?}")))?;
    let hi: f64 = b.trim().parse().map_err(|_| Error::InvalidInput(format!("bad number {b:?}")))?;
    if !(lo < hi) {
        bail!(Error::InvalidInput(format!("empty range {s:?}")));
    }
    Ok((lo, hi))
}

struct Setup {
    section: ParamsSection,
    theta: ThetaSpec,
    psi1: ApproxFunction,
    psi2: ApproxFunction,
}

impl Setup {
    fn from_args(a: &ParamArgs) -> anyhow::Result<Self> {
        let section = match &a.file {
            Some(path) => params_file(path)?,
            None => ParamsSection {
                gamma: a.gamma,
                tau1: a.tau1,
                tau2: a.tau2,
                epsilon: a.epsilon,
                log_power1: 0.0,
                log_power2: 0.0,
                theta: a.theta.clone(),
            },
        };
        Self::new(section)
    }

    fn new(section: ParamsSection) -> anyhow::Result<Self> {
        let make = |tau: f64, p: f64| if p == 0.0 { ApproxFunction::power(tau) } else { ApproxFunction::power_log(tau, p) };
        Ok(Self {
            theta: section.theta.parse()?,
            psi1: make(section.tau1, section.log_power1)?,
            psi2: make(section.tau2, section.log_power2)?,
            section,
        })
    }

    fn exponents(&self) -> ExponentSet {
        let p = &self.section;
        ExponentSet::compute(p.gamma, p.tau1, p.tau2, p.epsilon)
    }

    fn admissible(&self) -> anyhow::Result<ExponentSet> {
        let p = &self.section;
        Ok(derive_exponents(p.gamma, p.tau1, p.tau2, p.epsilon)?)
    }

    fn layer_params(&self) -> LayerParams {
        LayerParams {
            psi1: self.psi1,
            psi2: self.psi2,
            epsilon: self.section.epsilon,
            theta: self.theta.clone(),
            bump: Arc::new(default_bump()),
        }
    }

    fn layer(&self, m: u64) -> anyhow::Result<Arc<ScaleLayer>> {
        Ok(Arc::new(ScaleLayer::new(m, &self.layer_params())?))
    }
}

/// A parameter file: either a `[params]` table or its keys at top level.
fn params_file(path: &Path) -> anyhow::Result<ParamsSection> {
    #[derive(serde::Deserialize)]
    struct Wrapped {
        params: ParamsSection,
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let schema = |message: String| SchemaError {
        path: path.display().to_string(),
        message,
    };
    match toml::from_str::<Wrapped>(&text) {
        Ok(w) => Ok(w.params),
        Err(_) => toml::from_str::<ParamsSection>(&text).map_err(|e| schema(e.to_string()).into()),
    }
}

pub fn dispatch(cli: &Cli) -> anyhow::Result<u8> {
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let ctx = Ctx {
        mode: cli.mode,
        seed: cli.seed,
        out_dir: &cli.out_dir,
    };
    match &cli.command {
        Command::Params(a) => params(&ctx, a),
        Command::Gap {
            params,
            x,
            q1,
            q2,
            c,
            points,
            q2_cap,
        } => gap(&ctx, params, x.as_deref(), q1, *q2, *c, *points, *q2_cap),
        Command::Bump {
            depth,
            prefactor,
            certify,
            samples,
        } => bump(&ctx, *depth, *prefactor, certify, *samples),
        Command::Layer {
            params,
            m,
            verify,
            out,
            csv,
            window,
        } => layer(&ctx, params, *m, *verify, out, csv.as_deref(), *window),
        Command::Measure {
            params,
            m1,
            depth,
            window,
            dense,
            out,
        } => measure(&ctx, params, *m1, *depth, *window, *dense, out),
        Command::Stability {
            params,
            mj,
            synthetic: _,
            real,
        } => stability(&ctx, params, *mj, *real),
        Command::Periodize {
            check_lift,
            window: _,
            log2n,
            xi,
            samples,
            input,
            power,
            epsilon,
            delta,
            out,
        } => {
            if *check_lift {
                periodize_lift(&ctx, *log2n)
            } else {
                periodize_window(&ctx, xi, *samples, input.as_deref(), *power, *epsilon, *delta, out)
            }
        }
        Command::Fit { input, range } => fit(&ctx, &ctx.path(input), range),
        Command::Normality { a, m, nmax, input } => normality(&ctx, *a, *m, *nmax, &ctx.path(input)),
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config)?;
            run(&cfg, cli.mode)
        }
    }
}

fn params(ctx: &Ctx, a: &ParamArgs) -> anyhow::Result<u8> {
    let setup = Setup::from_args(a)?;
    let report = setup.exponents().report();
    ctx.print("params.json", "params", &report)?;
    if !report.admissible {
        setup.admissible()?;
    }
    Ok(0)
}

fn parse_point(x: &str) -> anyhow::Result<Point> {
    let bad = || Error::InvalidInput(format!("bad point {x:?}; expected a decimal or p/q+offset"));
    if let Some((frac, rest)) = x.split_once('/') {
        let (q, off) = match rest.find(['+', '-']) {
            Some(i) => (&rest[..i], rest[i..].trim_start_matches('+')),
            None => (rest, "0"),
        };
        return Ok(Point::Anchored {
            p: frac.trim().parse().map_err(|_| bad())?,
            q: q.trim().parse().map_err(|_| bad())?,
            offset: off.trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(Point::Real(x.trim().parse().map_err(|_| bad())?))
}

#[allow(clippy::too_many_arguments)]
fn gap(
    ctx: &Ctx,
    a: &ParamArgs,
    x: Option<&str>,
    q1: &str,
    q2: Option<i64>,
    c: f64,
    points: usize,
    q2_cap: i64,
) -> anyhow::Result<u8> {
    let setup = Setup::from_args(a)?;
    let params = AnnulusParams {
        psi1: setup.psi1,
        psi2: setup.psi2,
        c,
        theta: setup.theta.clone(),
    };
    match x {
        Some(x) => {
            let point = parse_point(x)?;
            let q1: i64 = q1.parse().map_err(|_| Error::InvalidInput(format!("--x needs a single q1, got {q1:?}")))?;
            let q2 = q2.ok_or_else(|| Error::InvalidInput("--x needs --q2".into()))?;
            let first = violation_search(&point, &params, q1, q2)?;
            // the annuli at the two ends, for context
            let own = annulus_hits(&point, &params, q1.max(2)..q1.max(2) + 1)?
                .into_iter()
                .chain(annulus_hits(&point, &params, q2..q2 + 1)?)
                .collect::<Vec<_>>();
            #[derive(Serialize)]
            struct Out {
                point: Point,
                report: GapReport,
                endpoint_annulus_hits: Vec<(i64, i64)>,
            }
            let report = GapReport {
                q1,
                q2,
                searched: (q1 + 1, q2 - 1),
                violations: first.into_iter().collect(),
                cutoff: None,
            };
            ctx.print(
                "gap.json",
                "gap",
                Out {
                    point,
                    report,
                    endpoint_annulus_hits: own,
                },
            )?;
            Ok(0)
        }
        None => {
            let (lo, hi) = parse_range(q1)?;
            let e = setup.exponents();
            let r = gap_experiment(&GapExperiment {
                params,
                beta_eps: e.beta_eps,
                q1_range: (lo as i64, hi as i64),
                points,
                q2_cap,
                scan_points: 4,
                seed: ctx.seed,
            })?;
            let strict_fail = r.violations_above_cutoff > 0;
            ctx.print("gap.json", "gap", &r)?;
            Ok(strict_code(ctx.mode, strict_fail))
        }
    }
}

fn strict_code(mode: Mode, failed: bool) -> u8 {
    if mode == Mode::PaperStrict && failed {
        EXIT_STRICT
    } else {
        0
    }
}

fn bump(ctx: &Ctx, depth: usize, prefactor: f64, certify: &str, samples: usize) -> anyhow::Result<u8> {
    let spec = widths_schedule(depth, prefactor)?;
    let range = parse_range(certify)?;
    let cert = certify_decay(&spec, range, samples)?;
    #[derive(Serialize)]
    #[allow(non_snake_case)]
    struct Out {
        C: f64,
        range: (f64, f64),
        certified: (f64, f64),
        K: usize,
        A: f64,
        argmax: f64,
        samples: usize,
    }
    ctx.print(
        "bump.json",
        "bump",
        Out {
            C: cert.c,
            range: cert.requested,
            certified: cert.certified,
            K: cert.depth,
            A: cert.prefactor,
            argmax: cert.argmax,
            samples: cert.samples,
        },
    )?;
    Ok(0)
}

fn regime_csv(path: &Path, l: &ScaleLayer, window: i64, mode: Mode) -> anyhow::Result<()> {
    let v = SpectralVector::from_fn(
        window,
        |s| l.f_hat(s),
        TailDescriptor {
            amplitude: 1.0,
            scale: (l.m as f64).powf(l.psi2.order()),
        },
        (l.m as f64).powf(l.psi2.order() * (1.0 + l.epsilon)),
        format!("f_hat M={}", l.m),
    )?;
    let tau2 = l.psi2.order();
    write_csv(path, &v, mode, |s| (Regime::classify(s, l.m, tau2, l.epsilon).as_str().to_string(), None))
}

#[allow(clippy::too_many_arguments)]
fn layer(
    ctx: &Ctx,
    a: &ParamArgs,
    m: u64,
    verify: bool,
    out: &Path,
    csv: Option<&Path>,
    window: i64,
) -> anyhow::Result<u8> {
    let setup = Setup::from_args(a)?;
    let l = setup.layer(m)?;
    if let Some(p) = csv {
        regime_csv(&ctx.path(p), &l, window, ctx.mode)?;
    }
    if verify || csv.is_none() {
        let sampler = RegimeSampler {
            seed: ctx.seed,
            ..Default::default()
        };
        let r = verify_regimes(&l, &sampler);
        let name = out.to_string_lossy().into_owned();
        ctx.print(&name, "layer", &r)?;
        let failed = !r.zero.nonzero.is_empty();
        return Ok(strict_code(ctx.mode, failed));
    }
    Ok(0)
}

/// Builds `μ̂^(1..=depth)`, writes each level and its bound report.
fn build_measure(
    ctx: &Ctx,
    setup: &Setup,
    exps: &ExponentSet,
    schedule: &ScaleSchedule,
    opts: &MeasureOptions,
    stem: &Path,
) -> anyhow::Result<(Vec<(SpectralVector, BoundReport)>, Vec<PathBuf>)> {
    let layers = schedule.scales.iter().map(|&m| setup.layer(m)).collect::<anyhow::Result<Vec<_>>>()?;
    let levels = product_measure(schedule, &layers, exps, opts)?;
    let mut paths = Vec::new();
    for (k, (v, report)) in levels.iter().enumerate() {
        let k = k + 1;
        let path = if k == levels.len() {
            ctx.path(stem)
        } else {
            let name = stem.file_stem().unwrap_or_default().to_string_lossy();
            ctx.path(&stem.with_file_name(format!("{name}.level{k}.csv")))
        };
        write_csv(&path, v, ctx.mode, |s| {
            let (band, bound) = inductive_bound(s, k, schedule, exps);
            (band.to_string(), Some(bound))
        })?;
        ctx.report(&format!("bounds_level{k}.json"), "measure", report)?;
        paths.push(path);
    }
    Ok((levels, paths))
}

fn measure(
    ctx: &Ctx,
    a: &ParamArgs,
    m1: u64,
    depth: usize,
    window: Option<f64>,
    dense: i64,
    out: &Path,
) -> anyhow::Result<u8> {
    let setup = Setup::from_args(a)?;
    let exps = setup.admissible()?;
    let schedule = ScaleSchedule::new(m1, exps.beta_eps, depth)?;
    let opts = MeasureOptions {
        dense_window: dense,
        window,
        mode: ctx.mode,
        ..Default::default()
    };
    let (levels, _) = build_measure(ctx, &setup, &exps, &schedule, &opts, out)?;
    let reports: Vec<&BoundReport> = levels.iter().map(|(_, r)| r).collect();
    #[derive(Serialize)]
    struct Out<'a> {
        scales: &'a [u64],
        reports: Vec<&'a BoundReport>,
    }
    ctx.print(
        "measure.json",
        "measure",
        Out {
            scales: &schedule.scales,
            reports,
        },
    )?;
    let failed = levels.iter().any(|(_, r)| !r.pass);
    Ok(strict_code(ctx.mode, failed))
}

fn stability(ctx: &Ctx, a: &ParamArgs, mj: u64, real: bool) -> anyhow::Result<u8> {
    let setup = Setup::from_args(a)?;
    let exps = setup.admissible()?;
    let opts = StabilityOptions {
        mode: ctx.mode,
        ..Default::default()
    };
    let report = if real {
        let schedule = ScaleSchedule::new(mj, exps.beta_eps, 2)?;
        let m_next = schedule.scales[1];
        let g_layer = setup.layer(mj)?;
        let f_layer = setup.layer(m_next)?;
        let reach = |m: u64| 64.0 * (m as f64).powf(exps.tau2 * (1.0 + exps.epsilon));
        let g = LayerCoefficients::new(g_layer, reach(mj));
        let f = LayerCoefficients::new(f_layer, reach(m_next));
        check_stability(&f, &g, mj, m_next, &exps, &opts)?
    } else {
        synthetic_stability(&SyntheticEnvelopes::new(mj, &exps), &opts)?
    };
    ctx.print("stability.json", "stability", &report)?;
    Ok(strict_code(ctx.mode, !report.pass))
}

fn periodize_lift(ctx: &Ctx, log2n: u32) -> anyhow::Result<u8> {
    let n = 1usize << log2n;
    let s: Vec<i64> = (-(n as i64) / 8 + 1..(n as i64) / 8).step_by((n / 512).max(1)).collect();
    let f = bump_on_torus(&default_bump(), 0.35, 0.1, n)?;
    let r = lift_check(&f, &s)?;
    ctx.print("lift.json", "periodize", &r)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn periodize_window(
    ctx: &Ctx,
    xi: &str,
    samples: usize,
    input: Option<&Path>,
    power: f64,
    epsilon: f64,
    delta: Option<f64>,
    out: &Path,
) -> anyhow::Result<u8> {
    let (lo, hi) = parse_range(xi)?;
    let mu = match input {
        Some(p) => read_csv(&ctx.path(p))?,
        None => SpectralVector::from_fn(
            (hi.ceil() as i64).saturating_add(1000),
            |s| {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * (1.0 + s.abs() as f64).powf(-power), 0.0)
            },
            TailDescriptor {
                amplitude: 0.0,
                scale: 1.0,
            },
            f64::INFINITY,
            format!("(1+|s|)^-{power}"),
        )?,
    };
    let decay = delta.map_or(power, |d| d - epsilon);
    let xs = log_space(lo, hi, samples);
    let w = window_transform(&mu, &Window::new(default_bump()), &xs, 1e-14)?;
    let csv = ctx.path(out);
    let mut text = String::from("xi,re,im,abs,s2_bound,error\n");
    for s in &w {
        text += &format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", s.xi, s.value.re, s.value.im, s.value.norm(), s.s2_bound, s.error);
    }
    std::fs::write(&csv, text).with_context(|| format!("writing {}", csv.display()))?;
    let pts: Vec<(f64, f64)> = w.iter().map(|s| (s.xi, s.value.norm())).collect();
    let fit = verify_real_decay(&pts, decay)?;
    ctx.print("periodize.json", "periodize", &fit)?;
    Ok(strict_code(ctx.mode, fit.flagged))
}

fn fit(ctx: &Ctx, input: &Path, range: &str) -> anyhow::Result<u8> {
    let v = read_csv(input)?;
    let f = fit_decay(&v, parse_range(range)?)?;
    ctx.print("fit.json", "fit", &f)?;
    Ok(0)
}

fn normality(ctx: &Ctx, a: u64, m: i64, nmax: usize, input: &Path) -> anyhow::Result<u8> {
    let v = read_csv(input)?;
    let r = normality_sum(&v, a, m, nmax, ctx.mode)?;
    #[derive(Serialize)]
    struct Out {
        a: u64,
        m: i64,
        n_max: usize,
        total: f64,
        certified: f64,
        tail_contribution: f64,
        stored_terms: u64,
        tail_terms: u64,
        trivial_terms: u64,
        /// Partial sums at `N = 10^k`.
        checkpoints: Vec<(usize, f64)>,
    }
    let checkpoints = std::iter::successors(Some(1usize), |n| n.checked_mul(10))
        .take_while(|&n| n <= r.n_max)
        .chain(std::iter::once(r.n_max))
        .map(|n| (n, r.partial[n - 1]))
        .collect::<Vec<_>>();
    ctx.print(
        "normality.json",
        "normality",
        Out {
            a: r.a,
            m: r.m,
            n_max: r.n_max,
            total: r.total(),
            certified: r.certified,
            tail_contribution: r.tail_contribution,
            stored_terms: r.stored_terms,
            tail_terms: r.tail_terms,
            trivial_terms: r.trivial_terms,
            checkpoints,
        },
    )?;
    Ok(0)
}

/// The full pipeline. Returns the exit status; in paper-strict mode any failed
/// check makes it nonzero.
pub fn run(cfg: &ExperimentConfig, cli_mode: Mode) -> anyhow::Result<u8> {
    let mode = if cli_mode == Mode::PaperStrict { Mode::PaperStrict } else { cfg.schedule.mode };
    let out_dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let ctx = Ctx {
        mode,
        seed: cfg.sampler.seed,
        out_dir: &out_dir,
    };
    let setup = Setup::new(cfg.params.clone()).map_err(|e| {
        anyhow!(SchemaError {
            path: "[params]".into(),
            message: e.to_string(),
        })
    })?;
    let mut failures: Vec<String> = Vec::new();

    // params
    let p = &cfg.params;
    let theory = setup.exponents();
    ctx.report("params.json", "params", theory.report())?;
    let exps = match derive_exponents(p.gamma, p.tau1, p.tau2, p.epsilon) {
        Ok(e) => e,
        Err(e) => {
            let r = dimension_report(p.gamma, p.tau1, p.tau2, p.epsilon, mode, None, Vec::new());
            ctx.report("report.json", "run", &r)?;
            return Err(e.into());
        }
    };

    // diophantine
    let theta_estimate = match setup.theta {
        ThetaSpec::Zero => None,
        ref t => Some(estimate_exponent(t, 1_000_000)?),
    };
    ctx.report("theta.json", "run", &theta_estimate)?;

    // bump
    let cert = certify_decay(&default_bump(), (1e2, 1e4), 2000)?;
    ctx.report("bump.json", "run", &cert)?;

    // layers
    let schedule = ScaleSchedule::new(cfg.schedule.m1, exps.beta_eps, cfg.schedule.depth)?;
    let sampler = RegimeSampler {
        medium_samples: cfg.sampler.medium_samples,
        tail_samples: cfg.sampler.tail_samples,
        seed: cfg.sampler.seed,
    };
    let mut regimes = Vec::new();
    for &m in &schedule.scales {
        let l = setup.layer(m)?;
        let r = verify_regimes(&l, &sampler);
        if !r.zero.nonzero.is_empty() {
            failures.push(format!("layer M={m}: nonzero coefficients below M"));
        }
        regimes.push(r);
    }
    ctx.report("regimes.json", "run", &regimes)?;

    // spectral
    let w = &cfg.windows;
    let opts = MeasureOptions {
        dense_window: w.dense,
        window: w.window,
        log_samples: w.log_samples,
        tail_samples: w.tail_samples,
        tol: w.tol,
        budget: w.budget,
        mode,
        probes: normality_probes(2, 1, w.normality_nmax),
        ..Default::default()
    };
    let (levels, _) = build_measure(&ctx, &setup, &exps, &schedule, &opts, Path::new("mu.csv"))?;
    for (k, (_, r)) in levels.iter().enumerate() {
        if !r.pass {
            failures.push(format!("inductive bounds at level {}", k + 1));
        }
    }
    let stab = synthetic_stability(
        &SyntheticEnvelopes::new(cfg.schedule.m1, &exps),
        &StabilityOptions {
            mode,
            ..Default::default()
        },
    )?;
    if !stab.pass {
        failures.push(format!("stability at M_j = {}", cfg.schedule.m1));
    }
    ctx.report("stability.json", "run", &stab)?;

    // periodize
    let (mu, bounds) = levels.last().expect("depth >= 1");
    let lift = lift_check(&bump_on_torus(&default_bump(), 0.35, 0.1, 1 << 16)?, &[1, 7, 100, 1000, 4000])?;
    let win = Window::new(default_bump());
    let sup = mu.get(0).map_or(1.0, |c| c.norm());
    let radius = win.radius_for(sup, 1e-12).unwrap_or(f64::INFINITY);
    let xmax = (mu.window as f64 - radius).min(1e4);
    let windowed = if xmax > 10.0 {
        window_transform(mu, &win, &log_space(1.0, xmax, 200), 1e-12)?
    } else {
        Vec::new()
    };
    let pts: Vec<(f64, f64)> = windowed.iter().map(|s| (s.xi, s.value.norm())).collect();
    let real = verify_real_decay(&pts, exps.delta - exps.epsilon).ok();
    #[derive(Serialize)]
    struct Periodize<'a> {
        lift: LiftReport,
        windowed: &'a [WindowSample],
        real_decay: Option<RealDecay>,
    }
    ctx.report(
        "periodize.json",
        "run",
        Periodize {
            lift,
            windowed: &windowed,
            real_decay: real,
        },
    )?;

    // analysis
    let fit_range = (10.0, (mu.window as f64).max(1e3));
    let fit = fit_decay(mu, fit_range).ok();
    let norm = normality_sum(mu, 2, 1, w.normality_nmax, mode)?;
    ctx.report("normality.json", "run", &norm)?;
    let mut margins = vec![Margin {
        name: "mass".into(),
        value: bounds.mass,
        bound: bounds.mass_interval.1,
        pass: bounds.mass_ok,
    }];
    for b in &bounds.bands {
        margins.push(Margin {
            name: format!("band {}", b.band),
            value: b.value_at_worst,
            bound: b.bound_at_worst,
            pass: b.pass,
        });
    }
    for part in &stab.parts {
        margins.push(Margin {
            name: format!("stability part ({})", part.part),
            value: part.ratio,
            bound: 1.0,
            pass: part.pass,
        });
    }
    margins.push(Margin {
        name: "normality certified sum".into(),
        value: norm.certified,
        bound: f64::INFINITY,
        pass: norm.certified.is_finite(),
    });
    let report = dimension_report(p.gamma, p.tau1, p.tau2, p.epsilon, mode, fit, margins);
    #[derive(Serialize)]
    struct Run<'a> {
        #[serde(flatten)]
        report: &'a DimensionReport,
        scales: &'a [u64],
        failures: &'a [String],
    }
    ctx.report(
        "report.json",
        "run",
        Run {
            report: &report,
            scales: &schedule.scales,
            failures: &failures,
        },
    )?;
    for f in &failures {
        eprintln!("check failed: {f}");
    }
    Ok(strict_code(mode, !failures.is_empty()))
}

/// `m(a^j − a^k)` for `1 ≤ k < j` while it fits, so the normality sum sees stored
/// values where the measure is cheap to evaluate.
fn normality_probes(a: u64, m: i64, n_max: usize) -> Vec<i64> {
    let mut out = Vec::new();
    for j in 2..=(n_max.min(62) as u32) {
        for k in 1..j {
            let (Some(aj), Some(ak)) = ((a as i64).checked_pow(j), (a as i64).checked_pow(k)) else {
                continue;
            };
            if let Some(s) = m.checked_mul(aj - ak) {
                if s <= 1 << 37 {
                    out.push(s);
                }
            }
        }
    }
    out
}
