use std::fs;
use std::path::PathBuf;

use ltvdiss::apps::{heating_system, rocket_system, HeatingParams, RocketParams};
use ltvdiss::dissipativity::{
    available_storage, dissipation_check, integral_kyp_check, kyp_check, StorageCandidate,
};
use ltvdiss::hermlin::{herm_eig, psd_check};
use ltvdiss::ltv::{reachability_gramian, simulate, supply_exact, uniform_grid, Domain};
use ltvdiss::ph::{canonical_ph_with, power_balance_residual, CanonicalOptions, PhRepresentation};
use ltvdiss::popov::{dyadic_subinterval_check, nonnegative_supply_check, popov_gram};
use ltvdiss::transforms::{
    invert_monotone, transform_ph, transform_storage, transform_system, verify_invariance,
    InvarianceOptions, Transform,
};
use ltvdiss::{CVec, LtvSystem, MatrixFunction, TimeExpr, C64};

use crate::config::{self, format_ph, format_system, parse_column, parse_domain, parse_matrix, Config};
use crate::report::{fmt9, Report};
use crate::{CliError, CliResult, Command, Common, Outcome, Preset, Signal, TransformArgs};
use crate::{EXIT_FAILS, EXIT_HOLDS};

const DEFAULT_NODES: usize = 101;
const DEFAULT_KYP_TOL: f64 = 1e-9;
const DEFAULT_PSD_TOL: f64 = 1e-9;
const DEFAULT_RTOL: f64 = 1e-10;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn analysis(e: ltvdiss::Error) -> CliError {
    CliError::Analysis(e)
}

/// Everything a command needs, resolved from flags, config and presets.
struct Ctx {
    sys: Option<LtvSystem>,
    storage: Option<StorageCandidate>,
    ph: Option<PhRepresentation>,
    cfg: Option<Config>,
    interval: Option<(f64, f64)>,
    nodes: usize,
    grid: Option<Vec<f64>>,
    kyp_tol: f64,
    psd_tol: f64,
    rtol: f64,
    out: Option<PathBuf>,
}

fn parse_interval(s: &str) -> CliResult<(f64, f64)> {
    let d = parse_domain(s).map_err(|m| usage(format!("interval: {m}")))?;
    if !d.is_finite() {
        return Err(usage(format!("interval `{s}` must be finite")));
    }
    Ok((d.lo, d.hi))
}

/// `a:b:n`.
fn parse_grid(s: &str) -> CliResult<((f64, f64), usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("grid `{s}` must be `a:b:n`")));
    }
    let iv = parse_interval(&format!("{}:{}", parts[0], parts[1]))?;
    let n = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|_| usage(format!("grid `{s}`: node count must be an integer")))?;
    Ok((iv, n))
}

fn tolerance(flag: Option<f64>, cfg: Option<&Config>, key: &str, default: f64) -> CliResult<f64> {
    let from_cfg = match cfg {
        Some(c) => c.number("tolerances", key)?,
        None => None,
    };
    let v = flag.or(from_cfg).unwrap_or(default);
    if !(v > 0.0) {
        return Err(usage(format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn parse_expr(s: &str, what: &str) -> CliResult<TimeExpr> {
    TimeExpr::parse(s).map_err(|e| usage(format!("{what} `{s}`: {e}")))
}

fn resolve(common: &Common) -> CliResult<Ctx> {
    let cfg = common.system.as_deref().map(Config::load).transpose()?;

    let mut interval = None;
    let mut nodes = common.nodes;
    if let Some(g) = &common.grid {
        if common.interval.is_some() || common.nodes.is_some() {
            return Err(usage("--grid cannot be combined with --interval or --nodes"));
        }
        let (iv, n) = parse_grid(g)?;
        interval = Some(iv);
        nodes = Some(n);
    } else if let Some(s) = &common.interval {
        interval = Some(parse_interval(s)?);
    }
    if let Some(c) = &cfg {
        if interval.is_none() {
            if let Some(d) = c.domain("grid", "interval")? {
                if !d.is_finite() {
                    return Err(usage("[grid] interval must be finite"));
                }
                interval = Some((d.lo, d.hi));
            }
        }
        if nodes.is_none() {
            if let Some(n) = c.number("grid", "nodes")? {
                if n.fract() != 0.0 || n < 0.0 {
                    return Err(usage("[grid] nodes must be a non-negative integer"));
                }
                nodes = Some(n as usize);
            }
        }
    }

    let (sys, mut storage, ph) = if let Some(preset) = common.preset {
        let domain = match (&common.domain, interval) {
            (Some(d), _) => parse_domain(d).map_err(|m| usage(format!("--domain: {m}")))?,
            (None, Some((a, b))) => Domain::new(a, b),
            (None, None) => match preset {
                Preset::Rocket => Domain::new(0.0, 1.0),
                Preset::Heating => Domain::new(0.0, 10.0),
            },
        };
        match preset {
            Preset::Rocket => {
                let params = RocketParams::new(parse_expr(&common.m, "--m")?, domain);
                let r = rocket_system(&params).map_err(CliError::Input)?;
                (Some(r.sys), Some(r.q), Some(r.ph))
            }
            Preset::Heating => {
                let params = HeatingParams::new(
                    parse_expr(&common.qp, "--qp")?,
                    parse_expr(&common.qd, "--qd")?,
                    common.vs,
                    common.vh0,
                    domain,
                );
                let h = heating_system(&params).map_err(CliError::Input)?;
                (Some(h.sys), Some(h.q), Some(h.ph))
            }
        }
    } else if let Some(c) = &cfg {
        let sys = if c.has_section("system") { Some(c.system()?) } else { None };
        (sys, c.storage()?, c.ph()?)
    } else {
        return Err(usage("one of --system or --preset is required"));
    };
    if sys.is_none() && ph.is_none() {
        return Err(usage("the config defines neither [system] nor [ph]"));
    }
    if let Some(p) = &common.storage {
        storage = Some(
            Config::load(p)?
                .storage()?
                .ok_or_else(|| usage(format!("{} has no [storage] section", p.display())))?,
        );
    }

    let domain = sys.as_ref().map_or_else(|| ph.as_ref().expect("checked").domain, |s| s.domain());
    // commands without a grid accept an unbounded domain
    let interval = match interval {
        Some(iv) => Some(iv),
        None if domain.is_finite() => Some((domain.lo, domain.hi)),
        None => None,
    };
    if let Some((a, b)) = interval {
        if !(a < b) {
            return Err(usage(format!("empty interval {a}:{b}")));
        }
        if !domain.contains(a) || !domain.contains(b) {
            return Err(usage(format!(
                "interval {a}:{b} is not inside the domain {}",
                config::format_domain(domain)
            )));
        }
    }
    let nodes = nodes.unwrap_or(DEFAULT_NODES);
    if nodes < 2 {
        return Err(usage("need at least 2 nodes"));
    }
    let c = cfg.as_ref();
    Ok(Ctx {
        kyp_tol: tolerance(common.kyp_tol, c, "kyp_tol", DEFAULT_KYP_TOL)?,
        psd_tol: tolerance(common.psd_tol, c, "psd_tol", DEFAULT_PSD_TOL)?,
        rtol: tolerance(common.rtol, c, "rtol", DEFAULT_RTOL)?,
        sys,
        storage,
        ph,
        cfg,
        grid: interval.map(|(a, b)| uniform_grid(a, b, nodes)),
        interval,
        nodes,
        out: common.out.clone(),
    })
}

impl Ctx {
    fn interval(&self) -> CliResult<(f64, f64)> {
        self.interval
            .ok_or_else(|| usage("no interval given and the system domain is unbounded"))
    }

    fn grid(&self) -> CliResult<&[f64]> {
        self.interval()?;
        Ok(self.grid.as_deref().expect("set with the interval"))
    }

    fn sys(&self) -> CliResult<&LtvSystem> {
        self.sys.as_ref().ok_or_else(|| usage("this command needs a [system] section"))
    }

    fn storage(&self) -> CliResult<&StorageCandidate> {
        self.storage
            .as_ref()
            .ok_or_else(|| usage("this command needs a storage Q ([storage] section or --storage)"))
    }

    fn input_raw(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone()
            .or_else(|| self.cfg.as_ref().and_then(|c| c.raw("input", key).map(str::to_string)))
    }

    fn input(&self, signal: &Signal, m: usize) -> CliResult<MatrixFunction> {
        let Some(src) = self.input_raw(&signal.input, "u") else {
            return Ok(MatrixFunction::zeros(m, 1));
        };
        let col = parse_column(&src).map_err(|e| usage(format!("input: {e}")))?;
        if col.len() != m {
            return Err(usage(format!("input has {} entries, the system has {m} ports", col.len())));
        }
        MatrixFunction::from_rows(col.into_iter().map(|e| vec![e]).collect()).map_err(CliError::Input)
    }

    fn x0(&self, signal: &Signal, n: usize) -> CliResult<CVec> {
        match self.input_raw(&signal.x0, "x0") {
            None => Ok(CVec::zeros(n)),
            Some(src) => constant_vector(&src, n, "x0"),
        }
    }

    fn write(&self, report: &mut Report, name: &str, contents: &str) -> CliResult<()> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, contents)?;
            report.line(format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

fn constant_vector(src: &str, n: usize, what: &str) -> CliResult<CVec> {
    let col = parse_column(src).map_err(|e| usage(format!("{what}: {e}")))?;
    if col.len() != n {
        return Err(usage(format!("{what} has {} entries, expected {n}", col.len())));
    }
    let vals = col
        .iter()
        .map(|e| match e.as_const() {
            Some(c) => Ok(c),
            None => Err(usage(format!("{what} entries must be constants, found `{e}`"))),
        })
        .collect::<CliResult<Vec<C64>>>()?;
    Ok(CVec::from_vec(vals))
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        fmt9(z.re)
    } else {
        format!("{}{}{}i", fmt9(z.re), if z.im < 0.0 { "-" } else { "+" }, fmt9(z.im.abs()))
    }
}

fn fmt_mat(m: &ltvdiss::CMat) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| format!("[{}]", r.iter().map(|&z| fmt_c(z)).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn held(b: bool) -> i32 {
    if b {
        EXIT_HOLDS
    } else {
        EXIT_FAILS
    }
}

fn build_transform(args: &TransformArgs) -> CliResult<Transform> {
    let mat = |s: &str, what: &str| parse_matrix(s).map_err(|m| usage(format!("{what}: {m}")));
    match (&args.z, &args.v, &args.theta) {
        (Some(z), None, None) => Ok(Transform::State { z: mat(z, "--z")? }),
        (None, Some(v), None) => Ok(Transform::Io { v: mat(v, "--v")? }),
        (None, None, Some(theta)) => {
            let nd = args.new_domain.as_deref().ok_or_else(|| usage("--theta needs --new-domain"))?;
            Ok(Transform::Time {
                theta: parse_expr(theta, "--theta")?,
                domain: parse_domain(nd).map_err(|m| usage(format!("--new-domain: {m}")))?,
            })
        }
        _ => Err(usage("give exactly one of --z, --v or --theta")),
    }
}

fn transform_kind(tr: &Transform) -> &'static str {
    match tr {
        Transform::State { .. } => "state",
        Transform::Io { .. } => "io",
        Transform::Time { .. } => "time",
    }
}

/// Grid in the transformed time.
fn pulled_grid(tr: &Transform, grid: &[f64]) -> CliResult<Vec<f64>> {
    match tr {
        Transform::Time { theta, domain } => grid
            .iter()
            .map(|&t| invert_monotone(theta, t, domain.lo, domain.hi))
            .collect::<ltvdiss::Result<Vec<_>>>()
            .map_err(analysis),
        _ => Ok(grid.to_vec()),
    }
}

pub(crate) fn dispatch(cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::CheckKyp { common } => check_kyp(&resolve(&common)?),
        Command::CheckIntegralKyp { common } => check_integral_kyp(&resolve(&common)?),
        Command::Simulate { common, signal } => simulate_cmd(&resolve(&common)?, &signal),
        Command::Supply { common, signal, dissipation_tol } => {
            supply_cmd(&resolve(&common)?, &signal, dissipation_tol)
        }
        Command::Popov { common, levels } => popov_cmd(&resolve(&common)?, levels),
        Command::CanonicalPh { common } => canonical_cmd(&resolve(&common)?),
        Command::AvailableStorage { common, at, state, horizon } => {
            available_storage_cmd(&resolve(&common)?, at, &state, horizon)
        }
        Command::PowerBalance { common, signal, balance_tol } => {
            power_balance_cmd(&resolve(&common)?, &signal, balance_tol)
        }
        Command::Transform { common, transform } => transform_cmd(&resolve(&common)?, &transform),
        Command::VerifyInvariance { common, transform, signal, supply_tol } => {
            verify_cmd(&resolve(&common)?, &transform, &signal, supply_tol)
        }
        Command::Gramian { common } => gramian_cmd(&resolve(&common)?),
    }
}

fn check_kyp(ctx: &Ctx) -> CliResult<Outcome> {
    let r = kyp_check(ctx.sys()?, ctx.storage()?, ctx.grid()?, ctx.kyp_tol).map_err(analysis)?;
    let mut rep = Report::new("check-kyp");
    rep.flag("holds", r.holds)
        .int("nodes", r.grid.len())
        .int("skipped", r.skipped.len())
        .num("tol", r.tol);
    if let Some((t, e)) = r.worst {
        rep.num("min_eig", e).num("min_eig_t", t);
    }
    rep.line("t min_eig");
    for (t, e) in r.grid.iter().zip(&r.min_eig) {
        rep.line(format!("{} {}", fmt9(*t), fmt9(*e)));
    }
    ctx.write(&mut rep, "kyp.csv", &r.to_csv())?;
    Ok(Outcome { code: held(r.holds), report: rep })
}

fn check_integral_kyp(ctx: &Ctx) -> CliResult<Outcome> {
    let (a, b) = ctx.interval()?;
    let r = integral_kyp_check(ctx.sys()?, ctx.storage()?, a, b, ctx.nodes, ctx.kyp_tol)
        .map_err(analysis)?;
    let mut rep = Report::new("check-integral-kyp");
    rep.flag("holds", r.holds).num("min_eig", r.min_eig).num("t_a", a).num("t_b", b);
    rep.line(format!("integrated KYP matrix: {}", fmt_mat(r.matrix.matrix())));
    Ok(Outcome { code: held(r.holds), report: rep })
}

fn simulate_cmd(ctx: &Ctx, signal: &Signal) -> CliResult<Outcome> {
    let sys = ctx.sys()?;
    let u = ctx.input(signal, sys.m())?;
    let x0 = ctx.x0(signal, sys.n())?;
    let traj = simulate(sys, ctx.interval()?.0, &x0, &u, ctx.grid()?, ctx.rtol).map_err(analysis)?;
    let mut rep = Report::new("simulate");
    rep.int("nodes", traj.grid.len()).num("t_end", ctx.interval()?.1);
    for (i, z) in traj.x.last().expect("at least 2 nodes").iter().enumerate() {
        rep.str(&format!("x_end_{}", i + 1), fmt_c(*z));
    }
    rep.num("supply_trapezoid", *traj.cumulative_supply().last().expect("non-empty"));
    ctx.write(&mut rep, "trajectory.csv", &traj.to_csv())?;
    Ok(Outcome { code: EXIT_HOLDS, report: rep })
}

fn supply_cmd(ctx: &Ctx, signal: &Signal, dissipation_tol: f64) -> CliResult<Outcome> {
    let sys = ctx.sys()?;
    let (a, b) = ctx.interval()?;
    let u = ctx.input(signal, sys.m())?;
    let x0 = ctx.x0(signal, sys.n())?;
    let exact = supply_exact(sys, &x0, &u, a, b, ctx.rtol).map_err(analysis)?;
    let traj = simulate(sys, a, &x0, &u, ctx.grid()?, ctx.rtol).map_err(analysis)?;
    let mut rep = Report::new("supply");
    rep.num("supply", exact)
        .num("supply_trapezoid", *traj.cumulative_supply().last().expect("non-empty"))
        .num("t_a", a)
        .num("t_b", b);
    let mut code = EXIT_HOLDS;
    if let Some(q) = &ctx.storage {
        let d = dissipation_check(&traj, q, dissipation_tol).map_err(analysis)?;
        rep.flag("passive_on_trajectory", d.passive_on_trajectory)
            .num("worst_violation", d.worst_violation);
        if let Some((t0, t1)) = d.worst_pair {
            rep.num("worst_t0", t0).num("worst_t1", t1);
        }
        code = held(d.passive_on_trajectory);
    }
    ctx.write(&mut rep, "trajectory.csv", &traj.to_csv())?;
    Ok(Outcome { code, report: rep })
}

fn popov_cmd(ctx: &Ctx, levels: u32) -> CliResult<Outcome> {
    let (a, b) = ctx.interval()?;
    let gram = popov_gram(ctx.sys()?, a, b, ctx.nodes, ctx.rtol).map_err(analysis)?;
    let r = nonnegative_supply_check(&gram, ctx.psd_tol).map_err(analysis)?;
    let mut rep = Report::new("popov");
    rep.flag("nn", r.nn)
        .num("min_eig", r.min_eig)
        .num("scale", r.scale)
        .int("cells", gram.cells());
    match r.witness {
        Some((t, e)) => {
            rep.num("witness_t", t).num("witness_min_eig", e);
            rep.line(format!(
                "D + D^H has eigenvalue {} at t = {}: inputs concentrated near this time draw \
                 energy out from the zero state, so the supply is not nonnegative.",
                fmt9(e),
                fmt9(t)
            ));
        }
        None => {
            rep.str("witness", "none");
        }
    }
    let mut code = held(r.nn);
    if levels > 0 {
        let subs = dyadic_subinterval_check(&gram, levels, ctx.psd_tol).map_err(analysis)?;
        let failed = subs.iter().filter(|s| !s.nn).count();
        rep.int("subintervals", subs.len()).int("subintervals_failed", failed);
        for s in &subs {
            rep.line(format!(
                "[{}, {}] min_eig={} nn={}",
                fmt9(s.t_0),
                fmt9(s.t_1),
                fmt9(s.min_eig),
                s.nn
            ));
        }
        if failed > 0 {
            code = EXIT_FAILS;
        }
    }
    ctx.write(&mut rep, "popov_eigs.csv", &gram.eigenvalues_csv().map_err(analysis)?)?;
    Ok(Outcome { code, report: rep })
}

fn canonical_cmd(ctx: &Ctx) -> CliResult<Outcome> {
    let sys = ctx.sys()?;
    let opts = CanonicalOptions {
        kyp_tol: ctx.kyp_tol,
        ..CanonicalOptions::default()
    };
    let c = canonical_ph_with(sys, ctx.storage()?, ctx.grid()?, opts).map_err(analysis)?;
    let mut rep = Report::new("canonical-ph");
    rep.int("rank", c.rank)
        .int("state_dim", c.ph.state_dim())
        .int("port_dim", c.ph.port_dim())
        .num("assembly_residual", c.assembly_residual);
    let t = ctx.interval()?.0;
    rep.line(format!("reduced coefficients at t = {}:", fmt9(t)));
    for (name, f) in [
        ("Q", &c.reduced.q),
        ("K", &c.reduced.k),
        ("J", &c.reduced.j),
        ("R", &c.reduced.r),
        ("G", &c.reduced.g),
        ("P", &c.reduced.p),
        ("S", &c.reduced.s),
        ("N", &c.reduced.n),
    ] {
        rep.line(format!("{name} = {}", fmt_mat(&f.eval(t).map_err(analysis)?)));
    }
    let text = format_ph(&c.ph, ctx.grid()?).map_err(analysis)?;
    ctx.write(&mut rep, "ph.cfg", &text)?;
    let reduced = format_ph(&c.reduced, ctx.grid()?).map_err(analysis)?;
    ctx.write(&mut rep, "ph_reduced.cfg", &reduced)?;
    Ok(Outcome { code: EXIT_HOLDS, report: rep })
}

fn available_storage_cmd(ctx: &Ctx, at: f64, state: &str, horizon: f64) -> CliResult<Outcome> {
    let sys = ctx.sys()?;
    let x = constant_vector(state, sys.n(), "--state")?;
    let v = available_storage(sys, at, &x, horizon, ctx.rtol).map_err(analysis)?;
    let mut rep = Report::new("available-storage");
    rep.num("value", v).num("at", at).num("horizon", horizon);
    Ok(Outcome { code: EXIT_HOLDS, report: rep })
}

fn power_balance_cmd(ctx: &Ctx, signal: &Signal, balance_tol: f64) -> CliResult<Outcome> {
    let canonical;
    let ph = match (&ctx.ph, &ctx.storage) {
        (Some(ph), _) => ph,
        (None, Some(q)) => {
            canonical = canonical_ph_with(ctx.sys()?, q, ctx.grid()?, CanonicalOptions::default())
                .map_err(analysis)?
                .ph;
            &canonical
        }
        (None, None) => return Err(usage("power-balance needs a [ph] section or a storage Q")),
    };
    let sys = ph.assemble_system(ctx.grid()?, ctx.kyp_tol).map_err(analysis)?;
    let u = ctx.input(signal, sys.m())?;
    let x0 = ctx.x0(signal, sys.n())?;
    let traj = simulate(&sys, ctx.interval()?.0, &x0, &u, ctx.grid()?, ctx.rtol).map_err(analysis)?;
    let pb = power_balance_residual(ph, &traj).map_err(analysis)?;
    let holds = pb.max_residual <= balance_tol && pb.dissipation_integral >= -balance_tol;
    let mut rep = Report::new("power-balance");
    rep.flag("holds", holds)
        .num("max_residual", pb.max_residual)
        .num("total_residual", pb.total_residual)
        .num("dissipation_integral", pb.dissipation_integral)
        .num("balance_tol", balance_tol);
    ctx.write(&mut rep, "trajectory.csv", &traj.to_csv())?;
    Ok(Outcome { code: held(holds), report: rep })
}

fn transform_cmd(ctx: &Ctx, args: &TransformArgs) -> CliResult<Outcome> {
    let tr = build_transform(args)?;
    let grid = pulled_grid(&tr, ctx.grid()?)?;
    let sys_t = transform_system(ctx.sys()?, &tr, &grid, args.singular_tol).map_err(analysis)?;
    let mut rep = Report::new("transform");
    rep.str("kind", transform_kind(&tr))
        .int("state_dim", sys_t.n())
        .int("port_dim", sys_t.m())
        .str("domain", config::format_domain(sys_t.domain()));
    let mut text = format_system(&sys_t, &grid).map_err(analysis)?;
    if let Some(q) = &ctx.storage {
        let q_t = transform_storage(q, &tr).map_err(analysis)?;
        text.push_str(&format!("\n[storage]\nQ = {}\n", config::format_matrix(q_t.q(), &grid).map_err(analysis)?));
    }
    if let Some(ph) = &ctx.ph {
        let ph_t = transform_ph(ph, &tr).map_err(analysis)?;
        text.push('\n');
        text.push_str(&format_ph(&ph_t, &grid).map_err(analysis)?);
    }
    ctx.write(&mut rep, "transformed.cfg", &text)?;
    if ctx.out.is_none() {
        rep.line(text);
    }
    Ok(Outcome { code: EXIT_HOLDS, report: rep })
}

fn verify_cmd(ctx: &Ctx, args: &TransformArgs, signal: &Signal, supply_tol: f64) -> CliResult<Outcome> {
    let sys = ctx.sys()?;
    let tr = build_transform(args)?;
    let opts = InvarianceOptions {
        grid: ctx.grid()?.to_vec(),
        tol: ctx.kyp_tol,
        supply_tol,
        input: ctx.input(signal, sys.m())?,
        x0: ctx.x0(signal, sys.n())?,
        interval: ctx.interval()?,
        rtol: ctx.rtol,
    };
    let r = verify_invariance(sys, ctx.storage()?, &tr, ctx.ph.as_ref(), &opts).map_err(analysis)?;
    let mut rep = Report::new("verify-invariance");
    rep.str("kind", transform_kind(&tr))
        .flag("passed", r.passed)
        .flag("kyp_before", r.kyp_before.holds)
        .flag("kyp_after", r.kyp_after.holds)
        .num("congruence_residual", r.congruence_residual)
        .num("supply_original", r.supply_original)
        .num("supply_transformed", r.supply_transformed)
        .num("supply_gap", r.supply_gap);
    match &r.ph_check {
        None => rep.str("ph_check", "skipped"),
        Some(Ok(())) => rep.str("ph_check", "ok"),
        Some(Err(e)) => {
            rep.line(format!("transformed pH representation: {e}"));
            rep.str("ph_check", "failed")
        }
    };
    rep.line(r.note);
    Ok(Outcome { code: held(r.passed), report: rep })
}

fn gramian_cmd(ctx: &Ctx) -> CliResult<Outcome> {
    let (a, b) = ctx.interval()?;
    let w = reachability_gramian(ctx.sys()?, a, b, ctx.rtol).map_err(analysis)?;
    let psd = psd_check(&w, 0.0).map_err(analysis)?;
    let reachable = psd.min_eig > ctx.psd_tol * psd.scale;
    let eig = herm_eig(&w).map_err(analysis)?;
    let mut rep = Report::new("gramian");
    rep.flag("reachable", reachable)
        .num("min_eig", psd.min_eig)
        .num("max_eig", eig.values.last().copied().unwrap_or(0.0))
        .num("t_a", a)
        .num("t_b", b);
    rep.line(format!("W = {}", fmt_mat(w.matrix())));
    Ok(Outcome { code: held(reachable), report: rep })
}
