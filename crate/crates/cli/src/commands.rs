//! One function per subcommand; each fills an [`Artifacts`] set.

use serde::Serialize;
use serde_json::json;
use sis_atlas::asymptotics::{
    predict_high_profile, solve_nonlocal, verify_scaling, Branch, LimitProfile,
};
use sis_atlas::curves::{classify, compute_thresholds, threshold_sample, LogisticScan};
use sis_atlas::dynamics::{run_recorded, SimState};
use sis_atlas::logistic::NewtonOptions;
use sis_atlas::perturbation::{expansion_consistency, regime_report, stabilize_eps};
use sis_atlas::report::{curve_csv, field_csv, profile_csv, table_csv, trajectory_csv};
use sis_atlas::spectral::principal_pair_with;
use sis_atlas::{AtlasError, CoefficientSet, EigenPair, Field, Result};

use crate::config::{CoefficientConfig, GammaRule, InitialData, Loaded, RunConfig};
use crate::output::Artifacts;

pub struct Context {
    pub config: RunConfig,
    pub coeffs: CoefficientSet,
    pub eig: EigenPair,
}

pub fn prepare(loaded: &Loaded, art: &mut Artifacts) -> Result<Context> {
    let config = loaded.config.clone();
    let coeffs = config.coefficients(&loaded.base)?;
    let eig = principal_pair_with(&coeffs, &config.eigen.options())?;
    art.stage("eigen", "ok");
    let newton = NewtonOptions::default();
    art.tolerances.insert(
        "eigen".into(),
        serde_json::to_value(&config.eigen).unwrap_or_default(),
    );
    art.tolerances.insert(
        "scan".into(),
        serde_json::to_value(&config.scan).unwrap_or_default(),
    );
    art.tolerances.insert(
        "newton".into(),
        json!({
            "maxIter": newton.max_iter,
            "maxHalvings": newton.max_halvings,
            "residualTol": newton.residual_tol,
            "clip": newton.clip,
        }),
    );
    Ok(Context {
        config,
        coeffs,
        eig,
    })
}

impl Context {
    fn scan(&self) -> Result<LogisticScan> {
        LogisticScan::new(&self.coeffs, &self.eig, self.config.scan.options()?)
    }
}

pub fn eigen(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    art.json(
        "eigen.json",
        &json!({
            "r1": ctx.eig.r1,
            "lStar": ctx.eig.l_star,
            "iterations": ctx.eig.iterations,
            "residual": ctx.eig.residual(&ctx.coeffs),
        }),
    )?;
    art.file("phi1.csv", field_csv(&ctx.coeffs.grid, &ctx.eig.phi1));
    Ok(())
}

pub fn curve(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let d_s = ctx.config.model.d_s.unwrap_or(0.0);
    let mut scan = ctx.scan()?;
    scan.ensure_tail()?;
    art.stage("scan", format!("{} points", scan.points().len()));
    let mut samples = vec![threshold_sample(
        &ctx.coeffs,
        &ctx.eig,
        scan.expansion(),
        d_s,
    )];
    samples.extend(scan.samples(d_s));
    art.file("curve.csv", curve_csv(&samples));
    let critical = scan.critical_points(d_s)?;
    art.json(
        "critical.json",
        &json!({
            "dS": d_s,
            "tailLimit": scan.tail_limit(),
            "slopeAtLStar": scan.expansion().slope_with(&ctx.coeffs, &ctx.eig, d_s),
            "criticalPoints": critical,
        }),
    )
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RootSummary {
    index: usize,
    l: f64,
    slope: f64,
    degenerate: bool,
    minimal: bool,
    maximal: bool,
    s_max: f64,
    i_max: f64,
    file: String,
}

pub fn classify_cmd(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let r0 = ctx.config.r0(ctx.eig.l_star)?;
    let d_s = ctx.config.d_s()?;
    let mut scan = ctx.scan()?;
    let set = classify(&mut scan, r0, d_s)?;
    art.stage("classify", format!("{} roots", set.count));
    let mut roots = Vec::with_capacity(set.roots.len());
    for (k, r) in set.roots.iter().enumerate() {
        let file = format!("root_{k}.csv");
        art.file(&file, profile_csv(&ctx.coeffs.grid, &r.s, &r.i));
        roots.push(RootSummary {
            index: k,
            l: r.l,
            slope: r.slope,
            degenerate: r.degenerate,
            minimal: r.minimal,
            maximal: r.maximal,
            s_max: r.s.max(),
            i_max: r.i.max(),
            file,
        });
    }
    art.json(
        "roots.json",
        &json!({ "r0": r0, "dS": d_s, "count": set.count, "roots": roots }),
    )?;
    if let Some(c) = &ctx.config.classify {
        if !c.r0_values.is_empty() {
            let mut rows = Vec::with_capacity(c.r0_values.len());
            for &r in &c.r0_values {
                rows.push(vec![r, classify(&mut scan, r, d_s)?.count as f64]);
            }
            art.file("counts.csv", table_csv(&["r0", "count"], &rows));
        }
    }
    Ok(())
}

pub fn thresholds(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let mut scan = ctx.scan()?;
    let th = compute_thresholds(&mut scan, ctx.config.model.d_s)?;
    art.stage("thresholds", "ok");
    art.json("thresholds.json", &th)
}

fn limit_summary(p: &LimitProfile) -> serde_json::Value {
    json!({
        "branch": p.branch,
        "l": p.l,
        "residual": p.residual,
        "crossCheck": p.cross_check,
        "iStar": p.i_star.as_ref().map(|f| f.max()),
    })
}

pub fn profiles(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let r0 = ctx.config.r0(ctx.eig.l_star)?;
    let mut scan = ctx.scan()?;
    scan.ensure_tail()?;
    let tail = scan.tail_limit();
    let g = &ctx.coeffs.grid;
    let mut summaries = serde_json::Map::new();
    let mut first_error = None;
    for branch in [Branch::Low, Branch::High] {
        let profile = match branch {
            Branch::High if r0 > tail => predict_high_profile(&ctx.coeffs, &ctx.eig, r0),
            _ => solve_nonlocal(&mut scan, r0, branch),
        };
        let name = match branch {
            Branch::Low => "low",
            Branch::High => "high",
        };
        match profile {
            Ok(p) => {
                let second = p
                    .u_star
                    .clone()
                    .or_else(|| p.i_star.clone())
                    .unwrap_or_else(|| Field(vec![0.0; g.len()]));
                let header = if p.u_star.is_some() {
                    ["x", "S", "u"]
                } else {
                    ["x", "S", "I"]
                };
                let rows: Vec<Vec<f64>> = (0..g.len())
                    .map(|k| vec![g.x(k), p.s_star[k], second[k]])
                    .collect();
                art.file(&format!("{name}_profile.csv"), table_csv(&header, &rows));
                summaries.insert(name.into(), limit_summary(&p));
                art.stage(&format!("{name} branch"), "ok");
            }
            Err(e) => {
                art.stage(&format!("{name} branch"), e.to_string());
                summaries.insert(name.into(), json!({ "error": e.to_string() }));
                first_error.get_or_insert(e);
            }
        }
    }
    if summaries.values().all(|v| v.get("error").is_some()) {
        return Err(first_error.unwrap_or_else(|| AtlasError::domain("no limit profile")));
    }
    art.json(
        "profiles.json",
        &json!({ "r0": r0, "tailLimit": tail, "branches": summaries }),
    )?;
    if let Some(p) = &ctx.config.profiles {
        if !p.d_s_values.is_empty() {
            let rep = verify_scaling(&mut scan, r0, &p.d_s_values)?;
            art.stage("scaling", if rep.pass { "pass" } else { "fail" });
            art.json("scaling.json", &rep)?;
        }
    }
    Ok(())
}

pub fn simulate(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let sim = ctx
        .config
        .simulation
        .as_ref()
        .ok_or_else(|| AtlasError::config("simulate needs a simulation block"))?;
    let r0 = ctx.config.r0(ctx.eig.l_star)?;
    let d_s = ctx.config.d_s()?;
    let g = &ctx.coeffs.grid;
    let mut scan = ctx.scan()?;
    let set = classify(&mut scan, r0, d_s)?;
    art.stage("classify", format!("{} roots", set.count));
    let mean = r0 * ctx.eig.l_star;
    let start = match &sim.initial_data {
        InitialData::SmallInfection { fraction } => {
            if !(*fraction > 0.0 && *fraction < 1.0) {
                return Err(AtlasError::config(
                    "initialData.fraction must lie in (0, 1)",
                ));
            }
            SimState::new(
                g,
                g.constant(mean * (1.0 - fraction)),
                g.constant(mean * fraction),
                sim.dt0,
            )?
        }
        InitialData::NearRoot {
            index,
            perturbation,
        } => {
            let k = index.unwrap_or(set.count.saturating_sub(1));
            let root = set.roots.get(k).ok_or_else(|| {
                AtlasError::config(format!("no root {k}: {} roots at r0 = {r0}", set.count))
            })?;
            if !(0.0..1.0).contains(perturbation) {
                return Err(AtlasError::config(
                    "initialData.perturbation must lie in [0, 1)",
                ));
            }
            let p = *perturbation;
            SimState::new(
                g,
                root.s.map(|v| (1.0 - p) * v),
                root.i.zip_map(&root.s, |i, s| i + p * s),
                sim.dt0,
            )?
        }
    };
    let opts = sim.options();
    art.tolerances.insert(
        "simulation".into(),
        serde_json::to_value(opts).unwrap_or_default(),
    );
    let mut trace = Vec::new();
    let rep = run_recorded(
        &start,
        &ctx.coeffs,
        &opts,
        Some(&set),
        Some(ctx.config.output.stride),
        &mut trace,
    )?;
    art.stage("simulate", format!("{:?}", rep.outcome));
    art.file("trajectory.csv", trajectory_csv(g, &trace));
    art.file(
        "final_profile.csv",
        profile_csv(g, &rep.final_state.s, &rep.final_state.i),
    );
    art.json("steady.json", &rep)
}

pub fn appendix(ctx: &Context, art: &mut Artifacts) -> Result<()> {
    let CoefficientConfig::CosinePerturbation {
        k,
        m,
        c_m,
        eps,
        eps_start_fraction,
        gamma_rule,
        ..
    } = &ctx.config.coefficients
    else {
        return Err(AtlasError::config(
            "appendix needs cosine-perturbation coefficients",
        ));
    };
    if *gamma_rule != GammaRule::BetaSquared {
        return Err(AtlasError::config(
            "appendix needs gammaRule = beta-squared",
        ));
    }
    let g = &ctx.coeffs.grid;
    let d_i = ctx.coeffs.d_i;
    let eps_values = ctx
        .config
        .appendix
        .as_ref()
        .map(|a| a.eps_values.clone())
        .unwrap_or_else(|| vec![0.05, 0.025, 0.0125]);
    let expansion = expansion_consistency(*k, *m, *c_m, d_i, g, &eps_values)?;
    art.stage(
        "expansion",
        if expansion.bounded {
            "bounded"
        } else {
            "unbounded"
        },
    );
    art.json("expansion.json", &expansion)?;
    let eps = match eps {
        Some(e) => *e,
        None => stabilize_eps(*k, *m, *c_m, d_i, g, eps_start_fraction.unwrap_or(0.1))?.eps,
    };
    let regime = regime_report(*k, *m, *c_m, d_i, g, eps)?;
    art.stage("regime", format!("{:?}", regime.regime));
    art.json("regime.json", &regime)
}
