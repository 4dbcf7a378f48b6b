use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use lsnet::diagnostics::{self, align_one, edge_fit, ess, geweke_joint_test, micro_hyperparams, procrustes_align};
use lsnet::io::{self, ChainWriter, Dims, RunInputs, RunMeta};
use lsnet::simulate::{gen_truth_with, TruthOptions};
use lsnet::{
    build_pattern, gen_interp, gen_network, run_chain_with, Hyperparams, Matrix, Posterior, RestrictionKind,
    RestrictionPattern, SamplerConfig, Truth64,
};
use serde::Serialize;

use crate::{
    FitArgs, GewekeArgs, Restriction, RestrictionArgs, SimulateArgs, SummarizeArgs, EXIT_DATA, EXIT_IO,
    EXIT_TEST_FAILED, EXIT_USAGE,
};

pub const SEED_ENV: &str = "LSNET_SEED";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(lsnet::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<lsnet::Error> for CliError {
    fn from(e: lsnet::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(lsnet::Error::Io { .. }) => EXIT_IO,
            CliError::Core(lsnet::Error::Test(_)) => EXIT_TEST_FAILED,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

type CliResult = Result<u8, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `LSNET_SEED`, when set, wins over `--seed`.
fn resolve_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}='{v}' is not an unsigned 64-bit integer"))),
        Err(_) => Ok(flag),
    }
}

fn restriction_kind(args: &RestrictionArgs) -> Result<RestrictionKind, CliError> {
    if args.restriction != Restriction::Glt && !args.pivots.is_empty() {
        return Err(usage("--pivots only applies to --restriction glt"));
    }
    Ok(match args.restriction {
        Restriction::Unrestricted => RestrictionKind::Unrestricted,
        Restriction::Plt => RestrictionKind::Plt,
        Restriction::Glt => RestrictionKind::Glt {
            pivots: args.pivots.clone(),
        },
    })
}

/// Pattern errors come from flag values, so they are usage errors.
fn pattern(kind: &RestrictionKind, p: usize, d: usize) -> Result<RestrictionPattern, CliError> {
    build_pattern(kind, p, d).map_err(|e| usage(e.to_string()))
}

fn check_dim_flag(d: usize) -> Result<(), CliError> {
    if d < 2 {
        return Err(usage(format!(
            "--dim {d} is not allowed: the latent dimension must satisfy d ≥ 2"
        )));
    }
    Ok(())
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| lsnet::Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateEcho<'a> {
    command: &'a str,
    nodes: usize,
    dim: usize,
    p: usize,
    restriction: &'a RestrictionKind,
    zero_rows: usize,
    seed: u64,
    truth_options: &'a TruthOptions,
    version: &'a str,
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    check_dim_flag(a.dim)?;
    if a.nodes < 3 {
        return Err(usage(format!("--nodes must be at least 3, got {}", a.nodes)));
    }
    if a.p < a.dim {
        return Err(usage(format!("--p ({}) must be at least --dim ({})", a.p, a.dim)));
    }
    let seed = resolve_seed(a.seed)?;
    let kind = restriction_kind(&a.restriction)?;
    let pat = pattern(&kind, a.p, a.dim)?;
    let opts = TruthOptions {
        zero_rows: a.zero_rows,
        ..TruthOptions::default()
    };
    let truth: Truth64 = gen_truth_with(a.nodes, a.dim, a.p, &pat, seed, &opts)?;
    let net = gen_network(&truth.latent, seed)?;
    let y = gen_interp(&truth.latent, &truth.loadings, seed)?;

    make_dir(&a.out)?;
    io::write_json(a.out.join("truth.json"), &truth)?;
    io::write_network(a.out.join("network.csv"), &net)?;
    io::write_interp(a.out.join("interp.csv"), &y)?;
    io::write_json(
        a.out.join("config-echo.json"),
        &SimulateEcho {
            command: "simulate",
            nodes: a.nodes,
            dim: a.dim,
            p: a.p,
            restriction: &kind,
            zero_rows: a.zero_rows,
            seed,
            truth_options: &opts,
            version: env!("CARGO_PKG_VERSION"),
        },
    )?;
    println!(
        "wrote fixture to {} (n = {}, d = {}, p = {}, {kind}, zero rows {:?}, total weight {})",
        a.out.display(),
        a.nodes,
        a.dim,
        a.p,
        truth.zero_rows,
        net.total_weight()
    );
    Ok(0)
}

pub fn fit(a: FitArgs) -> CliResult {
    let seed = resolve_seed(a.seed)?;
    let cfg = SamplerConfig {
        iters: a.iters,
        burnin: a.burnin,
        thin: a.thin,
        seed,
        mh_step_alpha: a.step_alpha,
        mh_step_f: a.step_f,
        orient: !a.no_orient,
        ..SamplerConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let hp: Hyperparams<f64> = match &a.hyper {
        Some(path) => io::read_json(path)?,
        None => Hyperparams::default(),
    };
    hp.validate().map_err(|e| usage(e.to_string()))?;

    let y = io::read_interp(&a.interp)?;
    let net = io::read_network(&a.network, None)?;
    let kind = restriction_kind(&a.restriction)?;
    let (n, p) = (y.y.cols(), y.y.rows());
    if net.n() != n {
        return Err(lsnet::Error::Data(format!(
            "{} describes {} nodes but {} is {p}×{n} (variables × nodes)",
            a.network.display(),
            net.n(),
            a.interp.display()
        ))
        .into());
    }
    check_dim_flag(a.dim)?;
    let d = a.dim;
    if p < d {
        return Err(lsnet::Error::Data(format!(
            "{} has {p} variables, fewer than the latent dimension {d}",
            a.interp.display()
        ))
        .into());
    }
    let pat = pattern(&kind, p, d)?;
    let post = Posterior::new(&net, &y, &hp, &pat)?;

    make_dir(&a.out)?;
    let mut writer = ChainWriter::create(a.out.join("chain.csv"), n, p, d)?;
    let acceptance = run_chain_with(&post, &cfg, |rec| writer.write(rec))?;
    writer.finish()?;
    let meta = RunMeta {
        format_version: io::META_FORMAT_VERSION,
        chain_format_version: io::CHAIN_FORMAT_VERSION,
        seed,
        dims: Dims { n, p, d },
        restriction: kind,
        config: cfg,
        hyperparameters: hp,
        acceptance,
        inputs: Some(RunInputs {
            network: a.network.display().to_string(),
            interp: a.interp.display().to_string(),
        }),
    };
    io::write_json(a.out.join("meta.json"), &meta)?;
    println!(
        "wrote {} draws to {} (acceptance after burn-in: alpha {:.3}, positions {:.3}; {:.1}s)",
        meta.acceptance.records,
        a.out.join("chain.csv").display(),
        meta.acceptance.sampling.alpha,
        meta.acceptance.sampling.positions,
        meta.acceptance.wall_time_secs
    );
    Ok(0)
}

#[derive(Serialize)]
struct ParamReport {
    name: String,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    /// Absent for chains shorter than the ESS minimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    ess: Option<f64>,
}

#[derive(Serialize)]
struct Identification {
    /// RMSE of the posterior mean positions against the truth.
    raw_rmse: f64,
    aligned_rmse: f64,
    ratio: f64,
    /// Per-draw RMSE averaged over the chain.
    mean_draw_raw_rmse: f64,
    mean_draw_aligned_rmse: f64,
    degenerate_alignments: usize,
}

#[derive(Serialize)]
struct SummaryReport {
    draws: usize,
    restriction: Option<RestrictionKind>,
    params: Vec<ParamReport>,
    inclusion: Matrix<f64>,
    row_zero: Vec<f64>,
    mean_lambda: Matrix<f64>,
    mean_positions: Matrix<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    identification: Option<Identification>,
}

pub fn summarize(a: SummarizeArgs) -> CliResult {
    let chain = io::read_chain(a.chain.join("chain.csv"))?;
    let meta_path = a.chain.join("meta.json");
    let meta: Option<RunMeta> = if meta_path.exists() {
        Some(io::read_json(&meta_path)?)
    } else {
        None
    };
    let summary = diagnostics::summarize(&chain)?;
    let out = a.out.clone().unwrap_or_else(|| a.chain.clone());
    make_dir(&out)?;

    let mut columns = vec![Vec::with_capacity(chain.len()); summary.params.len()];
    for rec in &chain {
        for (col, (_, v)) in columns.iter_mut().zip(diagnostics::summary::named_values(rec)) {
            col.push(v);
        }
    }
    let mut params = Vec::with_capacity(columns.len());
    for (s, series) in summary.params.iter().zip(&columns) {
        params.push(ParamReport {
            name: s.name.clone(),
            mean: s.mean,
            sd: s.sd,
            lower: s.lower,
            upper: s.upper,
            ess: ess(series).ok().map(|e| e.value),
        });
    }

    let truth: Option<Truth64> = a.truth.as_ref().map(io::read_json).transpose()?;
    let identification = match &truth {
        Some(t) => {
            let target = &t.latent.positions;
            if target.shape() != summary.mean_positions.shape() {
                return Err(lsnet::Error::Data(format!(
                    "truth positions are {}×{} but the chain's are {}×{}",
                    target.rows(),
                    target.cols(),
                    summary.mean_positions.rows(),
                    summary.mean_positions.cols()
                ))
                .into());
            }
            let mean_fit = align_one(&summary.mean_positions, target)?;
            let draws: Vec<Matrix<f64>> = chain.iter().map(|r| r.positions.clone()).collect();
            let per_draw = procrustes_align(&draws, target)?;
            Some(Identification {
                raw_rmse: mean_fit.raw_rmse,
                aligned_rmse: mean_fit.aligned_rmse,
                ratio: mean_fit.raw_rmse / mean_fit.aligned_rmse,
                mean_draw_raw_rmse: per_draw.mean_raw_rmse(),
                mean_draw_aligned_rmse: per_draw.mean_aligned_rmse(),
                degenerate_alignments: per_draw.draws.iter().filter(|d| d.degenerate).count(),
            })
        }
        None => None,
    };

    io::write_loadings(out.join("loadings.csv"), &summary.mean_lambda)?;
    let draws: Vec<Matrix<f64>> = chain.iter().map(|r| r.positions.clone()).collect();
    io::write_positions_svg(
        out.join("positions.svg"),
        &draws,
        truth.as_ref().map(|t| &t.latent.positions),
    )?;
    let network: Option<PathBuf> = a.network.clone().or_else(|| {
        meta.as_ref()
            .and_then(|m| m.inputs.as_ref())
            .map(|i| PathBuf::from(&i.network))
    });
    match network {
        Some(path) => {
            let net = io::read_network(&path, None)?;
            io::write_edge_fit(out.join("edgefit.csv"), &edge_fit(&net, &chain)?)?;
        }
        None => log::warn!("no network given or recorded in meta.json; edgefit.csv not written"),
    }

    let report = SummaryReport {
        draws: summary.draws,
        restriction: meta.map(|m| m.restriction),
        params,
        inclusion: summary.inclusion,
        row_zero: summary.row_zero,
        mean_lambda: summary.mean_lambda,
        mean_positions: summary.mean_positions,
        identification,
    };
    io::write_json(out.join("summary.json"), &report)?;
    println!("summarized {} draws into {}", report.draws, out.display());
    if let Some(id) = &report.identification {
        println!(
            "position RMSE vs truth: raw {:.4}, aligned {:.4} (ratio {:.2})",
            id.raw_rmse, id.aligned_rmse, id.ratio
        );
    }
    Ok(0)
}

pub fn geweke(a: GewekeArgs) -> CliResult {
    let seed = resolve_seed(a.seed)?;
    if !(a.threshold > 0.0) {
        return Err(usage("--threshold must be positive"));
    }
    let dims = diagnostics::GewekeDims {
        n: a.nodes,
        p: a.p,
        d: 2,
    };
    let kind = restriction_kind(&a.restriction)?;
    let pat = pattern(&kind, a.p, 2)?;
    let cfg = diagnostics::GewekeConfig {
        draws: a.draws,
        thin: a.thin,
        seed,
        ..diagnostics::GewekeConfig::default()
    };
    let report = match geweke_joint_test(&micro_hyperparams(), &pat, dims, &cfg) {
        Err(lsnet::Error::Dimension(m)) => return Err(usage(m)),
        other => other?,
    };
    println!(
        "{:<16} {:>12} {:>12} {:>8} {:>8}",
        "function", "prior-pred", "successive", "ess", "z"
    );
    for m in &report.moments {
        let flag = if m.z.abs() < a.threshold {
            ""
        } else {
            "  <-- |z| over threshold"
        };
        println!(
            "{:<16} {:>12.5} {:>12.5} {:>8.0} {:>8.3}{flag}",
            m.name, m.marginal_mean, m.successive_mean, m.successive_ess, m.z
        );
    }
    let pass = report.passes(a.threshold);
    println!(
        "max |z| = {:.3}, threshold {}: {}",
        report.max_abs_z(),
        a.threshold,
        if pass { "pass" } else { "FAIL" }
    );
    if let Some(path) = &a.out {
        io::write_json(path, &report)?;
    }
    Ok(if pass { 0 } else { EXIT_TEST_FAILED })
}
