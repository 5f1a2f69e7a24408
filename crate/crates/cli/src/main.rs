use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use seasonal_ruin::boundary::{probe_conjecture, solve_boundary, ColumnState};
use seasonal_ruin::genfun::{xi_eval, xi_series, XiFunction};
use seasonal_ruin::io::parse_model;
use seasonal_ruin::model::net_profit_margin;
use seasonal_ruin::montecarlo::{estimate_survival, trajectory, SimConfig, RNG_ID};
use seasonal_ruin::roots::{characteristic_roots, RootConfig};
use seasonal_ruin::survival::{finite_survival, ultimate_survival};
use seasonal_ruin::{classify_regime, Regime, RiskModel};

#[derive(Parser)]
#[command(
    name = "ruin",
    version,
    about = "Survival probabilities for the seasonal discrete-time risk model"
)]
struct Cli {
    /// Significant digits in numeric output.
    #[arg(long, global = true, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..=17))]
    precision: u32,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print the regime, E S_N, κN and the net profit margin.
    Check {
        #[arg(long)]
        model: PathBuf,
    },
    /// Characteristic roots of s^{κN} = G_{S_N}(s) in the unit disk.
    Roots {
        #[arg(long)]
        model: PathBuf,
    },
    /// Boundary masses m_i^{(j)} with residual diagnostics.
    Boundary {
        #[arg(long)]
        model: PathBuf,
    },
    /// Ultimate survival φ(u), or the finite-time grid φ(u,T) with --horizon.
    Survive {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u_max: usize,
        /// Horizon in periods.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Evaluate Ξ(s) or print its Taylor coefficients.
    Genfun {
        #[arg(long)]
        model: PathBuf,
        /// Complex point as RE,IM.
        #[arg(
            long,
            allow_hyphen_values = true,
            conflicts_with = "series",
            required_unless_present = "series"
        )]
        eval: Option<String>,
        #[arg(long)]
        series: Option<usize>,
    },
    /// Monte Carlo estimate of φ(u, horizon).
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 1_000_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump one simulated surplus path.
    Trajectory {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search random models for singular boundary systems.
    ProbeConjecture {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        kappa_max: usize,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
}

/// `x` to `digits` significant digits, trailing zeros removed.
fn sig(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{:.*e}", digits as usize - 1, x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn load(path: &PathBuf) -> anyhow::Result<RiskModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model(&text).with_context(|| format!("loading {}", path.display()))
}

fn parse_point(s: &str) -> anyhow::Result<Complex64> {
    let Some((re, im)) = s.split_once(',') else {
        bail!("expected RE,IM, got {s:?}");
    };
    Ok(Complex64::new(re.trim().parse()?, im.trim().parse()?))
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<String> {
    let p = cli.precision;
    let f = |x: f64| sig(x, p);
    let json_out = cli.format == Format::Json;
    Ok(match cli.command {
        Command::Check { model } => {
            let m = load(&model)?;
            let regime = classify_regime(&m);
            let mean = m.mean_cycle_claims();
            let premium = m.cycle_premium();
            let margin = net_profit_margin(&m);
            if json_out {
                json!({"regime": regime.to_string(), "mean_cycle_claims": mean, "cycle_premium": premium, "margin": margin})
                    .to_string()
                    + "\n"
            } else {
                format!(
                    "{regime}, E S_N={}, κN={premium}, margin={}\n",
                    f(mean),
                    f(margin)
                )
            }
        }
        Command::Roots { model } => {
            let m = load(&model)?;
            let rs = characteristic_roots(&m, &RootConfig::default())?;
            let rows: Vec<Vec<String>> = rs
                .roots
                .iter()
                .map(|r| {
                    vec![
                        f(r.value.re),
                        f(r.value.im),
                        f(r.value.norm()),
                        r.multiplicity.to_string(),
                        f(r.residual),
                        r.at_zero.to_string(),
                    ]
                })
                .collect();
            if json_out {
                let roots: Vec<_> = rs
                    .roots
                    .iter()
                    .map(|r| {
                        json!({"re": r.value.re, "im": r.value.im, "multiplicity": r.multiplicity,
                               "residual": r.residual, "at_zero": r.at_zero, "confirmed": r.confirmed})
                    })
                    .collect();
                json!({"total_with_multiplicity": rs.total_with_multiplicity, "roots": roots}).to_string()
                    + "\n"
            } else {
                csv(
                    &["re", "im", "modulus", "multiplicity", "residual", "at_zero"],
                    &rows,
                )
            }
        }
        Command::Boundary { model } => {
            let m = load(&model)?;
            let rs = characteristic_roots(&m, &RootConfig::default())?;
            let b = solve_boundary(&m, &rs)?;
            let state = |s: ColumnState| match s {
                ColumnState::Solved => "solved",
                ColumnState::ZeroColumn => "zero_column",
                ColumnState::KnownZero => "known_zero",
            };
            if json_out {
                json!({
                    "masses": b.m, "state": b.state, "condition": b.condition,
                    "determinant": [b.determinant.re, b.determinant.im],
                    "residuals": b.residuals, "irregular": b.irregular, "precision_bits": b.precision_bits,
                })
                .to_string()
                    + "\n"
            } else {
                let mut rows = Vec::new();
                for (j, (ms, ss)) in b.m.iter().zip(&b.state).enumerate() {
                    for (i, (v, s)) in ms.iter().zip(ss).enumerate() {
                        rows.push(vec![
                            (j + 1).to_string(),
                            i.to_string(),
                            f(*v),
                            state(*s).to_string(),
                        ]);
                    }
                }
                let mut out = csv(&["season", "index", "mass", "state"], &rows);
                let _ = writeln!(out, "# condition={}", f(b.condition));
                let _ = writeln!(
                    out,
                    "# determinant={},{}",
                    f(b.determinant.re),
                    f(b.determinant.im)
                );
                let _ = writeln!(
                    out,
                    "# residual_root={} residual_derivative={} residual_mean={}",
                    f(b.residuals.root),
                    f(b.residuals.derivative),
                    f(b.residuals.mean)
                );
                let _ = writeln!(
                    out,
                    "# irregular={} precision_bits={}",
                    b.irregular, b.precision_bits
                );
                out
            }
        }
        Command::Survive {
            model,
            u_max,
            horizon,
        } => {
            let m = load(&model)?;
            let ult = ultimate_survival(&m, u_max)?;
            match horizon {
                None => {
                    if json_out {
                        json!({"regime": ult.regime.to_string(), "phi": ult.phi}).to_string() + "\n"
                    } else {
                        let rows: Vec<_> = ult
                            .phi
                            .iter()
                            .enumerate()
                            .map(|(u, v)| vec![u.to_string(), f(*v)])
                            .collect();
                        csv(&["u", "phi"], &rows)
                    }
                }
                Some(t) => {
                    let grid = finite_survival(&m, u_max, t)?;
                    if json_out {
                        json!({"horizon": t, "phi": grid.phi, "ultimate": ult.phi}).to_string() + "\n"
                    } else {
                        let mut header = vec!["T".to_string()];
                        header.extend((0..=u_max).map(|u| u.to_string()));
                        let header: Vec<&str> = header.iter().map(String::as_str).collect();
                        let mut rows: Vec<Vec<String>> = grid
                            .phi
                            .iter()
                            .enumerate()
                            .map(|(i, layer)| {
                                std::iter::once((i + 1).to_string())
                                    .chain(layer.iter().map(|v| f(*v)))
                                    .collect()
                            })
                            .collect();
                        rows.push(
                            std::iter::once("inf".to_string())
                                .chain(ult.phi.iter().map(|v| f(*v)))
                                .collect(),
                        );
                        csv(&header, &rows)
                    }
                }
            }
        }
        Command::Genfun { model, eval, series } => {
            let m = load(&model)?;
            if classify_regime(&m) != Regime::NetProfit {
                bail!("the generating function is only defined for net-profit models");
            }
            if let Some(s) = eval {
                let z = parse_point(&s)?;
                let xi = XiFunction::new(&m, 1)?;
                let v = xi_eval(&xi, z)?;
                if json_out {
                    json!({"s": [z.re, z.im], "xi": [v.re, v.im]}).to_string() + "\n"
                } else {
                    csv(
                        &["re", "im", "xi_re", "xi_im"],
                        &[vec![f(z.re), f(z.im), f(v.re), f(v.im)]],
                    )
                }
            } else {
                let n = series.unwrap_or(1);
                let xi = XiFunction::new(&m, n)?;
                let c = xi_series(&xi, n)?;
                if json_out {
                    json!({"coefficients": c}).to_string() + "\n"
                } else {
                    let rows: Vec<_> = c
                        .iter()
                        .enumerate()
                        .map(|(k, v)| vec![k.to_string(), f(*v)])
                        .collect();
                    csv(&["n", "coefficient"], &rows)
                }
            }
        }
        Command::Simulate {
            model,
            u,
            horizon,
            paths,
            seed,
        } => {
            let m = load(&model)?;
            let cfg = SimConfig {
                paths,
                horizon,
                seed,
                u,
            };
            let e = estimate_survival(&m, &cfg)?;
            let (lo, hi) = e.ci95();
            json!({
                "p_hat": e.p_hat, "ci": [lo, hi], "half_width_95": e.half_width_95, "paths": e.paths,
                "u": u, "horizon": horizon, "seed": seed, "rng": RNG_ID,
            })
            .to_string()
                + "\n"
        }
        Command::Trajectory { model, u, n, seed } => {
            let m = load(&model)?;
            let path = trajectory(&m, u, n, seed)?;
            if json_out {
                serde_json::to_string(&path)? + "\n"
            } else {
                let rows: Vec<_> = path
                    .iter()
                    .map(|pt| {
                        vec![
                            pt.n.to_string(),
                            pt.season.to_string(),
                            pt.claim.to_string(),
                            pt.surplus.to_string(),
                        ]
                    })
                    .collect();
                csv(&["n", "season", "claim", "surplus"], &rows)
            }
        }
        Command::ProbeConjecture {
            trials,
            seed,
            kappa_max,
            n_max,
        } => {
            let report = probe_conjecture(kappa_max, n_max, trials, seed)?;
            serde_json::to_string_pretty(&report)? + "\n"
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
