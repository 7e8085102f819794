use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use fractal_nerve_cli::experiments::{
    connectivity_phase_table, growth_rate_fit, records_csv, run_trials, summary_json, FitQuantity,
    TrialConfig,
};
use fractal_nerve_cli::formats::{
    complex_dot, load_system, BettiDump, ComplexDump, SystemDescriptor,
};
use fractal_nerve_cli::manifest::Manifest;
use fractal_nerve_core::contact::affine::{Affine1dSystem, AffineMap, AffineTail};
use fractal_nerve_core::homology::{
    betti, cross_edge_basis, exact_sequence_audit, homology_tower_trace, rank_recursion_check,
    relative_betti,
};
use fractal_nerve_core::ifs::{sample_levels, GridIfs, Tail};
use fractal_nerve_core::nerve::{
    build_affine_nerve, build_nerve, components, connectivity_report, disconnection_certificate,
    subcomplex_m, NerveError, NerveOptions, UnknownPolicy,
};
use fractal_nerve_core::render::raster_2d;
use num_traits::ToPrimitive;

#[derive(Parser)]
#[command(
    name = "fractal-nerve",
    version,
    about = "Nerve complexes, homology, and percolation experiments for non-autonomous grid systems"
)]
struct Cli {
    /// Worker threads for experiment batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random system and write its JSON descriptor.
    Gen {
        /// Comma-separated subdivision counts, e.g. "3,3".
        #[arg(long)]
        n: String,
        /// Number of cells removed per level.
        #[arg(long)]
        r: usize,
        /// Number of levels to sample (the tail repeats them periodically).
        #[arg(long, default_value_t = 12)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a nerve and write its JSON dump and DOT 1-skeleton.
    Nerve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        maxdim: Option<usize>,
        /// outer | inner treatment of unknown contacts (truncated tails).
        #[arg(long, default_value = "outer")]
        verdict_mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Betti numbers of a nerve; with --audit also the rank recursion and
    /// exact-sequence checks against the prefix subcomplex.
    Homology {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        maxdim: Option<usize>,
        #[arg(long, default_value = "outer")]
        verdict_mode: String,
        #[arg(long)]
        audit: bool,
        /// Also trace the tower N_{1,2} <- N_{1,3} <- ... up to this stage:
        /// per-stage Betti numbers, torsion flags, induced H1 ranks, and
        /// component stabilization.
        #[arg(long)]
        trace: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Component partitions and the connectivity report up to kmax.
    Components {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo batch from a TrialConfig JSON.
    Percolate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also fit the growth rate of log rank H1 over this window
        /// "kmin,kmax".
        #[arg(long)]
        fit_window: Option<String>,
        /// Re-run the batch for each of these removal counts and emit a
        /// connectivity phase table, e.g. "1,2,3".
        #[arg(long)]
        phase_table: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize a depth-m approximation to a PPM file.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 243)]
        width: usize,
        #[arg(long, default_value_t = 243)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the bundled verification suite; exits non-zero on any mismatch.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let budget = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<NerveError>(),
                    Some(NerveError::BudgetExceeded { .. })
                )
            });
            ExitCode::from(if budget { 2 } else { 1 })
        }
    }
}

fn cell_budget() -> u64 {
    std::env::var("NERVE_CELL_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(5_000_000)
}

fn parse_policy(mode: &str) -> Result<UnknownPolicy> {
    match mode {
        "outer" | "exact" => Ok(UnknownPolicy::Outer),
        "inner" => Ok(UnknownPolicy::Inner),
        other => bail!("unknown verdict mode {other:?} (expected exact, outer, or inner)"),
    }
}

fn nerve_options(maxdim: Option<usize>, mode: &str) -> Result<NerveOptions> {
    Ok(NerveOptions {
        maxdim,
        unknown_policy: parse_policy(mode)?,
        cell_budget: cell_budget(),
        auto_no_corner_cap: true,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen {
            n,
            r,
            levels,
            seed,
            out,
        } => {
            let subdiv: Vec<u32> = n
                .split(',')
                .map(|p| p.trim().parse::<u32>().map_err(|e| anyhow!("bad n: {e}")))
                .collect::<Result<_>>()?;
            let sample = sample_levels(&subdiv, r, levels, seed)?;
            let ifs = GridIfs::from_digit_ids(subdiv, sample.levels, Tail::Periodic(levels))?;
            ensure_dir(&out)?;
            let descriptor = SystemDescriptor::from_ifs(&ifs);
            let json = serde_json::to_string_pretty(&descriptor)?;
            std::fs::write(out.join("system.json"), &json)?;
            Manifest::new("gen", json.as_bytes(), Some(seed)).write_beside(&out)?;
            println!(
                "wrote {} (d={}, r={}, {} levels, no-corner: {})",
                out.join("system.json").display(),
                descriptor.d,
                r,
                levels,
                ifs.no_corner_check()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Nerve {
            config,
            j,
            k,
            maxdim,
            verdict_mode,
            out,
        } => {
            let ifs = load_system(&config)?;
            let options = nerve_options(maxdim, &verdict_mode)?;
            let nerve = build_nerve(&ifs, j, k, &options)?;
            ensure_dir(&out)?;
            let dump = ComplexDump::from_complex(&nerve, Some(&ifs));
            let json = serde_json::to_string_pretty(&dump)?;
            std::fs::write(out.join(format!("nerve_{j}_{k}.json")), &json)?;
            std::fs::write(
                out.join(format!("nerve_{j}_{k}.dot")),
                complex_dot(&nerve, Some(&ifs)),
            )?;
            let config_bytes = std::fs::read(&config)?;
            Manifest::new("nerve", &config_bytes, None).write_beside(&out)?;
            println!(
                "N_{{{j},{k}}}: {} vertices, {} edges, dim {}",
                nerve.vertex_count(),
                nerve.edge_count(),
                nerve.dim()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Homology {
            config,
            j,
            k,
            maxdim,
            verdict_mode,
            audit,
            trace,
            out,
        } => {
            let ifs = load_system(&config)?;
            let options = nerve_options(maxdim, &verdict_mode)?;
            let nerve = build_nerve(&ifs, j, k, &options)?;
            let report = betti(&nerve);
            ensure_dir(&out)?;
            let dump = BettiDump::from_report(&report);
            std::fs::write(
                out.join(format!("betti_{j}_{k}.json")),
                serde_json::to_string_pretty(&dump)?,
            )?;
            println!(
                "H_*(N_{{{j},{k}}}): betti {:?} ({})",
                dump.betti, dump.method
            );
            if audit && k >= j + 2 {
                let m = subcomplex_m(&nerve, j + 1)?;
                let rel = relative_betti(&nerve, &m)?;
                let exact = exact_sequence_audit(&nerve, &m)?;
                let recursion = rank_recursion_check(&ifs, j, k, &options)?;
                let cross = cross_edge_basis(&nerve).len();
                let audit_json = serde_json::json!({
                    "relative_betti": rel.betti,
                    "cross_edges": cross,
                    "exact_sequence_ranks": exact.ranks,
                    "exact_sequence_alternating_sum": exact.alternating_sum,
                    "rank_recursion": {
                        "lhs": recursion.lhs,
                        "rhs": recursion.rhs,
                        "holds": recursion.holds(),
                        "no_corner": recursion.hypothesis_no_corner,
                    },
                });
                std::fs::write(
                    out.join(format!("audit_{j}_{k}.json")),
                    serde_json::to_string_pretty(&audit_json)?,
                )?;
                println!(
                    "audit: exact-sequence sum {}, recursion {}={} ({})",
                    exact.alternating_sum,
                    recursion.lhs,
                    recursion.rhs,
                    if recursion.holds() {
                        "holds"
                    } else {
                        "VIOLATED"
                    }
                );
            }
            if let Some(kmax) = trace {
                let trace = homology_tower_trace(&ifs, kmax, 1, &options, 1 << 14)?;
                let stages: Vec<serde_json::Value> = trace
                    .stages
                    .iter()
                    .map(|s| {
                        serde_json::json!({
                            "k": s.k,
                            "betti0": s.betti0,
                            "betti1": s.betti_q,
                            "torsion_free": s.torsion_free,
                            "induced_h1_rank": s.induced_rank,
                            "component_map_bijective": s.component_map_bijective,
                            "level_connected": s.level_connected,
                        })
                    })
                    .collect();
                let json = serde_json::json!({
                    "stages": stages,
                    "components_stabilized_from": trace.components_stabilized_from,
                });
                std::fs::write(
                    out.join(format!("trace_1_{kmax}.json")),
                    serde_json::to_string_pretty(&json)?,
                )?;
                println!(
                    "trace to k={kmax}: components stabilized from {:?}",
                    trace.components_stabilized_from
                );
            }
            let config_bytes = std::fs::read(&config)?;
            Manifest::new("homology", &config_bytes, None).write_beside(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Components { config, kmax, out } => {
            let ifs = load_system(&config)?;
            let mut options = nerve_options(None, "outer")?;
            options.maxdim = Some(1);
            let report = connectivity_report(&ifs, kmax, &options)?;
            ensure_dir(&out)?;
            let stages: Vec<serde_json::Value> = report
                .stages
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "k": s.k,
                        "connected": s.head_connected,
                        "components": s.head_components,
                        "level_connected": s.level_connected,
                    })
                })
                .collect();
            let json = serde_json::json!({
                "stages": stages,
                "all_stages_connected": report.all_stages_connected,
                "local_connectedness_evidence": report.local_connectedness_evidence,
            });
            std::fs::write(
                out.join("connectivity.json"),
                serde_json::to_string_pretty(&json)?,
            )?;

            // The deepest partition itself: component id per vertex, sizes,
            // and the exact disconnection certificate.
            let deepest = build_nerve(&ifs, 1, kmax, &options)?;
            let parts = components(&deepest);
            let certificate = disconnection_certificate(&ifs, kmax, &parts);
            let partition = serde_json::json!({
                "k": kmax,
                "vertices": deepest.vertex_count(),
                "component_of_vertex": parts.comp,
                "sizes": parts.sizes,
                "count": parts.count,
                "certificate": certificate.to_string(),
                "certificate_approx": certificate.to_f64(),
            });
            std::fs::write(
                out.join("partition.json"),
                serde_json::to_string_pretty(&partition)?,
            )?;
            let config_bytes = std::fs::read(&config)?;
            Manifest::new("components", &config_bytes, None).write_beside(&out)?;
            println!(
                "connected at all k <= {kmax}: {} (level systems connected: {}/{}, certificate {})",
                report.all_stages_connected,
                report.local_connectedness_evidence,
                report.stages.len(),
                certificate
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Percolate {
            config,
            seed,
            kmax,
            trials,
            fit_window,
            phase_table,
            out,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading trial config {}", config.display()))?;
            let mut trial_config: TrialConfig =
                serde_json::from_str(&text).context("parsing trial config")?;
            if let Some(seed) = seed {
                trial_config.seed = seed;
            }
            if let Some(kmax) = kmax {
                trial_config.kmax = kmax;
            }
            if let Some(trials) = trials {
                trial_config.trials = trials;
            }
            trial_config.cell_budget = trial_config.cell_budget.min(cell_budget());
            let records = run_trials(&trial_config)?;
            ensure_dir(&out)?;
            let csv = records_csv(trial_config.n.len(), &records)?;
            std::fs::write(out.join("trials.csv"), csv)?;
            let mut summary = summary_json(&trial_config, &records);
            if let Some(window) = fit_window {
                let parts: Vec<usize> = window
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .map_err(|e| anyhow!("bad window: {e}"))
                    })
                    .collect::<Result<_>>()?;
                if parts.len() != 2 {
                    bail!("fit window must be kmin,kmax");
                }
                let fit = growth_rate_fit(&records, (parts[0], parts[1]), FitQuantity::RankH1);
                summary["growth_fit"] = serde_json::to_value(&fit)?;
                if let Some(fit) = fit {
                    println!(
                        "growth fit over k={}..{}: slope {:.4} ± {:.4}",
                        parts[0], parts[1], fit.mean_slope, fit.stderr
                    );
                }
            }
            std::fs::write(
                out.join("summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
            if let Some(list) = phase_table {
                let r_values: Vec<usize> = list
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .map_err(|e| anyhow!("bad r list: {e}"))
                    })
                    .collect::<Result<_>>()?;
                let rows = connectivity_phase_table(&trial_config, &r_values)?;
                std::fs::write(
                    out.join("phase_table.json"),
                    serde_json::to_string_pretty(&rows)?,
                )?;
                for row in &rows {
                    println!(
                        "phase r={}: connected {:.2}, all-axis cuts {:.2}, mean cert {:.4}",
                        row.r,
                        row.connected_fraction,
                        row.all_axis_cut_fraction,
                        row.mean_final_certificate
                    );
                }
            }
            let canonical = serde_json::to_vec(&trial_config)?;
            Manifest::new("percolate", &canonical, Some(trial_config.seed)).write_beside(&out)?;
            let connected = records
                .iter()
                .filter(|t| t.stages.last().map(|s| s.connected).unwrap_or(false))
                .count();
            println!(
                "{} trials, connected at kmax: {}/{}, truncated: {}",
                records.len(),
                connected,
                records.len(),
                records.iter().filter(|t| t.truncated).count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Render {
            config,
            depth,
            width,
            height,
            out,
        } => {
            let ifs = load_system(&config)?;
            let raster = raster_2d(&ifs, depth, width, height)?;
            if let Some(dir) = out.parent() {
                if !dir.as_os_str().is_empty() {
                    ensure_dir(dir)?;
                }
            }
            std::fs::write(&out, raster.ppm_bytes())?;
            let config_bytes = std::fs::read(&config)?;
            let manifest = Manifest::new("render", &config_bytes, None);
            let manifest_path = out.with_extension("manifest.json");
            std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            println!(
                "wrote {} ({}x{}, {} occupied)",
                out.display(),
                width,
                height,
                raster.occupied()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let failures = run_verification();
            if failures == 0 {
                println!("verify: all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("verify: {failures} check(s) failed");
                Ok(ExitCode::from(3))
            }
        }
    }
}

/// The bundled verification vectors: the alternating two-symbol affine
/// system's four nerves, the planar 2×2 cross-edge count, and the rank
/// recursion on fixed instances.
fn run_verification() -> usize {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, name);
        if !ok {
            failures += 1;
        }
    };

    // Two-symbol alternating affine system: stage nerves and Betti numbers.
    let odd = vec![AffineMap::new(5, 7, 0, 1), AffineMap::new(5, 7, 2, 7)];
    let even = vec![AffineMap::new(2, 5, 0, 1), AffineMap::new(2, 5, 3, 5)];
    let sys = Affine1dSystem::new(vec![odd, even], AffineTail::Periodic(2)).unwrap();
    let build = |j: usize, k: usize| build_affine_nerve(&sys, j, k, 1, 8, 24, UnknownPolicy::Outer);
    {
        let n12 = build(1, 2).unwrap();
        check(
            "affine N12 single edge",
            n12.edges().collect::<Vec<_>>() == vec![[0, 1]],
        );
        let n13 = build(1, 3).unwrap();
        check(
            "affine N13 path",
            n13.edges().collect::<Vec<_>>() == vec![[0, 2], [1, 2], [1, 3]],
        );
        let n23 = build(2, 3).unwrap();
        check("affine N23 discrete", n23.edge_count() == 0);
        let n24 = build(2, 4).unwrap();
        check(
            "affine N24 two edges",
            n24.edges().collect::<Vec<_>>() == vec![[0, 1], [2, 3]],
        );
        let betti_pairs: Vec<(usize, usize)> = [n12, n13, n23, n24]
            .iter()
            .map(|n| {
                let b = betti(n);
                (b.betti0(), b.betti1())
            })
            .collect();
        check(
            "affine Betti (1,0),(1,0),(2,0),(2,0)",
            betti_pairs == vec![(1, 0), (1, 0), (2, 0), (2, 0)],
        );
    }

    // Planar 2×2, r=1, no-corner: two cross edges at every (j, j+2), and
    // trivial H1 with one component up to k=6.
    {
        let all: Vec<Vec<u32>> = (0..2)
            .flat_map(|x| (0..2).map(move |y| vec![x, y]))
            .collect();
        let level = |skip: &[u32]| -> Vec<Vec<u32>> {
            all.iter()
                .filter(|d| d.as_slice() != skip)
                .cloned()
                .collect()
        };
        let ifs = GridIfs::new(
            vec![2, 2],
            vec![
                level(&[0, 0]),
                level(&[1, 1]),
                level(&[0, 1]),
                level(&[1, 0]),
            ],
            Tail::Periodic(4),
        )
        .unwrap();
        check("bundled 2x2 satisfies no-corner", ifs.no_corner_check());
        let options = NerveOptions::default();
        let mut cross_ok = true;
        for j in 1..=3 {
            let nerve = build_nerve(&ifs, j, j + 2, &options).unwrap();
            cross_ok &= cross_edge_basis(&nerve).len() == 2;
        }
        check("2x2 r=1 cross-edge count = 2", cross_ok);
        let mut h1_ok = true;
        for k in 2..=6 {
            let nerve = build_nerve(&ifs, 1, k, &options).unwrap();
            let b = betti(&nerve);
            h1_ok &= b.betti0() == 1 && b.betti1() == 0;
        }
        check("2x2 r=1 H1 = 0, one component", h1_ok);
        let recursion = rank_recursion_check(&ifs, 1, 3, &options).unwrap();
        check("2x2 r=1 rank recursion", recursion.holds());
    }

    // Rank recursion on the product-Cantor system (exactly -4^{ℓ-j} on both
    // sides) and on a fixed carpet-free 3×3 draw.
    {
        let cantor2 = GridIfs::autonomous(
            vec![3, 3],
            vec![vec![0, 0], vec![0, 2], vec![2, 0], vec![2, 2]],
        )
        .unwrap();
        let rep = rank_recursion_check(&cantor2, 1, 3, &NerveOptions::default()).unwrap();
        check(
            "product Cantor recursion both sides -16",
            rep.holds() && rep.lhs == -16,
        );

        let parts = components(&build_nerve(&cantor2, 1, 3, &NerveOptions::default()).unwrap());
        check("product Cantor 16 components at k=3", parts.count == 16);
    }

    failures
}
