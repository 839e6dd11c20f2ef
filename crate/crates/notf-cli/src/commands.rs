use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use notf_core::eval::{
    confusion_counts, extract_communities, mse, slice_error_histogram, Community, EvalReport,
};
use notf_core::io::{
    load_factors, load_triples, save_factors, save_triples, save_triples_signed, Labels,
};
use notf_core::solver::solve;
use notf_core::tensor::cp_reconstruct;
use notf_core::{Mode, SynthSpec, Tensor3};
use serde::{Deserialize, Serialize};

use crate::report::{read_json, write_json, RunReport, TraceSummary};
use crate::{CommunitiesArgs, EvalArgs, FactorizeArgs, SweepArgs, SynthArgs, UsageError};

fn ensure_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn artifact(map: &mut BTreeMap<String, String>, key: &str, path: &Path) {
    map.insert(key.to_string(), path.display().to_string());
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Companion of `ground_truth.triples` and `observation.triples`: the exact
/// recipe (and clock time) of the draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub flip_count: usize,
    pub created_unix_secs: u64,
}

fn triple<T: Copy>(name: &str, v: &[T]) -> anyhow::Result<(T, T, T)> {
    if v.len() != 3 {
        return Err(UsageError(format!(
            "--{name} takes exactly 3 comma-separated values, got {}",
            v.len()
        ))
        .into());
    }
    Ok((v[0], v[1], v[2]))
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        dims: triple("dims", &args.dims)?,
        true_rank: args.true_rank,
        sparsity_ratios: triple("sparsity", &args.sparsity)?,
        noise_ratio: args.noise,
        seed: args.seed,
    };
    let inst = spec.generate()?;
    ensure_out_dir(&args.out_dir)?;

    let factors_path = args.out_dir.join("ground_truth_factors.txt");
    let truth_path = args.out_dir.join("ground_truth.triples");
    let obs_path = args.out_dir.join("observation.triples");
    let manifest_path = args.out_dir.join("manifest.json");
    save_factors(&factors_path, &inst.factors)?;
    save_triples(&truth_path, &inst.ground_truth, None)?;
    save_triples(&obs_path, &inst.observation, None)?;
    let manifest = SynthManifest {
        spec: spec.clone(),
        flip_count: inst.flipped.len(),
        created_unix_secs: unix_now(),
    };
    write_json(&manifest_path, &manifest)?;

    let mut report = RunReport {
        synth_spec: Some(spec.clone()),
        ..RunReport::default()
    };
    artifact(&mut report.artifacts, "ground_truth_factors", &factors_path);
    artifact(&mut report.artifacts, "ground_truth", &truth_path);
    artifact(&mut report.artifacts, "observation", &obs_path);
    artifact(&mut report.artifacts, "manifest", &manifest_path);
    write_json(&args.out_dir.join("report.json"), &report)?;

    println!(
        "synth: dims {:?} rank {} noise {} seed {} -> {} flips, wrote {}",
        spec.dims,
        spec.true_rank,
        spec.noise_ratio,
        spec.seed,
        inst.flipped.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn cmd_factorize(args: &FactorizeArgs) -> anyhow::Result<()> {
    let (observation, _labels) = load_triples(&args.input)?;
    let cfg = args.solver.to_config();
    let sol = solve(&observation, &cfg)?;
    ensure_out_dir(&args.out_dir)?;

    let factors_path = args.out_dir.join("factors.txt");
    let error_path = args.out_dir.join("sparse_error.triples");
    let trace_path = args.out_dir.join("trace.json");
    save_factors(&factors_path, &sol.factors)?;
    save_triples_signed(&error_path, &sol.sparse_error)?;
    write_json(&trace_path, &sol.trace)?;

    let mut report = RunReport {
        solver_config: Some(cfg.clone()),
        input_path: Some(args.input.display().to_string()),
        trace: Some(TraceSummary::from_trace(&sol.trace)),
        ..RunReport::default()
    };
    artifact(&mut report.artifacts, "factors", &factors_path);
    artifact(&mut report.artifacts, "sparse_error", &error_path);
    artifact(&mut report.artifacts, "trace", &trace_path);
    write_json(&args.out_dir.join("report.json"), &report)?;

    println!(
        "factorize: rank {} variant {} -> converged={} after {} outer iterations, |error support| = {}",
        cfg.rank,
        cfg.variant,
        sol.trace.converged,
        sol.trace.outer_iterations(),
        sol.sparse_error.count_nonzero(0.0)
    );
    Ok(())
}

fn load_recon(args: &EvalArgs) -> anyhow::Result<Tensor3> {
    match (&args.factors, &args.recon) {
        (Some(f), None) => Ok(cp_reconstruct(&load_factors(f)?)),
        (None, Some(r)) => Ok(load_triples(r)?.0),
        _ => Err(UsageError("pass exactly one of --factors / --recon".into()).into()),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let recon = load_recon(args)?;
    let truth = args
        .truth
        .as_ref()
        .map(|p| load_triples(p))
        .transpose()?
        .map(|(t, _)| t);
    let observation = args
        .observation
        .as_ref()
        .map(|p| load_triples(p))
        .transpose()?
        .map(|(t, _)| t);
    let reference = truth
        .as_ref()
        .or(observation.as_ref())
        .ok_or_else(|| UsageError("pass at least one of --truth / --observation".into()))?;

    let (fp, fneg) = confusion_counts(&recon, reference, args.threshold)?;
    let mse_vs_truth = truth.as_ref().map(|t| mse(&recon, t)).transpose()?;
    let mse_vs_observation = observation.as_ref().map(|o| mse(&recon, o)).transpose()?;

    let run_report: Option<RunReport> =
        args.run_report.as_ref().map(|p| read_json(p)).transpose()?;
    let solver_cfg = run_report.as_ref().and_then(|r| r.solver_config.clone());
    let trace = run_report.as_ref().and_then(|r| r.trace.clone());
    let manifest: Option<SynthManifest> =
        args.manifest.as_ref().map(|p| read_json(p)).transpose()?;

    let eval = EvalReport {
        false_positives: fp,
        false_negatives: fneg,
        mse_vs_truth,
        mse_vs_observation,
        outer_iterations: trace.as_ref().map(|t| t.outer_iterations),
        converged: trace.as_ref().map(|t| t.converged),
        variant: solver_cfg.as_ref().map(|c| c.variant),
        rank: solver_cfg.as_ref().map(|c| c.rank),
        noise_ratio: manifest.as_ref().map(|m| m.spec.noise_ratio),
    };

    ensure_out_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("eval.csv");
    write_eval_csv(&csv_path, &eval)?;

    let mut report = RunReport {
        solver_config: solver_cfg,
        eval: Some(eval.clone()),
        ..RunReport::default()
    };
    artifact(&mut report.artifacts, "eval_csv", &csv_path);

    if let Some(mode_no) = args.histogram_mode {
        let mode = match mode_no {
            1 => Mode::One,
            2 => Mode::Two,
            3 => Mode::Three,
            other => {
                return Err(
                    UsageError(format!("--histogram-mode must be 1, 2 or 3, got {other}")).into(),
                )
            }
        };
        let hist = slice_error_histogram(&recon, reference, mode, args.threshold)?;
        let hist_path = args.out_dir.join("histogram.csv");
        let mut text = String::from("index,errors\n");
        for (idx, count) in hist.iter().enumerate() {
            text.push_str(&format!("{idx},{count}\n"));
        }
        fs::write(&hist_path, text)?;
        artifact(&mut report.artifacts, "histogram", &hist_path);
    }
    write_json(&args.out_dir.join("report.json"), &report)?;

    println!(
        "eval: fp={} fn={} mse_truth={} mse_obs={} (threshold {})",
        eval.false_positives,
        eval.false_negatives,
        eval.mse_vs_truth.map_or("-".into(), |v| v.to_string()),
        eval.mse_vs_observation
            .map_or("-".into(), |v| v.to_string()),
        args.threshold
    );
    Ok(())
}

fn opt_cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |v| v.to_string())
}

fn write_eval_csv(path: &Path, e: &EvalReport) -> anyhow::Result<()> {
    let header = "false_positives,false_negatives,mse_vs_truth,mse_vs_observation,outer_iterations,converged,variant,rank,noise_ratio";
    let row = format!(
        "{},{},{},{},{},{},{},{},{}",
        e.false_positives,
        e.false_negatives,
        opt_cell(&e.mse_vs_truth),
        opt_cell(&e.mse_vs_observation),
        opt_cell(&e.outer_iterations),
        opt_cell(&e.converged),
        e.variant.map_or(String::new(), |v| v.to_string()),
        opt_cell(&e.rank),
        opt_cell(&e.noise_ratio),
    );
    fs::write(path, format!("{header}\n{row}\n"))?;
    Ok(())
}

pub fn cmd_communities(args: &CommunitiesArgs) -> anyhow::Result<()> {
    let factors = load_factors(&args.factors)?;
    let labels: Option<Labels> = args
        .labels_from
        .as_ref()
        .map(|p| load_triples(p))
        .transpose()?
        .and_then(|(_, l)| l);
    let communities = extract_communities(&factors, labels.as_ref(), args.threshold)?;

    ensure_out_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("communities.csv");
    let txt_path = args.out_dir.join("communities.txt");
    write_communities_csv(&csv_path, &communities)?;
    write_communities_txt(&txt_path, &communities)?;

    let mut report = RunReport::default();
    artifact(&mut report.artifacts, "communities_csv", &csv_path);
    artifact(&mut report.artifacts, "communities_txt", &txt_path);
    write_json(&args.out_dir.join("report.json"), &report)?;

    println!(
        "communities: {} components -> {}",
        communities.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn write_communities_csv(path: &Path, communities: &[Community]) -> anyhow::Result<()> {
    let mut text = String::from("community,mode,index,label,weight\n");
    for c in communities {
        for (mode_no, members) in c.members.iter().enumerate() {
            for m in members {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.rank_index,
                    mode_no + 1,
                    m.index,
                    m.label.as_deref().unwrap_or(""),
                    m.weight
                ));
            }
        }
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_communities_txt(path: &Path, communities: &[Community]) -> anyhow::Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for c in communities {
        let sizes: Vec<String> = c.members.iter().map(|m| m.len().to_string()).collect();
        writeln!(
            w,
            "community {} ({} members)",
            c.rank_index,
            sizes.join(" x ")
        )?;
        for (mode_no, members) in c.members.iter().enumerate() {
            let rendered: Vec<String> = members
                .iter()
                .map(|m| match &m.label {
                    Some(l) => format!("{} ({}, {:.6})", m.index, l, m.weight),
                    None => format!("{} ({:.6})", m.index, m.weight),
                })
                .collect();
            writeln!(w, "  mode {}: {}", mode_no + 1, rendered.join(", "))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub noise: Vec<f64>,
    pub rank: Vec<usize>,
    pub variant: Vec<String>,
    pub seed: Vec<u64>,
    pub tau: f64,
    pub eps: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub threshold: f64,
    pub created_unix_secs: u64,
}

struct SweepRow {
    variant: String,
    noise: f64,
    rank: usize,
    seed: u64,
    status: String,
    converged: Option<bool>,
    outer_iterations: Option<usize>,
    fp_truth: Option<usize>,
    fn_truth: Option<usize>,
    fp_obs: Option<usize>,
    fn_obs: Option<usize>,
    mse_truth: Option<f64>,
    mse_obs: Option<f64>,
    error_nonzeros: Option<usize>,
}

fn sweep_one(
    args: &SweepArgs,
    variant: crate::VariantArg,
    noise: f64,
    rank: usize,
    seed: u64,
) -> SweepRow {
    let variant_name: notf_core::NormVariant = variant.into();
    let mut row = SweepRow {
        variant: variant_name.to_string(),
        noise,
        rank,
        seed,
        status: "ok".into(),
        converged: None,
        outer_iterations: None,
        fp_truth: None,
        fn_truth: None,
        fp_obs: None,
        fn_obs: None,
        mse_truth: None,
        mse_obs: None,
        error_nonzeros: None,
    };
    let outcome = (|| -> notf_core::Result<()> {
        let spec = SynthSpec {
            noise_ratio: noise,
            seed,
            ..SynthSpec::default()
        };
        let inst = spec.generate()?;
        let mut cfg = notf_core::SolverConfig::new(rank, variant.into(), seed);
        cfg.tau = args.tau;
        cfg.eps = args.eps;
        cfg.max_outer_iters = args.max_outer;
        cfg.max_inner_iters = args.max_inner;
        let sol = solve(&inst.observation, &cfg)?;
        let recon = sol.reconstruct();
        let (fp_t, fn_t) = confusion_counts(&recon, &inst.ground_truth, args.threshold)?;
        let (fp_o, fn_o) = confusion_counts(&recon, &inst.observation, args.threshold)?;
        row.converged = Some(sol.trace.converged);
        row.outer_iterations = Some(sol.trace.outer_iterations());
        row.fp_truth = Some(fp_t);
        row.fn_truth = Some(fn_t);
        row.fp_obs = Some(fp_o);
        row.fn_obs = Some(fn_o);
        row.mse_truth = Some(mse(&recon, &inst.ground_truth)?);
        row.mse_obs = Some(mse(&recon, &inst.observation)?);
        row.error_nonzeros = Some(sol.sparse_error.count_nonzero(0.0));
        Ok(())
    })();
    if let Err(e) = outcome {
        row.status = e.to_string().replace(',', ";").replace('\n', " ");
    }
    row
}

pub fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    if args.noise.is_empty()
        || args.rank.is_empty()
        || args.variant.is_empty()
        || args.seed.is_empty()
    {
        return Err(UsageError("sweep lists must be non-empty".into()).into());
    }
    if args.jobs == 0 {
        return Err(UsageError("--jobs must be >= 1".into()).into());
    }

    // Row order is the fixed grid nesting noise > rank > variant > seed, so
    // reruns with the same flags are byte-identical regardless of --jobs.
    let mut grid = Vec::new();
    for &noise in &args.noise {
        for &rank in &args.rank {
            for &variant in &args.variant {
                for &seed in &args.seed {
                    grid.push((variant, noise, rank, seed));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("building worker pool")?;
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|&(variant, noise, rank, seed)| sweep_one(args, variant, noise, rank, seed))
            .collect()
    });

    ensure_out_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("sweep.csv");
    let mut text = String::from(
        "variant,noise,rank,seed,status,converged,outer_iterations,fp_truth,fn_truth,fp_obs,fn_obs,mse_truth,mse_obs,error_nonzeros\n",
    );
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.noise,
            r.rank,
            r.seed,
            r.status,
            opt_cell(&r.converged),
            opt_cell(&r.outer_iterations),
            opt_cell(&r.fp_truth),
            opt_cell(&r.fn_truth),
            opt_cell(&r.fp_obs),
            opt_cell(&r.fn_obs),
            opt_cell(&r.mse_truth),
            opt_cell(&r.mse_obs),
            opt_cell(&r.error_nonzeros),
        ));
    }
    fs::write(&csv_path, text)?;

    let manifest = SweepManifest {
        noise: args.noise.clone(),
        rank: args.rank.clone(),
        variant: args
            .variant
            .iter()
            .map(|v| notf_core::NormVariant::from(*v).to_string())
            .collect(),
        seed: args.seed.clone(),
        tau: args.tau,
        eps: args.eps,
        max_outer: args.max_outer,
        max_inner: args.max_inner,
        threshold: args.threshold,
        created_unix_secs: unix_now(),
    };
    let manifest_path = args.out_dir.join("sweep_manifest.json");
    write_json(&manifest_path, &manifest)?;

    let mut report = RunReport::default();
    artifact(&mut report.artifacts, "sweep_csv", &csv_path);
    artifact(&mut report.artifacts, "sweep_manifest", &manifest_path);
    write_json(&args.out_dir.join("report.json"), &report)?;

    let failures = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "sweep: {} runs ({} failed) -> {}",
        rows.len(),
        failures,
        csv_path.display()
    );
    Ok(())
}
