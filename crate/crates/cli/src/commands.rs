use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tggan_core::adversarial::{assembly_spec, train_with};
use tggan_core::generator::generate_graph;
use tggan_core::io::{read_edge_list, write_edge_list, write_walks};
use tggan_core::metrics::evaluate;
use tggan_core::synth::generate_dataset;
use tggan_core::{AssemblySpec, Checkpoint, Dataset, Error, Generator, TemporalGraphSample, WalkSampler};

use crate::args::{EvaluateArgs, GenerateArgs, PlotArgs, SampleArgs, SimulateArgs, TrainArgs};
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::plot::render_arcs;

pub fn read_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_edge_list(f, None).with_context(|| format!("reading {}", path.display()))
}

pub fn write_dataset(path: &Path, samples: &[TemporalGraphSample]) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_edge_list(f, samples).with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = a.common.load()?;
    a.apply(&mut cfg);
    let cfg = cfg.resolve()?;
    let mut m = ManifestBuilder::new("simulate", &cfg);
    let data = generate_dataset(&cfg.synth, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    write_dataset(&a.out, &data.samples)?;
    m.output(&a.out);
    m.detail("n_nodes", data.n_nodes)?;
    m.detail("n_samples", data.len())?;
    m.detail("mean_edges", data.mean_edge_count())?;
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

pub fn sample(a: &SampleArgs) -> anyhow::Result<()> {
    let mut cfg = a.common.load()?;
    a.sampler.apply(&mut cfg);
    let cfg = cfg.resolve()?;
    let mut m = ManifestBuilder::new("sample", &cfg);
    let data = read_dataset(&a.data)?;
    m.input(&a.data);
    let sampler = WalkSampler::new(&data, cfg.sampler)?;
    let walks = sampler.sample_batch(a.n, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_walks(f, &walks)?;
    m.output(&a.out);
    m.detail("n_walks", walks.len())?;
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = a.common.load()?;
    a.sampler.apply(&mut cfg);
    a.generator.apply(&mut cfg);
    a.train.apply(&mut cfg);
    let cfg = cfg.resolve()?;
    let mut m = ManifestBuilder::new("train", &cfg);
    let data = read_dataset(&a.data)?;
    m.input(&a.data);
    let ck_dir = a.out_dir.join("checkpoints");
    std::fs::create_dir_all(&ck_dir).with_context(|| format!("creating {}", ck_dir.display()))?;

    let mut periodic = Vec::new();
    let mut ck_err = None;
    let out = train_with(&data, &cfg.generator, &cfg.critic, &cfg.train, &cfg.sampler, |row, g, _| {
        if ck_err.is_some() {
            return;
        }
        let p = ck_dir.join(format!("epoch_{:05}.ckpt", row.epoch));
        match g.to_checkpoint().and_then(|c| c.save(&p)) {
            Ok(()) => periodic.push(p),
            Err(e) => ck_err = Some(e),
        }
    })?;
    if let Some(e) = ck_err {
        return Err(e).context("writing periodic checkpoint");
    }

    let gen_path = a.out_dir.join("generator.ckpt");
    let critic_path = a.out_dir.join("critic.ckpt");
    let hist_path = a.out_dir.join("history.csv");
    let train_path = a.out_dir.join("train.csv");
    let test_path = a.out_dir.join("test.csv");
    out.generator.to_checkpoint()?.save(&gen_path)?;
    out.critic.to_checkpoint()?.save(&critic_path)?;
    std::fs::write(&hist_path, out.history.to_csv())?;
    write_dataset(&train_path, &out.train.samples)?;
    write_dataset(&test_path, &out.validation.samples)?;
    for p in [&gen_path, &critic_path, &hist_path, &train_path, &test_path] {
        m.output(p);
    }
    for p in &periodic {
        m.output(p);
    }
    m.detail("best_epoch", out.history.best_epoch)?;
    m.detail("best_mmd_avg_degree", out.history.best_metric())?;
    m.detail("critic_updates", out.history.critic_updates)?;
    m.detail("gen_updates", out.history.gen_updates)?;
    m.detail("n_train", out.train.len())?;
    m.detail("n_test", out.validation.len())?;
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SampleReport {
    walks: usize,
    kept: usize,
    time_invalid: usize,
    disconnected: usize,
    out_of_range: usize,
    edges: usize,
}

pub fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let cfg = a.common.load()?.resolve()?;
    let mut m = ManifestBuilder::new("generate", &cfg);
    let gen = Generator::from_checkpoint(&Checkpoint::load(&a.ckpt)?)?;
    m.input(&a.ckpt);
    let mut spec = AssemblySpec::new(gen.n_nodes(), 1.0);
    if let Some(p) = &a.data {
        let data = read_dataset(p)?;
        m.input(p);
        if data.n_nodes != gen.n_nodes() {
            bail!("reference data spans {} nodes, generator {}", data.n_nodes, gen.n_nodes());
        }
        spec = assembly_spec(&data, true);
    }
    if a.edges.is_some() {
        spec.target_edges = a.edges;
    }
    if let Some(t) = a.t_end {
        spec.t_end_raw = t;
    }
    spec.require_connected = !a.allow_disconnected;
    let Some(n_walks) = a.walks.or(spec.target_edges) else {
        bail!("give --walks, --edges or --data to size the samples");
    };
    if a.n == 0 {
        bail!("-n must be positive");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(a.n);
    let mut reports = Vec::with_capacity(a.n);
    for _ in 0..a.n {
        let (s, r) = match generate_graph(&gen, n_walks, &spec, &mut rng) {
            Ok(g) => {
                let x = &g.assembly;
                let r = SampleReport {
                    walks: x.walks_total,
                    kept: x.walks_kept,
                    time_invalid: x.time_invalid,
                    disconnected: x.disconnected,
                    out_of_range: x.out_of_range,
                    edges: x.sample.len(),
                };
                (g.assembly.sample, r)
            }
            Err(Error::AllWalksDiscarded {
                total,
                time_invalid,
                disconnected,
                out_of_range,
            }) => {
                let r = SampleReport {
                    walks: total,
                    kept: 0,
                    time_invalid,
                    disconnected,
                    out_of_range,
                    edges: 0,
                };
                (TemporalGraphSample::empty(spec.n_nodes, spec.t_end_raw), r)
            }
            Err(e) => return Err(e.into()),
        };
        s.check_invariants()?;
        samples.push(s);
        reports.push(r);
    }
    write_dataset(&a.out, &samples)?;
    m.output(&a.out);
    let total: usize = reports.iter().map(|r| r.walks).sum();
    let kept: usize = reports.iter().map(|r| r.kept).sum();
    m.detail("discard_rate", (total - kept) as f64 / total as f64)?;
    m.detail("walks_per_sample", n_walks)?;
    m.detail("assembly", spec)?;
    m.detail("samples", &reports)?;
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> anyhow::Result<()> {
    let mut cfg = a.common.load()?;
    a.apply(&mut cfg);
    let cfg = cfg.resolve()?;
    let mut m = ManifestBuilder::new("evaluate", &cfg);
    let real = read_dataset(&a.real)?;
    let gen = read_dataset(&a.gen)?;
    m.input(&a.real);
    m.input(&a.gen);
    let report = evaluate(&real.samples, &gen.samples, &cfg.eval)?;
    std::fs::write(&a.out, report.to_csv())?;
    let json = a.out.with_extension("json");
    std::fs::write(&json, serde_json::to_string_pretty(&report)?)?;
    m.output(&a.out);
    m.output(&json);
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

pub fn plot(a: &PlotArgs) -> anyhow::Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(b) = a.bins {
        cfg.eval.n_bins = b;
    }
    let cfg = cfg.resolve()?;
    let mut m = ManifestBuilder::new("plot", &cfg);
    let data = read_dataset(&a.data)?;
    m.input(&a.data);
    std::fs::write(&a.out, render_arcs(&data.samples, cfg.eval.n_bins)?)?;
    m.output(&a.out);
    m.write(&manifest_path(&a.out))?;
    Ok(())
}
