use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use forge_core::audit::{
    compare_reports, run_audit, AuditOptions, AuditOutcome, AuditReport, ShuffleScoring,
};
use forge_core::backends::{BackendSpec, Mode};
use forge_core::curriculum::{manifest_meta, manifest_steps, CurriculumConfig, Formula};
use forge_core::dataset::{
    apply_visibility_relabel, validate_base, validate_mcqa, DatasetKind, SynthOptions,
};
use forge_core::generation::{
    build_from_stage_one, mcqa_to_openended, run_stage_one, Expert, GenerationConfig, HttpExpert,
    Stage1Output, StyledExpert, TemplateExpert,
};
use forge_core::io::{
    read_jsonl_file, write_atomic, write_json_atomic, write_jsonl, write_jsonl_atomic,
};
use forge_core::review::ReviewStore;
use forge_core::{BaseDataset, Error, McqaDataset};

use crate::{
    config, AuditArgs, DiffArgs, EndpointArgs, Failure, FormulaArg, GenerateArgs, ReviewServeArgs,
    ScheduleArgs, ScoringArg, SynthArgs, ValidateArgs,
};

type CmdResult = Result<(), Failure>;

/// `dir/name.ext` + `suffix` -> `dir/name.ext<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn print_json<T: serde::Serialize>(value: &T) -> CmdResult {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::new("error", e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure::new("io", e.to_string()))
}

pub fn synth(a: SynthArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&a.not_visible_rate) || !(0.0..=1.0).contains(&a.test_fraction) {
        return Err(Failure::new("config", "rates must lie in [0, 1]"));
    }
    let ds = SynthOptions {
        test_fraction: a.test_fraction,
        ..SynthOptions::new(a.n, a.not_visible_rate, a.seed)
    }
    .generate();
    ds.save(&a.out)?;
    print_json(&serde_json::json!({"out": a.out, "n": ds.len()}))
}

fn make_expert(
    spec: &str,
    seed: u64,
    endpoint: &EndpointArgs,
    beside: &Path,
    video: bool,
) -> anyhow::Result<Box<dyn Expert>> {
    let (name, arg) = spec
        .split_once(':')
        .map_or((spec, None), |(n, a)| (n, Some(a)));
    Ok(match name {
        "template" => Box::new(TemplateExpert::new(seed)),
        "styled" => Box::new(StyledExpert::new(
            arg.unwrap_or(StyledExpert::DEFAULT_MARKER),
            seed,
        )),
        "http" => Box::new(HttpExpert::new(config::endpoint(endpoint, beside)?, video)?),
        other => return Err(anyhow!(Error::Config(format!("unknown expert `{other}`")))),
    })
}

pub fn generate(a: GenerateArgs) -> CmdResult {
    let base = apply_visibility_relabel(&BaseDataset::load(&a.base)?);
    let cfg = GenerationConfig {
        max_parallel: a.max_parallel,
        max_failure_rate: a.max_failure_rate,
        ..GenerationConfig::new(a.strategy.parse()?, a.seed).with_k(a.k)
    };
    cfg.validate()?;
    let expert = make_expert(
        &a.expert,
        a.seed,
        &a.endpoint,
        &a.base,
        a.condition_on_video,
    )?;
    let (stage1, failures) = match &a.from_stage1 {
        Some(path) => (read_jsonl_file::<Stage1Output>(path)?, Vec::new()),
        None => run_stage_one(&base, expert.as_ref(), cfg.max_parallel)?,
    };
    let stage1_path = sidecar(&a.out, ".stage1.jsonl");
    let report_path = sidecar(&a.out, ".report.json");
    if a.from_stage1.is_none() {
        write_jsonl_atomic(&stage1_path, &stage1)?;
    }
    match build_from_stage_one(base.len(), &stage1, failures, &cfg, expert.as_ref()) {
        Ok(out) => {
            out.dataset.save(&a.out)?;
            write_json_atomic(&report_path, &out.report)?;
            print_json(&serde_json::json!({
                "out": a.out,
                "n_built": out.report.n_built,
                "failures": out.report.failures.len(),
                "report": report_path,
            }))
        }
        Err(Error::TooManyFailures {
            failed,
            total,
            report,
        }) => {
            write_json_atomic(&report_path, &report)?;
            Err(Failure::new(
                "too_many_failures",
                format!("{failed} of {total} samples failed generation"),
            )
            .with_report(&report_path))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn validate(a: ValidateArgs) -> CmdResult {
    let kind = DatasetKind::detect(&a.dataset)?.unwrap_or(DatasetKind::Mcqa);
    let report = match kind {
        DatasetKind::Base => validate_base(&BaseDataset::load(&a.dataset)?)?,
        DatasetKind::Mcqa => validate_mcqa(&McqaDataset::load(&a.dataset)?)?,
    };
    let path = a
        .report
        .unwrap_or_else(|| sidecar(&a.dataset, ".validation.json"));
    write_json_atomic(&path, &report)?;
    if report.is_valid() {
        print_json(&serde_json::json!({"valid": true, "report": path}))
    } else {
        Err(Failure::new(
            "validation",
            format!(
                "{} violation(s); first: {:?}",
                report.violations.len(),
                report.violations.first()
            ),
        )
        .with_report(&path))
    }
}

fn write_outcome(outcome: &AuditOutcome, report: &Path) -> forge_core::Result<PathBuf> {
    let records = sidecar(report, ".records.jsonl");
    write_json_atomic(report, &outcome.report)?;
    write_jsonl_atomic(&records, &outcome.records)?;
    Ok(records)
}

pub fn audit(a: AuditArgs) -> CmdResult {
    let ds = McqaDataset::load(&a.dataset)?;
    let spec = BackendSpec::parse(&a.backend, a.seed)?;
    let endpoint = match spec {
        BackendSpec::Http => Some(config::endpoint(&a.endpoint, &a.dataset)?),
        BackendSpec::Scripted(_) => None,
    };
    let backend = spec.build(endpoint)?;
    let dataset_id = a.dataset_id.unwrap_or_else(|| {
        a.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let opts = AuditOptions {
        mode: if a.blind { Mode::Blind } else { Mode::Full },
        shuffle_variants: a.shuffle,
        shuffle_scoring: match a.shuffle_scoring {
            ScoringArg::All => ShuffleScoring::AllVariants,
            ScoringArg::Mean => ShuffleScoring::Mean,
        },
        ..AuditOptions::new(dataset_id.clone(), a.seed)
    };
    match run_audit(&ds, backend.as_ref(), &opts) {
        Ok(outcome) => {
            let records = write_outcome(&outcome, &a.report)?;
            print_json(&serde_json::json!({"report": a.report, "records": records}))
        }
        Err(Error::AuditAborted { cause, mut partial }) => {
            partial.report.dataset_id = dataset_id;
            partial.report.backend_id = backend.id();
            partial.report.seed = a.seed;
            write_outcome(&partial, &a.report)?;
            Err(Failure::new("audit_aborted", cause).with_report(&a.report))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn schedule(a: ScheduleArgs) -> CmdResult {
    let ds = McqaDataset::load(&a.dataset)?;
    let formula = match a.formula {
        FormulaArg::Interpolated => Formula::Interpolated,
        FormulaArg::AsWritten => Formula::AsWritten,
    };
    let cfg = CurriculumConfig::new(a.dmin, a.dmax, a.tau, formula)?;
    let steps = manifest_steps(&ds, &cfg, a.steps, a.batch, a.seed)?;
    write_atomic(&a.out, |w| {
        for entry in steps {
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    let meta_path = sidecar(&a.out, ".meta.json");
    let open_path = sidecar(&a.out, ".openended.jsonl");
    write_json_atomic(
        &meta_path,
        &manifest_meta(&ds, &cfg, a.steps, a.batch, a.seed),
    )?;
    let open: Vec<_> = ds.iter().map(mcqa_to_openended).collect();
    write_atomic(&open_path, |w| write_jsonl(w, &open))?;
    print_json(&serde_json::json!({"out": a.out, "meta": meta_path, "open_ended": open_path}))
}

fn parse_dataset_arg(arg: &str) -> anyhow::Result<(String, PathBuf)> {
    let (id, path) = arg
        .split_once('=')
        .ok_or_else(|| anyhow!(Error::Config(format!("expected id=path, got `{arg}`"))))?;
    Ok((id.to_string(), PathBuf::from(path)))
}

pub fn review_serve(a: ReviewServeArgs) -> CmdResult {
    let mut datasets = BTreeMap::new();
    for arg in &a.datasets {
        let (id, path) = parse_dataset_arg(arg)?;
        let ds = McqaDataset::load(&path)?;
        if datasets.insert(id.clone(), ds).is_some() {
            return Err(Failure::new(
                "config",
                format!("dataset id `{id}` given twice"),
            ));
        }
    }
    let store = Arc::new(ReviewStore::open(&a.data_dir, datasets)?);
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime
        .block_on(forge_review::serve(store, a.bind))
        .map_err(|e| Failure::new("io", format!("serving on {}: {e}", a.bind)))
}

fn load_report(path: &Path) -> anyhow::Result<AuditReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn diff(a: DiffArgs) -> CmdResult {
    let diff = compare_reports(&load_report(&a.a)?, &load_report(&a.b)?)?;
    if let Some(out) = &a.out {
        write_json_atomic(out, &diff)?;
    }
    print_json(&diff)
}
