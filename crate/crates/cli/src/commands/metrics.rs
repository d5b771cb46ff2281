use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use cif_simul::metrics::evaluate_corpus;
use cif_simul::{LatencyReport, ReadWriteTrace};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{list_files, load_corpus, read_text, sibling, write_text, InputContext, UsageError};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory of trace JSONL files (`*.jsonl`, integration files skipped).
    #[arg(long)]
    pub traces: PathBuf,
    /// Corpus manifest whose reference lengths feed AL.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// JSON report; a CSV with the same stem is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Row<'a> {
    id: &'a str,
    #[serde(flatten)]
    report: &'a LatencyReport,
}

#[derive(Serialize)]
struct Report<'a> {
    utterances: Vec<Row<'a>>,
    mean: &'a LatencyReport,
}

fn trace_id(name: &str) -> &str {
    name.strip_suffix(".trace.jsonl")
        .or_else(|| name.strip_suffix(".jsonl"))
        .unwrap_or(name)
}

fn csv_line(id: &str, r: &LatencyReport, with_ca: bool) -> String {
    let mut s = format!("{id},{},{},{}", r.ap, r.al_ms, r.dal_ms);
    if with_ca {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = write!(s, ",{},{}", opt(r.dal_ca_ms), opt(r.delta_ms));
    }
    let _ = writeln!(s, ",{},{}", r.target_len, r.source_ms);
    s
}

pub fn run(a: MetricsArgs) -> Result<()> {
    let files: Vec<PathBuf> = list_files(&a.traces, ".jsonl")?
        .into_iter()
        .filter(|p| !p.to_string_lossy().ends_with(".cif.jsonl"))
        .collect();
    if files.is_empty() {
        bail!(UsageError(format!("{}: no trace files", a.traces.display())));
    }
    let refs: Option<BTreeMap<String, usize>> = match &a.refs {
        Some(p) => Some(
            load_corpus(p)?
                .utterances
                .iter()
                .map(|u| (u.id.clone(), u.target.len()))
                .collect(),
        ),
        None => None,
    };
    let items = files
        .par_iter()
        .map(|path| -> Result<(String, ReadWriteTrace, Option<usize>)> {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let id = trace_id(name).to_string();
            let trace = ReadWriteTrace::from_jsonl(&read_text(path)?).input(path)?;
            let reference = match &refs {
                Some(m) => Some(
                    *m.get(&id)
                        .ok_or_else(|| UsageError(format!("{}: no reference for utterance {id}", path.display())))?,
                ),
                None => None,
            };
            Ok((id, trace, reference))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, mean) = evaluate_corpus(&items).input(&a.traces)?;

    let report = Report {
        utterances: rows.iter().map(|(id, r)| Row { id, report: r }).collect(),
        mean: &mean,
    };
    write_text(&a.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;

    let with_ca = rows.iter().any(|(_, r)| r.dal_ca_ms.is_some());
    let mut csv = String::from("id,ap,al_ms,dal_ms");
    if with_ca {
        csv.push_str(",dal_ca_ms,delta_ms");
    }
    csv.push_str(",target_len,source_ms\n");
    for (id, r) in &rows {
        csv.push_str(&csv_line(id, r, with_ca));
    }
    csv.push_str(&csv_line("MEAN", &mean, with_ca));
    write_text(&sibling(&a.out, "csv"), &csv)?;

    print!(
        "{} utterances: AP {:.4}  AL {:.1} ms  DAL {:.1} ms",
        rows.len(),
        mean.ap,
        mean.al_ms,
        mean.dal_ms
    );
    match (mean.dal_ca_ms, mean.delta_ms) {
        (Some(ca), Some(d)) => println!("  DAL-CA {ca:.1} ms  delta {d:.1} ms"),
        _ => println!(),
    }
    Ok(())
}
