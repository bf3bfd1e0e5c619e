// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON exchange formats.
//!
//! * Waveforms and bias signals: two columns, `t_ps` and a current column.
//! * Trace matrices: `run,plaintext,s0,s1,...` with the plaintext in hex,
//!   plus a JSON sidecar describing how the traces were produced.
//! * Reports: JSON objects carrying a `schema_version` field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::current::Waveform;
use crate::dpa::DpaResult;
use crate::sim::{SimConfig, Target, TraceMatrix};
use crate::{Error, Result, SCHEMA_VERSION};

fn fixed(x: f64) -> String {
    format!("{x:.12}")
}

/// Writes a two-column series with header `t_ps,<value_column>`.
pub fn write_series_csv<W: Write>(
    writer: W,
    value_column: &str,
    t0_ps: f64,
    sample_period_ps: f64,
    samples: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_ps", value_column])?;
    for (j, &x) in samples.iter().enumerate() {
        w.write_record([fixed(t0_ps + j as f64 * sample_period_ps), fixed(x)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_waveform_csv<W: Write>(writer: W, waveform: &Waveform) -> Result<()> {
    write_series_csv(
        writer,
        "i_uA",
        waveform.t0_ps,
        waveform.sample_period_ps,
        &waveform.samples,
    )
}

/// A two-column series read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub value_column: String,
    pub t_ps: Vec<f64>,
    pub values: Vec<f64>,
}

fn parse_cell(s: &str, column: &str, line: u64) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| {
        Error::Schema(format!(
            "column `{column}` line {line}: `{s}` is not a number"
        ))
    })
}

/// Reads any `t_ps,<name>` series. Empty files are an error.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Series> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Schema("empty CSV".into()));
    }
    if headers.len() != 2 || &headers[0] != "t_ps" {
        return Err(Error::Schema(format!(
            "expected header `t_ps,<value>`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let value_column = headers[1].to_string();
    let mut t_ps = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        t_ps.push(parse_cell(&rec[0], "t_ps", line)?);
        values.push(parse_cell(&rec[1], &value_column, line)?);
    }
    if values.is_empty() {
        return Err(Error::Schema("CSV has a header but no samples".into()));
    }
    Ok(Series {
        value_column,
        t_ps,
        values,
    })
}

pub fn write_traces_csv<W: Write>(writer: W, traces: &TraceMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["run".to_string(), "plaintext".to_string()];
    header.extend((0..traces.cols).map(|j| format!("s{j}")));
    w.write_record(&header)?;
    for (i, row) in traces.iter_rows().enumerate() {
        let mut rec = vec![i.to_string(), format!("{:02x}", traces.plaintexts[i])];
        rec.extend(row.iter().map(|&x| fixed(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV. Malformed headers or cells are reported by column
/// name. `eval_samples` is taken from the sidecar when one is available.
pub fn read_traces_csv<R: Read>(
    reader: R,
    sample_period_ps: f64,
    eval_samples: Option<usize>,
) -> Result<TraceMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = r.headers()?.clone();
    let expect = |i: usize, name: &str| -> Result<()> {
        match headers.get(i) {
            Some(h) if h == name => Ok(()),
            Some(h) => Err(Error::Schema(format!(
                "column {i} must be `{name}`, found `{h}`"
            ))),
            None => Err(Error::Schema(format!("missing column `{name}`"))),
        }
    };
    expect(0, "run")?;
    expect(1, "plaintext")?;
    let cols = headers.len() - 2;
    if cols == 0 {
        return Err(Error::Schema("missing sample column `s0`".into()));
    }
    for j in 0..cols {
        expect(j + 2, &format!("s{j}"))?;
    }
    let mut rows = Vec::new();
    let mut plaintexts = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("row {i}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let run: usize = rec[0].trim().parse().map_err(|_| {
            Error::Schema(format!(
                "column `run` line {line}: `{}` is not an index",
                &rec[0]
            ))
        })?;
        if run != i {
            return Err(Error::Schema(format!(
                "column `run` line {line}: expected {i}, found {run}"
            )));
        }
        let pt = u8::from_str_radix(rec[1].trim().trim_start_matches("0x"), 16).map_err(|_| {
            Error::Schema(format!(
                "column `plaintext` line {line}: `{}` is not a hex byte",
                &rec[1]
            ))
        })?;
        plaintexts.push(pt);
        let row = (0..cols)
            .map(|j| parse_cell(&rec[j + 2], &format!("s{j}"), line))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Schema("trace CSV has no rows".into()));
    }
    TraceMatrix::new(
        rows,
        plaintexts,
        sample_period_ps,
        eval_samples.unwrap_or(cols),
    )
}

/// Provenance written next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub schema_version: u32,
    pub sample_period_ps: f64,
    pub eval_samples: usize,
    pub rtz_samples: usize,
    pub rows: usize,
    pub seed: u64,
    #[serde(rename = "noise_sigma_uA")]
    pub noise_sigma_ua: f64,
    pub target: Target,
    pub key_hex: String,
    pub config: SimConfig,
    #[serde(default)]
    pub perturbations: Vec<String>,
}

impl TraceSidecar {
    pub fn new(
        traces: &TraceMatrix,
        config: SimConfig,
        target: Target,
        key: u8,
        seed: u64,
        noise_sigma_ua: f64,
    ) -> Self {
        TraceSidecar {
            schema_version: SCHEMA_VERSION,
            sample_period_ps: traces.sample_period_ps,
            eval_samples: traces.eval_samples,
            rtz_samples: traces.cols - traces.eval_samples,
            rows: traces.rows,
            seed,
            noise_sigma_ua,
            target,
            key_hex: format!("{key:02x}"),
            config,
            perturbations: Vec::new(),
        }
    }
}

/// Serialises `value` and adds `schema_version` at the top level.
pub fn versioned<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
            Ok(v)
        }
        None => Ok(json!({ "schema_version": SCHEMA_VERSION, "value": v })),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialise");
    s.push('\n');
    s
}

/// Attack summary: guesses in rank order, without the bias signals.
pub fn dpa_result_json(result: &DpaResult) -> Value {
    let ranking: Vec<Value> = result
        .ranking
        .iter()
        .map(|&g| {
            let r = &result.guesses[g as usize];
            json!({
                "guess_hex": format!("{:02x}", r.guess),
                "peak": r.peak,
                "peak_index": r.peak_index,
                "n0": r.n0,
                "n1": r.n1,
                "rank": r.rank,
            })
        })
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "selection": result.selection,
        "n_traces": result.n_traces,
        "conclusive": result.conclusive,
        "top_tie_count": result.top_tie_count(),
        "ranking": ranking,
    })
}

/// Writes the bias signal of one guess as `t_ps,T_uA`.
pub fn write_bias_csv<W: Write>(
    writer: W,
    result: &DpaResult,
    guess: u8,
    sample_period_ps: f64,
) -> Result<()> {
    let r = result
        .guess(guess)
        .ok_or_else(|| Error::Input(format!("guess {guess:#04x} outside the guess space")))?;
    if r.peak.is_none() {
        return Err(Error::EmptySet);
    }
    write_series_csv(writer, "T_uA", 0.0, sample_period_ps, &r.bias)
}
