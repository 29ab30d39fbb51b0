//! File formats: model and pairing JSON, FRF CSV, and JSON reports.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interface::InterfacePairing;
use crate::model::{DofLabel, FrfMatrix, OutputKind, ResponseKind, StateSpaceModel, StateTag};
use crate::reference::PartialFrf;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    output_kind: OutputKind,
    inputs: Vec<DofLabel>,
    outputs: Vec<DofLabel>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    state_tags: Vec<String>,
    /// DOF of each interface state; only present for coupling-form models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_dofs: Option<Vec<Option<DofLabel>>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix(name: &str, v: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if v.len() != nrows || v.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{name} is not {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| v[r][c]))
}

pub fn model_to_json(m: &StateSpaceModel) -> Result<String> {
    let dofs: Vec<Option<DofLabel>> = m.state_tags.iter().map(|t| t.dof().cloned()).collect();
    let file = ModelFile {
        output_kind: m.output_kind,
        inputs: m.inputs.clone(),
        outputs: m.outputs.clone(),
        a: rows(&m.a),
        b: rows(&m.b),
        c: rows(&m.c),
        d: rows(&m.d),
        state_tags: m.state_tags.iter().map(|t| t.name().to_string()).collect(),
        state_dofs: dofs.iter().any(Option::is_some).then_some(dofs),
    };
    let mut s = serde_json::to_string(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(s: &str) -> Result<StateSpaceModel> {
    let f: ModelFile = serde_json::from_str(s)?;
    let n = f.a.len();
    let (ni, no) = (f.inputs.len(), f.outputs.len());
    if f.state_tags.len() != n {
        return Err(Error::Parse(format!("{} state tags for {n} states", f.state_tags.len())));
    }
    let dofs = f.state_dofs.unwrap_or_else(|| vec![None; n]);
    if dofs.len() != n {
        return Err(Error::Parse("state_dofs length differs from state count".into()));
    }
    let tags = f
        .state_tags
        .iter()
        .zip(dofs)
        .enumerate()
        .map(|(i, (t, d))| match (t.as_str(), d) {
            ("internal", _) => Ok(StateTag::Internal),
            ("interface_output", Some(d)) => Ok(StateTag::InterfaceOutput(d)),
            ("deriv_interface_output", Some(d)) => Ok(StateTag::DerivInterfaceOutput(d)),
            (other, _) => Err(Error::Parse(format!("state tag {i} ({other:?}) lacks a DOF or is unknown"))),
        })
        .collect::<Result<Vec<_>>>()?;
    StateSpaceModel {
        a: matrix("A", &f.a, n, n)?,
        b: matrix("B", &f.b, n, ni)?,
        c: matrix("C", &f.c, no, n)?,
        d: matrix("D", &f.d, no, ni)?,
        output_kind: f.output_kind,
        inputs: f.inputs,
        outputs: f.outputs,
        state_tags: tags,
    }
    .checked()
}

pub fn read_model(path: &Path) -> Result<StateSpaceModel> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn write_model(path: &Path, m: &StateSpaceModel) -> Result<()> {
    fs::write(path, model_to_json(m)?)?;
    Ok(())
}

/// Reads a pairing and rejects a DOF listed twice on the same side. A label
/// may appear as both `a` and `b`: decoupling pairs an assembly DOF with the
/// identically named DOF of the removed model.
pub fn read_pairing(path: &Path) -> Result<InterfacePairing> {
    let p: InterfacePairing = serde_json::from_str(&fs::read_to_string(path)?)?;
    for side in [p.pairs.iter().map(|x| &x.a).collect::<Vec<_>>(), p.pairs.iter().map(|x| &x.b).collect()] {
        for (i, l) in side.iter().enumerate() {
            if side[..i].contains(l) {
                return Err(Error::DuplicatePairing(l.to_string()));
            }
        }
    }
    Ok(p)
}

pub fn write_pairing(path: &Path, p: &InterfacePairing) -> Result<()> {
    write_json(path, p)
}

/// Label list, either a bare JSON array or `{"keep": [...]}`. Entries are
/// label objects or `component:node[:direction]` strings.
pub fn read_labels(path: &Path) -> Result<Vec<DofLabel>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Text(String),
        Full(DofLabel),
    }
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Labels {
        Bare(Vec<Entry>),
        Keyed { keep: Vec<Entry> },
    }
    let v = match serde_json::from_str(&fs::read_to_string(path)?)? {
        Labels::Bare(v) | Labels::Keyed { keep: v } => v,
    };
    v.into_iter()
        .map(|e| match e {
            Entry::Text(s) => s.parse(),
            Entry::Full(l) => Ok(l),
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

const CSV_HEADER: [&str; 5] = ["freq_hz", "out_label", "in_label", "re", "im"];

fn write_rows<W: Write>(
    w: W,
    freqs: &[f64],
    slices: &[Option<&DMatrix<Complex64>>],
    inputs: &[DofLabel],
    outputs: &[DofLabel],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    out.write_record(CSV_HEADER).map_err(csv_err)?;
    let ins: Vec<String> = inputs.iter().map(|l| l.to_string()).collect();
    let outs: Vec<String> = outputs.iter().map(|l| l.to_string()).collect();
    for (f, h) in freqs.iter().zip(slices) {
        for (i, o) in outs.iter().enumerate() {
            for (j, inp) in ins.iter().enumerate() {
                let z = h.map_or(Complex64::new(f64::NAN, f64::NAN), |h| h[(i, j)]);
                out.write_record([f.to_string(), o.clone(), inp.clone(), z.re.to_string(), z.im.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per (frequency, output, input), in that order.
pub fn write_frf_csv<W: Write>(w: W, f: &FrfMatrix) -> Result<()> {
    let slices: Vec<_> = f.data.iter().map(Some).collect();
    write_rows(w, &f.freqs_hz, &slices, &f.inputs, &f.outputs)
}

/// As [`write_frf_csv`], with `NaN` values at failed frequencies.
pub fn write_partial_frf_csv<W: Write>(w: W, f: &PartialFrf) -> Result<()> {
    let slices: Vec<_> = f.data.iter().map(|r| r.as_ref().ok()).collect();
    write_rows(w, &f.freqs_hz, &slices, &f.inputs, &f.outputs)
}

/// Parses an FRF CSV. Label order follows first appearance; the response
/// kind is not stored in the file and must be supplied.
pub fn read_frf_csv<R: Read>(r: R, kind: ResponseKind) -> Result<FrfMatrix> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let mut freqs: Vec<f64> = Vec::new();
    let mut ins: Vec<DofLabel> = Vec::new();
    let mut outs: Vec<DofLabel> = Vec::new();
    let mut entries = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 2, &rec[k])))
        };
        let f = num(0)?;
        let (o, i): (DofLabel, DofLabel) = (rec[1].parse()?, rec[2].parse()?);
        let z = Complex64::new(num(3)?, num(4)?);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Parse(format!("row {}: value at {f} Hz is marked failed", line + 2)));
        }
        if freqs.last() != Some(&f) {
            freqs.push(f);
        }
        let pos = |list: &mut Vec<DofLabel>, l: DofLabel| match list.iter().position(|x| *x == l) {
            Some(p) => p,
            None => {
                list.push(l);
                list.len() - 1
            }
        };
        let (oi, ii) = (pos(&mut outs, o), pos(&mut ins, i));
        entries.push((freqs.len() - 1, oi, ii, z));
    }
    let mut data = vec![DMatrix::from_element(outs.len(), ins.len(), Complex64::new(f64::NAN, 0.0)); freqs.len()];
    for (k, oi, ii, z) in entries {
        data[k][(oi, ii)] = z;
    }
    if data.iter().any(|h| h.iter().any(|z| z.re.is_nan())) {
        return Err(Error::Parse("FRF CSV does not cover every (frequency, output, input)".into()));
    }
    FrfMatrix::new(freqs, data, kind, ins, outs)
}

pub fn read_frf(path: &Path, kind: ResponseKind) -> Result<FrfMatrix> {
    read_frf_csv(fs::File::open(path)?, kind)
}

pub fn write_frf(path: &Path, f: &FrfMatrix) -> Result<()> {
    write_frf_csv(fs::File::create(path)?, f)
}
