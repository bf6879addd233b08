//! CSV ingestion and emission.
//!
//! Formats (all with a header row, UTF-8, LF):
//!   methylation    long  `individual_id,position,level`
//!   genotypes      wide  `individual_id,snp_1,..,snp_D` with entries 0/1/2
//!   SNP positions        `snp_id,position_bp`, one row per genotype column
//!   phenotype      wide  `individual_id,y,w_1,..,w_S`
//!
//! Loaders report the file and 1-based line of the first offending row and
//! order individuals by id, so a reload is independent of input row order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use fmsi::curves::build_curve_set;
use fmsi::curves::scale_positions;
use fmsi::floatfmt::fmt_f64;
use fmsi::{CurveSet, Dataset, MethylationSample, RawCohort, SmoothingConfig};

use crate::error::{CliError, Result};

/// Phenotype table plus everything needed to line it up with the other files.
pub struct PhenotypeTable {
    pub ids: Vec<String>,
    pub y: Vec<f64>,
    /// Row-major covariate values, one inner vector per individual.
    pub w: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

pub struct GenotypeTable {
    pub ids: Vec<String>,
    /// Row-major allele counts, one inner vector per individual.
    pub rows: Vec<Vec<f64>>,
    pub snp_names: Vec<String>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = match err.position() {
        Some(pos) => format!(" line {}", pos.line()),
        None => String::new(),
    };
    CliError::Data(format!("{}{line}: {err}", path.display()))
}

fn data_at(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{} line {line}: {msg}", path.display()))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| data_at(path, line, format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_at(path, line, format!("{what} '{field}' is not finite")));
    }
    Ok(v)
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(|e| csv_error(path, e))?;
    let matches = got.len() == want.len() && got.iter().zip(want).all(|(g, w)| g.trim() == *w);
    if !matches {
        return Err(data_at(
            path,
            1,
            format!(
                "expected header '{}', found '{}'",
                want.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

/// Long methylation CSV -> one sample per individual, sites in file order.
/// Site positions must already be increasing within an individual; levels must
/// lie in [0,1].
pub fn read_methylation(path: &Path) -> Result<Vec<MethylationSample>> {
    let mut rdr = reader(path)?;
    expect_header(path, &mut rdr, &["individual_id", "position", "level"])?;
    let mut sites: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        let id = record[0].trim();
        if id.is_empty() {
            return Err(data_at(path, line, "empty individual_id"));
        }
        let position = parse_f64(path, line, &record[1], "position")?;
        let level = parse_f64(path, line, &record[2], "level")?;
        if !(0.0..=1.0).contains(&level) {
            return Err(data_at(
                path,
                line,
                format!("level {level} outside [0,1] for individual '{id}'"),
            ));
        }
        sites.entry(id.to_string()).or_default().push((position, level));
    }
    sites
        .into_iter()
        .map(|(id, rows)| {
            let (positions, levels) = rows.into_iter().unzip();
            MethylationSample::new(id, positions, levels).map_err(CliError::from)
        })
        .collect()
}

/// Wide genotype CSV; entries must be 0, 1, or 2.
pub fn read_genotypes(path: &Path) -> Result<GenotypeTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || headers[0].trim() != "individual_id" {
        return Err(data_at(
            path,
            1,
            "expected header 'individual_id,<snp name>,..' with at least one SNP column",
        ));
    }
    let snp_names: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(data_at(path, line, format!("duplicate individual_id '{id}'")));
        }
        let mut row = Vec::with_capacity(snp_names.len());
        for (name, field) in snp_names.iter().zip(record.iter().skip(1)) {
            let count = match field.trim() {
                "0" => 0.0,
                "1" => 1.0,
                "2" => 2.0,
                other => {
                    return Err(data_at(
                        path,
                        line,
                        format!(
                            "genotype entry '{other}' for {name} of individual '{id}' \
                             must be 0, 1, or 2"
                        ),
                    ));
                }
            };
            row.push(count);
        }
        ids.push(id);
        rows.push(row);
    }
    Ok(GenotypeTable {
        ids,
        rows,
        snp_names,
    })
}

/// SNP positions keyed by the genotype column names.
pub fn read_snp_positions(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = reader(path)?;
    expect_header(path, &mut rdr, &["snp_id", "position_bp"])?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        let pos = parse_f64(path, line, &record[1], "position_bp")?;
        if out.insert(id.clone(), pos).is_some() {
            return Err(data_at(path, line, format!("duplicate snp_id '{id}'")));
        }
    }
    Ok(out)
}

/// Phenotype CSV; every column after `y` is a model covariate.
pub fn read_phenotype(path: &Path) -> Result<PhenotypeTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || headers[0].trim() != "individual_id" || headers[1].trim() != "y" {
        return Err(data_at(
            path,
            1,
            "expected header 'individual_id,y[,<covariate>,..]'",
        ));
    }
    let covariate_names: Vec<String> =
        headers.iter().skip(2).map(|s| s.trim().to_string()).collect();
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        let id = record[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(data_at(path, line, format!("duplicate individual_id '{id}'")));
        }
        y.push(parse_f64(path, line, &record[1], "y")?);
        let mut row = Vec::with_capacity(covariate_names.len());
        for (name, field) in covariate_names.iter().zip(record.iter().skip(2)) {
            row.push(parse_f64(path, line, field, name)?);
        }
        ids.push(id);
        w.push(row);
    }
    Ok(PhenotypeTable {
        ids,
        y,
        w,
        covariate_names,
    })
}

/// Describe how two id sets differ, listing up to ten ids per side.
fn id_mismatch(left_name: &str, left: &BTreeSet<&str>, right_name: &str, right: &BTreeSet<&str>) -> String {
    let mut msg = format!("individual ids differ between {left_name} and {right_name}:");
    for (name, only) in [
        (left_name, left.difference(right).collect::<Vec<_>>()),
        (right_name, right.difference(left).collect::<Vec<_>>()),
    ] {
        if only.is_empty() {
            continue;
        }
        let shown: Vec<&str> = only.iter().take(10).map(|s| **s).collect();
        let _ = write!(msg, " only in {name}: {}", shown.join(", "));
        if only.len() > 10 {
            let _ = write!(msg, " and {} more", only.len() - 10);
        }
        msg.push(';');
    }
    msg.pop();
    msg
}

pub struct InputPaths<'a> {
    pub methylation: &'a Path,
    pub genotypes: &'a Path,
    pub snp_positions: &'a Path,
    pub phenotype: &'a Path,
}

/// Everything the four input files pin down, in sorted-id order.
#[derive(Debug)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub covariate_names: Vec<String>,
    pub snp_names: Vec<String>,
    /// SNP coordinates before scaling, aligned with the genotype columns.
    pub snp_positions_bp: Vec<f64>,
    /// Per-individual raw sites, aligned with `dataset.ids`.
    pub samples: Vec<MethylationSample>,
}

/// Read the four input files, check id agreement, smooth, and assemble a
/// model-ready dataset ordered by individual id.
pub fn load_dataset(paths: &InputPaths<'_>, smoothing: &SmoothingConfig) -> Result<LoadedData> {
    let samples = read_methylation(paths.methylation)?;
    let genotypes = read_genotypes(paths.genotypes)?;
    let snp_map = read_snp_positions(paths.snp_positions)?;
    let phenotype = read_phenotype(paths.phenotype)?;

    let meth_ids: BTreeSet<&str> = samples.iter().map(|s| s.id()).collect();
    let geno_ids: BTreeSet<&str> = genotypes.ids.iter().map(String::as_str).collect();
    let pheno_ids: BTreeSet<&str> = phenotype.ids.iter().map(String::as_str).collect();
    for (name, other) in [("genotypes", &geno_ids), ("phenotype", &pheno_ids)] {
        if &meth_ids != other {
            return Err(CliError::Data(id_mismatch(
                "methylation",
                &meth_ids,
                name,
                other,
            )));
        }
    }

    let missing: Vec<&str> = genotypes
        .snp_names
        .iter()
        .filter(|n| !snp_map.contains_key(*n))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no position for genotype column(s) {}",
            paths.snp_positions.display(),
            missing.join(", ")
        )));
    }
    if snp_map.len() != genotypes.snp_names.len() {
        let extra: Vec<&str> = snp_map
            .keys()
            .filter(|k| !genotypes.snp_names.contains(*k))
            .map(String::as_str)
            .collect();
        return Err(CliError::Data(format!(
            "{}: position rows without a genotype column: {}",
            paths.snp_positions.display(),
            extra.join(", ")
        )));
    }
    let snp_positions_bp: Vec<f64> = genotypes.snp_names.iter().map(|n| snp_map[n]).collect();

    // `samples` is already id-sorted (BTreeMap); order the tables the same way.
    let geno_index: BTreeMap<&str, usize> = genotypes
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let pheno_index: BTreeMap<&str, usize> = phenotype
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let curves = build_curve_set(&samples, smoothing)?;
    let snp_positions = scale_positions(&snp_positions_bp, curves.scaling)?;

    let n = samples.len();
    let s = phenotype.covariate_names.len();
    let d = genotypes.snp_names.len();
    let ids: Vec<String> = samples.iter().map(|smp| smp.id().to_string()).collect();
    let y = DVector::from_fn(n, |i, _| phenotype.y[pheno_index[ids[i].as_str()]]);
    let w = DMatrix::from_fn(n, s, |i, j| phenotype.w[pheno_index[ids[i].as_str()]][j]);
    let g = DMatrix::from_fn(n, d, |i, j| genotypes.rows[geno_index[ids[i].as_str()]][j]);

    let dataset = Dataset {
        ids,
        y,
        w,
        g,
        snp_positions,
        curves,
    };
    dataset.validate()?;
    Ok(LoadedData {
        dataset,
        covariate_names: phenotype.covariate_names,
        snp_names: genotypes.snp_names,
        snp_positions_bp,
        samples,
    })
}

/// Baseline-regression view of the loaded data. All individuals must share
/// one CpG position vector, since the pairwise baseline tests raw levels
/// site by site.
pub fn raw_cohort(data: &LoadedData) -> Result<RawCohort> {
    let first = &data.samples[0];
    for sample in &data.samples[1..] {
        if sample.positions() != first.positions() {
            return Err(CliError::Data(format!(
                "pairwise baseline needs one shared CpG grid, but individual '{}' \
                 has different site positions than '{}'",
                sample.id(),
                first.id()
            )));
        }
    }
    let m = first.len();
    let n = data.samples.len();
    let levels = DMatrix::from_fn(n, m, |i, j| data.samples[i].levels()[j]);
    Ok(RawCohort {
        y: data.dataset.y.clone(),
        w: data.dataset.w.clone(),
        g: data.dataset.g.clone(),
        snp_positions_bp: data.snp_positions_bp.clone(),
        cpg_positions_bp: first.positions().to_vec(),
        levels,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

/// Base-pair coordinates print as integers when exact, so files written from
/// integer-sited samples match hand-authored ones.
fn fmt_position(pos: f64) -> String {
    if pos.fract() == 0.0 && pos.abs() < 9.0e15 {
        format!("{}", pos as i64)
    } else {
        fmt_f64(pos)
    }
}

pub fn write_methylation(path: &Path, samples: &[MethylationSample]) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["individual_id", "position", "level"])
        .map_err(|e| csv_error(path, e))?;
    for sample in samples {
        for (&pos, &level) in sample.positions().iter().zip(sample.levels()) {
            out.write_record([sample.id(), fmt_position(pos).as_str(), &fmt_f64(level)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    out.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_genotypes(path: &Path, ids: &[String], g: &DMatrix<f64>) -> Result<()> {
    let mut out = writer(path)?;
    let mut header = vec!["individual_id".to_string()];
    header.extend((1..=g.ncols()).map(|d| format!("snp_{d}")));
    out.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(g.row(i).iter().map(|&v| format!("{}", v as u8)));
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_snp_positions(path: &Path, positions_bp: &[f64]) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["snp_id", "position_bp"])
        .map_err(|e| csv_error(path, e))?;
    for (d, &pos) in positions_bp.iter().enumerate() {
        out.write_record([format!("snp_{}", d + 1), fmt_position(pos)])
            .map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_phenotype(
    path: &Path,
    ids: &[String],
    y: &DVector<f64>,
    w: &DMatrix<f64>,
) -> Result<()> {
    let mut out = writer(path)?;
    let mut header = vec!["individual_id".to_string(), "y".to_string()];
    header.extend((1..=w.ncols()).map(|s| format!("w_{s}")));
    out.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone(), fmt_f64(y[i])];
        row.extend(w.row(i).iter().map(|&v| fmt_f64(v)));
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Long CSV of smoothed curves: one row per (individual, grid point).
pub fn write_curves(path: &Path, curves: &CurveSet) -> Result<()> {
    let mut out = writer(path)?;
    out.write_record(["individual_id", "t", "value"])
        .map_err(|e| csv_error(path, e))?;
    for (i, id) in curves.ids.iter().enumerate() {
        for (j, &t) in curves.grid.iter().enumerate() {
            out.write_record([
                id.as_str(),
                fmt_f64(t).as_str(),
                fmt_f64(curves.values[(i, j)]).as_str(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    out.flush().map_err(CliError::io(path))?;
    Ok(())
}
