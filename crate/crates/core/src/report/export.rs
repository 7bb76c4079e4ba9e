use std::fs;
use std::path::{Path, PathBuf};

use super::{record_indicators, AssessmentReport, Indicator};
use crate::error::{Error, Result};
use crate::math::round_significant;

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Write {
        path: path.to_owned(),
        source,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| round_significant(x, super::REPORT_DIGITS).to_string())
        .unwrap_or_default()
}

/// Writes a header and rows as CSV.
pub fn write_csv_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path)(e.into()))?;
    w.write_record(header).map_err(|e| write_err(path)(e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| write_err(path)(e.into()))?;
    }
    w.flush().map_err(write_err(path))
}

fn stage(report: &AssessmentReport, dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();

    let json = dir.join("report.json");
    fs::write(&json, report.to_json()?).map_err(write_err(&json))?;
    names.push("report.json".to_owned());

    let columns: Vec<&str> = Indicator::ALL
        .iter()
        .filter(|b| report.run.indicators.contains(b))
        .flat_map(|b| record_indicators(*b).iter().copied())
        .collect();
    let mut header = vec!["trajlet_id", "agent_id", "start_time"];
    header.extend(&columns);
    let path = dir.join("trajlets.csv");
    write_csv_rows(
        &path,
        &header,
        report.records.iter().map(|r| {
            let mut row = vec![r.trajlet_id.to_string(), r.agent_id.clone(), cell(Some(r.start_time))];
            row.extend(columns.iter().map(|c| cell(r.value(c))));
            row
        }),
    )?;
    names.push("trajlets.csv".to_owned());

    if let Some(frames) = &report.frames {
        let path = dir.join("frames.csv");
        write_csv_rows(
            &path,
            &["timestamp", "agent_count", "global_density"],
            frames.iter().map(|f| {
                vec![
                    cell(Some(f.timestamp)),
                    f.agent_count.to_string(),
                    cell(f.global_density),
                ]
            }),
        )?;
        names.push("frames.csv".to_owned());
    }

    if let Some(o) = &report.overall {
        let path = dir.join("overall.csv");
        write_csv_rows(
            &path,
            &["t", "H_t", "M_t"],
            o.t.iter()
                .zip(&o.entropy)
                .zip(&o.clusters)
                .map(|((t, h), m)| vec![cell(Some(*t)), cell(Some(*h)), m.to_string()]),
        )?;
        names.push("overall.csv".to_owned());
    }

    for (name, summary) in &report.summaries {
        let file = format!("hist_{name}.csv");
        let path = dir.join(&file);
        write_csv_rows(
            &path,
            &["bin_left", "bin_right", "count"],
            summary
                .histogram
                .iter()
                .map(|b| vec![cell(Some(b.left)), cell(Some(b.right)), b.count.to_string()]),
        )?;
        names.push(file);
    }
    Ok(names)
}

/// Writes `report.json`, `trajlets.csv`, `frames.csv`, `overall.csv` and one
/// `hist_<indicator>.csv` per summary into `out_dir`. Everything is staged
/// in a temporary directory first and moved in only once all files are
/// written.
pub fn export(report: &AssessmentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
    let staging = tempfile::Builder::new()
        .prefix(".assess-staging")
        .tempdir_in(out_dir)
        .map_err(write_err(out_dir))?;
    let names = stage(report, staging.path())?;
    let mut written = Vec::with_capacity(names.len());
    for name in names {
        let target = out_dir.join(&name);
        fs::rename(staging.path().join(&name), &target).map_err(write_err(&target))?;
        written.push(target);
    }
    Ok(written)
}
