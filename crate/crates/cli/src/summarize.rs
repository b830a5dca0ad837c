use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use painnet::evaluation::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Markdown,
    Text,
}

/// Integer percent, halves rounded up. Products like `0.675 * 100` land a
/// hair below the half, so the value is snapped to 1e-9 first.
pub fn percent(mean: f64) -> i64 {
    let p = (mean * 100.0 * 1e9).round() / 1e9;
    (p + 0.5).floor() as i64
}

/// `name=path` or a bare path, named after its parent directory.
pub fn parse_entry(arg: &str) -> (String, PathBuf) {
    if let Some((name, path)) = arg.split_once('=') {
        if !name.is_empty() {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(arg);
    let name = path
        .parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    (name, path)
}

pub fn column_label(r: &EvalReport) -> String {
    let c = &r.config;
    format!(
        "{:?} {} {} {}",
        c.strategy.id,
        c.model.kind().as_str().to_uppercase(),
        c.feature_set.as_str().to_uppercase(),
        format!("{:?}", c.strategy.task).to_lowercase()
    )
}

/// Rows are datasets, columns configurations, both in first-seen order.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<i64>>)>,
}

impl Table {
    pub fn build(entries: &[(String, EvalReport)]) -> Result<Table> {
        if entries.is_empty() {
            bail!("no reports to summarize");
        }
        let mut columns: Vec<String> = Vec::new();
        for (_, r) in entries {
            let c = column_label(r);
            if !columns.contains(&c) {
                columns.push(c);
            }
        }
        let mut rows: Vec<(String, Vec<Option<i64>>)> = Vec::new();
        for (name, r) in entries {
            let col = columns
                .iter()
                .position(|c| *c == column_label(r))
                .expect("column registered");
            let idx = match rows.iter().position(|(n, _)| n == name) {
                Some(i) => i,
                None => {
                    rows.push((name.clone(), vec![None; columns.len()]));
                    rows.len() - 1
                }
            };
            let cell = &mut rows[idx].1[col];
            if cell.is_some() {
                bail!("two reports for `{name}` under `{}`", columns[col]);
            }
            *cell = Some(percent(r.grand_mean));
        }
        Ok(Table { columns, rows })
    }

    pub fn render(&self, format: TableFormat) -> Result<String> {
        let cell = |c: &Option<i64>| c.map(|v| v.to_string()).unwrap_or_default();
        Ok(match format {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(std::iter::once("dataset").chain(self.columns.iter().map(String::as_str)))?;
                for (name, cells) in &self.rows {
                    w.write_record(std::iter::once(name.clone()).chain(cells.iter().map(cell)))?;
                }
                String::from_utf8(w.into_inner()?)?
            }
            TableFormat::Markdown => {
                let mut s = format!("| dataset | {} |\n", self.columns.join(" | "));
                s += &format!("|---|{}\n", "---|".repeat(self.columns.len()));
                for (name, cells) in &self.rows {
                    let cells: Vec<String> = cells.iter().map(cell).collect();
                    s += &format!("| {name} | {} |\n", cells.join(" | "));
                }
                s
            }
            TableFormat::Text => {
                let mut s = format!("# {}\n", self.columns.join(", "));
                for (name, cells) in &self.rows {
                    let cells: Vec<String> = cells.iter().map(|c| c.map_or("-".into(), |v| v.to_string())).collect();
                    s += &format!("{name}: {}\n", cells.join(" "));
                }
                s
            }
        })
    }
}

pub fn load_entries(args: &[String]) -> Result<Vec<(String, EvalReport)>> {
    args.iter()
        .map(|a| {
            let (name, path) = parse_entry(a);
            let r = EvalReport::load(&path).with_context(|| format!("loading report {}", path.display()))?;
            Ok((name, r))
        })
        .collect()
}
