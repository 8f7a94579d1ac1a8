//! Flat result rows and where they are written.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use normforge::{NetworkEnv, ProtocolParams};
use serde::Serialize;

/// One CSV row as ordered `(column, value)` pairs.
#[derive(Debug, Clone, Default)]
pub struct Row(pub Vec<(&'static str, String)>);

impl Row {
    pub fn put(&mut self, col: &'static str, v: impl ToString) -> &mut Self {
        self.0.push((col, v.to_string()));
        self
    }

    pub fn opt<T: ToString>(&mut self, col: &'static str, v: Option<T>) -> &mut Self {
        self.0.push((col, v.map(|x| x.to_string()).unwrap_or_default()));
        self
    }

    pub fn env(&mut self, e: &NetworkEnv) -> &mut Self {
        self.put("r", e.r)
            .put("c", e.c)
            .put("eps", e.eps)
            .put("lambda", e.lambda)
            .put("delta", e.delta)
            .put("p_c", e.p_c)
            .put("p_d", e.p_d)
    }

    pub fn params(&mut self, p: Option<&ProtocolParams>) -> &mut Self {
        self.opt("L", p.map(|p| p.l))
            .opt("h_o", p.map(|p| p.h_o))
            .opt("m_o", p.map(|p| join(&p.m_o)))
            .opt("beta", p.map(|p| p.beta))
            .opt("b", p.map(|p| p.b))
    }
}

/// Semicolon-separated list, used for vector-valued cells.
pub fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn open(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(File::create(path)?))
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(open(path)?);
    if let Some(first) = rows.first() {
        w.write_record(first.0.iter().map(|(k, _)| *k))?;
    }
    for row in rows {
        debug_assert!(rows[0].0.iter().map(|(k, _)| k).eq(row.0.iter().map(|(k, _)| k)));
        w.write_record(row.0.iter().map(|(_, v)| v.as_str()))?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
