use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn echo(config: &RunConfig) -> anyhow::Result<String> {
    Ok(serde_json::to_string(config)?)
}

/// Output directory plus the list of files written so far.
pub struct Sink {
    dir: PathBuf,
    config: RunConfig,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, config: &RunConfig) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), config: config.clone(), written: Vec::new() })
    }

    fn create(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    /// `{"config": <echo>, "result": ...}`
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            config: &'a RunConfig,
            result: &'a T,
        }
        let config = self.config.clone();
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &Doc { config: &config, result })?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Starts a CSV: a `# <config echo>` line, then the header row.
    pub fn csv(&mut self, name: &str, header: &[String]) -> anyhow::Result<CsvOut> {
        let mut w = self.create(name)?;
        writeln!(w, "# {}", echo(&self.config)?)?;
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(header)?;
        if self.config.gnuplot {
            self.gnuplot(name, header)?;
        }
        Ok(CsvOut { csv })
    }

    fn gnuplot(&mut self, csv_name: &str, header: &[String]) -> anyhow::Result<()> {
        let stem = csv_name.trim_end_matches(".csv");
        let mut w = self.create(&format!("{stem}.gp"))?;
        writeln!(w, "# {}", echo(&self.config)?)?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set xlabel '{}'", header.first().map_or("", String::as_str))?;
        writeln!(w, "set terminal pngcairo size 900,600")?;
        writeln!(w, "set output '{stem}.png'")?;
        writeln!(w, "plot for [i=2:{}] '{csv_name}' using 1:i with lines", header.len().max(2))?;
        w.flush()?;
        Ok(())
    }
}

pub struct CsvOut {
    csv: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn row<I, S>(&mut self, fields: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.csv.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}
