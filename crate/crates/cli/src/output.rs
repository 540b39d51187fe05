use std::fmt::Write;
use std::path::{Path, PathBuf};

use cqlattice::solvers::RNG_NAME;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::Outcome;

/// CSV text: `#` header lines, column names, then rows.
pub fn render(command: &str, cfg: &ExperimentConfig, outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cqlattice {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# command: {command}");
    let _ = writeln!(s, "# rng: {RNG_NAME}; seed = {}", cfg.solver.seed);
    for (k, v) in &outcome.header {
        let _ = writeln!(s, "# {k}: {v}");
    }
    s.push_str("# config:\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(s, "#   {line}");
    }
    s.push_str(&outcome.table.columns.join(","));
    s.push('\n');
    for row in &outcome.table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `[output] csv` if set, else the config file stem with `.csv`, relative
/// to `out_dir`.
pub fn csv_path(cfg: &ExperimentConfig, config_path: &Path, out_dir: &Path) -> PathBuf {
    let name = match &cfg.output.csv {
        Some(c) => PathBuf::from(c),
        None => {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "output".into());
            PathBuf::from(format!("{stem}.csv"))
        }
    };
    out_dir.join(name)
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
