use std::path::Path;

use super::{PredictionRow, ResultRow};
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 14] = [
    "experiment_id",
    "algo",
    "grouping",
    "snr_db",
    "speed_kmh",
    "fine_an",
    "fine_de",
    "fine_do",
    "trial_count",
    "nmse_all_db",
    "nmse_current_db",
    "stderr_db",
    "iters_mean",
    "wall_ms",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write sweep results plus a companion `<path>.plot.py`.
pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(path, rows)?;
    let mut script = path.as_os_str().to_owned();
    script.push(".plot.py");
    std::fs::write(script, plot_script(path))?;
    Ok(())
}

pub fn prediction_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_rows(path, rows)
}

/// A small matplotlib script that plots NMSE against SNR, one line per
/// (algorithm, grouping, fine factors, speed) combination.
pub fn plot_script(csv_path: &Path) -> String {
    let name = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        r#"import os
import pandas as pd
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
df = pd.read_csv(os.path.join(here, "{name}"))
keys = ["algo", "grouping", "fine_an", "fine_de", "fine_do", "speed_kmh"]
fig, ax = plt.subplots()
for k, g in df.groupby(keys):
    label = "{{}} {{}} F=({{}},{{}},{{}}) v={{}}".format(*k)
    ax.errorbar(g["snr_db"], g["nmse_current_db"], yerr=g["stderr_db"], marker="o", label=label)
ax.set_xlabel("SNR (dB)")
ax.set_ylabel("NMSE (dB)")
ax.grid(True)
ax.legend(fontsize="small")
fig.savefig(os.path.join(here, "{name}.png"), dpi=150)
"#
    )
}
