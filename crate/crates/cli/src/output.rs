//! JSON envelopes and CSV tables. Every CSV below has a frozen header:
//!
//! | file | columns |
//! |------|---------|
//! | `phi_terms.csv` | `y,label,probability,exact,ci_low,ci_high` |
//! | `pc_evaluations.csv` | `step,p,accepted,vertex,radius,method,value,ci_low,ci_high,interior_size,certified` |
//! | `pack_steps.csv` | `index,w,label,d,q_ball,q_ball_low,q_inf,q_far,excess_high,margin,stabilized,structural,wil_method,wil_point,wil_low,wil_high,wil_pass,dependency_size` |
//! | `verify_grid.csv` | `p1,eps,delta,c,k,value,identity_residual` |
//! | `verify_profile.csv`, `simulate.csv` | `radius,successes,replicas,point,ci_low,ci_high` |

use std::path::Path;

use serde::Serialize;

use percobound::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a C,
    result: &'a R,
}

pub fn envelope<C: Serialize, R: Serialize>(command: &'static str, seed: u64, config: &C, result: &R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { tool: "percobound", version: VERSION, command, seed, config, result })?;
    s.push('\n');
    Ok(s)
}

pub struct Table {
    name: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Table { name, header, rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(self.name))?;
        w.write_record(self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `<command>.json` and the tables into `out`, or prints the JSON
/// when there is no output directory. The summary goes to stdout in the
/// first case and to stderr in the second.
pub fn emit(out: Option<&Path>, json_name: &str, json: &str, tables: &[Table], summary: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(json_name), json)?;
            for t in tables {
                t.write(dir)?;
            }
            print!("{summary}");
        }
        None => {
            print!("{json}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
