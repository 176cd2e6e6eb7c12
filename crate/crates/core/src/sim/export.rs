use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use super::SimTrace;
use crate::error::{Error, Result};

/// C-style `%.{digits}g` formatting.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g(x: f64) -> String {
    format_g(x, 9)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `trajectories.csv`, `cost.csv`, `events.json`, `summary.json` and
/// `plot.gp` into `dir`, creating it if needed.
pub fn export(trace: &SimTrace, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if trace.records.is_empty() {
        return Err(Error::invalid("cannot export an empty trace"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut traj = String::from("k,robot,x,y,vx,vy,ux,uy,rx,ry\n");
    for rec in &trace.records {
        for (i, id) in rec.robots.iter().enumerate() {
            let s = &rec.states[i];
            let u = &rec.inputs[i];
            let r = rec.references[i];
            let _ = writeln!(
                traj,
                "{},{},{},{},{},{},{},{},{},{}",
                rec.k,
                id,
                g(s[0]),
                g(s[1]),
                g(s[2]),
                g(s[3]),
                g(u[0]),
                g(u[1]),
                g(r[0]),
                g(r[1])
            );
        }
    }
    write(dir, "trajectories.csv", &traj)?;

    let ids: BTreeSet<usize> = trace.records.iter().flat_map(|r| r.robots.iter().copied()).collect();
    let mut cost = String::from("k,H,bearing_error,updated");
    for id in &ids {
        let _ = write!(cost, ",J{id}");
    }
    cost.push('\n');
    for rec in &trace.records {
        let _ = write!(cost, "{},{},{},{}", rec.k, g(rec.coverage_cost), g(rec.bearing_error), u8::from(rec.updated));
        for id in &ids {
            cost.push(',');
            if let Some(i) = rec.robots.iter().position(|r| r == id) {
                cost.push_str(&g(rec.costs[i]));
            }
        }
        cost.push('\n');
    }
    write(dir, "cost.csv", &cost)?;

    write(dir, "events.json", &(serde_json::to_string_pretty(&trace.events)? + "\n"))?;

    let last = trace.records.last().expect("nonempty");
    let summary = json!({
        "steps": trace.records.len(),
        "update_count": trace.update_count(),
        "final_robots": trace.final_robots,
        "final_states": trace.final_states,
        "final_errors": last.errors,
        "final_coverage_cost": last.coverage_cost,
        "final_bearing_error": last.bearing_error,
        "final_rigidity_rank": last.rigidity_rank,
        "faults": trace.events.len(),
        "final_graph": trace.final_graph,
    });
    write(dir, "summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let plot = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 'time step k'
set ylabel 'coverage cost H'
set grid
set terminal pngcairo size 800,500
set output 'cost.png'
plot 'cost.csv' using 1:2 with lines lw 2 title 'H'
";
    write(dir, "plot.gp", plot)
}
