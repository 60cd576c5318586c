//! Text formats: matrices, controllers, CSV tables and provenance headers.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::h2_synth::H2Weights;
use crate::holdlimit::{HumanErrorRow, SweepRow, Witness};
use crate::linalg::{Mat, Vector};
use crate::ring_model::{Controller, Provenance};
use crate::simulator::Trajectory;

/// Float with 10 significant digits, trailing zeros trimmed.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.9e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..15).contains(&exp) {
        // Shortest repr of the rounded value never needs more digits than the rounding kept.
        let rounded: f64 = sci.parse().expect("own output");
        format!("{rounded}")
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// `# ringhold <version>` / `# config_hash <hex>` / `# rng_seed <n>`.
pub fn provenance_header(config_hash: &str, rng_seed: u64) -> String {
    format!(
        "# ringhold {}\n# config_hash {}\n# rng_seed {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash,
        rng_seed
    )
}

/// `rows cols` line, then one row per line; values round-trip exactly.
pub fn format_matrix(m: &Mat) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats(line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            let x: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("'{tok}' is not a number")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::parse(line_no, "non-finite value"))
            }
        })
        .collect()
}

/// Reads the layout written by [`format_matrix`]; `#` lines are comments.
pub fn parse_matrix(text: &str) -> Result<Mat> {
    let mut lines = data_lines(text);
    let (ln, header) = lines.next().ok_or(Error::EmptyInput("matrix text has no header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::parse(ln, "expected 'rows cols'"));
    }
    let parse_dim = |t: &str| -> Result<usize> {
        t.parse::<usize>()
            .map_err(|_| Error::parse(ln, format!("bad dimension '{t}'")))
    };
    let (r, c) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if r.checked_mul(c).map_or(true, |n| n > 1 << 24) {
        return Err(Error::parse(ln, "matrix too large"));
    }
    let mut data = Vec::with_capacity(r * c);
    // Rows of a zero-column matrix are blank lines, which the reader skips.
    for _ in 0..if c == 0 { 0 } else { r } {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(ln, format!("expected {r} rows")))?;
        let row = parse_floats(ln, line)?;
        if row.len() != c {
            return Err(Error::parse(ln, format!("expected {c} values, found {}", row.len())));
        }
        data.extend(row);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(ln, "trailing data after matrix"));
    }
    Ok(Mat::from_row_slice(r, c, &data))
}

/// Metadata stored next to controller gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerFile {
    pub controller: Controller,
    pub weights: Option<H2Weights>,
    /// Free-form note, e.g. the synthesis hold length.
    pub note: Option<String>,
}

/// `# key: value` metadata lines followed by one row of gains (round-trip precision).
pub fn format_controller(file: &ControllerFile) -> String {
    let c = &file.controller;
    let mut s = String::from("# controller\n");
    let _ = writeln!(s, "# provenance: {}", c.provenance.as_str());
    let _ = writeln!(s, "# k_mult: {:e}", c.k_mult);
    if let Some(w) = &file.weights {
        let _ = writeln!(s, "# gamma_s: {:e}", w.gamma_s);
        let _ = writeln!(s, "# gamma_v: {:e}", w.gamma_v);
        let _ = writeln!(s, "# gamma_u: {:e}", w.gamma_u);
    }
    if let Some(n) = &file.note {
        let _ = writeln!(s, "# note: {}", n.replace('\n', " "));
    }
    let gains: Vec<String> = c.k.iter().map(|g| format!("{g:e}")).collect();
    s.push_str(&gains.join(" "));
    s.push('\n');
    s
}

pub fn parse_controller(text: &str) -> Result<ControllerFile> {
    let mut provenance = Provenance::Manual;
    let mut k_mult = 1.0;
    let mut w = [None::<f64>; 3];
    let mut note = None;
    let mut gains: Option<Vec<f64>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, value)) = meta.split_once(':') else { continue };
            let (key, value) = (key.trim(), value.trim());
            let num = || -> Result<f64> {
                let x: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("{key}: '{value}' is not a number")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::parse(ln, format!("{key}: non-finite value")))
                }
            };
            match key {
                "provenance" => {
                    provenance = Provenance::parse(value)
                        .ok_or_else(|| Error::parse(ln, format!("unknown provenance '{value}'")))?
                }
                "k_mult" => {
                    k_mult = num()?;
                    if k_mult < 0.0 {
                        return Err(Error::parse(ln, "k_mult must be nonnegative"));
                    }
                }
                "gamma_s" => w[0] = Some(num()?),
                "gamma_v" => w[1] = Some(num()?),
                "gamma_u" => w[2] = Some(num()?),
                "note" => note = Some(value.to_string()),
                _ => return Err(Error::parse(ln, format!("unknown controller metadata '{key}'"))),
            }
            continue;
        }
        if gains.is_some() {
            return Err(Error::parse(ln, "controller file holds more than one gain row"));
        }
        let row = parse_floats(ln, line)?;
        if row.is_empty() || row.len() % 2 != 0 {
            return Err(Error::parse(ln, format!("expected 2n gains, found {}", row.len())));
        }
        gains = Some(row);
    }
    let gains = gains.ok_or(Error::EmptyInput("controller file has no gain row"))?;
    let weights = match w {
        [Some(gamma_s), Some(gamma_v), Some(gamma_u)] => Some(H2Weights { gamma_s, gamma_v, gamma_u }),
        [None, None, None] => None,
        _ => return Err(Error::parse(0, "controller weights must be all present or all absent")),
    };
    Ok(ControllerFile {
        controller: Controller {
            k: Vector::from_vec(gains),
            k_mult,
            provenance,
        },
        weights,
        note,
    })
}

/// `t,s1,v1,...,sn,vn,u,event`; events in the same step are joined by `;`.
pub fn trajectory_csv(traj: &Trajectory, header: &str) -> String {
    let dim = traj.states.first().map_or(0, Vec::len);
    let mut s = String::from(header);
    s.push('t');
    for i in 1..=dim / 2 {
        let _ = write!(s, ",s{i},v{i}");
    }
    s.push_str(",u,event\n");
    let dt = if traj.times.len() > 1 { traj.times[1] - traj.times[0] } else { 1.0 };
    let mut ev: Vec<Vec<String>> = vec![Vec::new(); traj.times.len()];
    for e in &traj.events {
        let i = ((e.t - traj.times.first().copied().unwrap_or(0.0)) / dt).round().max(0.0) as usize;
        if let Some(slot) = ev.get_mut(i.min(traj.times.len().saturating_sub(1))) {
            slot.push(format!("{}@{}", e.kind.as_str(), e.vehicle + 1));
        }
    }
    for (i, t) in traj.times.iter().enumerate() {
        s.push_str(&fmt_f64(*t));
        for x in &traj.states[i] {
            s.push(',');
            s.push_str(&fmt_f64(*x));
        }
        let _ = writeln!(
            s,
            ",{},{}",
            fmt_f64(traj.controls.get(i).copied().unwrap_or(f64::NAN)),
            ev[i].join(";")
        );
    }
    s
}

pub const SWEEP_COLUMNS: &str = "param,value,sim_hold_limit,lk_hold_limit,lyap_bound,ovm_margin,n_collided,runtime_s";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sweep table; the trailing `notes` column explains NaN entries.
pub fn sweep_csv(rows: &[SweepRow], header: &str, with_runtime: bool) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "{SWEEP_COLUMNS},notes");
    for r in rows {
        let runtime = if with_runtime { fmt_f64(r.runtime_s) } else { "nan".into() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.param,
            fmt_f64(r.param_value),
            fmt_f64(r.sim_hold_limit),
            fmt_f64(r.lk_hold_limit),
            fmt_f64(r.lyap_bound),
            fmt_f64(r.ovm_margin),
            r.n_collided,
            runtime,
            csv_field(&r.notes.join("; "))
        );
    }
    s
}

/// Witness pair of a hold-limit search.
pub fn witness_csv(param: &str, value: f64, w: &Witness, header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("param,value,side,delta,status,n_runs,n_converged,n_collided,final_error_norm\n");
    for (side, d, v) in [("stable", w.stable_delta, &w.stable), ("unstable", w.unstable_delta, &w.unstable)] {
        let _ = writeln!(
            s,
            "{param},{},{side},{},{},{},{},{},{}",
            fmt_f64(value),
            fmt_f64(d),
            v.status.as_str(),
            v.n_runs,
            v.n_converged,
            v.n_collided,
            fmt_f64(v.final_error_norm)
        );
    }
    s
}

pub fn human_error_csv(rows: &[HumanErrorRow], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("kind,value,delta,ub_tail10,ub_tail20,ub_tail30,theory,n_collided,notes\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.kind.as_str(),
            fmt_f64(r.value),
            fmt_f64(r.delta),
            fmt_f64(r.ultimate_bound[0]),
            fmt_f64(r.ultimate_bound[1]),
            fmt_f64(r.ultimate_bound[2]),
            fmt_f64(r.theory),
            r.n_collided,
            csv_field(&r.notes.join("; "))
        );
    }
    s
}

/// Two-column `name,value` table.
pub fn key_value_csv(pairs: &[(&str, String)], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("name,value\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{},{}", k, csv_field(v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_f64(1.66), "1.66");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-2.0), "-2");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_f64(123456.789012345), "123456.789");
        assert_eq!(fmt_f64(9.99999999999), "10");
        assert_eq!(fmt_f64(1.5e-7), "1.5e-7");
        assert_eq!(fmt_f64(2.5e20), "2.5e20");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn matrix_roundtrip() {
        let m = Mat::from_row_slice(2, 3, &[1.0, -0.1, 1e-300, 3.25, 0.0, 1.0 / 3.0]);
        let back = parse_matrix(&format!("# hello\n{}", format_matrix(&m))).unwrap();
        assert_eq!(back, m);
        assert!(parse_matrix("2 2\n1 2\n3\n").is_err());
        assert!(parse_matrix("1 1\n1\n2\n").is_err());
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1 1\nnan\n").is_err());
    }

    #[test]
    fn controller_roundtrip() {
        let f = ControllerFile {
            controller: Controller {
                k: Vector::from_vec(vec![0.0, 1.25, -0.1, 1.0 / 7.0]),
                k_mult: 0.2,
                provenance: Provenance::H2,
            },
            weights: Some(H2Weights::default()),
            note: Some("test".into()),
        };
        let back = parse_controller(&format_controller(&f)).unwrap();
        assert_eq!(back, f);
        assert!(parse_controller("# provenance: h2\n").is_err());
        assert!(parse_controller("1 2 3\n").is_err());
        assert!(parse_controller("# provenance: x\n1 2\n").is_err());
        assert!(parse_controller("1 2\n3 4\n").is_err());
        assert!(parse_controller("# gamma_s: 1\n1 2\n").is_err());
    }
}
