//! Text artifacts. Floats are written in `{:.16e}` so a CSV round trip is
//! exact and byte-stable; JSON objects come out with sorted keys.

use serde::Serialize;

use crate::curves::CurveSample;
use crate::domain::Grid;
use crate::dynamics::SimState;
use crate::error::{AtlasError, Result};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cells: &[f64]) {
    let row: Vec<String> = cells.iter().map(|v| fmt_float(*v)).collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

pub fn curve_csv(samples: &[CurveSample]) -> String {
    let mut out = String::from("l,N_dI,N_dIdS,slope,int_u,int_lv\n");
    for s in samples {
        push_row(
            &mut out,
            &[s.l, s.n_di, s.n_dids, s.slope, s.int_u, s.int_lv],
        );
    }
    out
}

/// Columns `x,S,I`.
pub fn profile_csv(grid: &Grid, s: &[f64], i: &[f64]) -> String {
    let mut out = String::from("x,S,I\n");
    for k in 0..grid.len() {
        push_row(&mut out, &[grid.x(k), s[k], i[k]]);
    }
    out
}

/// Columns `x,value`.
pub fn field_csv(grid: &Grid, values: &[f64]) -> String {
    let mut out = String::from("x,value\n");
    for (k, v) in values.iter().enumerate() {
        push_row(&mut out, &[grid.x(k), *v]);
    }
    out
}

/// Columns `t,x,S,I`, one block of rows per snapshot.
pub fn trajectory_csv(grid: &Grid, snapshots: &[SimState]) -> String {
    let mut out = String::from("t,x,S,I\n");
    for st in snapshots {
        for k in 0..grid.len() {
            push_row(&mut out, &[st.t, grid.x(k), st.s[k], st.i[k]]);
        }
    }
    out
}

/// Arbitrary numeric table with a caller-supplied header.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        push_row(&mut out, r);
    }
    out
}

/// Pretty JSON with object keys in sorted order.
pub fn sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| AtlasError::solver(format!("serialisation failed: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v)
        .map_err(|e| AtlasError::solver(format!("serialisation failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct T {
            zeta: u8,
            alpha: u8,
        }
        let s = sorted_json(&T { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
