//! Reader and writer for MATPOWER version 2 case files.
//!
//! Only the DC-relevant columns are used: bus demand, generator limits and
//! status, branch reactance, tap, phase shift, `RATE_A` and status, and
//! polynomial generator costs of degree at most two. A `RATE_A` of zero means
//! unlimited. Out-of-service generators and branches, and isolated buses
//! (type 4) with everything attached to them, are left out. Generator and
//! branch ids are their 1-based row numbers in the file.

use std::fmt::Write as _;

use posture_core::grid::{Branch, Bus, CaseData, CostModel, Generator, GridCase};

use crate::error::{Error, Result};

/// Raw tables of a case file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatpowerCase {
    pub name: String,
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
    pub gencost: Vec<Vec<f64>>,
}

const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const PG: usize = 1;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const TAP: usize = 8;
const SHIFT: usize = 9;
const BR_STATUS: usize = 10;
const MODEL: usize = 0;
const NCOST: usize = 3;
const COST: usize = 4;

const ISOLATED: f64 = 4.0;
const POLYNOMIAL: f64 = 2.0;
const PIECEWISE: f64 = 1.0;

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| Error::Matpower {
            line,
            message: format!("cannot parse number `{tok}`"),
        }),
    }
}

pub fn parse_matpower(text: &str) -> Result<MatpowerCase> {
    let mut case = MatpowerCase {
        base_mva: f64::NAN,
        ..MatpowerCase::default()
    };
    let mut current: Option<(String, Vec<Vec<f64>>, usize)> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }

        if let Some((name, rows, start)) = current.as_mut() {
            let (body, closed) = match line.find(']') {
                Some(k) => (&line[..k], true),
                None => (line, false),
            };
            for row in body.split(';') {
                let vals = row
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_number(t, lineno))
                    .collect::<Result<Vec<_>>>()?;
                if !vals.is_empty() {
                    rows.push(vals);
                }
            }
            if closed {
                let (name, rows, start) = (name.clone(), std::mem::take(rows), *start);
                current = None;
                store(&mut case, &name, rows, start)?;
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, name)) = rest.split_once('=') {
                case.name = name.trim().trim_end_matches(';').to_string();
            }
            continue;
        }

        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((field, value)) = rest.split_once('=') else {
            continue;
        };
        let field = field.trim();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            current = Some((field.to_string(), Vec::new(), lineno));
            // a matrix may open and close on the same line
            let (name, rows, start) = current.as_mut().expect("just set");
            let (body, closed) = match body.find(']') {
                Some(k) => (&body[..k], true),
                None => (body, false),
            };
            for row in body.split(';') {
                let vals = row
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_number(t, lineno))
                    .collect::<Result<Vec<_>>>()?;
                if !vals.is_empty() {
                    rows.push(vals);
                }
            }
            if closed {
                let (name, rows, start) = (name.clone(), std::mem::take(rows), *start);
                current = None;
                store(&mut case, &name, rows, start)?;
            }
        } else if field == "baseMVA" {
            case.base_mva = parse_number(value.trim_end_matches(';').trim(), lineno)?;
        } else if field == "version" {
            let v = value.trim_end_matches(';').trim().trim_matches(|c| c == '\'' || c == '"');
            if v != "2" {
                return Err(Error::Matpower {
                    line: lineno,
                    message: format!("unsupported case version `{v}`"),
                });
            }
        }
    }
    if let Some((name, _, start)) = current {
        return Err(Error::Matpower {
            line: start,
            message: format!("matrix `mpc.{name}` is never closed"),
        });
    }
    if !(case.base_mva > 0.0) {
        return Err(Error::Matpower {
            line: 0,
            message: "missing or invalid `mpc.baseMVA`".into(),
        });
    }
    for (name, rows) in [("bus", &case.bus), ("gen", &case.gen), ("branch", &case.branch)] {
        if rows.is_empty() {
            return Err(Error::Matpower {
                line: 0,
                message: format!("missing `mpc.{name}`"),
            });
        }
    }
    Ok(case)
}

fn store(case: &mut MatpowerCase, name: &str, rows: Vec<Vec<f64>>, start: usize) -> Result<()> {
    let min_cols = match name {
        "bus" => 3,
        "gen" => 10,
        "branch" => 6,
        "gencost" => 4,
        _ => 0,
    };
    if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() < min_cols) {
        return Err(Error::Matpower {
            line: start + k + 1,
            message: format!("`mpc.{name}` row {} has {} columns, need {min_cols}", k + 1, row.len()),
        });
    }
    match name {
        "bus" => case.bus = rows,
        "gen" => case.gen = rows,
        "branch" => case.branch = rows,
        "gencost" => case.gencost = rows,
        _ => {}
    }
    Ok(())
}

fn cost_row(row: &[f64], index: usize) -> Result<CostModel> {
    let fail = |message: String| Error::Matpower { line: 0, message };
    if row[MODEL] == PIECEWISE {
        return Err(fail(format!("generator {index}: piecewise-linear costs are not supported")));
    }
    if row[MODEL] != POLYNOMIAL {
        return Err(fail(format!("generator {index}: unknown cost model {}", row[MODEL])));
    }
    let n = row[NCOST];
    if !(n >= 0.0 && n.fract() == 0.0) {
        return Err(fail(format!("generator {index}: invalid coefficient count {n}")));
    }
    let n = n as usize;
    let coef = row.get(COST..COST + n).ok_or_else(|| fail(format!("generator {index}: expected {n} cost coefficients")))?;
    // highest order first; anything above quadratic must vanish
    let (high, low) = coef.split_at(n.saturating_sub(3));
    if high.iter().any(|&c| c != 0.0) {
        return Err(fail(format!("generator {index}: cost polynomial above degree two")));
    }
    let at = |k: usize| if k < low.len() { low[low.len() - 1 - k] } else { 0.0 };
    Ok(CostModel {
        alpha_sqr: at(2),
        alpha_lin: at(1),
        zeta: at(0),
        ..CostModel::default()
    })
}

impl MatpowerCase {
    /// Unvalidated case contents.
    pub fn to_data(&self) -> Result<CaseData> {
        let mut isolated = std::collections::BTreeSet::new();
        let mut buses = Vec::new();
        for row in &self.bus {
            let id = row[BUS_I] as u32;
            if row[BUS_TYPE] == ISOLATED {
                isolated.insert(id);
            } else {
                buses.push(Bus::new(id, row[PD]));
            }
        }

        let mut generators = Vec::new();
        for (k, row) in self.gen.iter().enumerate() {
            let bus = row[GEN_BUS] as u32;
            if row[GEN_STATUS] <= 0.0 || isolated.contains(&bus) {
                continue;
            }
            let cost = match self.gencost.get(k) {
                Some(c) => cost_row(c, k + 1)?,
                None => CostModel::default(),
            };
            let mut gen = Generator::new(k as u32 + 1, bus, row[PMIN], row[PMAX], cost);
            gen.initial_dispatch = row[PG].clamp(row[PMIN].min(row[PMAX]), row[PMAX]);
            generators.push(gen);
        }

        let mut branches = Vec::new();
        for (k, row) in self.branch.iter().enumerate() {
            let (from, to) = (row[F_BUS] as u32, row[T_BUS] as u32);
            let status = row.get(BR_STATUS).copied().unwrap_or(1.0);
            if status <= 0.0 || isolated.contains(&from) || isolated.contains(&to) {
                continue;
            }
            let x = row[BR_X];
            if x == 0.0 {
                return Err(Error::Matpower {
                    line: 0,
                    message: format!("branch {}: zero reactance", k + 1),
                });
            }
            let tap = match row.get(TAP).copied().unwrap_or(0.0) {
                t if t == 0.0 => 1.0,
                t => t,
            };
            let limit = if row[RATE_A] == 0.0 { f64::INFINITY } else { row[RATE_A] };
            let mut br = Branch::new(k as u32 + 1, from, to, 1.0 / (x * tap), limit);
            br.angle_shift = row.get(SHIFT).copied().unwrap_or(0.0).to_radians();
            branches.push(br);
        }
        Ok(CaseData::new(self.base_mva, buses, branches, generators))
    }

    /// Tables describing `case`. Per-period demand profiles, ramp and
    /// reserve limits and the non-polynomial cost terms have no column here
    /// and are dropped.
    pub fn from_case(name: &str, case: &GridCase) -> Self {
        let with_gen: std::collections::BTreeSet<_> = case.generators().iter().map(|g| g.bus).collect();
        let mut ref_set = false;
        let bus = case
            .buses()
            .iter()
            .map(|b| {
                let kind = if with_gen.contains(&b.id) {
                    if ref_set {
                        2.0
                    } else {
                        ref_set = true;
                        3.0
                    }
                } else {
                    1.0
                };
                vec![b.id.0 as f64, kind, b.demand, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.1, 0.9]
            })
            .collect();
        let gen = case
            .generators()
            .iter()
            .map(|g| {
                let mut row = vec![0.0; 21];
                row[GEN_BUS] = g.bus.0 as f64;
                row[PG] = g.initial_dispatch;
                row[5] = 1.0;
                row[6] = case.base_mva();
                row[GEN_STATUS] = 1.0;
                row[PMAX] = g.p_max;
                row[PMIN] = g.p_min;
                row
            })
            .collect();
        let branch = case
            .branches()
            .iter()
            .map(|b| {
                let limit = if b.flow_limit.is_finite() { b.flow_limit } else { 0.0 };
                vec![
                    b.from_bus.0 as f64,
                    b.to_bus.0 as f64,
                    0.0,
                    1.0 / b.susceptance,
                    0.0,
                    limit,
                    limit,
                    limit,
                    0.0,
                    b.angle_shift.to_degrees(),
                    1.0,
                    -360.0,
                    360.0,
                ]
            })
            .collect();
        let gencost = case
            .generators()
            .iter()
            .map(|g| vec![POLYNOMIAL, 0.0, 0.0, 3.0, g.cost.alpha_sqr, g.cost.alpha_lin, g.cost.zeta])
            .collect();
        Self {
            name: name.to_string(),
            base_mva: case.base_mva(),
            bus,
            gen,
            branch,
            gencost,
        }
    }

    /// Case file text. Numbers use the shortest form that reads back to the
    /// same value.
    pub fn to_text(&self) -> String {
        let name = if self.name.is_empty() { "mpc_case" } else { &self.name };
        let mut out = String::new();
        let _ = writeln!(out, "function mpc = {name}");
        let _ = writeln!(out, "mpc.version = '2';");
        let _ = writeln!(out, "mpc.baseMVA = {};", self.base_mva);
        for (field, rows) in [("bus", &self.bus), ("gen", &self.gen), ("branch", &self.branch), ("gencost", &self.gencost)] {
            let _ = writeln!(out, "\nmpc.{field} = [");
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "\t{};", cells.join("\t"));
            }
            let _ = writeln!(out, "];");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;
\t2\t1\t90\t30\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;  % load
\t3\t4\t10\t0\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t50\t0\t300\t-300\t1\t100\t1\t250\t10;
\t1\t0\t0\t300\t-300\t1\t100\t0\t250\t10;
];
mpc.branch = [
\t1\t2\t0\t0.05\t0\t0\t0\t0\t0.5\t-2\t1;
\t2\t3\t0\t0.05\t0\t100\t0\t0\t0\t0\t1;
];
mpc.gencost = [
\t2\t0\t0\t3\t0.11\t5\t150;
\t2\t0\t0\t2\t7\t0;
];
";

    #[test]
    fn reads_tables_and_converts() {
        let mp = parse_matpower(TINY).unwrap();
        assert_eq!(mp.name, "tiny");
        assert_eq!((mp.bus.len(), mp.gen.len(), mp.branch.len(), mp.gencost.len()), (3, 2, 2, 2));
        let data = mp.to_data().unwrap();
        assert_eq!(data.buses.len(), 2);
        assert_eq!(data.generators.len(), 1);
        assert_eq!(data.branches.len(), 1);
        let br = &data.branches[0];
        assert_eq!(br.flow_limit, f64::INFINITY);
        // 1 / (0.05 · 0.5)
        assert!((br.susceptance - 40.0).abs() < 1e-12);
        assert!((br.angle_shift + 2f64.to_radians()).abs() < 1e-15);
        let g = &data.generators[0];
        assert_eq!((g.cost.alpha_sqr, g.cost.alpha_lin, g.cost.zeta), (0.11, 5.0, 150.0));
        assert_eq!(g.initial_dispatch, 50.0);
    }

    #[test]
    fn rejects_piecewise_costs() {
        let text = TINY.replace("\t2\t0\t0\t3\t0.11\t5\t150;", "\t1\t0\t0\t2\t0\t0\t100\t2000;");
        let err = parse_matpower(&text).unwrap().to_data().unwrap_err();
        assert!(err.to_string().contains("piecewise"), "{err}");
    }

    #[test]
    fn reports_bad_numbers_with_line() {
        let text = TINY.replace("0.9;  % load", "x;");
        match parse_matpower(&text) {
            Err(Error::Matpower { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unclosed_matrix_is_an_error() {
        let text = TINY.replace("];\nmpc.gencost", "mpc.gencost");
        assert!(parse_matpower(&text).is_err());
    }

    #[test]
    fn cost_polynomials() {
        let c = cost_row(&[2.0, 0.0, 0.0, 1.0, 42.0], 1).unwrap();
        assert_eq!((c.alpha_sqr, c.alpha_lin, c.zeta), (0.0, 0.0, 42.0));
        let c = cost_row(&[2.0, 0.0, 0.0, 4.0, 0.0, 1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!((c.alpha_sqr, c.alpha_lin, c.zeta), (1.0, 2.0, 3.0));
        assert!(cost_row(&[2.0, 0.0, 0.0, 4.0, 1.0, 1.0, 2.0, 3.0], 1).is_err());
    }
}
