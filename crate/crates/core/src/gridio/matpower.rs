use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;

use super::{BranchRecord, BusKind, BusRecord, GenRecord, GridCase};
use crate::error::{Error, Result};

const BUS_COLS: usize = 10;
const GEN_COLS: usize = 8;
const BRANCH_COLS: usize = 11;

type Matrix = Vec<(usize, Vec<f64>)>;

/// Cuts a MATLAB line comment, ignoring `%` inside single-quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_str = !in_str,
            '%' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_row(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Syntax {
                line,
                msg: format!("expected a number, found '{t}'"),
            })
        })
        .collect()
}

/// Parses the body of a MATPOWER case file.
///
/// Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch` are read; other
/// assignments (gencost, cell arrays of names, version strings) are skipped.
pub fn parse_matpower(text: &str) -> Result<GridCase> {
    let mut name = String::from("case");
    let mut base_mva = None;
    let mut matrices: HashMap<String, Matrix> = HashMap::new();

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((lineno, line)) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("function") {
            if let Some((_, fname)) = rest.split_once('=') {
                name = fname.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = trimmed.strip_prefix("mpc.") else {
            return Err(Error::Syntax { line: lineno, msg: format!("unexpected statement '{trimmed}'") });
        };
        let Some((field, rhs)) = rest.split_once('=') else {
            return Err(Error::Syntax { line: lineno, msg: "expected assignment".into() });
        };
        let field = field.trim().to_string();
        let rhs = rhs.trim();

        if let Some(body) = rhs.strip_prefix('[') {
            let mut rows = Vec::new();
            let mut pending = body.to_string();
            let mut current_line = lineno;
            loop {
                let (chunk, closed) = match pending.find(']') {
                    Some(pos) => (pending[..pos].to_string(), true),
                    None => (pending.clone(), false),
                };
                for piece in chunk.split(';') {
                    let row = parse_row(piece, current_line)?;
                    if !row.is_empty() {
                        rows.push((current_line, row));
                    }
                }
                if closed {
                    break;
                }
                match lines.next() {
                    Some((l, text)) => {
                        current_line = l;
                        pending = text.to_string();
                    }
                    None => {
                        return Err(Error::Syntax {
                            line: current_line,
                            msg: format!("unterminated matrix mpc.{field}"),
                        })
                    }
                }
            }
            matrices.insert(field, rows);
        } else if rhs.starts_with('{') {
            // cell arrays (bus names etc.) are not needed
            let mut closed = rhs.contains('}');
            while !closed {
                match lines.next() {
                    Some((_, text)) => closed = text.contains('}'),
                    None => {
                        return Err(Error::Syntax { line: lineno, msg: format!("unterminated cell array mpc.{field}") })
                    }
                }
            }
        } else if field == "baseMVA" {
            let value = rhs.trim_end_matches(';').trim();
            base_mva = Some(value.parse::<f64>().map_err(|_| Error::Syntax {
                line: lineno,
                msg: format!("invalid baseMVA '{value}'"),
            })?);
        }
    }

    let base_mva = base_mva.ok_or_else(|| Error::InvalidCase("missing mpc.baseMVA".into()))?;
    let take = |key: &str, cols: usize, matrices: &mut HashMap<String, Matrix>| -> Result<Vec<(usize, Vec<f64>)>> {
        let m = matrices.remove(key).ok_or_else(|| Error::InvalidCase(format!("missing mpc.{key}")))?;
        for (line, row) in &m {
            if row.len() < cols {
                return Err(Error::Syntax {
                    line: *line,
                    msg: format!("mpc.{key} row has {} columns, need at least {cols}", row.len()),
                });
            }
        }
        Ok(m)
    };
    let bus_rows = take("bus", BUS_COLS, &mut matrices)?;
    let gen_rows = take("gen", GEN_COLS, &mut matrices)?;
    let branch_rows = take("branch", BRANCH_COLS, &mut matrices)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut seen = HashMap::new();
    for (line, row) in &bus_rows {
        let id = as_id(row[0], *line)?;
        if seen.insert(id, buses.len()).is_some() {
            return Err(Error::DuplicateBus(id));
        }
        buses.push(BusRecord {
            id,
            kind: BusKind::from_code(id, row[1] as i64)?,
            p_load_mw: row[2],
            q_load_mvar: row[3],
            g_shunt_mw: row[4],
            b_shunt_mvar: row[5],
            vm: row[7],
            va_deg: row[8],
            base_kv: row[9],
            v_set: None,
        });
    }

    let mut gens = Vec::with_capacity(gen_rows.len());
    for (line, row) in &gen_rows {
        let bus = as_id(row[0], *line)?;
        let Some(&pos) = seen.get(&bus) else {
            return Err(Error::UnknownBus { what: format!("generator on line {line}"), bus });
        };
        let gen = GenRecord { bus, p_mw: row[1], q_mvar: row[2], v_set: row[5], in_service: row[7] > 0.0 };
        if gen.in_service {
            let rec = &mut buses[pos];
            match rec.v_set {
                None => rec.v_set = Some(gen.v_set),
                Some(v) if v != gen.v_set => {
                    warn!("bus {bus}: conflicting generator voltage set points {v} and {}; keeping {v}", gen.v_set)
                }
                _ => {}
            }
        }
        gens.push(gen);
    }

    for bus in &mut buses {
        match bus.kind {
            BusKind::Pq => bus.v_set = None,
            BusKind::Pv if bus.v_set.is_none() => {
                warn!("bus {}: PV bus without in-service generator treated as PQ", bus.id);
                bus.kind = BusKind::Pq;
            }
            BusKind::Slack if bus.v_set.is_none() => bus.v_set = Some(bus.vm),
            _ => {}
        }
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (line, row) in &branch_rows {
        let from_bus = as_id(row[0], *line)?;
        let to_bus = as_id(row[1], *line)?;
        for bus in [from_bus, to_bus] {
            if !seen.contains_key(&bus) {
                return Err(Error::UnknownBus { what: format!("branch on line {line}"), bus });
            }
        }
        branches.push(BranchRecord {
            from_bus,
            to_bus,
            r: row[2],
            x: row[3],
            b_charging: row[4],
            tau: if row[8] == 0.0 { 1.0 } else { row[8] },
            shift_deg: row[9],
            in_service: row[10] > 0.0,
        });
    }

    let case = GridCase { name, base_mva, buses, branches, gens };
    case.validate()?;
    Ok(case)
}

fn as_id(value: f64, line: usize) -> Result<u32> {
    if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
        return Err(Error::Syntax { line, msg: format!("invalid bus number {value}") });
    }
    Ok(value as u32)
}

/// Writes a case back in MATPOWER syntax. Columns this crate does not model
/// are filled with neutral defaults.
pub fn to_matpower(case: &GridCase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {}", case.name);
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {};", case.base_mva);
    let _ = writeln!(out, "\n%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin");
    let _ = writeln!(out, "mpc.bus = [");
    for b in &case.buses {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t1.1\t0.9;",
            b.id,
            b.kind.code(),
            b.p_load_mw,
            b.q_load_mvar,
            b.g_shunt_mw,
            b.b_shunt_mvar,
            b.vm,
            b.va_deg,
            b.base_kv
        );
    }
    let _ = writeln!(out, "];\n\n%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin");
    let _ = writeln!(out, "mpc.gen = [");
    for g in &case.gens {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t0\t0\t{}\t{}\t{}\t0\t0;",
            g.bus,
            g.p_mw,
            g.q_mvar,
            g.v_set,
            case.base_mva,
            u8::from(g.in_service)
        );
    }
    let _ = writeln!(out, "];\n\n%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax");
    let _ = writeln!(out, "mpc.branch = [");
    for br in &case.branches {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{}\t-360\t360;",
            br.from_bus,
            br.to_bus,
            br.r,
            br.x,
            br.b_charging,
            br.tau,
            br.shift_deg,
            u8::from(br.in_service)
        );
    }
    let _ = writeln!(out, "];");
    out
}
