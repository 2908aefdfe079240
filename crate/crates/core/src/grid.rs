//! Network model: MATPOWER case parsing and bus admittance assembly.
//!
//! Only the subset of the MATPOWER format needed for state estimation is
//! read: `mpc.baseMVA`, the bus table and the branch table. Every other
//! statement (generator data, cost data, MATLAB code) is skipped. Load
//! columns are parsed for validation but otherwise unused.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The IEEE 33-bus feeder shipped with the crate, impedances in per unit.
pub const IEEE33_CASE: &str = include_str!("../data/case33bw.m");

const BUS_COLUMNS: usize = 13;
const BRANCH_COLUMNS: usize = 13;
const REF_BUS_TYPE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External (file) bus number.
    pub id: usize,
    /// Shunt conductance, p.u.
    pub gs: f64,
    /// Shunt susceptance, p.u.
    pub bs: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance, p.u.
    pub b_sh: f64,
    pub in_service: bool,
}

impl Branch {
    /// Series admittance `1 / (r + jx)` as `(g, b)`.
    pub fn series_admittance(&self) -> (f64, f64) {
        let d = self.r * self.r + self.x * self.x;
        (self.r / d, -self.x / d)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Keep the file's branch status column instead of forcing every
    /// branch into service.
    pub keep_branch_status: bool,
}

/// A validated network with dense internal bus indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    /// External id of the reference bus.
    pub slack_bus: usize,
    index: BTreeMap<usize, usize>,
}

impl Network {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        base_mva: f64,
        slack_bus: usize,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Structure("network has no buses".into()));
        }
        if !base_mva.is_finite() || base_mva <= 0.0 {
            return Err(Error::Structure(format!(
                "base MVA must be positive, got {base_mva}"
            )));
        }
        let mut index = BTreeMap::new();
        for (k, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, k).is_some() {
                return Err(Error::Structure(format!("duplicate bus id {}", bus.id)));
            }
        }
        if !index.contains_key(&slack_bus) {
            return Err(Error::Structure(format!(
                "slack bus {slack_bus} does not exist"
            )));
        }
        for (k, br) in branches.iter().enumerate() {
            for end in [br.from_bus, br.to_bus] {
                if !index.contains_key(&end) {
                    return Err(Error::Structure(format!(
                        "branch {} references unknown bus {end}",
                        k + 1
                    )));
                }
            }
            if br.from_bus == br.to_bus {
                return Err(Error::Structure(format!(
                    "branch {} connects bus {} to itself",
                    k + 1,
                    br.from_bus
                )));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::Structure(format!(
                    "branch {} has zero impedance",
                    k + 1
                )));
            }
        }
        Ok(Network {
            buses,
            branches,
            base_mva,
            slack_bus,
            index,
        })
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn n_in_service(&self) -> usize {
        self.branches.iter().filter(|b| b.in_service).count()
    }

    /// Dense index of an external bus id.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.index[&self.slack_bus]
    }

    /// Dense `(from, to)` indices of a branch.
    pub fn branch_ends(&self, k: usize) -> (usize, usize) {
        let br = &self.branches[k];
        (self.index[&br.from_bus], self.index[&br.to_bus])
    }

    /// Canonical one-line-per-element dump. [`Network::from_dump`] reads it
    /// back exactly.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "base_mva {:?}", self.base_mva);
        let _ = writeln!(out, "slack {}", self.slack_bus);
        for bus in &self.buses {
            let _ = writeln!(
                out,
                "bus {} {:?} {:?} {:?}",
                bus.id, bus.gs, bus.bs, bus.base_kv
            );
        }
        for br in &self.branches {
            let _ = writeln!(
                out,
                "branch {} {} {:?} {:?} {:?} {}",
                br.from_bus,
                br.to_bus,
                br.r,
                br.x,
                br.b_sh,
                u8::from(br.in_service)
            );
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut base_mva = None;
        let mut slack = None;
        let mut buses = Vec::new();
        let mut branches = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let mut tok = raw.split_whitespace();
            let Some(head) = tok.next() else { continue };
            let rest: Vec<&str> = tok.collect();
            let num = |i: usize| -> Result<f64> {
                let s = rest.get(i).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing field {}", i + 1),
                })?;
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number {s:?}"),
                })
            };
            let id = |i: usize| -> Result<usize> { as_bus_id(num(i)?, line) };
            match head {
                "base_mva" => base_mva = Some(num(0)?),
                "slack" => slack = Some(id(0)?),
                "bus" => buses.push(Bus {
                    id: id(0)?,
                    gs: num(1)?,
                    bs: num(2)?,
                    base_kv: num(3)?,
                }),
                "branch" => branches.push(Branch {
                    from_bus: id(0)?,
                    to_bus: id(1)?,
                    r: num(2)?,
                    x: num(3)?,
                    b_sh: num(4)?,
                    in_service: num(5)? != 0.0,
                }),
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown record {other:?}"),
                    })
                }
            }
        }
        let base_mva = base_mva.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing base_mva".into(),
        })?;
        let slack = slack.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing slack".into(),
        })?;
        Network::new(buses, branches, base_mva, slack)
    }
}

fn as_bus_id(v: f64, line: usize) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Parse {
            line,
            message: format!("bus number must be a positive integer, got {v}"),
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Table {
    Bus,
    Branch,
    Other,
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

/// Parse MATPOWER case text with default options (all branches in service).
pub fn parse_case(text: &str) -> Result<Network> {
    parse_case_with(text, &ParseOptions::default())
}

pub fn parse_case_with(text: &str, opts: &ParseOptions) -> Result<Network> {
    let mut base_mva = None;
    let mut bus_rows: Option<Vec<Row>> = None;
    let mut branch_rows: Option<Vec<Row>> = None;
    let mut open: Option<(Table, Vec<Row>)> = None;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split('%').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let mut body = code;
        if open.is_none() {
            let Some(rest) = body.strip_prefix("mpc.") else {
                continue;
            };
            let Some((name, rhs)) = rest.split_once('=') else {
                continue;
            };
            let name = name.trim();
            let rhs = rhs.trim();
            if name == "baseMVA" {
                let v = rhs.trim_end_matches(';').trim();
                base_mva = Some(v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad baseMVA value {v:?}"),
                })?);
                continue;
            }
            let Some(after) = rhs.strip_prefix('[') else {
                continue;
            };
            let table = match name {
                "bus" => Table::Bus,
                "branch" => Table::Branch,
                _ => Table::Other,
            };
            open = Some((table, Vec::new()));
            body = after;
        }

        let (table, rows) = open.as_mut().expect("matrix is open");
        let (content, closed) = match body.split_once(']') {
            Some((c, _)) => (c, true),
            None => (body, false),
        };
        if *table != Table::Other {
            for chunk in content.split(';') {
                let fields: Vec<&str> = chunk
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .collect();
                if fields.is_empty() {
                    continue;
                }
                let values = fields
                    .iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| Error::Parse {
                            line,
                            message: format!("bad number {s:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(Row { line, values });
            }
        }
        if closed {
            let (table, rows) = open.take().expect("matrix is open");
            match table {
                Table::Bus => bus_rows = Some(rows),
                Table::Branch => branch_rows = Some(rows),
                Table::Other => {}
            }
        }
    }
    if open.is_some() {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "unterminated matrix".into(),
        });
    }

    let base_mva = base_mva.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing mpc.baseMVA".into(),
    })?;
    let bus_rows = bus_rows.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing mpc.bus".into(),
    })?;
    let branch_rows = branch_rows.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing mpc.branch".into(),
    })?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut slack = Vec::new();
    for row in &bus_rows {
        check_width(row, BUS_COLUMNS, "bus")?;
        let v = &row.values;
        let id = as_bus_id(v[0], row.line)?;
        if v[1] == REF_BUS_TYPE {
            slack.push(id);
        }
        buses.push(Bus {
            id,
            gs: v[4] / base_mva,
            bs: v[5] / base_mva,
            base_kv: v[9],
        });
    }
    let slack_bus = match slack.as_slice() {
        [one] => *one,
        [] => return Err(Error::Structure("no reference (type 3) bus".into())),
        many => {
            return Err(Error::Structure(format!(
                "expected exactly one reference bus, found {many:?}"
            )))
        }
    };

    let mut branches = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        check_width(row, BRANCH_COLUMNS, "branch")?;
        let v = &row.values;
        let (tap, shift) = (v[8], v[9]);
        if tap != 0.0 && tap != 1.0 {
            return Err(Error::Unsupported(format!(
                "line {}: transformer tap ratio {tap}",
                row.line
            )));
        }
        if shift != 0.0 {
            return Err(Error::Unsupported(format!(
                "line {}: phase shift {shift}",
                row.line
            )));
        }
        branches.push(Branch {
            from_bus: as_bus_id(v[0], row.line)?,
            to_bus: as_bus_id(v[1], row.line)?,
            r: v[2],
            x: v[3],
            b_sh: v[4],
            in_service: !opts.keep_branch_status || v[10] != 0.0,
        });
    }

    Network::new(buses, branches, base_mva, slack_bus)
}

fn check_width(row: &Row, expected: usize, what: &str) -> Result<()> {
    if row.values.len() < expected {
        return Err(Error::Parse {
            line: row.line,
            message: format!(
                "{what} row has {} columns, expected {expected}",
                row.values.len()
            ),
        });
    }
    Ok(())
}

/// Series admittance and charging of one branch in dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    pub b_sh: f64,
    pub in_service: bool,
}

/// Real and imaginary parts of the bus admittance matrix plus per-branch
/// data for flow evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub branches: Vec<BranchAdmittance>,
    /// For each bus, the other buses with a nonzero off-diagonal entry.
    pub neighbors: Vec<Vec<usize>>,
    pub slack: usize,
}

impl AdmittanceMatrix {
    pub fn n_buses(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }
}

pub fn build_admittance(net: &Network) -> Result<AdmittanceMatrix> {
    let n = net.n_buses();
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut neighbors = vec![Vec::new(); n];
    let mut branches = Vec::with_capacity(net.n_branches());

    for (i, bus) in net.buses.iter().enumerate() {
        g[(i, i)] += bus.gs;
        b[(i, i)] += bus.bs;
    }
    for (k, br) in net.branches.iter().enumerate() {
        let (f, t) = net.branch_ends(k);
        let (gs, bs) = br.series_admittance();
        branches.push(BranchAdmittance {
            from: f,
            to: t,
            g: gs,
            b: bs,
            b_sh: br.b_sh,
            in_service: br.in_service,
        });
        if !br.in_service {
            continue;
        }
        g[(f, f)] += gs;
        g[(t, t)] += gs;
        b[(f, f)] += bs + br.b_sh / 2.0;
        b[(t, t)] += bs + br.b_sh / 2.0;
        g[(f, t)] -= gs;
        g[(t, f)] -= gs;
        b[(f, t)] -= bs;
        b[(t, f)] -= bs;
        if !neighbors[f].contains(&t) {
            neighbors[f].push(t);
            neighbors[t].push(f);
        }
    }
    for adj in &mut neighbors {
        adj.sort_unstable();
    }

    // connectivity over in-service branches
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &neighbors[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(orphan) = seen.iter().position(|s| !s) {
        return Err(Error::Structure(format!(
            "network is disconnected: bus {} is unreachable",
            net.buses[orphan].id
        )));
    }

    Ok(AdmittanceMatrix {
        g,
        b,
        branches,
        neighbors,
        slack: net.slack_index(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_bus(r: f64, x: f64, b_sh: f64) -> String {
        format!(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [\n\
             \t1\t3\t0\t0\t0\t0\t1\t1\t0\t12.66\t1\t1.1\t0.9;\n\
             \t2\t1\t0\t0\t0\t0\t1\t1\t0\t12.66\t1\t1.1\t0.9;\n\
             ];\n\
             mpc.branch = [\n\
             \t1\t2\t{r}\t{x}\t{b_sh}\t0\t0\t0\t0\t0\t1\t-360\t360;\n\
             ];\n"
        )
    }

    #[test]
    fn ieee33_has_33_buses_and_37_branches() {
        let net = parse_case(IEEE33_CASE).unwrap();
        assert_eq!(net.n_buses(), 33);
        assert_eq!(net.n_branches(), 37);
        assert_eq!(net.n_in_service(), 37);
        assert_eq!(net.slack_bus, 1);
        assert_eq!(net.base_mva, 10.0);
    }

    #[test]
    fn file_status_is_kept_on_request() {
        let opts = ParseOptions {
            keep_branch_status: true,
        };
        let net = parse_case_with(IEEE33_CASE, &opts).unwrap();
        assert_eq!(net.n_in_service(), 32);
    }

    #[test]
    fn two_bus_case() {
        let net = parse_case(&two_bus(0.0, 0.1, 0.0)).unwrap();
        assert_eq!(net.n_buses(), 2);
        assert_eq!(net.n_branches(), 1);
    }

    #[test]
    fn short_branch_row_is_rejected_with_line() {
        let text = two_bus(0.0, 0.1, 0.0).replace("\t-360\t360;", "\t-360;");
        match parse_case(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn taps_and_shifters_are_unsupported() {
        let tap = two_bus(0.0, 0.1, 0.0).replace("0\t0\t1\t-360", "0.98\t0\t1\t-360");
        assert!(matches!(parse_case(&tap), Err(Error::Unsupported(_))));
        let shift = two_bus(0.0, 0.1, 0.0).replace("0\t0\t1\t-360", "0\t5\t1\t-360");
        assert!(matches!(parse_case(&shift), Err(Error::Unsupported(_))));
        let unit_tap = two_bus(0.0, 0.1, 0.0).replace("0\t0\t1\t-360", "1\t0\t1\t-360");
        assert!(parse_case(&unit_tap).is_ok());
    }

    #[test]
    fn garbage_number_is_a_parse_error() {
        let text = two_bus(0.0, 0.1, 0.0).replace("12.66\t1\t1.1", "12.66\tabc\t1.1");
        assert!(matches!(
            parse_case(&text),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn zero_impedance_branch_is_rejected() {
        assert!(matches!(
            parse_case(&two_bus(0.0, 0.0, 0.0)),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn pure_reactance_branch() {
        let net = parse_case(&two_bus(0.0, 0.1, 0.0)).unwrap();
        let y = build_admittance(&net).unwrap();
        approx::assert_abs_diff_eq!(y.b[(0, 1)], 10.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(y.b[(0, 0)], -10.0, epsilon = 1e-12);
        assert!(y.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_resistance_branch() {
        let net = parse_case(&two_bus(0.1, 0.0, 0.0)).unwrap();
        let y = build_admittance(&net).unwrap();
        approx::assert_abs_diff_eq!(y.g[(0, 1)], -10.0, epsilon = 1e-12);
        assert!(y.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn line_charging_goes_to_the_diagonal() {
        let net = parse_case(&two_bus(0.0, 0.1, 0.4)).unwrap();
        let y = build_admittance(&net).unwrap();
        approx::assert_abs_diff_eq!(y.b[(0, 0)], -10.0 + 0.2, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(y.b[(0, 1)], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_network_is_a_structural_error() {
        let opts = ParseOptions {
            keep_branch_status: true,
        };
        let text = two_bus(0.0, 0.1, 0.0).replace("\t1\t-360", "\t0\t-360");
        let net = parse_case_with(&text, &opts).unwrap();
        assert!(matches!(build_admittance(&net), Err(Error::Structure(_))));
    }

    #[test]
    fn ieee33_admittance_structure() {
        let net = parse_case(IEEE33_CASE).unwrap();
        let y = build_admittance(&net).unwrap();
        for i in 0..33 {
            // no shunts anywhere in this case
            let row: f64 = y.g.row(i).iter().sum();
            assert!(row.abs() < 1e-9, "row {i} sums to {row}");
            for j in 0..33 {
                assert_eq!(y.g[(i, j)], y.g[(j, i)]);
                assert_eq!(y.b[(i, j)], y.b[(j, i)]);
                let linked = i != j && y.neighbors[i].contains(&j);
                if i != j {
                    assert_eq!(linked, y.g[(i, j)] != 0.0 || y.b[(i, j)] != 0.0);
                }
            }
        }
    }

    #[test]
    fn dump_round_trip_reproduces_admittance() {
        let net = parse_case(IEEE33_CASE).unwrap();
        let back = Network::from_dump(&net.to_dump()).unwrap();
        assert_eq!(net, back);
        assert_eq!(
            build_admittance(&net).unwrap(),
            build_admittance(&back).unwrap()
        );
    }
}
