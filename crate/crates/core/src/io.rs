//! Configuration files, CSV tables and binary field snapshots.

use crate::coupled::{DiagnosticsRow, SimConfig, State};
use crate::error::{Error, Result};
use crate::fields::{Grid2, Location, ScalarField, StructureState, SymTensorField, VectorField};
use crate::fluid::FluidState;
use crate::solute::SoluteState;
use std::io::Write;
use std::path::Path;

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Parses and validates a `key = value` configuration with `[section]` headers.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn render_config(cfg: &SimConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Io(e.to_string()))
}

pub fn read_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// `{:.16e}` gives 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Plain CSV table with a fixed column order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Trailing `# ...` lines (for example a truncation marker).
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        for n in &self.notes {
            s.push_str("# ");
            s.push_str(n);
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    /// Reads a table written by [`Table::to_csv`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "empty table".into() })?;
        let mut t = Table { columns: header.split(',').map(str::to_string).collect(), ..Default::default() };
        for (k, l) in lines.enumerate() {
            if let Some(n) = l.strip_prefix("# ") {
                t.notes.push(n.to_string());
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = l.split(',').map(str::parse).collect();
            let row = row.map_err(|e| Error::Parse { line: k + 2, message: format!("{e}") })?;
            if row.len() != t.columns.len() {
                return Err(Error::Parse { line: k + 2, message: "wrong number of columns".into() });
            }
            t.rows.push(row);
        }
        Ok(t)
    }
}

pub const TIMESERIES_COLUMNS: [&str; 15] = [
    "step[count]",
    "t[time]",
    "fluid_kinetic[energy]",
    "structure_kinetic[energy]",
    "structure_bending[energy]",
    "stress_l2[energy]",
    "rho_l2[mass^2]",
    "viscous_dissipation_cum[energy]",
    "gamma_dissipation_cum[energy]",
    "eps_dissipation_cum[energy]",
    "stress_relaxation_cum[energy]",
    "viscous_rate[energy/time]",
    "mass[mass]",
    "max_abs_eta[length]",
    "total_energy[energy]",
];

pub fn timeseries_table(rows: &[DiagnosticsRow], dt: f64) -> Table {
    let mut t = Table::new(&TIMESERIES_COLUMNS);
    for r in rows {
        let e = r.energy;
        t.push(vec![
            r.step as f64,
            r.step as f64 * dt,
            e.fluid_kinetic,
            e.structure_kinetic,
            e.structure_bending,
            e.stress_l2,
            e.rho_l2,
            e.viscous_dissipation_cum,
            e.gamma_dissipation_cum,
            e.eps_dissipation_cum,
            r.stress_relaxation_cum,
            e.viscous_rate,
            r.mass,
            r.max_abs_eta,
            e.total(),
        ]);
    }
    t
}

/// One array of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotField {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub location: Location,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub fields: Vec<SnapshotField>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&SnapshotField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

pub fn encode_snapshot(s: &Snapshot) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for f in &s.fields {
        if f.data.len() != f.nx * f.ny {
            return Err(Error::GridMismatch(format!("field {} has {} values, expected {}", f.name, f.data.len(), f.nx * f.ny)));
        }
        if f.name.is_empty() || f.name.contains(char::is_whitespace) {
            return Err(Error::Validation(format!("bad field name '{}'", f.name)));
        }
        writeln!(out, "field {} {} {} {}", f.name, f.nx, f.ny, f.location.as_str())?;
    }
    writeln!(out, "time {:e}", s.time)?;
    out.push(b'\n');
    for f in &s.fields {
        for v in &f.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let mut pos = 0;
    let mut heads = Vec::new();
    let mut time = None;
    let mut line_no = 0;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Parse { line: line_no + 1, message: "unterminated header".into() })?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::Parse { line: line_no + 1, message: "header is not ASCII".into() })?;
        pos += end + 1;
        line_no += 1;
        if line.is_empty() {
            break;
        }
        let bad = |m: &str| Error::Parse { line: line_no, message: m.to_string() };
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["field", name, nx, ny, loc] => {
                let nx: usize = nx.parse().map_err(|_| bad("bad nx"))?;
                let ny: usize = ny.parse().map_err(|_| bad("bad ny"))?;
                let loc = Location::parse(loc).ok_or_else(|| bad("unknown staggering"))?;
                heads.push((name.to_string(), nx, ny, loc));
            }
            ["time", t] => time = Some(t.parse::<f64>().map_err(|_| bad("bad time"))?),
            _ => return Err(bad("unrecognised header line")),
        }
    }
    let time = time.ok_or_else(|| Error::Parse { line: line_no, message: "missing time line".into() })?;
    let mut fields = Vec::new();
    for (name, nx, ny, location) in heads {
        let n = nx * ny;
        if bytes.len() < pos + 8 * n {
            return Err(Error::Io(format!("snapshot truncated in field {name}")));
        }
        let data = bytes[pos..pos + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        pos += 8 * n;
        fields.push(SnapshotField { name, nx, ny, location, data });
    }
    if pos != bytes.len() {
        return Err(Error::Io("trailing bytes after snapshot data".into()));
    }
    Ok(Snapshot { time, fields })
}

pub fn write_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    write_atomic(path, &encode_snapshot(s)?)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    decode_snapshot(&std::fs::read(path)?)
}

fn sf(name: &str, nx: usize, ny: usize, location: Location, data: &[f64]) -> SnapshotField {
    SnapshotField { name: name.into(), nx, ny, location, data: data.to_vec() }
}

/// Snapshot of every field of a coupled state.
pub fn state_snapshot(state: &State) -> Snapshot {
    let g = state.fluid.u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let f = &state.fluid;
    let t = &state.solute.t;
    Snapshot {
        time: state.time,
        fields: vec![
            sf("u1", nx, ny, Location::XFace, &f.u.u),
            sf("u2", nx, ny + 1, Location::YFace, &f.u.v),
            sf("p", nx, ny, Location::Cell, &f.p.data),
            sf("dudt1", nx, ny, Location::XFace, &f.dudt.u),
            sf("dudt2", nx, ny + 1, Location::YFace, &f.dudt.v),
            sf("rho", nx, ny, Location::Cell, &state.solute.rho.data),
            sf("t11", nx, ny, Location::Cell, &t.t11),
            sf("t12", nx, ny, Location::Cell, &t.t12),
            sf("t22", nx, ny, Location::Cell, &t.t22),
            sf("eta", nx, 1, Location::Boundary, &state.structure.eta),
            sf("eta_dot", nx, 1, Location::Boundary, &state.structure.eta_dot),
        ],
    }
}

/// Inverse of [`state_snapshot`] on the unit channel grid.
pub fn snapshot_state(s: &Snapshot) -> Result<State> {
    let get = |name: &str| -> Result<&SnapshotField> {
        s.field(name).ok_or_else(|| Error::GridMismatch(format!("snapshot lacks field {name}")))
    };
    let p = get("p")?;
    let grid = Grid2::unit_channel(p.nx, p.ny)?;
    let take = |name: &str, loc: Location| -> Result<Vec<f64>> {
        let f = get(name)?;
        if f.location != loc || f.data.len() != grid.len(loc) {
            return Err(Error::GridMismatch(format!("field {name} does not fit the grid")));
        }
        Ok(f.data.clone())
    };
    let fluid = FluidState {
        u: VectorField { grid, u: take("u1", Location::XFace)?, v: take("u2", Location::YFace)? },
        p: ScalarField { grid, data: take("p", Location::Cell)? },
        dudt: VectorField { grid, u: take("dudt1", Location::XFace)?, v: take("dudt2", Location::YFace)? },
    };
    let solute = SoluteState {
        rho: ScalarField { grid, data: take("rho", Location::Cell)? },
        t: SymTensorField {
            grid,
            t11: take("t11", Location::Cell)?,
            t12: take("t12", Location::Cell)?,
            t22: take("t22", Location::Cell)?,
        },
    };
    let structure = StructureState { eta: take("eta", Location::Boundary)?, eta_dot: take("eta_dot", Location::Boundary)? };
    Ok(State { time: s.time, structure, fluid, solute })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = "[physics]\neps = 0.1\nbogus = 3\n";
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_sections() {
        let text = "# a run\nseed = 7\n[grid]\nnx = 16 # columns\nny = 16\n[time]\ndt = 0.01\n";
        let c = parse_config(text).unwrap();
        assert_eq!((c.seed, c.grid.nx, c.time.dt), (7, 16, 0.01));
    }

    #[test]
    fn invalid_values_are_validation_errors() {
        assert!(matches!(parse_config("[time]\ndt = -1.0\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn table_roundtrip() {
        let mut t = Table::new(&["a[x]", "b[y]"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![-2.5e-300, 7.0]);
        let csv = t.to_csv();
        assert!(!csv.contains('\r'));
        assert!(csv.starts_with("a[x],b[y]\n"));
        assert_eq!(Table::parse(&csv).unwrap(), t);
    }

    #[test]
    fn snapshot_header_errors() {
        assert!(decode_snapshot(b"field u 2 2 nowhere\ntime 0\n\n").is_err());
        assert!(decode_snapshot(b"field u 1 1 cell\n\n").is_err());
        assert!(decode_snapshot(b"time 0\n\n\x01").is_err());
    }
}
