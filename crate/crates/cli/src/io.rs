//! Text formats: snapshot CSV, truth sidecar, algebra bases, reduced
//! snapshot matrices, cluster assignments and fitted `ρ` curves.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use morlie_core::datagen::Truth;
use morlie_core::fitting::{ReducedColumn, ReducedSnapshotMatrix, ReducedVectorField};
use morlie_core::hermite::HermiteCurve;
use morlie_core::lie::{AlgebraBasis, AlgebraElement, GroupElement};
use morlie_core::{Chart, Snapshot, SnapshotSet, StatePoint};
use nalgebra::DMatrix;

pub const SNAPSHOT_MAGIC: &str = "#morlie-snapshots v1";
pub const TRUTH_MAGIC: &str = "#morlie-truth v1";
pub const BASIS_MAGIC: &str = "#morlie-basis v1";
pub const SG_MAGIC: &str = "#morlie-sg v1";
pub const RHO_MAGIC: &str = "#morlie-rho v1";

const CLOUD_HEADER: &str = "traj,time,particle,x,y,z";
const GRID_HEADER: &str = "traj,time,index,u";
const POLAR_HEADER: &str = "traj,time,q1,q2";

/// 17 significant digits: parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Lines of a file after its magic line: `(line number, text)`.
struct Lines<'a> {
    meta: BTreeMap<String, String>,
    body: Vec<(usize, &'a str)>,
}

fn split_file<'a>(text: &'a str, magic: &str, what: &str) -> Result<Lines<'a>> {
    let mut iter = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let first = iter.by_ref().find(|(_, l)| !l.trim().is_empty());
    match first {
        Some((_, l)) if l.trim() == magic => {}
        Some((n, l)) => bail!("line {n}: expected {what} header {magic:?}, found {l:?}"),
        None => bail!("empty {what} file"),
    }
    let mut meta = BTreeMap::new();
    let mut body = Vec::new();
    for (n, l) in iter {
        if l.trim().is_empty() {
            continue;
        }
        if let Some(m) = l.strip_prefix('#') {
            if let Some((k, v)) = m.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        body.push((n, l));
    }
    Ok(Lines { meta, body })
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| anyhow!("line {line}: column {name}: cannot parse {s:?}: {e}"))
}

fn finite(line: usize, row: usize, name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        bail!("line {line} (data row {row}): column {name} is not finite ({v})")
    }
}

fn floats(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("{x:?}: {e}"))).collect()
}

// ---------------------------------------------------------------- snapshots

pub fn write_snapshots(path: &Path, set: &SnapshotSet) -> Result<()> {
    let mut w = create(path)?;
    write_snapshots_to(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn write_snapshots_to(w: &mut impl Write, set: &SnapshotSet) -> Result<()> {
    writeln!(w, "{SNAPSHOT_MAGIC}")?;
    let chart = set.first_state().chart();
    if let Chart::Grid { period } = chart {
        writeln!(w, "# period = {}", fmt_f64(period))?;
    }
    for traj in set.trajectories() {
        let p = &traj[0].param;
        if !p.is_empty() {
            let vals: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "# param {} = {}", traj[0].traj, vals.join(","))?;
        }
    }
    match chart {
        Chart::PointCloud { .. } => writeln!(w, "{CLOUD_HEADER}")?,
        Chart::Grid { .. } => writeln!(w, "{GRID_HEADER}")?,
        Chart::Polar => writeln!(w, "{POLAR_HEADER}")?,
    }
    for s in set.iter() {
        let t = fmt_f64(s.time);
        match chart {
            Chart::PointCloud { .. } => {
                for (i, p) in s.state.coords().chunks_exact(3).enumerate() {
                    writeln!(w, "{},{t},{i},{},{},{}", s.traj, fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]))?;
                }
            }
            Chart::Grid { .. } => {
                for (i, u) in s.state.coords().iter().enumerate() {
                    writeln!(w, "{},{t},{i},{}", s.traj, fmt_f64(*u))?;
                }
            }
            Chart::Polar => {
                let c = s.state.coords();
                writeln!(w, "{},{t},{},{}", s.traj, fmt_f64(c[0]), fmt_f64(c[1]))?;
            }
        }
    }
    Ok(())
}

struct Row {
    line: usize,
    traj: usize,
    time: f64,
    index: usize,
    values: Vec<f64>,
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    parse_snapshots(&read(path)?).with_context(|| format!("ingesting {}", path.display()))
}

/// Parse the long-format snapshot CSV. Rows may come in any particle order,
/// but times must not decrease within a trajectory.
pub fn parse_snapshots(text: &str) -> Result<SnapshotSet> {
    let lines = split_file(text, SNAPSHOT_MAGIC, "snapshot")?;
    let Some(&(hline, header)) = lines.body.first() else {
        bail!("snapshot file has no column header");
    };
    let header = header.replace(' ', "");
    let (chart, names): (Chart, &[&str]) = match header.as_str() {
        CLOUD_HEADER => (Chart::PointCloud { particles: 0 }, &["traj", "time", "particle", "x", "y", "z"]),
        GRID_HEADER => {
            let period = match lines.meta.get("period") {
                Some(p) => p.parse::<f64>().map_err(|e| anyhow!("period metadata: {e}"))?,
                None => std::f64::consts::TAU,
            };
            (Chart::Grid { period }, &["traj", "time", "index", "u"])
        }
        POLAR_HEADER => (Chart::Polar, &["traj", "time", "q1", "q2"]),
        _ => bail!("line {hline}: unknown column header {header:?}"),
    };
    let mut params: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (k, v) in &lines.meta {
        if let Some(id) = k.strip_prefix("param ") {
            let traj: usize = id.trim().parse().map_err(|e| anyhow!("param metadata {k:?}: {e}"))?;
            params.insert(traj, floats(v).map_err(|e| anyhow!("param metadata {k:?}: {e}"))?);
        }
    }

    let mut rows = Vec::with_capacity(lines.body.len() - 1);
    let mut last_time: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (row, &(line, l)) in lines.body[1..].iter().enumerate() {
        let row = row + 1;
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != names.len() {
            bail!("line {line} (data row {row}): expected {} columns, found {}", names.len(), cols.len());
        }
        let traj: usize = field(line, "traj", cols[0])?;
        let time = finite(line, row, "time", field(line, "time", cols[1])?)?;
        let (index, first_value) = match chart {
            Chart::Polar => (0, 2),
            _ => (field(line, names[2], cols[2])?, 3),
        };
        let values = (first_value..cols.len())
            .map(|c| finite(line, row, names[c], field(line, names[c], cols[c])?))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(&(prev, prev_line)) = last_time.get(&traj) {
            if time < prev {
                bail!("line {line} (data row {row}): time {time} of trajectory {traj} precedes {prev} on line {prev_line}");
            }
        }
        last_time.insert(traj, (time, line));
        rows.push(Row {
            line,
            traj,
            time,
            index,
            values,
        });
    }
    if rows.is_empty() {
        bail!("snapshot file has no data rows");
    }
    // Stable: equal times keep file order until the index key separates them.
    rows.sort_by(|a, b| a.traj.cmp(&b.traj).then(a.time.total_cmp(&b.time)).then(a.index.cmp(&b.index)));

    let mut snapshots = Vec::new();
    let mut width = None;
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].traj == rows[i].traj && rows[j].time == rows[i].time {
            j += 1;
        }
        let group = &rows[i..j];
        let state = match chart {
            Chart::Polar => {
                if group.len() > 1 {
                    bail!(
                        "line {}: trajectory {} has two rows at time {}",
                        group[1].line,
                        group[1].traj,
                        group[1].time
                    );
                }
                let v = &group[0].values;
                StatePoint::polar(v[0], v[1]).map_err(|e| anyhow!("line {}: {e}", group[0].line))?
            }
            _ => {
                for (k, r) in group.iter().enumerate() {
                    if r.index != k {
                        bail!(
                            "line {}: trajectory {} at time {} has index {} where {} was expected (missing or repeated entry)",
                            r.line,
                            r.traj,
                            r.time,
                            r.index,
                            k
                        );
                    }
                }
                let coords: Vec<f64> = group.iter().flat_map(|r| r.values.iter().copied()).collect();
                match chart {
                    Chart::Grid { period } => StatePoint::grid(coords, period)?,
                    _ => StatePoint::point_cloud(coords)?,
                }
            }
        };
        match width {
            None => width = Some(group.len()),
            Some(w) if w != group.len() => bail!(
                "line {}: snapshot of trajectory {} at time {} has {} entries, earlier snapshots have {w}",
                group[0].line,
                group[0].traj,
                group[0].time,
                group.len()
            ),
            _ => {}
        }
        let mut s = Snapshot::new(group[0].traj, group[0].time, state);
        if let Some(p) = params.get(&group[0].traj) {
            s = s.with_param(p.clone());
        }
        snapshots.push(s);
        i = j;
    }
    Ok(SnapshotSet::new(snapshots)?)
}

// ---------------------------------------------------------------- truth

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub family: String,
    /// Particle → cluster, when the benchmark is clustered.
    pub assignment: Option<Vec<usize>>,
    /// Per block (cluster), the `(time, g)` path.
    pub paths: Vec<Vec<(f64, GroupElement)>>,
}

impl TruthRecord {
    pub fn from_truth(truth: &Truth) -> Option<Self> {
        match truth {
            Truth::Rigid(t) => Some(Self {
                family: "rigid".into(),
                assignment: None,
                paths: vec![t.times.iter().copied().zip(t.group_path.iter().cloned()).collect()],
            }),
            Truth::Sheering(t) => Some(Self {
                family: "sheering".into(),
                assignment: Some(t.assignment.clone()),
                paths: t
                    .cluster_paths
                    .iter()
                    .map(|p| t.times.iter().copied().zip(p.iter().cloned()).collect())
                    .collect(),
            }),
            Truth::Radial | Truth::Transport => None,
        }
    }
}

pub fn write_truth(path: &Path, truth: &TruthRecord) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{TRUTH_MAGIC}")?;
    writeln!(w, "# family = {}", truth.family)?;
    if let Some(a) = &truth.assignment {
        let s: Vec<String> = a.iter().map(|c| c.to_string()).collect();
        writeln!(w, "# assignment = {}", s.join(","))?;
    }
    let n = truth.paths.first().and_then(|p| p.first()).map(|(_, g)| g.ambient_dim()).unwrap_or(0);
    let mut header = String::from("block,step,time");
    for i in 0..n {
        for j in 0..n {
            header.push_str(&format!(",g{i}{j}"));
        }
    }
    writeln!(w, "{header}")?;
    for (b, path) in truth.paths.iter().enumerate() {
        for (k, (t, g)) in path.iter().enumerate() {
            let m = g.matrix();
            let vals: Vec<String> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| fmt_f64(m[(i, j)]))
                .collect();
            writeln!(w, "{b},{k},{},{}", fmt_f64(*t), vals.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<TruthRecord> {
    let text = read(path)?;
    let lines = split_file(&text, TRUTH_MAGIC, "truth")?;
    let family = lines.meta.get("family").cloned().unwrap_or_default();
    let assignment = match lines.meta.get("assignment") {
        Some(s) => Some(
            s.split(',')
                .map(|c| c.trim().parse::<usize>().map_err(|e| anyhow!("assignment metadata: {e}")))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let Some(&(hline, header)) = lines.body.first() else {
        bail!("truth file has no column header");
    };
    let n_entries = header
        .split(',')
        .count()
        .checked_sub(3)
        .ok_or_else(|| anyhow!("line {hline}: bad truth header"))?;
    let n = (n_entries as f64).sqrt().round() as usize;
    if n * n != n_entries {
        bail!("line {hline}: group matrices must be square");
    }
    let mut paths: Vec<Vec<(f64, GroupElement)>> = Vec::new();
    for &(line, l) in &lines.body[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 3 + n_entries {
            bail!("line {line}: expected {} columns", 3 + n_entries);
        }
        let b: usize = field(line, "block", cols[0])?;
        let t: f64 = field(line, "time", cols[2])?;
        let vals = cols[3..].iter().map(|c| field::<f64>(line, "g", c)).collect::<Result<Vec<_>>>()?;
        let g = GroupElement::new(DMatrix::from_row_slice(n, n, &vals)).map_err(|e| anyhow!("line {line}: {e}"))?;
        if b == paths.len() {
            paths.push(Vec::new());
        } else if b + 1 != paths.len() {
            bail!("line {line}: blocks must be listed in order");
        }
        paths[b].push((t, g));
    }
    Ok(TruthRecord { family, assignment, paths })
}

// ---------------------------------------------------------------- bases

pub fn write_basis(path: &Path, basis: &AlgebraBasis) -> Result<()> {
    let mut w = create(path)?;
    let n = basis.ambient_dim();
    writeln!(w, "{BASIS_MAGIC}")?;
    writeln!(w, "# ambient = {n}")?;
    let mut header = String::from("index,label");
    for i in 0..n {
        for j in 0..n {
            header.push_str(&format!(",m{i}_{j}"));
        }
    }
    writeln!(w, "{header}")?;
    for (k, e) in basis.elements().iter().enumerate() {
        let m = e.matrix();
        let vals: Vec<String> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| fmt_f64(m[(i, j)]))
            .collect();
        writeln!(w, "{k},{},{}", basis.label(k).unwrap_or(""), vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis(path: &Path) -> Result<AlgebraBasis> {
    let text = read(path)?;
    let lines = split_file(&text, BASIS_MAGIC, "basis")?;
    let n: usize = lines
        .meta
        .get("ambient")
        .ok_or_else(|| anyhow!("{}: missing ambient metadata", path.display()))?
        .parse()?;
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for &(line, l) in lines.body.iter().skip(1) {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 2 + n * n {
            bail!("line {line}: expected {} columns", 2 + n * n);
        }
        let vals = cols[2..].iter().map(|c| field::<f64>(line, "m", c)).collect::<Result<Vec<_>>>()?;
        elements.push(AlgebraElement::new(DMatrix::from_row_slice(n, n, &vals)).map_err(|e| anyhow!("line {line}: {e}"))?);
        labels.push(if cols[1].is_empty() { None } else { Some(cols[1].to_string()) });
    }
    if elements.is_empty() {
        return Ok(AlgebraBasis::empty(n));
    }
    Ok(AlgebraBasis::new(elements, labels)?)
}

// ---------------------------------------------------------------- reduced snapshot matrix

pub fn write_sg(path: &Path, sg: &ReducedSnapshotMatrix) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{SG_MAGIC}")?;
    writeln!(w, "# rank_deficient = {}", sg.rank_deficient)?;
    let skipped: Vec<String> = sg.skipped.iter().map(|s| s.to_string()).collect();
    writeln!(w, "# skipped = {}", skipped.join(","))?;
    let mut header = String::from("traj,step,time,dt,cost,converged");
    for k in 0..sg.basis.dim() {
        header.push_str(&format!(",c{k}"));
    }
    writeln!(w, "{header}")?;
    for c in &sg.columns {
        let vals: Vec<String> = c.coeffs.iter().map(|v| fmt_f64(*v)).collect();
        let sep = if vals.is_empty() { "" } else { "," };
        writeln!(
            w,
            "{},{},{},{},{},{}{sep}{}",
            c.traj,
            c.step,
            fmt_f64(c.time),
            fmt_f64(c.dt),
            fmt_f64(c.cost),
            c.converged as u8,
            vals.join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sg(path: &Path, basis: AlgebraBasis) -> Result<ReducedSnapshotMatrix> {
    let text = read(path)?;
    let lines = split_file(&text, SG_MAGIC, "reduced snapshot")?;
    let k = basis.dim();
    let mut columns = Vec::new();
    for &(line, l) in lines.body.iter().skip(1) {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 6 + k {
            bail!("line {line}: expected {} columns for a {k}-dimensional basis", 6 + k);
        }
        columns.push(ReducedColumn {
            traj: field(line, "traj", cols[0])?,
            step: field(line, "step", cols[1])?,
            time: field(line, "time", cols[2])?,
            dt: field(line, "dt", cols[3])?,
            cost: field(line, "cost", cols[4])?,
            converged: field::<u8>(line, "converged", cols[5])? != 0,
            coeffs: cols[6..].iter().map(|c| field::<f64>(line, "c", c)).collect::<Result<Vec<_>>>()?,
        });
    }
    let mut sg = ReducedSnapshotMatrix::new(basis, columns)?;
    if let Some(r) = lines.meta.get("rank_deficient") {
        sg.rank_deficient = r.parse()?;
    }
    if let Some(s) = lines.meta.get("skipped") {
        sg.skipped = floats(s)?.into_iter().map(|v| v as usize).collect();
    }
    Ok(sg)
}

// ---------------------------------------------------------------- assignments

pub fn write_assignment(path: &Path, assignment: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "particle_id,cluster")?;
    for (i, c) in assignment.iter().enumerate() {
        writeln!(w, "{i},{c}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignment(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (n, l) in text.lines().enumerate().skip(1) {
        if l.trim().is_empty() {
            continue;
        }
        let (i, c) = l.split_once(',').ok_or_else(|| anyhow!("line {}: expected particle_id,cluster", n + 1))?;
        let i: usize = field(n + 1, "particle_id", i)?;
        if i != out.len() {
            bail!("line {}: particle ids must be listed as 0, 1, 2, ...", n + 1);
        }
        out.push(field(n + 1, "cluster", c)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- ρ curves

/// Fitted `ρ` curves keyed by trajectory id; key `None` is the shared curve.
pub type RhoSet = Vec<(Option<usize>, ReducedVectorField)>;

pub fn write_rho(path: &Path, rhos: &RhoSet) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{RHO_MAGIC}")?;
    let k = rhos.first().map(|(_, r)| r.basis.dim()).unwrap_or(0);
    let mut header = String::from("traj,knot");
    for c in 0..k {
        header.push_str(&format!(",v{c}"));
    }
    for c in 0..k {
        header.push_str(&format!(",s{c}"));
    }
    writeln!(w, "{header}")?;
    for (traj, rho) in rhos {
        let id = traj.map(|t| t.to_string()).unwrap_or_else(|| "*".into());
        let (v, s) = (rho.curve.values(), rho.curve.slopes());
        for (r, t) in rho.curve.knots().iter().enumerate() {
            let mut row = format!("{id},{}", fmt_f64(*t));
            for c in 0..k {
                row.push_str(&format!(",{}", fmt_f64(v[(r, c)])));
            }
            for c in 0..k {
                row.push_str(&format!(",{}", fmt_f64(s[(r, c)])));
            }
            writeln!(w, "{row}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rho(path: &Path, basis: &AlgebraBasis) -> Result<RhoSet> {
    let text = read(path)?;
    let lines = split_file(&text, RHO_MAGIC, "rho")?;
    let k = basis.dim();
    let mut groups: Vec<(Option<usize>, Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    for &(line, l) in lines.body.iter().skip(1) {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 2 + 2 * k {
            bail!("line {line}: expected {} columns", 2 + 2 * k);
        }
        let id = if cols[0] == "*" {
            None
        } else {
            Some(field::<usize>(line, "traj", cols[0])?)
        };
        let t: f64 = field(line, "knot", cols[1])?;
        let vals = cols[2..].iter().map(|c| field::<f64>(line, "value", c)).collect::<Result<Vec<_>>>()?;
        match groups.last_mut() {
            Some(g) if g.0 == id => {
                g.1.push(t);
                g.2.push(vals);
            }
            _ => groups.push((id, vec![t], vec![vals])),
        }
    }
    groups
        .into_iter()
        .map(|(id, knots, rows)| {
            let values = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
            let slopes = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][k + c]);
            let curve = HermiteCurve::from_parts(knots, values, slopes)?;
            Ok((id, ReducedVectorField::new(basis.clone(), curve)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn polar_and_grid_parse() {
        let polar = "#morlie-snapshots v1\n# param 0 = 1\ntraj,time,q1,q2\n0,0,1,0\n0,0.5,1.5,0.5\n";
        let s = parse_snapshots(polar).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.snapshots()[1].state.coords(), &[1.5, 0.5]);
        assert_eq!(s.snapshots()[0].param, vec![1.0]);

        let grid = "#morlie-snapshots v1\n# period = 2\ntraj,time,index,u\n0,0,1,5\n0,0,0,4\n";
        let s = parse_snapshots(grid).unwrap();
        assert_eq!(s.first_state().coords(), &[4.0, 5.0]);
        assert_eq!(s.first_state().chart(), Chart::Grid { period: 2.0 });
    }

    #[test]
    fn schema_errors_name_the_line() {
        let bad = "#morlie-snapshots v1\ntraj,time,particle,x,y,z\n0,0,0,1,2\n";
        let e = parse_snapshots(bad).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");

        let wrong_magic = "traj,time,particle,x,y,z\n";
        assert!(parse_snapshots(wrong_magic).is_err());

        let missing_particle = "#morlie-snapshots v1\ntraj,time,particle,x,y,z\n0,0,0,1,2,3\n0,0,2,1,2,3\n";
        let e = parse_snapshots(missing_particle).unwrap_err().to_string();
        assert!(e.contains("line 4"), "{e}");
    }

    #[test]
    fn decreasing_time_is_rejected() {
        let text = "#morlie-snapshots v1\ntraj,time,q1,q2\n0,1,1,0\n1,0,1,0\n0,0.5,1,0\n";
        let e = parse_snapshots(text).unwrap_err().to_string();
        assert!(e.contains("line 5") && e.contains("precedes"), "{e}");
    }

    #[test]
    fn assignment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_assignment(&p, &[0, 1, 1, 0, 2]).unwrap();
        assert_eq!(read_assignment(&p).unwrap(), vec![0, 1, 1, 0, 2]);
    }

    #[test]
    fn basis_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let b = AlgebraBasis::se3();
        write_basis(&p, &b).unwrap();
        let back = read_basis(&p).unwrap();
        assert_eq!(back.elements(), b.elements());
        assert_eq!(back.labels(), b.labels());
        write_basis(&p, &AlgebraBasis::empty(4)).unwrap();
        assert_eq!(read_basis(&p).unwrap().dim(), 0);
    }

    #[test]
    fn rho_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rho.csv");
        let basis = AlgebraBasis::line();
        let a = ReducedVectorField::constant(basis.clone(), &[0.25], 0.0, 1.0).unwrap();
        let b = ReducedVectorField::constant(basis.clone(), &[-3.0], 0.0, 2.0).unwrap();
        let set: RhoSet = vec![(Some(0), a), (Some(4), b)];
        write_rho(&p, &set).unwrap();
        assert_eq!(read_rho(&p, &basis).unwrap(), set);
    }
}
