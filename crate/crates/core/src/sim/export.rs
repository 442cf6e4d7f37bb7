use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::Trajectory;
use crate::error::{Error, Result};

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("csv export failed: {e}"));
    let n = traj.states.first().map_or(0, Vec::len);
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("event".into());
    w.write_record(&header).map_err(io)?;

    let mut tags: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for e in &traj.events {
        tags.entry(traj.index_at(e.time)).or_default().push(e.kind.as_str());
    }
    for (k, t) in traj.times.iter().enumerate() {
        let mut row = Vec::with_capacity(n + m + 2);
        row.push(fmt17(*t));
        row.extend(traj.states[k].iter().map(|v| fmt17(*v)));
        row.extend(traj.controls[k].iter().map(|v| fmt17(*v)));
        row.push(tags.get(&k).map(|v| v.join(";")).unwrap_or_default());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv export failed: {e}")))
}

/// CSV with header `t,x1..xn,u1..um,event`, 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    to_csv(traj, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    to_csv(traj, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::di_law_bounded;
    use crate::plants::double_integrator;
    use crate::sim::{integrate, SimConfig};

    #[test]
    fn csv_layout() {
        let cl = double_integrator().close_loop(di_law_bounded(1.0, 1.0, -0.25).unwrap()).unwrap();
        let traj = integrate(&cl, &[1.0, 0.0], &SimConfig::new(0.5, 1.0)).unwrap();
        let text = trajectory_csv(&traj).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,u1,event"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 5);
        assert_eq!(first[1], "1.0000000000000000e0");
        assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(text.lines().count(), traj.len() + 1);
    }
}
