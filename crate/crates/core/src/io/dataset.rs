//! Device dataset schema and its five-file CSV layout.
//!
//! ```text
//! nodes.csv           id,x,y,device_type
//! links.csv           src,dst
//! friendships.csv     src,dst
//! interests.csv       node_id,interest_id
//! collaborations.csv  task_id,members,success      (members ';'-separated, success 0|1)
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const NODES_FILE: &str = "nodes.csv";
pub const LINKS_FILE: &str = "links.csv";
pub const FRIENDSHIPS_FILE: &str = "friendships.csv";
pub const INTERESTS_FILE: &str = "interests.csv";
pub const COLLABORATIONS_FILE: &str = "collaborations.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub device_type: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collaboration {
    pub members: Vec<usize>,
    pub success: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Indexed by id; ids are dense `0..n`.
    pub devices: Vec<Device>,
    pub links: Vec<(usize, usize)>,
    pub friendships: Vec<(usize, usize)>,
    /// Interest set per device, indexed by id.
    pub interests: Vec<BTreeSet<usize>>,
    pub collaborations: Vec<Collaboration>,
}

impl Dataset {
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    /// One past the largest interest id in use.
    pub fn interest_universe(&self) -> usize {
        self.interests
            .iter()
            .filter_map(|s| s.iter().next_back())
            .max()
            .map_or(0, |&m| m + 1)
    }

    /// Checks every schema invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_devices();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (i, d) in self.devices.iter().enumerate() {
            if d.id != i {
                return bad(format!("device at index {i} has id {}", d.id));
            }
            if !(0.0..=1.0).contains(&d.x) || !(0.0..=1.0).contains(&d.y) {
                return bad(format!(
                    "device {i} position ({}, {}) outside [0,1]^2",
                    d.x, d.y
                ));
            }
        }
        for (name, pairs) in [("link", &self.links), ("friendship", &self.friendships)] {
            for &(a, b) in pairs.iter() {
                if a >= n || b >= n {
                    return bad(format!("{name} ({a}, {b}) references a missing device"));
                }
                if a == b {
                    return bad(format!("{name} ({a}, {b}) is a self-loop"));
                }
            }
        }
        if self.interests.len() != n {
            return bad(format!(
                "{} interest sets for {n} devices",
                self.interests.len()
            ));
        }
        for (t, c) in self.collaborations.iter().enumerate() {
            let distinct: BTreeSet<_> = c.members.iter().collect();
            if distinct.len() < 2 {
                return bad(format!(
                    "collaboration {t} has fewer than 2 distinct members"
                ));
            }
            if let Some(&&m) = distinct.iter().find(|&&&m| m >= n) {
                return bad(format!("collaboration {t} references missing device {m}"));
            }
        }
        Ok(())
    }

    /// The first `size` devices with every record restricted to them.
    pub fn truncated(&self, size: usize) -> Dataset {
        let keep = |a: usize| a < size;
        Dataset {
            devices: self.devices.iter().take(size).cloned().collect(),
            links: self
                .links
                .iter()
                .copied()
                .filter(|&(a, b)| keep(a) && keep(b))
                .collect(),
            friendships: self
                .friendships
                .iter()
                .copied()
                .filter(|&(a, b)| keep(a) && keep(b))
                .collect(),
            interests: self.interests.iter().take(size).cloned().collect(),
            collaborations: self
                .collaborations
                .iter()
                .filter_map(|c| {
                    let members: Vec<usize> =
                        c.members.iter().copied().filter(|&m| keep(m)).collect();
                    (members.len() >= 2).then_some(Collaboration {
                        members,
                        success: c.success,
                    })
                })
                .collect(),
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(f))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(path, 1, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::data(
            path,
            1,
            format!("expected header {expected:?}, got {got:?}"),
        ));
    }
    Ok(())
}

/// Iterates data rows with their 1-based file line numbers.
fn rows(path: &Path, expected: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, expected)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::data(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            return Err(Error::data(
                path,
                line,
                format!("expected {} fields, got {}", expected.len(), rec.len()),
            ));
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, field: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::data(path, line, format!("cannot parse {field} from '{raw}'")))
}

fn parse_id(path: &Path, line: u64, field: &str, raw: &str, n: usize) -> Result<usize> {
    let id: usize = parse(path, line, field, raw)?;
    if id >= n {
        return Err(Error::data(
            path,
            line,
            format!("{field} {id} references a missing device (n = {n})"),
        ));
    }
    Ok(id)
}

fn load_pairs(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (line, r) in rows(path, &["src", "dst"])? {
        let a = parse_id(path, line, "src", &r[0], n)?;
        let b = parse_id(path, line, "dst", &r[1], n)?;
        if a == b {
            return Err(Error::data(path, line, format!("self-loop ({a}, {b})")));
        }
        out.push((a, b));
    }
    Ok(out)
}

/// Loads and validates the five CSV files in `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();

    let nodes_path = dir.join(NODES_FILE);
    let mut slots: Vec<Option<Device>> = Vec::new();
    let node_rows = rows(&nodes_path, &["id", "x", "y", "device_type"])?;
    let n = node_rows.len();
    slots.resize(n, None);
    for (line, r) in node_rows {
        let id: usize = parse(&nodes_path, line, "id", &r[0])?;
        if id >= n {
            return Err(Error::data(
                &nodes_path,
                line,
                format!("id {id} breaks the dense 0..{n} numbering"),
            ));
        }
        if slots[id].is_some() {
            return Err(Error::data(&nodes_path, line, format!("duplicate id {id}")));
        }
        let x: f64 = parse(&nodes_path, line, "x", &r[1])?;
        let y: f64 = parse(&nodes_path, line, "y", &r[2])?;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::data(
                &nodes_path,
                line,
                format!("position ({x}, {y}) outside [0,1]^2"),
            ));
        }
        if r[3].is_empty() {
            return Err(Error::data(&nodes_path, line, "empty device_type"));
        }
        slots[id] = Some(Device {
            id,
            x,
            y,
            device_type: r[3].clone(),
        });
    }
    let devices: Vec<Device> = slots
        .into_iter()
        .map(|d| d.expect("dense ids checked"))
        .collect();

    let links = load_pairs(&dir.join(LINKS_FILE), n)?;
    let friendships = load_pairs(&dir.join(FRIENDSHIPS_FILE), n)?;

    let int_path = dir.join(INTERESTS_FILE);
    let mut interests = vec![BTreeSet::new(); n];
    for (line, r) in rows(&int_path, &["node_id", "interest_id"])? {
        let id = parse_id(&int_path, line, "node_id", &r[0], n)?;
        let b: usize = parse(&int_path, line, "interest_id", &r[1])?;
        interests[id].insert(b);
    }

    let col_path = dir.join(COLLABORATIONS_FILE);
    let mut collaborations = Vec::new();
    for (line, r) in rows(&col_path, &["task_id", "members", "success"])? {
        let _task: usize = parse(&col_path, line, "task_id", &r[0])?;
        let members = r[1]
            .split(';')
            .map(|m| parse_id(&col_path, line, "member", m.trim(), n))
            .collect::<Result<Vec<usize>>>()?;
        if members.iter().collect::<BTreeSet<_>>().len() < 2 {
            return Err(Error::data(
                &col_path,
                line,
                "collaboration needs at least 2 distinct members",
            ));
        }
        let success = match r[2].as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::data(
                    &col_path,
                    line,
                    format!("success must be 0 or 1, got '{other}'"),
                ))
            }
        };
        collaborations.push(Collaboration { members, success });
    }

    let ds = Dataset {
        devices,
        links,
        friendships,
        interests,
        collaborations,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes the five CSV files into `dir` (created if missing), each atomically.
pub fn export_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut s = String::from("id,x,y,device_type\n");
    for d in &ds.devices {
        writeln!(s, "{},{:?},{:?},{}", d.id, d.x, d.y, d.device_type).unwrap();
    }
    write_atomic(dir.join(NODES_FILE), s.as_bytes())?;

    for (file, pairs) in [(LINKS_FILE, &ds.links), (FRIENDSHIPS_FILE, &ds.friendships)] {
        let mut s = String::from("src,dst\n");
        for (a, b) in pairs.iter() {
            writeln!(s, "{a},{b}").unwrap();
        }
        write_atomic(dir.join(file), s.as_bytes())?;
    }

    let mut s = String::from("node_id,interest_id\n");
    for (id, set) in ds.interests.iter().enumerate() {
        for b in set {
            writeln!(s, "{id},{b}").unwrap();
        }
    }
    write_atomic(dir.join(INTERESTS_FILE), s.as_bytes())?;

    let mut s = String::from("task_id,members,success\n");
    for (t, c) in ds.collaborations.iter().enumerate() {
        let members: Vec<String> = c.members.iter().map(|m| m.to_string()).collect();
        writeln!(s, "{t},{},{}", members.join(";"), u8::from(c.success)).unwrap();
    }
    write_atomic(dir.join(COLLABORATIONS_FILE), s.as_bytes())?;
    Ok(())
}
