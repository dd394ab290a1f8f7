//! Recorded centerline trajectories with CSV and OBJ export.
//!
//! The CSV layout is one row per node per frame: `time,node,x,y,z`. Floats
//! are written in shortest round-trip form, so reading a file back gives the
//! exact recorded values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub time: f64,
    pub nodes: Vec<Vec3>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub frames: Vec<TraceFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    time: f64,
    node: usize,
    x: f64,
    y: f64,
    z: f64,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, nodes: &[Vec3]) {
        self.frames.push(TraceFrame {
            time,
            nodes: nodes.to_vec(),
        });
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for f in &self.frames {
            for (node, p) in f.nodes.iter().enumerate() {
                out.serialize(Row {
                    time: f.time,
                    node,
                    x: p.x,
                    y: p.y,
                    z: p.z,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut trace = Trace::new();
        let mut rdr = csv::Reader::from_reader(r);
        for row in rdr.deserialize() {
            let row: Row = row?;
            let start_new = match trace.frames.last() {
                None => true,
                Some(f) => row.node == 0 || f.time != row.time,
            };
            if start_new {
                if row.node != 0 {
                    return Err(RodError::Io(format!("frame at t = {} does not start at node 0", row.time)));
                }
                trace.frames.push(TraceFrame {
                    time: row.time,
                    nodes: Vec::new(),
                });
            }
            let frame = trace.frames.last_mut().expect("frame exists");
            if row.node != frame.nodes.len() {
                return Err(RodError::Io(format!("node {} out of order at t = {}", row.node, row.time)));
            }
            frame.nodes.push(Vec3::new(row.x, row.y, row.z));
        }
        Ok(trace)
    }

    /// One polyline object per frame.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        let mut offset = 1;
        for (k, f) in self.frames.iter().enumerate() {
            writeln!(w, "o frame_{k}")?;
            writeln!(w, "# t = {}", f.time)?;
            for p in &f.nodes {
                writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
            }
            if f.nodes.len() >= 2 {
                write!(w, "l")?;
                for i in 0..f.nodes.len() {
                    write!(w, " {}", offset + i)?;
                }
                writeln!(w)?;
            }
            offset += f.nodes.len();
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        self.write_csv(f)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }

    pub fn save_obj(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        self.write_obj(&mut f)?;
        f.flush()?;
        Ok(())
    }
}
