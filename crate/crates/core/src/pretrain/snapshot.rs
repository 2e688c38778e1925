//! Versioned binary container for trained posteriors.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "IGCF"  version:u32  M:u64  N:u64  d:u64  K:u64  scheme:u8
//! teleport:f64  n_weights:u64  weights:f64×n_weights
//! mu:f64×(M+N)·d  rho:f64×(M+N)·d        (row-major, one row per node)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::VariationalParams;
use super::trainer::PretrainedModel;
use crate::error::{Error, Result};
use crate::graph::{EmbeddingMatrix, PropagationSpec, Scheme};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"IGCF";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Everything needed to rebuild a [`PretrainedModel`] on its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub num_users: usize,
    pub num_items: usize,
    pub spec: PropagationSpec,
    pub params: VariationalParams,
}

impl From<&PretrainedModel> for Snapshot {
    fn from(m: &PretrainedModel) -> Self {
        Self {
            num_users: m.num_users,
            num_items: m.num_items,
            spec: m.spec.clone(),
            params: m.params.clone(),
        }
    }
}

impl Snapshot {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.params.dim();
        if self.params.num_nodes() != self.num_users + self.num_items {
            return Err(Error::Dimension(format!(
                "snapshot params cover {} nodes, expected {}",
                self.params.num_nodes(),
                self.num_users + self.num_items
            )));
        }
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        for v in [self.num_users, self.num_items, d, self.spec.depth] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&[self.spec.scheme.tag()])?;
        w.write_all(&self.spec.teleport.to_le_bytes())?;
        w.write_all(&(self.spec.layer_weights.len() as u64).to_le_bytes())?;
        for a in &self.spec.layer_weights {
            w.write_all(&a.to_le_bytes())?;
        }
        for m in [&self.params.mu, &self.params.rho] {
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "magic")?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Data("not an embedding snapshot (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_array(r, "version")?);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Data(format!(
                "unsupported snapshot version {version} (expected {SNAPSHOT_VERSION})"
            )));
        }
        let num_users = read_len(r, "M")?;
        let num_items = read_len(r, "N")?;
        let dim = read_len(r, "d")?;
        let depth = read_len(r, "K")?;
        let [tag] = read_array::<1, _>(r, "scheme")?;
        let scheme = Scheme::from_tag(tag).ok_or_else(|| Error::Data(format!("unknown scheme tag {tag}")))?;
        let teleport = f64::from_le_bytes(read_array(r, "teleport")?);
        let n_weights = read_len(r, "weight count")?;
        if n_weights > depth + 1 {
            return Err(Error::Data(format!("{n_weights} layer weights for depth {depth}")));
        }
        let layer_weights = read_floats(r, n_weights, "layer weights")?;
        let spec = PropagationSpec {
            scheme,
            depth,
            layer_weights,
            teleport,
        };
        spec.validate()
            .map_err(|e| Error::Data(format!("snapshot carries an invalid spec: {e}")))?;

        let nodes = num_users
            .checked_add(num_items)
            .ok_or_else(|| Error::Data("node count overflows".into()))?;
        let len = nodes
            .checked_mul(dim)
            .ok_or_else(|| Error::Data("matrix size overflows".into()))?;
        let mu = EmbeddingMatrix::from_node_major(dim, nodes, read_floats(r, len, "mu")?)?;
        let rho = EmbeddingMatrix::from_node_major(dim, nodes, read_floats(r, len, "rho")?)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Data("trailing bytes after snapshot payload".into()));
        }
        Ok(Self {
            num_users,
            num_items,
            spec,
            params: VariationalParams::new(mu, rho)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// One row per node: `node,kind,index,mu_0..mu_{d-1},rho_0..rho_{d-1}`.
    /// Floats use Rust's shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.params.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["node".to_string(), "kind".into(), "index".into()];
        header.extend((0..d).map(|k| format!("mu_{k}")));
        header.extend((0..d).map(|k| format!("rho_{k}")));
        out.write_record(&header)?;
        for j in 0..self.params.num_nodes() {
            let (kind, index) = if j < self.num_users {
                ("user", j)
            } else {
                ("item", j - self.num_users)
            };
            let mut row = vec![j.to_string(), kind.into(), index.to_string()];
            row.extend(self.params.mu.column(j).iter().map(f64::to_string));
            row.extend(self.params.rho.column(j).iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Data(format!("snapshot truncated in {what}")),
        _ => Error::Io(e),
    })
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf, what)?;
    Ok(buf)
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = u64::from_le_bytes(read_array(r, what)?);
    usize::try_from(v).map_err(|_| Error::Data(format!("{what} = {v} does not fit in memory")))
}

fn read_floats<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    // Read in bounded chunks so a corrupt header cannot force a huge allocation.
    const CHUNK: usize = 1 << 16;
    let mut out = Vec::with_capacity(n.min(CHUNK));
    let mut buf = vec![0u8; 8 * n.min(CHUNK)];
    let mut left = n;
    while left > 0 {
        let take = left.min(CHUNK);
        read_exact(r, &mut buf[..8 * take], what)?;
        out.extend(
            buf[..8 * take]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))),
        );
        left -= take;
    }
    Ok(out)
}
