//! Little-endian binary containers for codebooks, feature maps, assignment
//! maps and saliency maps.
//!
//! Every file starts with a four byte magic and a `u32` version (currently 1),
//! followed by `u32` dimensions and a flat row-major payload.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::codebook::{AssignmentMap, Codebook, LocalFeatureMap};
use crate::corpus::write_bytes;
use crate::encoder::SaliencyMap;
use crate::error::{Error, Result};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"EGOC";
pub const FEATURE_MAGIC: &[u8; 4] = b"EGOF";
pub const ASSIGNMENT_MAGIC: &[u8; 4] = b"EGOA";
pub const SALIENCY_MAGIC: &[u8; 4] = b"EGOS";
pub const VERSION: u32 = 1;

struct Reader<'a> {
    path: &'a Path,
    cur: Cursor<Vec<u8>>,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path, magic: &[u8; 4]) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader {
            path,
            cur: Cursor::new(bytes),
        };
        r.expect_magic(magic)?;
        Ok(r)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }

    fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let mut got = [0u8; 4];
        self.cur
            .read_exact(&mut got)
            .map_err(|_| self.err("truncated header"))?;
        if &got != magic {
            return Err(self.err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(self.err(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur
            .read_u32::<LittleEndian>()
            .map_err(|_| self.err("truncated header"))
    }

    fn dim(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn check_payload(&self, count: usize, elem: usize) -> Result<()> {
        let remaining = self.cur.get_ref().len() as u64 - self.cur.position();
        let want = count as u64 * elem as u64;
        if remaining != want {
            return Err(self.err(format!("payload is {remaining} bytes, header implies {want}")));
        }
        Ok(())
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        self.check_payload(count, 4)?;
        let mut out = vec![0f32; count];
        self.cur
            .read_f32_into::<LittleEndian>(&mut out)
            .map_err(|_| self.err("truncated payload"))?;
        Ok(out)
    }

    fn u32s(&mut self, count: usize) -> Result<Vec<u32>> {
        self.check_payload(count, 4)?;
        let mut out = vec![0u32; count];
        self.cur
            .read_u32_into::<LittleEndian>(&mut out)
            .map_err(|_| self.err("truncated payload"))?;
        Ok(out)
    }
}

fn header(magic: &[u8; 4], dims: &[usize], payload_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * payload_len);
    out.extend_from_slice(magic);
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    for &d in dims {
        out.write_u32::<LittleEndian>(d as u32).unwrap();
    }
    out
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for &v in values {
        out.write_f32::<LittleEndian>(v).unwrap();
    }
}

fn with_context(path: &Path, e: Error) -> Error {
    match e {
        Error::DimensionMismatch(message) | Error::InvalidArgument(message) => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}

pub fn encode_codebook(cb: &Codebook) -> Vec<u8> {
    let mut out = header(CODEBOOK_MAGIC, &[cb.len(), cb.dim()], cb.centroids().len());
    push_f32s(&mut out, cb.centroids());
    out
}

pub fn write_codebook(path: impl AsRef<Path>, cb: &Codebook) -> Result<()> {
    write_bytes(path.as_ref(), &encode_codebook(cb))
}

pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let mut r = Reader::open(path, CODEBOOK_MAGIC)?;
    let k = r.dim()?;
    let d = r.dim()?;
    let values = r.f32s(k * d)?;
    Codebook::from_centroids(k, d, values).map_err(|e| with_context(path, e))
}

pub fn encode_feature_map(fm: &LocalFeatureMap) -> Vec<u8> {
    let mut out = header(FEATURE_MAGIC, &[fm.rows(), fm.cols(), fm.dim()], fm.values().len());
    push_f32s(&mut out, fm.values());
    out
}

pub fn write_feature_map(path: impl AsRef<Path>, fm: &LocalFeatureMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_feature_map(fm))
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<LocalFeatureMap> {
    let path = path.as_ref();
    let mut r = Reader::open(path, FEATURE_MAGIC)?;
    let (h, w, d) = (r.dim()?, r.dim()?, r.dim()?);
    let values = r.f32s(h * w * d)?;
    LocalFeatureMap::new(h, w, d, values).map_err(|e| with_context(path, e))
}

pub fn encode_assignment_map(am: &AssignmentMap) -> Vec<u8> {
    let mut out = header(ASSIGNMENT_MAGIC, &[am.rows(), am.cols()], am.words().len());
    for &w in am.words() {
        out.write_u32::<LittleEndian>(w).unwrap();
    }
    out
}

pub fn write_assignment_map(path: impl AsRef<Path>, am: &AssignmentMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_assignment_map(am))
}

pub fn read_assignment_map(path: impl AsRef<Path>) -> Result<AssignmentMap> {
    let path = path.as_ref();
    let mut r = Reader::open(path, ASSIGNMENT_MAGIC)?;
    let (h, w) = (r.dim()?, r.dim()?);
    let words = r.u32s(h * w)?;
    AssignmentMap::new(h, w, words).map_err(|e| with_context(path, e))
}

pub fn encode_saliency_map(s: &SaliencyMap) -> Vec<u8> {
    let mut out = header(SALIENCY_MAGIC, &[s.rows(), s.cols()], s.values().len());
    push_f32s(&mut out, s.values());
    out
}

pub fn write_saliency_map(path: impl AsRef<Path>, s: &SaliencyMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_saliency_map(s))
}

pub fn read_saliency_map(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let mut r = Reader::open(path, SALIENCY_MAGIC)?;
    let (h, w) = (r.dim()?, r.dim()?);
    let values = r.f32s(h * w)?;
    SaliencyMap::new(h, w, values).map_err(|e| with_context(path, e))
}

/// What a manifest `feature_ref` points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Features,
    Assignments,
}

pub fn sniff_map_kind(path: impl AsRef<Path>) -> Result<MapKind> {
    let path = path.as_ref();
    let mut magic = [0u8; 4];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    match &magic {
        m if m == FEATURE_MAGIC => Ok(MapKind::Features),
        m if m == ASSIGNMENT_MAGIC => Ok(MapKind::Assignments),
        _ => Err(Error::Format {
            path: path.to_path_buf(),
            message: "neither a feature map nor an assignment map".into(),
        }),
    }
}

/// Reads `(rows, cols)` from the header of a feature or assignment map file
/// without loading the payload.
pub fn read_grid_dims(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 16];
    f.read_exact(&mut head).map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: "truncated header".into(),
    })?;
    let mut cur = Cursor::new(&head[..]);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).unwrap();
    if &magic != FEATURE_MAGIC && &magic != ASSIGNMENT_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "neither a feature map nor an assignment map".into(),
        });
    }
    let _version = cur.read_u32::<LittleEndian>().unwrap();
    let rows = cur.read_u32::<LittleEndian>().unwrap() as usize;
    let cols = cur.read_u32::<LittleEndian>().unwrap() as usize;
    Ok((rows, cols))
}
