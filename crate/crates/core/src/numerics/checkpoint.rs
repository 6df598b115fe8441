//! "BSWT" named-tensor container.
//!
//! Layout (little-endian): magic `BSWT`, version `u32`, entry count `u32`,
//! then per entry a `u16` name length, the UTF-8 name, a `u8` rank, one
//! `u32` per dimension and the row-major `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::params::ParamStore;
use crate::numerics::Tensor;

pub const MAGIC: [u8; 4] = *b"BSWT";
pub const VERSION: u32 = 1;

pub fn write_tensors<W: Write>(out: &mut W, entries: &[(&str, &Tensor)]) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::InvalidArgument(format!("tensor name too long: {name}")))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(bytes)?;
        let rank = u8::try_from(t.shape().len())
            .map_err(|_| Error::InvalidArgument(format!("rank too large for {name}")))?;
        out.write_all(&[rank])?;
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidArgument(format!("dimension too large for {name}")))?;
            out.write_all(&d.to_le_bytes())?;
        }
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(what.to_string()),
        _ => Error::Io(e),
    })
}

pub fn read_tensors<R: Read>(input: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    read_exact(input, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let mut w4 = [0u8; 4];
    read_exact(input, &mut w4, "version")?;
    let version = u32::from_le_bytes(w4);
    if version != VERSION {
        return Err(Error::Version(version));
    }
    read_exact(input, &mut w4, "entry count")?;
    let count = u32::from_le_bytes(w4);
    let mut entries = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let mut w2 = [0u8; 2];
        read_exact(input, &mut w2, "name length")?;
        let mut name = vec![0u8; u16::from_le_bytes(w2) as usize];
        read_exact(input, &mut name, "name")?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::InvalidArgument("tensor name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        read_exact(input, &mut rank, "rank")?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            read_exact(input, &mut w4, "dims")?;
            shape.push(u32::from_le_bytes(w4) as usize);
        }
        let n: usize = shape.iter().product();
        let mut payload = vec![0u8; n * 8];
        read_exact(input, &mut payload, &format!("payload of `{name}`"))?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        entries.push((name, Tensor::new(shape, data)?));
    }
    Ok(entries)
}

pub fn save_store(path: impl AsRef<Path>, store: &ParamStore) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let entries: Vec<(&str, &Tensor)> = store.iter().collect();
    write_tensors(&mut f, &entries)?;
    f.flush()?;
    Ok(())
}

/// Reads a checkpoint into a fresh store preserving file order.
pub fn load_store(path: impl AsRef<Path>) -> Result<ParamStore> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut store = ParamStore::new();
    for (name, t) in read_tensors(&mut f)? {
        store.insert(name, t);
    }
    Ok(store)
}
