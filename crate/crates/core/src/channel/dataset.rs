//! CSI datasets, the 8:1:1 split rule and the "CSID" file format.
//!
//! File layout (little-endian): magic `CSID`, version `u32`, `K` `u32`,
//! `N_T` `u32`, sample count `u64`, then per sample the `N_T×K` real part
//! (row-major `f32`) followed by the imaginary part.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::config::SystemConfig;
use crate::channel::synth::{sample_rng, synth_channel};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, Tensor};

pub const MAGIC: [u8; 4] = *b"CSID";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    /// 8:1:1 split for `n >= 10`; smaller sets go entirely to training.
    pub fn for_len(n: usize) -> Split {
        split_dataset(n).unwrap_or(Split {
            train: 0..n,
            val: n..n,
            test: n..n,
        })
    }
}

/// Floor allocation of 10% validation and 10% test, remainder to training.
pub fn split_dataset(n: usize) -> Result<Split> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 samples to split, got {n}")));
    }
    let val = n / 10;
    let test = n / 10;
    let train = n - val - test;
    Ok(Split {
        train: 0..train,
        val: train..train + val,
        test: train + val..n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsiDataset {
    pub config: SystemConfig,
    pub samples: Vec<ComplexMatrix>,
    pub split: Split,
}

impl CsiDataset {
    pub fn new(config: SystemConfig, samples: Vec<ComplexMatrix>) -> Result<Self> {
        if let Some(bad) = samples
            .iter()
            .position(|s| s.rows() != config.n_t || s.cols() != config.k)
        {
            return Err(Error::ConfigMismatch(format!(
                "sample {bad} is {}x{}, expected {}x{}",
                samples[bad].rows(),
                samples[bad].cols(),
                config.n_t,
                config.k
            )));
        }
        let split = Split::for_len(samples.len());
        Ok(Self {
            config,
            samples,
            split,
        })
    }

    /// `n` synthetic samples; sample `i` uses stream `(config.seed, i)`.
    /// Values are rounded to `f32` so the in-memory set equals its file.
    pub fn generate(config: &SystemConfig, n: usize) -> Result<Self> {
        config.validate()?;
        let samples = (0..n)
            .map(|i| {
                let mut rng = sample_rng(config.seed, i as u64);
                quantize_f32(&synth_channel(config, &mut rng))
            })
            .collect();
        Self::new(config.clone(), samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train(&self) -> &[ComplexMatrix] {
        &self.samples[self.split.train.clone()]
    }

    pub fn val(&self) -> &[ComplexMatrix] {
        &self.samples[self.split.val.clone()]
    }

    pub fn test(&self) -> &[ComplexMatrix] {
        &self.samples[self.split.test.clone()]
    }

    /// Appends `extra` to the training portion, keeping validation and test
    /// samples unchanged.
    pub fn augment_train(&self, extra: &[ComplexMatrix]) -> Result<CsiDataset> {
        let mut samples: Vec<ComplexMatrix> = self.train().to_vec();
        samples.extend(extra.iter().cloned());
        let train = 0..samples.len();
        samples.extend(self.val().iter().cloned());
        let val = train.end..samples.len();
        samples.extend(self.test().iter().cloned());
        let test = val.end..samples.len();
        let out = CsiDataset::new(self.config.clone(), samples)?;
        Ok(CsiDataset {
            split: Split { train, val, test },
            ..out
        })
    }
}

pub fn quantize_f32(h: &ComplexMatrix) -> ComplexMatrix {
    let q = |t: &Tensor| t.map(|v| v as f32 as f64);
    ComplexMatrix::new(q(h.re()), q(h.im())).expect("same shape")
}

pub fn write_csid<W: Write>(out: &mut W, k: usize, n_t: usize, samples: &[ComplexMatrix]) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(k as u32).to_le_bytes())?;
    out.write_all(&(n_t as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        if s.rows() != n_t || s.cols() != k {
            return Err(Error::ConfigMismatch(format!(
                "sample is {}x{}, header says {n_t}x{k}",
                s.rows(),
                s.cols()
            )));
        }
        for part in [s.re(), s.im()] {
            for v in part.data() {
                out.write_all(&(*v as f32).to_le_bytes())?;
            }
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

/// Returns `(K, N_T, samples)`.
pub fn read_csid<R: Read>(input: &mut R) -> Result<(usize, usize, Vec<ComplexMatrix>)> {
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
    read_exact(input, &mut w4, "K")?;
    let k = u32::from_le_bytes(w4) as usize;
    read_exact(input, &mut w4, "N_T")?;
    let n_t = u32::from_le_bytes(w4) as usize;
    let mut w8 = [0u8; 8];
    read_exact(input, &mut w8, "count")?;
    let count = u64::from_le_bytes(w8) as usize;
    let per = n_t * k;
    let mut buf = vec![0u8; per * 8];
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        read_exact(input, &mut buf, &format!("sample {i} of {count}"))?;
        let vals: Vec<f64> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect();
        let re = Tensor::matrix(n_t, k, vals[..per].to_vec())?;
        let im = Tensor::matrix(n_t, k, vals[per..].to_vec())?;
        samples.push(ComplexMatrix::new(re, im)?);
    }
    Ok((k, n_t, samples))
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &CsiDataset) -> Result<()> {
    dataset.config.validate()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csid(&mut f, dataset.config.k, dataset.config.n_t, &dataset.samples)?;
    f.flush()?;
    Ok(())
}

/// Reads a dataset file. With `expected`, the header dimensions must match
/// and the returned dataset carries that config; otherwise a default
/// config with the file's dimensions is used.
pub fn read_dataset(path: impl AsRef<Path>, expected: Option<&SystemConfig>) -> Result<CsiDataset> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let (k, n_t, samples) = read_csid(&mut f)?;
    let config = match expected {
        Some(cfg) => {
            if cfg.k != k || cfg.n_t != n_t {
                return Err(Error::ConfigMismatch(format!(
                    "file holds K={k}, N_T={n_t}; expected K={}, N_T={}",
                    cfg.k, cfg.n_t
                )));
            }
            cfg.clone()
        }
        None => SystemConfig::new(k, n_t),
    };
    CsiDataset::new(config, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_examples() {
        let s = split_dataset(10).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        let s = split_dataset(10_000).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8000, 1000, 1000));
        let s = split_dataset(11).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (9, 1, 1));
        assert!(split_dataset(9).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_indices(n in 10usize..5000) {
            let s = split_dataset(n).unwrap();
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.val.start);
            prop_assert_eq!(s.val.end, s.test.start);
            prop_assert_eq!(s.test.end, n);
            prop_assert!(s.train.len() >= 8 * n / 10);
        }
    }

    #[test]
    fn round_trip() {
        let cfg = SystemConfig::new(3, 4).with_seed(7);
        let ds = CsiDataset::generate(&cfg, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csid");
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path, Some(&cfg)).unwrap();
        assert_eq!(back, ds);
        let wrong = SystemConfig::new(2, 4);
        assert!(matches!(read_dataset(&path, Some(&wrong)), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn header_layout_and_corruption() {
        let cfg = SystemConfig::new(2, 3);
        let ds = CsiDataset::generate(&cfg, 2).unwrap();
        let mut buf = Vec::new();
        write_csid(&mut buf, 2, 3, &ds.samples).unwrap();
        assert_eq!(&buf[..4], b"CSID");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 24 + 2 * 2 * 6 * 4);
        // first f32 is Re(H[0,0]) of sample 0; the 7th is Im(H[0,0])
        let first = f32::from_le_bytes(buf[24..28].try_into().unwrap()) as f64;
        assert_eq!(first, ds.samples[0].get(0, 0).0);
        let im = f32::from_le_bytes(buf[48..52].try_into().unwrap()) as f64;
        assert_eq!(im, ds.samples[0].get(0, 0).1);

        let mut bad = buf.clone();
        bad[1] = b'X';
        let err = read_csid(&mut bad.as_slice()).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
        let short = &buf[..buf.len() - 1];
        assert!(matches!(read_csid(&mut &short[..]), Err(Error::Truncated(_))));
    }

    #[test]
    fn empty_dataset() {
        let cfg = SystemConfig::new(2, 2);
        let ds = CsiDataset::new(cfg.clone(), vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csid");
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path, Some(&cfg)).unwrap();
        assert!(back.is_empty());
        assert_eq!(back, ds);
    }

    #[test]
    fn augmenting_with_nothing_is_a_no_op() {
        let ds = CsiDataset::generate(&SystemConfig::new(2, 2), 20).unwrap();
        assert_eq!(ds.augment_train(&[]).unwrap(), ds);
        let extra = CsiDataset::generate(&SystemConfig::new(2, 2).with_seed(1), 5).unwrap();
        let aug = ds.augment_train(&extra.samples).unwrap();
        assert_eq!(aug.train().len(), 21);
        assert_eq!(aug.val(), ds.val());
        assert_eq!(aug.test(), ds.test());
    }
}
