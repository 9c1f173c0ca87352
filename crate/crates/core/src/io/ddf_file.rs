//! The `TUSDDF01` binary DDF container.
//!
//! A 24-byte header (magic, then frame count, width, height and landmark
//! count as little-endian `u32`) followed by four little-endian `f32`
//! arrays: GP, GL, LP, LL.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::ddf::DdfSet;
use crate::error::{Error, Result};
use crate::metrics::{
    add_errors_le_f32, finish, mean_of_parts, mean_point_error, CompensatedSum, ScanMetricReport,
};

pub const MAGIC: [u8; 8] = *b"TUSDDF01";
pub const HEADER_LEN: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatHeader {
    pub frame_count: u32,
    pub width: u32,
    pub height: u32,
    pub landmark_count: u32,
}

impl FormatHeader {
    pub fn of(ddf: &DdfSet) -> Self {
        Self {
            frame_count: ddf.frame_count,
            width: ddf.width,
            height: ddf.height,
            landmark_count: ddf.landmark_count,
        }
    }

    /// Values per dense frame.
    pub fn frame_len(&self) -> u64 {
        self.width as u64 * self.height as u64 * 3
    }

    /// Values in one dense section (GP or LP).
    pub fn dense_values(&self) -> u64 {
        self.frame_count.saturating_sub(1) as u64 * self.frame_len()
    }

    /// Values in one landmark section (GL or LL).
    pub fn landmark_values(&self) -> u64 {
        self.landmark_count as u64 * 3
    }

    /// Total file size in bytes.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + 4 * 2 * (self.dense_values() + self.landmark_values())
    }

    /// Byte offsets of GP, GL, LP and LL.
    pub fn section_offsets(&self) -> [u64; 4] {
        let dense = 4 * self.dense_values();
        let sparse = 4 * self.landmark_values();
        let gp = HEADER_LEN;
        [gp, gp + dense, gp + dense + sparse, gp + 2 * dense + sparse]
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[..8].copy_from_slice(&MAGIC);
        for (k, v) in [
            self.frame_count,
            self.width,
            self.height,
            self.landmark_count,
        ]
        .iter()
        .enumerate()
        {
            out[8 + 4 * k..12 + 4 * k].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the header of a file whose total size is `actual_len`.
    pub fn parse(bytes: &[u8], actual_len: u64) -> Result<Self> {
        if bytes.len() < MAGIC.len() {
            return Err(Error::SizeMismatch {
                expected: HEADER_LEN,
                actual: actual_len,
            });
        }
        if bytes[..8] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"TUSDDF01\"",
                String::from_utf8_lossy(&bytes[..8])
            )));
        }
        if bytes.len() < HEADER_LEN as usize {
            return Err(Error::SizeMismatch {
                expected: HEADER_LEN,
                actual: actual_len,
            });
        }
        let word = |k: usize| {
            u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().expect("4 bytes"))
        };
        let header = Self {
            frame_count: word(0),
            width: word(1),
            height: word(2),
            landmark_count: word(3),
        };
        if header.frame_count < 2 || header.width == 0 || header.height == 0 {
            return Err(Error::Format(format!(
                "header declares N={} {}x{}; need N >= 2 and nonzero dimensions",
                header.frame_count, header.width, header.height
            )));
        }
        if header.file_len() != actual_len {
            return Err(Error::SizeMismatch {
                expected: header.file_len(),
                actual: actual_len,
            });
        }
        Ok(header)
    }
}

fn put_f32s(out: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn f32s_to_f64(bytes: &[u8], out: &mut [f64]) {
    for (dst, chunk) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *dst = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
    }
}

fn write_to(out: &mut impl Write, ddf: &DdfSet) -> std::io::Result<()> {
    out.write_all(&FormatHeader::of(ddf).to_bytes())?;
    for section in [&ddf.gp, &ddf.gl, &ddf.lp, &ddf.ll] {
        put_f32s(out, section)?;
    }
    Ok(())
}

pub fn encode_ddf(ddf: &DdfSet) -> Result<Vec<u8>> {
    ddf.check_shape()?;
    let mut out = Vec::with_capacity(FormatHeader::of(ddf).file_len() as usize);
    write_to(&mut out, ddf).expect("writing to memory");
    Ok(out)
}

pub fn decode_ddf(bytes: &[u8]) -> Result<DdfSet> {
    let header = FormatHeader::parse(bytes, bytes.len() as u64)?;
    let offsets = header.section_offsets();
    let section = |k: usize, n: u64| {
        let start = offsets[k] as usize;
        let mut v = vec![0.0; n as usize];
        f32s_to_f64(&bytes[start..start + 4 * n as usize], &mut v);
        v
    };
    Ok(DdfSet {
        width: header.width,
        height: header.height,
        frame_count: header.frame_count,
        landmark_count: header.landmark_count,
        gp: section(0, header.dense_values()),
        gl: section(1, header.landmark_values()),
        lp: section(2, header.dense_values()),
        ll: section(3, header.landmark_values()),
    })
}

pub fn write_ddf(path: &Path, ddf: &DdfSet) -> Result<()> {
    ddf.check_shape()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_to(&mut out, ddf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_ddf(path: &Path) -> Result<DdfSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ddf(&bytes)
}

/// An opened DDF file whose header and size have been checked. Sections are
/// read lazily, so dense fields can be streamed a frame at a time.
#[derive(Debug, Clone)]
pub struct DdfFile {
    path: PathBuf,
    header: FormatHeader,
}

impl DdfFile {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut head = Vec::with_capacity(HEADER_LEN as usize);
        Read::by_ref(&mut file)
            .take(HEADER_LEN)
            .read_to_end(&mut head)
            .map_err(|e| Error::io(path, e))?;
        let header = FormatHeader::parse(&head, len)?;
        Ok(Self {
            path: path.to_path_buf(),
            header,
        })
    }

    pub fn header(&self) -> &FormatHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn read_section(&self, k: usize, values: u64) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; 4 * values as usize];
        self.section_file(k)?
            .read_exact(&mut bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut out = vec![0.0; values as usize];
        f32s_to_f64(&bytes, &mut out);
        Ok(out)
    }

    /// Unbuffered reader positioned at section `k`.
    fn section_file(&self, k: usize) -> Result<File> {
        let mut file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        file.seek(SeekFrom::Start(self.header.section_offsets()[k]))
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(file)
    }
}

/// Bytes read from each file per step: 5461 points, far below one frame.
const CHUNK_BYTES: usize = 12 * 5461;

/// Mean error of dense section `k`, streamed through two fixed chunk
/// buffers. Each frame is still summed on its own, in point order.
fn streamed_dense_error(pred: &DdfFile, gt: &DdfFile, k: usize) -> Result<f64> {
    let h = gt.header;
    let frames = h.frame_count as usize - 1;
    let frame_bytes = 4 * h.frame_len() as usize;
    let (mut pf, mut gf) = (pred.section_file(k)?, gt.section_file(k)?);
    let chunk = CHUNK_BYTES.min(frame_bytes);
    let mut pbuf = vec![0u8; chunk];
    let mut gbuf = vec![0u8; chunk];
    let mut parts = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut acc = CompensatedSum::default();
        let mut left = frame_bytes;
        while left > 0 {
            let n = left.min(chunk);
            pf.read_exact(&mut pbuf[..n])
                .map_err(|e| Error::io(&pred.path, e))?;
            gf.read_exact(&mut gbuf[..n])
                .map_err(|e| Error::io(&gt.path, e))?;
            add_errors_le_f32(&mut acc, &pbuf[..n], &gbuf[..n]);
            left -= n;
        }
        parts.push(acc);
    }
    Ok(mean_of_parts(&parts, frames * h.frame_len() as usize / 3))
}

/// Scores two DDF files without holding a whole frame of either in memory.
/// Results equal [`crate::metrics::evaluate_scan`] on the decoded sets.
pub fn evaluate_ddf_files(
    pred: &DdfFile,
    gt: &DdfFile,
    runtime_s: f64,
    limit_s: f64,
) -> Result<ScanMetricReport> {
    if pred.header != gt.header {
        let (p, g) = (pred.header, gt.header);
        return Err(Error::invalid(format!(
            "prediction is N={} {}x{} L={}, ground truth N={} {}x{} L={}",
            p.frame_count,
            p.width,
            p.height,
            p.landmark_count,
            g.frame_count,
            g.width,
            g.height,
            g.landmark_count
        )));
    }
    let h = gt.header;
    let gpe = streamed_dense_error(pred, gt, 0)?;
    let lpe = streamed_dense_error(pred, gt, 2)?;
    let gle = mean_point_error(
        &pred.read_section(1, h.landmark_values())?,
        &gt.read_section(1, h.landmark_values())?,
    )?;
    let lle = mean_point_error(
        &pred.read_section(3, h.landmark_values())?,
        &gt.read_section(3, h.landmark_values())?,
    )?;
    Ok(finish(gpe, gle, lpe, lle, runtime_s, limit_s))
}
