//! Binary file formats.
//!
//! `MPFV` (volumes), little-endian:
//! magic `MPFV`, format version (u32), nx ny nz (u32 each), voxel_size (f64),
//! origin (3 × f64), then nx·ny·nz samples as f32, x fastest.
//!
//! `MPFS` (sinograms) mirrors the volume layout: magic `MPFS`, version (u32),
//! geometry mode (u32: 0 parallel3d, 1 conebeam), num_views, det_rows,
//! det_channels (u32 each), det_pixel_size, source_to_iso, source_to_det
//! (f64 each), view angles (num_views × f64), then data and weights as f32,
//! channel fastest.
//!
//! Round-trips are bit-exact on the stored f32 payloads.

use crate::error::{Error, Result};
use crate::geometry::{GeometryMode, ScanGeometry};
use crate::sinogram::Sinogram;
use crate::volume::Volume;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const VOLUME_MAGIC: &[u8; 4] = b"MPFV";
const SINOGRAM_MAGIC: &[u8; 4] = b"MPFS";
const FORMAT_VERSION: u32 = 1;

struct Reader<'p, R> {
    inner: R,
    path: &'p str,
}

impl<'p, R: Read> Reader<'p, R> {
    fn exact(&mut self, buf: &mut [u8], field: &'static str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.path, field, "file truncated while reading this field")
            } else {
                Error::io(self.path, e)
            }
        })
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, field)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, field: &'static str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.exact(&mut b, field)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f32_block(&mut self, count: usize, field: &'static str) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; count * 4];
        self.exact(&mut bytes, field)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut m = [0u8; 4];
        self.exact(&mut m, "magic")?;
        if &m != expected {
            return Err(Error::format(
                self.path,
                "magic",
                format!(
                    "expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(&m)
                ),
            ));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(
                self.path,
                "version",
                format!("unsupported version {v}, this build reads {FORMAT_VERSION}"),
            ));
        }
        Ok(())
    }

    /// The payload must end exactly here.
    fn expect_eof(&mut self, field: &'static str) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::format(
                self.path,
                field,
                "trailing bytes after the declared payload",
            )),
            Err(e) => Err(Error::io(self.path, e)),
        }
    }
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn put(w: &mut impl Write, bytes: &[u8], path: &Path) -> Result<()> {
    w.write_all(bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes a volume in the `MPFV` format. Samples are quantized to f32.
pub fn write_volume(path: &Path, v: &Volume) -> Result<()> {
    let mut w = open_writer(path)?;
    put(&mut w, VOLUME_MAGIC, path)?;
    put(&mut w, &FORMAT_VERSION.to_le_bytes(), path)?;
    let (nx, ny, nz) = v.dims();
    for n in [nx, ny, nz] {
        put(&mut w, &(n as u32).to_le_bytes(), path)?;
    }
    put(&mut w, &v.voxel_size.to_le_bytes(), path)?;
    for o in v.origin {
        put(&mut w, &o.to_le_bytes(), path)?;
    }
    for &val in v.data() {
        put(&mut w, &(val as f32).to_le_bytes(), path)?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a volume written by [`write_volume`].
pub fn read_volume(path: &Path) -> Result<Volume> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path_str.clone(), e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path: &path_str,
    };
    r.magic(VOLUME_MAGIC)?;
    r.version()?;
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let nz = r.u32("nz")? as usize;
    let voxel_size = r.f64("voxel_size")?;
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::format(
            &path_str,
            "voxel_size",
            format!("must be a positive finite number, got {voxel_size}"),
        ));
    }
    let origin = [r.f64("origin")?, r.f64("origin")?, r.f64("origin")?];
    let n = nx
        .checked_mul(ny)
        .and_then(|p| p.checked_mul(nz))
        .ok_or_else(|| Error::format(&path_str, "nx", "dimensions overflow"))?;
    let data = r.f32_block(n, "data")?;
    r.expect_eof("data")?;
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::format(&path_str, "data", "contains non-finite samples"));
    }
    Volume::from_data((nx, ny, nz), voxel_size, origin, data)
        .map_err(|e| Error::format(&path_str, "data", e.to_string()))
}

/// Writes a sinogram in the `MPFS` format. Data and weights quantize to f32.
pub fn write_sinogram(path: &Path, s: &Sinogram) -> Result<()> {
    let mut w = open_writer(path)?;
    let g = &s.geometry;
    put(&mut w, SINOGRAM_MAGIC, path)?;
    put(&mut w, &FORMAT_VERSION.to_le_bytes(), path)?;
    let mode = match g.mode {
        GeometryMode::Parallel3d => 0u32,
        GeometryMode::Conebeam => 1u32,
    };
    put(&mut w, &mode.to_le_bytes(), path)?;
    for n in [g.num_views(), g.det_rows, g.det_channels] {
        put(&mut w, &(n as u32).to_le_bytes(), path)?;
    }
    for x in [g.det_pixel_size, g.source_to_iso, g.source_to_det] {
        put(&mut w, &x.to_le_bytes(), path)?;
    }
    for &a in &g.view_angles {
        put(&mut w, &a.to_le_bytes(), path)?;
    }
    for &val in s.data() {
        put(&mut w, &(val as f32).to_le_bytes(), path)?;
    }
    for &val in s.weights() {
        put(&mut w, &(val as f32).to_le_bytes(), path)?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a sinogram written by [`write_sinogram`].
pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path_str.clone(), e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path: &path_str,
    };
    r.magic(SINOGRAM_MAGIC)?;
    r.version()?;
    let mode = match r.u32("mode")? {
        0 => GeometryMode::Parallel3d,
        1 => GeometryMode::Conebeam,
        m => {
            return Err(Error::format(
                &path_str,
                "mode",
                format!("unknown geometry mode {m}"),
            ))
        }
    };
    let num_views = r.u32("num_views")? as usize;
    let det_rows = r.u32("det_rows")? as usize;
    let det_channels = r.u32("det_channels")? as usize;
    let det_pixel_size = r.f64("det_pixel_size")?;
    let source_to_iso = r.f64("source_to_iso")?;
    let source_to_det = r.f64("source_to_det")?;
    let mut view_angles = Vec::with_capacity(num_views);
    for _ in 0..num_views {
        view_angles.push(r.f64("view_angles")?);
    }
    let geometry = ScanGeometry {
        mode,
        view_angles,
        det_rows,
        det_channels,
        det_pixel_size,
        source_to_iso,
        source_to_det,
    };
    geometry
        .validate()
        .map_err(|e| Error::format(&path_str, "geometry", e.to_string()))?;
    let n = geometry.num_samples();
    let data = r.f32_block(n, "data")?;
    let weights = r.f32_block(n, "weights")?;
    r.expect_eof("weights")?;
    Sinogram::new(geometry, data, weights)
        .map_err(|e| Error::format(&path_str, "data", e.to_string()))
}
