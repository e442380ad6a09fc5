//! Binary mode-cache files.
//!
//! Layout (little-endian): header { magic "KSAVMODE", version u32, operator
//! tag u8, N u32, L f64, kernel parameters, quadrature orders, table length
//! u64, checksum u64 } followed by the raw complex tables in row-major mode
//! order. The checksum is FNV-1a over the table bytes; round trips are
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;

use crate::collision::{
    BoltzmannKernel, BoltzmannModes, CollisionOperator, LandauKernel, LandauModes,
};
use crate::error::CacheError;
use crate::grid::VelocityGrid;

const MAGIC: &[u8; 8] = b"KSAVMODE";
const VERSION: u32 = 1;
const TAG_BOLTZMANN: u8 = 1;
const TAG_LANDAU: u8 = 2;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn table_bytes(tables: &[&[Complex64]]) -> (u64, u64) {
    let mut hash = FNV_OFFSET;
    let mut count = 0u64;
    let mut buf = [0u8; 16];
    for t in tables {
        count += t.len() as u64;
        for z in t.iter() {
            buf[..8].copy_from_slice(&z.re.to_le_bytes());
            buf[8..].copy_from_slice(&z.im.to_le_bytes());
            hash = fnv1a(hash, &buf);
        }
    }
    (hash, count)
}

fn write_table<W: Write>(w: &mut W, t: &[Complex64]) -> std::io::Result<()> {
    for z in t {
        w.write_f64::<LittleEndian>(z.re)?;
        w.write_f64::<LittleEndian>(z.im)?;
    }
    Ok(())
}

/// Reads a table of `len` complex entries, folding truncation into
/// CorruptFile and updating the running checksum.
fn read_table<R: Read>(r: &mut R, len: usize, hash: &mut u64) -> Result<Vec<Complex64>, CacheError> {
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 16];
    for _ in 0..len {
        r.read_exact(&mut buf).map_err(truncated)?;
        *hash = fnv1a(*hash, &buf);
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

fn truncated(e: std::io::Error) -> CacheError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        CacheError::CorruptFile("truncated table section".into())
    } else {
        CacheError::Io(e)
    }
}

struct Header {
    tag: u8,
    n: u32,
    l: f64,
    kernel: [f64; 4],
    m_r: u32,
    m_th: u32,
    table_len: u64,
    checksum: u64,
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(h.tag)?;
    w.write_u32::<LittleEndian>(h.n)?;
    w.write_f64::<LittleEndian>(h.l)?;
    for k in h.kernel {
        w.write_f64::<LittleEndian>(k)?;
    }
    w.write_u32::<LittleEndian>(h.m_r)?;
    w.write_u32::<LittleEndian>(h.m_th)?;
    w.write_u64::<LittleEndian>(h.table_len)?;
    w.write_u64::<LittleEndian>(h.checksum)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<Header, CacheError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != VERSION {
        return Err(CacheError::BadVersion(version));
    }
    let tag = r.read_u8().map_err(truncated)?;
    let n = r.read_u32::<LittleEndian>().map_err(truncated)?;
    let l = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let mut kernel = [0.0; 4];
    for k in kernel.iter_mut() {
        *k = r.read_f64::<LittleEndian>().map_err(truncated)?;
    }
    let m_r = r.read_u32::<LittleEndian>().map_err(truncated)?;
    let m_th = r.read_u32::<LittleEndian>().map_err(truncated)?;
    let table_len = r.read_u64::<LittleEndian>().map_err(truncated)?;
    let checksum = r.read_u64::<LittleEndian>().map_err(truncated)?;
    Ok(Header {
        tag,
        n,
        l,
        kernel,
        m_r,
        m_th,
        table_len,
        checksum,
    })
}

fn expect(field: &str, ok: bool) -> Result<(), CacheError> {
    if ok {
        Ok(())
    } else {
        Err(CacheError::MetadataMismatch(field.into()))
    }
}

impl BoltzmannModes {
    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let beta = self.beta_table();
        let loss = self.loss_table();
        let loss_slice = loss.as_slice().expect("contiguous");
        let (checksum, table_len) = table_bytes(&[beta, loss_slice]);
        let k = self.kernel();
        let (m_r, m_th) = self.quadrature_orders();
        let mut w = BufWriter::new(File::create(path)?);
        write_header(
            &mut w,
            &Header {
                tag: TAG_BOLTZMANN,
                n: self.grid().modes() as u32,
                l: self.grid().half_width(),
                kernel: [k.constant, k.gamma, k.angular, k.radius],
                m_r: m_r as u32,
                m_th: m_th as u32,
                table_len,
                checksum,
            },
        )?;
        write_table(&mut w, beta)?;
        write_table(&mut w, loss_slice)?;
        w.flush()?;
        Ok(())
    }

    /// Load a cached table; every metadata field must match the request.
    pub fn load(
        path: &Path,
        grid: VelocityGrid,
        kernel: BoltzmannKernel,
        m_r: usize,
        m_th: usize,
    ) -> Result<Self, CacheError> {
        let mut r = BufReader::new(File::open(path)?);
        let h = read_header(&mut r)?;
        expect("operator tag", h.tag == TAG_BOLTZMANN)?;
        expect("modes N", h.n as usize == grid.modes())?;
        expect("half-width L", h.l.to_bits() == grid.half_width().to_bits())?;
        expect("kernel constant", h.kernel[0].to_bits() == kernel.constant.to_bits())?;
        expect("kernel gamma", h.kernel[1].to_bits() == kernel.gamma.to_bits())?;
        expect("kernel angular", h.kernel[2].to_bits() == kernel.angular.to_bits())?;
        expect("kernel radius", h.kernel[3].to_bits() == kernel.radius.to_bits())?;
        expect("radial order", h.m_r as usize == m_r)?;
        expect("angular order", h.m_th as usize == m_th)?;
        let n = grid.modes();
        let beta_len = n * n * n * n;
        let loss_len = n * n;
        expect("table length", h.table_len == (beta_len + loss_len) as u64)?;
        let mut hash = FNV_OFFSET;
        let beta = read_table(&mut r, beta_len, &mut hash)?;
        let loss = read_table(&mut r, loss_len, &mut hash)?;
        if hash != h.checksum {
            return Err(CacheError::CorruptFile("checksum mismatch".into()));
        }
        let beta_loss = Array2::from_shape_vec((n, n), loss).expect("shape");
        Ok(Self::from_parts(grid, kernel, m_r, m_th, beta, beta_loss))
    }
}

impl LandauModes {
    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let [a11, a12, a22] = self.tables();
        let slices = [
            a11.as_slice().expect("contiguous"),
            a12.as_slice().expect("contiguous"),
            a22.as_slice().expect("contiguous"),
        ];
        let (checksum, table_len) = table_bytes(&slices);
        let k = self.kernel();
        let mut w = BufWriter::new(File::create(path)?);
        write_header(
            &mut w,
            &Header {
                tag: TAG_LANDAU,
                n: self.grid().modes() as u32,
                l: self.grid().half_width(),
                kernel: [k.constant, k.gamma, 0.0, 0.0],
                m_r: 0,
                m_th: 0,
                table_len,
                checksum,
            },
        )?;
        for s in slices {
            write_table(&mut w, s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(
        path: &Path,
        grid: VelocityGrid,
        kernel: LandauKernel,
    ) -> Result<Self, CacheError> {
        let mut r = BufReader::new(File::open(path)?);
        let h = read_header(&mut r)?;
        expect("operator tag", h.tag == TAG_LANDAU)?;
        expect("modes N", h.n as usize == grid.modes())?;
        expect("half-width L", h.l.to_bits() == grid.half_width().to_bits())?;
        expect("kernel constant", h.kernel[0].to_bits() == kernel.constant.to_bits())?;
        expect("kernel gamma", h.kernel[1].to_bits() == kernel.gamma.to_bits())?;
        let n = grid.modes();
        let len = n * n;
        expect("table length", h.table_len == (3 * len) as u64)?;
        let mut hash = FNV_OFFSET;
        let a11 = read_table(&mut r, len, &mut hash)?;
        let a12 = read_table(&mut r, len, &mut hash)?;
        let a22 = read_table(&mut r, len, &mut hash)?;
        if hash != h.checksum {
            return Err(CacheError::CorruptFile("checksum mismatch".into()));
        }
        let shape = (n, n);
        Ok(Self::from_parts(
            grid,
            kernel,
            Array2::from_shape_vec(shape, a11).expect("shape"),
            Array2::from_shape_vec(shape, a12).expect("shape"),
            Array2::from_shape_vec(shape, a22).expect("shape"),
        ))
    }
}
