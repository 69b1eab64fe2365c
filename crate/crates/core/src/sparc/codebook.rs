use crate::error::{DmeError, Result};
use crate::rng::{Purpose, RngStream};
use crate::vector::dist_sq;
use rand_distr::{Distribution, StandardNormal};
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Default guard on `m·L·d` (entries, 8 bytes each): 512 MiB.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

const MAGIC: &[u8; 4] = b"SPRC";
const FORMAT_VERSION: u16 = 1;

/// `m` sections of `L` consecutive rows in `R^d`, stored row-major.
#[derive(Debug)]
pub struct Codebook {
    levels: usize,
    section: usize,
    d: usize,
    gen_seed: u64,
    data: Vec<f64>,
    diameters: OnceLock<Vec<f64>>,
}

impl Clone for Codebook {
    fn clone(&self) -> Self {
        Codebook {
            levels: self.levels,
            section: self.section,
            d: self.d,
            gen_seed: self.gen_seed,
            data: self.data.clone(),
            diameters: self.diameters.clone(),
        }
    }
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        (self.levels, self.section, self.d, self.gen_seed) == (other.levels, other.section, other.d, other.gen_seed)
            && self.data == other.data
    }
}

fn check_shape(levels: usize, section: usize, d: usize, cap: usize) -> Result<usize> {
    if levels == 0 || section == 0 || d == 0 {
        return Err(DmeError::param(format!("codebook needs m, L, d >= 1 (got {levels}, {section}, {d})")));
    }
    let entries = levels
        .checked_mul(section)
        .and_then(|x| x.checked_mul(d))
        .ok_or(DmeError::Memory { entries: usize::MAX, cap })?;
    if entries > cap {
        return Err(DmeError::Memory { entries, cap });
    }
    Ok(entries)
}

/// I.i.d. `N(0, 1)` entries from the codebook stream of `gen_seed`.
pub fn gen_codebook(levels: usize, section: usize, d: usize, gen_seed: u64, cap: usize) -> Result<Codebook> {
    let entries = check_shape(levels, section, d, cap)?;
    let mut rng = RngStream::new(gen_seed).stream(0, 0, Purpose::Codebook);
    let data = (0..entries).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(Codebook { levels, section, d, gen_seed, data, diameters: OnceLock::new() })
}

impl Codebook {
    /// Wrap explicit rows (`levels·section` rows of length `d`).
    pub fn from_rows(levels: usize, section: usize, rows: Vec<Vec<f64>>, gen_seed: u64) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        check_shape(levels, section, d, usize::MAX)?;
        if rows.len() != levels * section {
            return Err(DmeError::param(format!("expected {} rows, got {}", levels * section, rows.len())));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(DmeError::Dimension { expected: d, got: r.len() });
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(DmeError::param("codebook entries must be finite"));
        }
        Ok(Codebook { levels, section, d, gen_seed, data, diameters: OnceLock::new() })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn section_size(&self) -> usize {
        self.section
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn gen_seed(&self) -> u64 {
        self.gen_seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row `r` of section `k` (both 0-based), i.e. global row `k·L + r`.
    #[inline]
    pub fn row(&self, k: usize, r: usize) -> &[f64] {
        let start = (k * self.section + r) * self.d;
        &self.data[start..start + self.d]
    }

    /// The `L` rows of section `k` as one contiguous slice.
    #[inline]
    pub fn section(&self, k: usize) -> &[f64] {
        let len = self.section * self.d;
        &self.data[k * len..(k + 1) * len]
    }

    /// `Γ_k = max_{r≠r'} ‖A_{k,r} − A_{k,r'}‖₂` per section, computed once.
    pub fn section_diameters(&self) -> &[f64] {
        self.diameters.get_or_init(|| {
            (0..self.levels)
                .map(|k| {
                    let mut worst = 0.0f64;
                    for a in 0..self.section {
                        for b in a + 1..self.section {
                            worst = worst.max(dist_sq(self.row(k, a), self.row(k, b)));
                        }
                    }
                    worst.sqrt()
                })
                .collect()
        })
    }

    /// Binary layout: `"SPRC"`, version u16, m, L, d as u32, gen_seed u64,
    /// then row-major f64; all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for n in [self.levels, self.section, self.d] {
            let n = u32::try_from(n).map_err(|_| DmeError::param("codebook dimension exceeds u32"))?;
            w.write_all(&n.to_le_bytes())?;
        }
        w.write_all(&self.gen_seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read, cap: usize) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DmeError::Io("not a codebook file (bad magic)".into()));
        }
        let mut v = [0u8; 2];
        r.read_exact(&mut v)?;
        let version = u16::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(DmeError::Io(format!("unsupported codebook version {version}")));
        }
        let mut dims = [0usize; 3];
        for x in dims.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *x = u32::from_le_bytes(b) as usize;
        }
        let mut s = [0u8; 8];
        r.read_exact(&mut s)?;
        let gen_seed = u64::from_le_bytes(s);
        let [levels, section, d] = dims;
        let entries = check_shape(levels, section, d, cap)?;
        let mut raw = vec![0u8; entries * 8];
        r.read_exact(&mut raw)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(DmeError::Io(format!("{} trailing bytes after codebook", rest.len())));
        }
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(DmeError::Io("codebook contains non-finite entries".into()));
        }
        Ok(Codebook { levels, section, d, gen_seed, data, diameters: OnceLock::new() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = gen_codebook(2, 4, 8, 7, DEFAULT_MEMORY_CAP).unwrap();
        assert_eq!(a.data().len(), 8 * 8);
        assert_eq!(a, gen_codebook(2, 4, 8, 7, DEFAULT_MEMORY_CAP).unwrap());
        assert_ne!(a, gen_codebook(2, 4, 8, 8, DEFAULT_MEMORY_CAP).unwrap());
        assert_eq!(a.row(1, 2), &a.data()[(4 + 2) * 8..(4 + 3) * 8]);
    }

    #[test]
    fn entries_are_standard_normal() {
        let a = gen_codebook(1, 1, 100_000, 1, DEFAULT_MEMORY_CAP).unwrap();
        let n = a.data().len() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let var = a.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02, "{mean} {var}");
    }

    #[test]
    fn memory_guard() {
        assert!(matches!(gen_codebook(10, 10, 10, 0, 999), Err(DmeError::Memory { entries: 1000, cap: 999 })));
        assert!(gen_codebook(0, 1, 1, 0, 10).is_err());
    }

    #[test]
    fn diameters_by_hand() {
        let cb = Codebook::from_rows(1, 2, vec![vec![2f64.sqrt(), 0.0], vec![0.0, 2f64.sqrt()]], 0).unwrap();
        assert!((cb.section_diameters()[0] - 2.0).abs() < 1e-15);
        let same = Codebook::from_rows(1, 3, vec![vec![1.0, 2.0]; 3], 0).unwrap();
        assert_eq!(same.section_diameters()[0], 0.0);
    }

    #[test]
    fn file_round_trip_and_layout() {
        let cb = gen_codebook(2, 3, 5, 99, DEFAULT_MEMORY_CAP).unwrap();
        let mut buf = Vec::new();
        cb.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SPRC");
        assert_eq!(&buf[4..6], &1u16.to_le_bytes());
        assert_eq!(&buf[6..10], &2u32.to_le_bytes());
        assert_eq!(&buf[10..14], &3u32.to_le_bytes());
        assert_eq!(&buf[14..18], &5u32.to_le_bytes());
        assert_eq!(&buf[18..26], &99u64.to_le_bytes());
        assert_eq!(buf.len(), 26 + 2 * 3 * 5 * 8);
        assert_eq!(Codebook::read_from(buf.as_slice(), DEFAULT_MEMORY_CAP).unwrap(), cb);
        assert!(Codebook::read_from(&buf[..buf.len() - 1], DEFAULT_MEMORY_CAP).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Codebook::read_from(bad.as_slice(), DEFAULT_MEMORY_CAP).is_err());
    }
}
