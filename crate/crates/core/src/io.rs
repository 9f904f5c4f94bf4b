//! File formats: `LCF1` binary matrices, CSV tables and 8-bit PGM heatmaps
//! with a JSON sidecar.
//!
//! `LCF1` layout: magic `b"LCF1"`, then little-endian `u32` rows, `u32`
//! columns, `u32` dtype (`1` = f64), followed by `rows × cols` little-endian
//! f64 values in row-major order.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Histogram, ScalarField, SurvivalCurve};
use crate::error::{Error, Result};
use crate::husimi::{EntropyVsDwell, HusimiField};
use crate::quantum::ResonanceSet;

pub const LCF_MAGIC: &[u8; 4] = b"LCF1";
pub const LCF_DTYPE_F64: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LcfMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn write_lcf<W: Write>(mut w: W, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            found: values.len(),
        });
    }
    let dim = |x: usize| {
        u32::try_from(x).map_err(|_| Error::Format(format!("dimension {x} exceeds u32")))
    };
    w.write_all(LCF_MAGIC)?;
    w.write_all(&dim(rows)?.to_le_bytes())?;
    w.write_all(&dim(cols)?.to_le_bytes())?;
    w.write_all(&LCF_DTYPE_F64.to_le_bytes())?;
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_lcf<R: Read>(mut r: R) -> Result<LcfMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != LCF_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (rows, cols, dtype) = (word(4) as usize, word(8) as usize, word(12));
    if dtype != LCF_DTYPE_F64 {
        return Err(Error::Format(format!("unsupported dtype {dtype}")));
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != rows * cols * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            rows * cols * 8,
            data.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(LcfMatrix { rows, cols, values })
}

pub fn write_field_lcf<W: Write>(w: W, field: &ScalarField) -> Result<()> {
    write_lcf(w, field.grid.n_q, field.grid.n_p, &field.values)
}

pub fn write_husimi_lcf<W: Write>(w: W, field: &HusimiField) -> Result<()> {
    write_lcf(w, field.m_q, field.m_p, &field.values)
}

/// Schur vectors as `N` rows of `2N` interleaved `re, im` values.
pub fn write_schur_vectors_lcf<W: Write>(w: W, set: &ResonanceSet) -> Result<()> {
    let n = set.len();
    let mut values = Vec::with_capacity(2 * n * n);
    for k in 0..n {
        for z in set.schur.vectors.column(k).iter() {
            values.push(z.re);
            values.push(z.im);
        }
    }
    write_lcf(w, n, 2 * n, &values)
}

/// Inverse of [`write_schur_vectors_lcf`].
pub fn schur_vectors_from_lcf(m: &LcfMatrix) -> Result<Vec<Vec<C64>>> {
    if m.cols != 2 * m.rows {
        return Err(Error::Format(format!(
            "expected {} columns for {} vectors, found {}",
            2 * m.rows,
            m.rows,
            m.cols
        )));
    }
    Ok(m.values
        .chunks_exact(m.cols)
        .map(|row| row.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
        .collect())
}

/// `q,p,value,mask` with one row per cell.
pub fn write_field_csv<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    writeln!(w, "q,p,value,mask")?;
    let g = field.grid;
    for i in 0..g.n_q {
        for j in 0..g.n_p {
            let idx = i * g.n_p + j;
            writeln!(
                w,
                "{},{},{},{}",
                g.q(i),
                g.p(j),
                field.values[idx],
                u8::from(field.mask[idx])
            )?;
        }
    }
    Ok(())
}

/// Two-column CSV.
pub fn write_curve_csv<W: Write>(mut w: W, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "{},{}", header.0, header.1)?;
    for (a, b) in rows {
        writeln!(w, "{a},{b}")?;
    }
    Ok(())
}

pub fn write_survival_csv<W: Write>(w: W, curve: &SurvivalCurve) -> Result<()> {
    let rows: Vec<(f64, f64)> = curve
        .probabilities
        .iter()
        .enumerate()
        .map(|(n, &p)| (n as f64, p))
        .collect();
    write_curve_csv(w, ("n", "survival"), &rows)
}

pub fn write_histogram_csv<W: Write>(mut w: W, h: &Histogram) -> Result<()> {
    writeln!(w, "bin_lower,bin_upper,probability")?;
    for (b, p) in h.probabilities.iter().enumerate() {
        let (lo, hi) = h.bin_edges(b);
        writeln!(w, "{lo},{hi},{p}")?;
    }
    Ok(())
}

/// `k,re_z,im_z,theta,gamma,dwell_time`, `k` counting from 1 in dwell order.
pub fn write_spectrum_csv<W: Write>(mut w: W, set: &ResonanceSet) -> Result<()> {
    writeln!(w, "k,re_z,im_z,theta,gamma,dwell_time")?;
    for (k, r) in set.resonances.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            k + 1,
            r.z.re,
            r.z.im,
            r.theta,
            r.gamma,
            r.dwell
        )?;
    }
    Ok(())
}

/// `dwell_time,s_w,bin_index`; the bin is empty for infinite dwell times.
pub fn write_entropy_scatter_csv<W: Write>(mut w: W, e: &EntropyVsDwell) -> Result<()> {
    writeln!(w, "dwell_time,s_w,bin_index")?;
    for p in &e.points {
        match p.bin {
            Some(b) => writeln!(w, "{},{},{}", p.dwell, p.s_w, b)?,
            None => writeln!(w, "{},{},", p.dwell, p.s_w)?,
        }
    }
    Ok(())
}

pub fn write_entropy_bins_csv<W: Write>(mut w: W, e: &EntropyVsDwell) -> Result<()> {
    writeln!(w, "bin_index,dwell_lower,dwell_upper,mean_s_w,count")?;
    for b in &e.bins {
        writeln!(w, "{},{},{},{},{}", b.index, b.lower, b.upper, b.mean_s_w, b.count)?;
    }
    Ok(())
}

/// Scale metadata stored next to a PGM heatmap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSidecar {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    /// Gray level used for masked-out cells.
    pub masked_value: u8,
    pub orientation: String,
}

pub const MASKED_GRAY: u8 = 255;

/// Renders q-major cell values (`values[i * n_p + j]`) as a binary PGM with
/// `q` along the columns and `p` increasing upwards. Unmasked values are
/// scaled linearly from `[min, max]` onto `[0, 255]`; masked cells are white.
pub fn write_heatmap<W: Write>(
    mut w: W,
    n_q: usize,
    n_p: usize,
    values: &[f64],
    mask: Option<&[bool]>,
) -> Result<HeatmapSidecar> {
    if values.len() != n_q * n_p {
        return Err(Error::DimensionMismatch {
            expected: n_q * n_p,
            found: values.len(),
        });
    }
    let valid = |idx: usize| mask.is_none_or(|m| m[idx]) && values[idx].is_finite();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for idx in (0..values.len()).filter(|&i| valid(i)) {
        min = min.min(values[idx]);
        max = max.max(values[idx]);
    }
    if min > max {
        (min, max) = (0.0, 0.0);
    }
    let span = max - min;
    write!(w, "P5\n{n_q} {n_p}\n255\n")?;
    let mut pixels = Vec::with_capacity(n_q * n_p);
    for row in 0..n_p {
        let j = n_p - 1 - row;
        for i in 0..n_q {
            let idx = i * n_p + j;
            let gray = if !valid(idx) {
                MASKED_GRAY
            } else if span > 0.0 {
                ((values[idx] - min) / span * 255.0).round() as u8
            } else {
                0
            };
            pixels.push(gray);
        }
    }
    w.write_all(&pixels)?;
    Ok(HeatmapSidecar {
        width: n_q,
        height: n_p,
        min,
        max,
        masked_value: MASKED_GRAY,
        orientation: "columns: q increasing left to right; rows: p increasing bottom to top".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PhaseSpaceGrid;
    use proptest::prelude::*;

    #[test]
    fn lcf_header_layout() {
        let mut buf = Vec::new();
        write_lcf(&mut buf, 2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(&buf[..4], b"LCF1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..16], &1u32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&buf[56..64], &6.0f64.to_le_bytes());
    }

    #[test]
    fn lcf_rejects_corrupt_input() {
        assert!(read_lcf(&b"XXXX000000000000"[..]).is_err());
        let mut buf = Vec::new();
        write_lcf(&mut buf, 2, 2, &[0.0; 4]).unwrap();
        buf.pop();
        assert!(matches!(read_lcf(&buf[..]), Err(Error::Format(_))));
        assert!(write_lcf(Vec::new(), 2, 2, &[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn lcf_round_trip(rows in 0usize..8, cols in 0usize..8, seed in any::<u64>()) {
            let values: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from_bits(seed.rotate_left(i as u32) >> 2))
                .collect();
            let mut buf = Vec::new();
            write_lcf(&mut buf, rows, cols, &values).unwrap();
            let m = read_lcf(&buf[..]).unwrap();
            prop_assert_eq!(m.rows, rows);
            prop_assert_eq!(m.cols, cols);
            prop_assert_eq!(
                m.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn field_csv_has_header_and_rows() {
        let g = PhaseSpaceGrid::new(2, 3).unwrap();
        let f = ScalarField::new(g, (0..6).map(f64::from).collect(), vec![true, false, true, true, true, true]).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q,p,value,mask");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[2], format!("{},{},1,0", 0.25, 0.5));
    }

    #[test]
    fn heatmap_orientation_and_mask() {
        // 2 q-cells × 2 p-cells, values[i * 2 + j].
        let values = [0.0, 1.0, 2.0, 3.0];
        let mask = [true, true, true, false];
        let mut buf = Vec::new();
        let side = write_heatmap(&mut buf, 2, 2, &values, Some(&mask)).unwrap();
        assert_eq!((side.min, side.max), (0.0, 2.0));
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        let px = &buf[header.len()..];
        // Top row is j = 1: (i=0 -> 1.0), (i=1 -> masked).
        assert_eq!(px, &[128, 255, 0, 255]);
    }
}
