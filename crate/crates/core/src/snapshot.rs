use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpaceGrid;
use crate::symmetry::SymmetryClass;
use crate::time::TimeField;

pub const MAGIC: &str = "BRTHR1";

/// Text header of a field snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub symmetry: SymmetryClass,
    pub period: f64,
    pub cutoff: usize,
    pub modes: Vec<i64>,
}

impl Header {
    fn render(&self) -> String {
        let modes: Vec<String> = self.modes.iter().map(|k| k.to_string()).collect();
        format!(
            "{MAGIC}\nN {}\nL {}\nn {}\ns {}\nT {}\nK {}\nmodes {}\n",
            self.dim,
            self.half_width,
            self.points,
            self.symmetry.index(),
            self.period,
            self.cutoff,
            modes.join(" ")
        )
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| bad(format!("missing header line '{key}'")))?;
    let (k, v) = line
        .split_once(' ')
        .ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
    if k != key {
        return Err(bad(format!("expected header key '{key}', found '{k}'")));
    }
    Ok(v.trim())
}

fn number<T: std::str::FromStr>(text: &str, key: &str) -> Result<T> {
    text.parse()
        .map_err(|_| bad(format!("cannot parse value '{text}' of '{key}'")))
}

/// Split a snapshot into its header and raw payload.
fn parse(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let mut offset = 0;
    let mut lines = Vec::with_capacity(8);
    while lines.len() < 8 {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header"))?;
        let line = std::str::from_utf8(&bytes[offset..offset + end])
            .map_err(|_| bad("header is not UTF-8"))?;
        lines.push(line);
        offset += end + 1;
    }
    if lines[0] != MAGIC {
        return Err(bad(format!("bad magic '{}'", lines[0])));
    }
    let mut it = lines.into_iter().skip(1);
    let dim = number(field(it.next(), "N")?, "N")?;
    let half_width = number(field(it.next(), "L")?, "L")?;
    let points = number(field(it.next(), "n")?, "n")?;
    let symmetry = SymmetryClass::from_index(number(field(it.next(), "s")?, "s")?)
        .map_err(|e| bad(e.to_string()))?;
    let period = number(field(it.next(), "T")?, "T")?;
    let cutoff = number(field(it.next(), "K")?, "K")?;
    let modes_line = it.next().ok_or_else(|| bad("missing modes line"))?;
    let modes_text = modes_line
        .strip_prefix("modes")
        .ok_or_else(|| bad("expected header key 'modes'"))?;
    let modes = modes_text
        .split_whitespace()
        .map(|t| number::<i64>(t, "modes"))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Header {
            dim,
            half_width,
            points,
            symmetry,
            period,
            cutoff,
            modes,
        },
        &bytes[offset..],
    ))
}

fn payload(raw: &[u8], arrays: usize, len: usize) -> Result<Vec<Vec<Complex64>>> {
    let expected = arrays * len * 16;
    if raw.len() != expected {
        return Err(bad(format!(
            "payload has {} bytes, expected {expected}",
            raw.len()
        )));
    }
    let value = |i: usize| f64::from_le_bytes(raw[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    Ok((0..arrays)
        .map(|a| {
            (0..len)
                .map(|x| {
                    let i = 2 * (a * len + x);
                    Complex64::new(value(i), value(i + 1))
                })
                .collect()
        })
        .collect())
}

fn write_raw(path: &Path, header: &Header, arrays: &[&[Complex64]]) -> Result<()> {
    let mut out = Vec::with_capacity(header.render().len() + arrays.iter().map(|a| 16 * a.len()).sum::<usize>());
    out.extend_from_slice(header.render().as_bytes());
    for a in arrays {
        for z in a.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn write_field(path: impl AsRef<Path>, field: &TimeField) -> Result<()> {
    let grid = field.grid();
    let header = Header {
        dim: grid.dim(),
        half_width: grid.half_width(),
        points: grid.points(),
        symmetry: field.symmetry(),
        period: field.period(),
        cutoff: field.cutoff(),
        modes: field.modes().to_vec(),
    };
    let arrays: Vec<&[Complex64]> = field.iter().map(|(_, v)| v).collect();
    write_raw(path.as_ref(), &header, &arrays)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<TimeField> {
    let bytes = fs::read(path)?;
    let (header, raw) = parse(&bytes)?;
    let grid = SpaceGrid::new(header.dim, header.half_width, header.points)
        .map_err(|e| bad(e.to_string()))?;
    let arrays = payload(raw, header.modes.len(), grid.len())?;
    TimeField::from_modes(
        &grid,
        header.symmetry,
        header.period,
        header.cutoff,
        header.modes.iter().copied().zip(arrays),
    )
    .map_err(|e| bad(e.to_string()))
}

/// Real spatial array stored as the single mode `0` with zero imaginary part.
pub fn write_potential(path: impl AsRef<Path>, grid: &SpaceGrid, values: &[f64], period: f64) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: values.len(),
        });
    }
    let header = Header {
        dim: grid.dim(),
        half_width: grid.half_width(),
        points: grid.points(),
        symmetry: SymmetryClass::General,
        period,
        cutoff: 0,
        modes: vec![0],
    };
    let data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    write_raw(path.as_ref(), &header, &[&data])
}

pub fn read_potential(path: impl AsRef<Path>) -> Result<(SpaceGrid, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let (header, raw) = parse(&bytes)?;
    if header.modes != [0] {
        return Err(bad("potential snapshot must hold exactly the mode 0"));
    }
    let grid = SpaceGrid::new(header.dim, header.half_width, header.points)
        .map_err(|e| bad(e.to_string()))?;
    let mut arrays = payload(raw, 1, grid.len())?;
    let data = arrays.pop().expect("one array");
    if data.iter().any(|z| z.im != 0.0) {
        return Err(bad("potential snapshot has a nonzero imaginary part"));
    }
    Ok((grid, data.into_iter().map(|z| z.re).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> TimeField {
        let grid = SpaceGrid::new(2, 3.0, 8).unwrap();
        let mut f = TimeField::zeros(&grid, SymmetryClass::General, 1.5, 2);
        for (k, slot) in f.iter_mut() {
            for (x, z) in slot.iter_mut().enumerate() {
                *z = Complex64::new(k as f64 + 0.1 * x as f64, 1.0 / (1.0 + x as f64));
            }
        }
        f.project(SymmetryClass::Odd)
    }

    #[test]
    fn field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("V.field");
        let f = sample_field();
        write_field(&path, &f).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(g.symmetry(), f.symmetry());
        assert_eq!(g.period(), f.period());
        assert_eq!(g.modes(), f.modes());
        for ((_, a), (_, b)) in f.iter().zip(g.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("V.field");
        write_field(&path, &sample_field()).unwrap();
        let good = fs::read(&path).unwrap();

        let mut magic = good.clone();
        magic[0] = b'X';
        fs::write(&path, &magic).unwrap();
        assert!(matches!(read_field(&path), Err(Error::Snapshot(m)) if m.contains("magic")));

        fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(read_field(&path), Err(Error::Snapshot(m)) if m.contains("payload")));

        fs::write(&path, &good[..10]).unwrap();
        assert!(matches!(read_field(&path), Err(Error::Snapshot(_))));
    }

    #[test]
    fn potential_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("Q.field");
        let grid = SpaceGrid::new(2, 3.0, 8).unwrap();
        let values: Vec<f64> = grid.radii().iter().map(|r| (-r * r).exp()).collect();
        write_potential(&path, &grid, &values, 2.0).unwrap();
        let (g, back) = read_potential(&path).unwrap();
        assert_eq!(g.points(), 8);
        assert_eq!(back, values);
    }
}
