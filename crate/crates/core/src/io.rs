//! Plain-text formats: MatrixMarket matrices, whitespace-separated vectors
//! and ASCII PGM images.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::{Image2D, RowSystem};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Dense row-major matrix read from a MatrixMarket file.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn into_system(self, rhs: &[f64]) -> Result<RowSystem> {
        if rhs.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: rhs.len(),
            });
        }
        RowSystem::from_rows(self.cols, &self.to_rows(), rhs)
    }
}

/// Parses `coordinate` (real, integer or pattern; general or symmetric) and
/// `array` (real or integer, general) MatrixMarket content.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" if coordinate => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims = parse_numbers::<usize>(size, size_line)?;
    let (rows, cols) = match (coordinate, dims.as_slice()) {
        (true, [r, c, _]) | (false, [r, c]) => (*r, *c),
        _ => return Err(parse_err(size_line, "malformed size line")),
    };
    let mut data = vec![0.0; rows * cols];

    if coordinate {
        let nnz = dims[2];
        let mut seen = 0;
        for (ln, line) in body {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let want = if pattern { 2 } else { 3 };
            if tok.len() != want {
                return Err(parse_err(ln, format!("expected {want} fields")));
            }
            let r: usize = tok[0].parse().map_err(|_| parse_err(ln, "bad row index"))?;
            let c: usize = tok[1]
                .parse()
                .map_err(|_| parse_err(ln, "bad column index"))?;
            if r == 0 || c == 0 || r > rows || c > cols {
                return Err(parse_err(ln, "index out of range"));
            }
            let v = if pattern {
                1.0
            } else {
                tok[2]
                    .parse::<f64>()
                    .map_err(|_| parse_err(ln, "bad value"))?
            };
            data[(r - 1) * cols + (c - 1)] += v;
            if symmetric && r != c {
                if c > rows || r > cols {
                    return Err(parse_err(ln, "symmetric entry outside a square matrix"));
                }
                data[(c - 1) * cols + (r - 1)] += v;
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(
                size_line,
                format!("expected {nnz} entries, found {seen}"),
            ));
        }
    } else {
        // array format is column-major
        let mut k = 0;
        for (ln, line) in body {
            for v in parse_numbers::<f64>(line, ln)? {
                if k >= rows * cols {
                    return Err(parse_err(ln, "too many values"));
                }
                data[(k % rows) * cols + k / rows] = v;
                k += 1;
            }
        }
        if k != rows * cols {
            return Err(parse_err(
                size_line,
                format!("expected {} values, found {k}", rows * cols),
            ));
        }
    }
    Ok(DenseMatrix { rows, cols, data })
}

fn parse_numbers<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(ln, format!("bad number '{t}'")))
        })
        .collect()
}

pub fn read_matrix_market(path: &Path) -> Result<DenseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Writes the coefficient matrix in coordinate format, skipping zeros.
pub fn write_matrix_market(path: &Path, system: &RowSystem) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let entries: Vec<(usize, usize, f64)> = (0..system.m())
        .flat_map(|r| {
            system
                .row(r)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(c, &v)| (r + 1, c + 1, v))
        })
        .collect();
    out.push_str(&format!(
        "{} {} {}\n",
        system.m(),
        system.n(),
        entries.len()
    ));
    for (r, c, v) in entries {
        out.push_str(&format!("{r} {c} {v:e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Whitespace-separated numbers; `%` and `#` start comment lines.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        v.extend(parse_numbers::<f64>(line, i + 1)?);
    }
    Ok(v)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

/// One value per line in round-trip `{:e}` notation.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for x in v {
        writeln!(f, "{x:e}")?;
    }
    Ok(())
}

/// ASCII (`P2`) PGM with values min–max scaled to `0..=255`.
pub fn write_pgm(path: &Path, img: &Image2D) -> Result<()> {
    let lo = img.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for i in 0..img.height {
        let line: Vec<String> = (0..img.width)
            .map(|j| {
                let v = if img.data.is_empty() {
                    0.0
                } else {
                    (img.get(i, j) - lo) / span
                };
                ((v * 255.0).round().clamp(0.0, 255.0) as u32).to_string()
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `P2` PGM, mapping grey levels to `[0, 1]`.
pub fn parse_pgm(text: &str) -> Result<Image2D> {
    let tokens: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .flat_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            l.split_whitespace().map(move |t| (i + 1, t))
        })
        .collect();
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, "P2")) => {}
        _ => return Err(parse_err(1, "expected P2 magic")),
    }
    let mut header = [0usize; 3];
    for h in header.iter_mut() {
        let (ln, t) = it.next().ok_or_else(|| parse_err(1, "truncated header"))?;
        *h = t
            .parse()
            .map_err(|_| parse_err(ln, format!("bad header value '{t}'")))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 {
        return Err(parse_err(1, "maxval must be positive"));
    }
    let data = it
        .map(|(ln, t)| {
            t.parse::<f64>()
                .map(|v| v / maxval as f64)
                .map_err(|_| parse_err(ln, format!("bad pixel '{t}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Image2D::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<Image2D> {
    parse_pgm(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_general() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 3\n1 1 1.5\n2 3 -2\n1 2 4e-1\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!((m.rows, m.cols), (2, 3));
        assert_eq!(m.data, vec![1.5, 0.4, 0.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn coordinate_symmetric_pattern() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n1 1\n2 1\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.data, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn array_is_column_major() {
        let text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.data, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_matrix_market(""), Err(Error::Parse { .. })));
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert_eq!(
            parse_matrix_market(bad).unwrap_err(),
            parse_err(3, "index out of range")
        );
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix_market(short).is_err());
        assert!(parse_vector("1 2 x").is_err());
    }

    #[test]
    fn vector_and_pgm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let v = vec![0.1, -2.5e-7, 3.0];
        let p = dir.path().join("v.txt");
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);

        let img = Image2D::new(3, 2, vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0]).unwrap();
        let p = dir.path().join("i.pgm");
        write_pgm(&p, &img).unwrap();
        let back = read_pgm(&p).unwrap();
        assert_eq!(back.shape(), img.shape());
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let sys = RowSystem::from_rows(
            3,
            &[vec![1.0, 0.0, -0.25], vec![0.0, 2.0, 0.0]],
            &[1.0, 2.0],
        )
        .unwrap();
        let p = dir.path().join("a.mtx");
        write_matrix_market(&p, &sys).unwrap();
        let m = read_matrix_market(&p).unwrap();
        let back = m.into_system(sys.rhs()).unwrap();
        assert_eq!(back.row(0), sys.row(0));
        assert_eq!(back.row(1), sys.row(1));
    }
}
