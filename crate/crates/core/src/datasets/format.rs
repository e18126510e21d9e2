//! Binary and CSV dataset files.
//!
//! Feature file (little-endian): `"MDLP"`, `u32` version, `u64` n, `u32` d,
//! then `n·d` `f32` values row-major.
//!
//! Label file: `"MDLL"`, `u32` version, `u64` n, `u32` K, `n` `u32` labels,
//! then a `u8` flag; flag 1 is followed by `n` `u32` type ids.
//!
//! Paths ending in `.csv` use the text variant instead: features are
//! headerless rows of `d` floats, labels are one integer per line (optionally
//! `label,type_id`) with an optional leading `K=<int>` line.

use std::io::Write;
use std::path::Path;

use super::Dataset;
use crate::error::{MdlError, Result};
use crate::numerics::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"MDLP";
pub const LABEL_MAGIC: &[u8; 4] = b"MDLL";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 20;

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn format_error(path: &Path, detail: impl Into<String>) -> MdlError {
    MdlError::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_dataset(features_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let features_path = features_path.as_ref();
    let labels_path = labels_path.as_ref();
    let features = if is_csv(features_path) {
        read_features_csv(features_path)?
    } else {
        read_features_bin(features_path)?
    };
    let labels = if is_csv(labels_path) {
        read_labels_csv(labels_path)?
    } else {
        read_labels_bin(labels_path)?
    };
    if features.rows() != labels.labels.len() {
        return Err(MdlError::Consistency(format!(
            "{} has {} rows but {} has {} labels",
            features_path.display(),
            features.rows(),
            labels_path.display(),
            labels.labels.len()
        )));
    }
    Dataset::new(
        dataset_name(features_path),
        features,
        labels.labels,
        labels.num_classes,
        labels.type_ids,
    )
}

/// Writes both files atomically (temporary file in the same directory, then
/// rename).
pub fn write_dataset(dataset: &Dataset, features_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    dataset.validate()?;
    let features_path = features_path.as_ref();
    let labels_path = labels_path.as_ref();
    let features = if is_csv(features_path) {
        features_csv(&dataset.features)
    } else {
        features_bin(&dataset.features)?
    };
    let labels = if is_csv(labels_path) {
        labels_csv(dataset)
    } else {
        labels_bin(dataset)?
    };
    write_atomic(features_path, &features)?;
    write_atomic(labels_path, &labels)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| MdlError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| MdlError::io(path, e))?;
    tmp.persist(path).map_err(|e| MdlError::io(path, e.error))?;
    Ok(())
}

fn features_bin(features: &Matrix) -> Result<Vec<u8>> {
    let d = u32::try_from(features.cols()).map_err(|_| MdlError::Size("feature dimension exceeds u32".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * features.as_slice().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(features.rows() as u64).to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for &v in features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn labels_bin(dataset: &Dataset) -> Result<Vec<u8>> {
    let k = u32::try_from(dataset.num_classes).map_err(|_| MdlError::Size("label count exceeds u32".into()))?;
    let n = dataset.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 1 + 8 * n);
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    for &y in &dataset.labels {
        out.extend_from_slice(&y.to_le_bytes());
    }
    match &dataset.type_ids {
        Some(types) => {
            out.push(1);
            for &t in types {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    Ok(out)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| MdlError::io(path, e))
}

struct Header {
    n: usize,
    width: usize,
}

fn parse_header(path: &Path, bytes: &[u8], magic: &[u8; 4]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(format_error(
            path,
            format!("expected at least {HEADER_LEN} header bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != magic {
        return Err(format_error(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[0..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_error(path, format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let width = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let n = usize::try_from(n).map_err(|_| format_error(path, format!("row count {n} does not fit in memory")))?;
    Ok(Header {
        n,
        width: width as usize,
    })
}

fn expect_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() != expected {
        return Err(format_error(
            path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok(())
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn read_features_bin(path: &Path) -> Result<Matrix> {
    let bytes = read_bytes(path)?;
    let Header { n, width: d } = parse_header(path, &bytes, FEATURE_MAGIC)?;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| format_error(path, "feature count overflows"))?;
    expect_len(path, &bytes, HEADER_LEN + 4 * count)?;
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(n, d, data)
}

struct LabelFile {
    labels: Vec<u32>,
    num_classes: usize,
    type_ids: Option<Vec<u32>>,
}

fn read_labels_bin(path: &Path) -> Result<LabelFile> {
    let bytes = read_bytes(path)?;
    let Header { n, width: k } = parse_header(path, &bytes, LABEL_MAGIC)?;
    let labels_end = HEADER_LEN + 4 * n;
    if bytes.len() < labels_end + 1 {
        return Err(format_error(
            path,
            format!("expected at least {} bytes, found {}", labels_end + 1, bytes.len()),
        ));
    }
    let labels: Vec<u32> = (0..n).map(|i| u32_at(&bytes, HEADER_LEN + 4 * i)).collect();
    let type_ids = match bytes[labels_end] {
        0 => {
            expect_len(path, &bytes, labels_end + 1)?;
            None
        }
        1 => {
            expect_len(path, &bytes, labels_end + 1 + 4 * n)?;
            Some((0..n).map(|i| u32_at(&bytes, labels_end + 1 + 4 * i)).collect())
        }
        flag => return Err(format_error(path, format!("type-block flag must be 0 or 1, found {flag}"))),
    };
    Ok(LabelFile {
        labels,
        num_classes: k,
        type_ids,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| MdlError::io(path, e))
}

fn read_features_csv(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let value: f32 = field
                .trim()
                .parse()
                .map_err(|_| format_error(path, format!("line {}: cannot parse {field:?} as a float", line_no + 1)))?;
            data.push(value as f64);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(format_error(
                    path,
                    format!("line {}: expected {c} values, found {width}", line_no + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

fn read_labels_csv(path: &Path) -> Result<LabelFile> {
    let text = read_text(path)?;
    let mut declared_k = None;
    let mut labels = Vec::new();
    let mut types = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(k) = line.strip_prefix("K=") {
            if !labels.is_empty() || declared_k.is_some() {
                return Err(format_error(path, format!("line {}: K= header must come first", line_no + 1)));
            }
            declared_k = Some(
                k.trim()
                    .parse::<usize>()
                    .map_err(|_| format_error(path, format!("bad label count {k:?}")))?,
            );
            continue;
        }
        let parse = |field: &str| {
            field
                .trim()
                .parse::<u32>()
                .map_err(|_| format_error(path, format!("line {}: cannot parse {field:?}", line_no + 1)))
        };
        let mut fields = line.split(',');
        labels.push(parse(fields.next().unwrap_or(""))?);
        if let Some(t) = fields.next() {
            types.push(parse(t)?);
        }
        if fields.next().is_some() {
            return Err(format_error(path, format!("line {}: expected `label` or `label,type`", line_no + 1)));
        }
    }
    if !types.is_empty() && types.len() != labels.len() {
        return Err(format_error(path, "type ids given on some lines but not all"));
    }
    let num_classes = declared_k.unwrap_or_else(|| labels.iter().max().map_or(0, |&m| m as usize + 1));
    Ok(LabelFile {
        labels,
        num_classes,
        type_ids: (!types.is_empty()).then_some(types),
    })
}

fn features_csv(features: &Matrix) -> Vec<u8> {
    let mut out = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features.row(i).iter().map(|&v| (v as f32).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn labels_csv(dataset: &Dataset) -> Vec<u8> {
    let mut out = format!("K={}\n", dataset.num_classes);
    for (i, y) in dataset.labels.iter().enumerate() {
        match &dataset.type_ids {
            Some(types) => out.push_str(&format!("{y},{}\n", types[i])),
            None => out.push_str(&format!("{y}\n")),
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(with_types: bool) -> Dataset {
        let features = Matrix::from_rows(&[vec![0.5, -1.25, 3.0], vec![1e-3, 7.0, -0.1]]).unwrap();
        let mut features = features;
        super::super::round_to_f32(&mut features);
        Dataset::new(
            "sample",
            features,
            vec![2, 0],
            3,
            with_types.then(|| vec![11, 4]),
        )
        .unwrap()
    }

    #[test]
    fn binary_roundtrip_with_and_without_types() {
        let dir = tempfile::tempdir().unwrap();
        for with_types in [false, true] {
            let data = sample(with_types);
            let (f, l) = (dir.path().join("x.bin"), dir.path().join("y.bin"));
            write_dataset(&data, &f, &l).unwrap();
            let back = read_dataset(&f, &l).unwrap();
            assert_eq!(back.features, data.features);
            assert_eq!(back.labels, data.labels);
            assert_eq!(back.num_classes, 3);
            assert_eq!(back.type_ids, data.type_ids);
        }
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = features_bin(&sample(false).features).unwrap();
        assert_eq!(&bytes[0..4], b"MDLP");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[3, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 6 * 4);

        let labels = labels_bin(&sample(true)).unwrap();
        assert_eq!(&labels[0..4], b"MDLL");
        assert_eq!(&labels[16..20], &[3, 0, 0, 0]);
        assert_eq!(labels[28], 1);
        assert_eq!(labels.len(), 20 + 8 + 1 + 8);
    }

    #[test]
    fn truncated_file_reports_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample(false);
        let (f, l) = (dir.path().join("x.bin"), dir.path().join("y.bin"));
        write_dataset(&data, &f, &l).unwrap();
        let bytes = std::fs::read(&f).unwrap();
        std::fs::write(&f, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_dataset(&f, &l).unwrap_err().to_string();
        assert!(err.contains("expected 44 bytes, found 41"), "{err}");
    }

    #[test]
    fn bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample(false);
        let (f, l) = (dir.path().join("x.bin"), dir.path().join("y.bin"));
        write_dataset(&data, &f, &l).unwrap();
        let mut bytes = std::fs::read(&f).unwrap();
        bytes[4] = 2;
        std::fs::write(&f, &bytes).unwrap();
        assert!(matches!(read_dataset(&f, &l), Err(MdlError::Format { .. })));
        bytes[0] = b'X';
        std::fs::write(&f, &bytes).unwrap();
        let err = read_dataset(&f, &l).unwrap_err().to_string();
        assert!(err.contains("bad magic"));
    }

    #[test]
    fn row_count_mismatch_is_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample(false);
        let (f, l) = (dir.path().join("x.bin"), dir.path().join("y.bin"));
        write_dataset(&data, &f, &l).unwrap();
        let short = data.subset(&[0]);
        write_dataset(&short, dir.path().join("x1.bin"), &l).unwrap();
        assert!(matches!(read_dataset(&f, &l), Err(MdlError::Consistency(_))));
    }

    #[test]
    fn label_beyond_k_is_range_error() {
        let dir = tempfile::tempdir().unwrap();
        let l = dir.path().join("y.csv");
        let f = dir.path().join("x.csv");
        std::fs::write(&f, "1,2\n3,4\n").unwrap();
        std::fs::write(&l, "K=2\n0\n2\n").unwrap();
        assert!(matches!(read_dataset(&f, &l), Err(MdlError::Range(_))));
    }

    #[test]
    fn csv_with_header_equals_binary() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample(true);
        let paths = |ext: &str| (dir.path().join(format!("x.{ext}")), dir.path().join(format!("y.{ext}")));
        let (fb, lb) = paths("bin");
        let (fc, lc) = paths("csv");
        write_dataset(&data, &fb, &lb).unwrap();
        write_dataset(&data, &fc, &lc).unwrap();
        assert!(std::fs::read_to_string(&lc).unwrap().starts_with("K=3\n"));
        let from_bin = read_dataset(&fb, &lb).unwrap();
        let from_csv = read_dataset(&fc, &lc).unwrap();
        assert_eq!(from_bin.features, from_csv.features);
        assert_eq!(from_bin.labels, from_csv.labels);
        assert_eq!(from_bin.type_ids, from_csv.type_ids);
        assert_eq!(from_bin.num_classes, from_csv.num_classes);
    }

    #[test]
    fn empty_and_single_entry_datasets() {
        let dir = tempfile::tempdir().unwrap();
        let (f, l) = (dir.path().join("x.bin"), dir.path().join("y.bin"));
        let empty = Dataset::new("e", Matrix::zeros(0, 4), vec![], 5, None).unwrap();
        write_dataset(&empty, &f, &l).unwrap();
        let bytes = std::fs::read(&f).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[8..16], &[0; 8]);
        let back = read_dataset(&f, &l).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.dim(), 4);

        let one = Dataset::new("o", Matrix::from_rows(&[vec![2.5]]).unwrap(), vec![0], 1, None).unwrap();
        write_dataset(&one, &f, &l).unwrap();
        let back = read_dataset(&f, &l).unwrap();
        assert_eq!(back.features, one.features);
        assert_eq!(back.labels, one.labels);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let data = sample(false);
        let err = write_dataset(&data, "/nonexistent-dir/x.bin", "/nonexistent-dir/y.bin").unwrap_err();
        assert!(matches!(err, MdlError::Io { .. }));
    }
}
