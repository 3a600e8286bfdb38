//! Loading frame sequences from image directories and descriptor CSVs.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use crate::descriptor::{preprocess, Descriptor, DescriptorConfig, RawFrame};
use crate::error::{Error, Result};
use crate::sequence::FrameSequence;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "pgm", "ppm", "pnm"];

/// Orders names so embedded digit runs compare numerically:
/// `img_2` < `img_10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let (n, rest_x) = split_digits(x);
                let (m, rest_y) = split_digits(y);
                let (n, m) = (trim_zeros(n), trim_zeros(m));
                let ord = n.len().cmp(&m.len()).then_with(|| n.cmp(m));
                if ord != Ordering::Equal {
                    return ord;
                }
                (x, y) = (rest_x, rest_y);
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(d);
                }
                (x, y) = (&x[1..], &y[1..]);
            }
        }
    }
}

fn split_digits(s: &[u8]) -> (&[u8], &[u8]) {
    let end = s.iter().position(|c| !c.is_ascii_digit()).unwrap_or(s.len());
    s.split_at(end)
}

fn trim_zeros(s: &[u8]) -> &[u8] {
    let start = s.iter().position(|&c| c != b'0').unwrap_or(s.len());
    &s[start..]
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files of `dir` in natural filename order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        } else {
            log::debug!("skipping {}", path.display());
        }
    }
    files.sort_by(|a, b| natural_cmp(&a.to_string_lossy(), &b.to_string_lossy()));
    Ok(files)
}

/// Decodes every image of `dir` as grayscale, in natural filename order.
pub fn ingest_images(dir: &Path) -> Result<FrameSequence<RawFrame>> {
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::Empty("image directory"));
    }
    let frames = files
        .iter()
        .enumerate()
        .map(|(k, path)| {
            log::debug!("frame {}: {}", k + 1, path.display());
            let img = image::open(path).map_err(|e| Error::Decode {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let gray = img.to_luma8();
            RawFrame::from_gray8(gray.width() as usize, gray.height() as usize, gray.as_raw())
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!("read {} images from {}", frames.len(), dir.display());
    Ok(FrameSequence::new(frames))
}

/// One descriptor per CSV row; every row must have the same number of
/// numeric cells. Rows are numbered from 1 in errors.
pub fn ingest_csv(path: &Path) -> Result<FrameSequence<Descriptor>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    let mut width = None;
    let mut frames = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| csv_error(path, row, e))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Csv {
                path: path.into(),
                row,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Csv {
                    path: path.into(),
                    row,
                    message: format!("column {}: `{cell}` is not a number", c + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let d = Descriptor::new(values).map_err(|e| Error::Csv {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        frames.push(d);
    }
    if frames.is_empty() {
        return Err(Error::Empty("descriptor CSV"));
    }
    Ok(FrameSequence::new(frames))
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Csv {
            path: path.into(),
            row,
            message: format!("{other:?}"),
        },
    }
}

/// Writes descriptors one per row with round-trip float formatting.
pub fn write_csv(path: &Path, descriptors: &[Descriptor]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    for (k, d) in descriptors.iter().enumerate() {
        w.write_record(d.values().iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, k + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads descriptors from a CSV file, or from an image directory through
/// [`preprocess`].
pub fn load_descriptors(path: &Path, cfg: &DescriptorConfig) -> Result<Vec<Descriptor>> {
    if path.is_dir() {
        cfg.validate()?;
        ingest_images(path)?
            .frames()
            .iter()
            .map(|f| preprocess(f, cfg))
            .collect()
    } else if path.exists() {
        Ok(ingest_csv(path)?.into_frames())
    } else {
        Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut names: Vec<String> = (1..=10).rev().map(|k| format!("img_{k}.png")).collect();
        names.sort_by(|a, b| natural_cmp(a, b));
        let want: Vec<String> = (1..=10).map(|k| format!("img_{k}.png")).collect();
        assert_eq!(names, want);
        assert_eq!(natural_cmp("a02", "a2"), Ordering::Less);
        assert_eq!(natural_cmp("a2b", "a2a"), Ordering::Greater);
        assert_eq!(natural_cmp("frame", "frame1"), Ordering::Less);
        assert_eq!(natural_cmp("x9", "x10"), Ordering::Less);
    }

    #[test]
    fn csv_rectangular() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "1,2,3,4\n5,6,7,8\n0.5, 1e-3 ,0,1\n").unwrap();
        let seq = ingest_csv(&p).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.frames().iter().all(|d| d.len() == 4));
        assert_eq!(seq.frames()[2].values(), &[0.5, 1e-3, 0.0, 1.0]);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ragged.csv");
        fs::write(&p, "1,2,3\n4,5,6\n7,8\n").unwrap();
        match ingest_csv(&p) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "1,2\nx,3\n").unwrap();
        match ingest_csv(&p) {
            Err(Error::Csv { row, message, .. }) => {
                assert_eq!(row, 2);
                assert!(message.contains("column 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        fs::write(&p, "").unwrap();
        assert!(matches!(ingest_csv(&p), Err(Error::Empty(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.csv");
        let ds: Vec<Descriptor> = (0..5)
            .map(|k| Descriptor::new((0..7).map(|j| (k * 7 + j) as f64 / 3.0 + 1e-13).collect()).unwrap())
            .collect();
        write_csv(&p, &ds).unwrap();
        let back = ingest_csv(&p).unwrap().into_frames();
        for (a, b) in ds.iter().zip(&back) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    fn write_png(path: &Path, value: u8) {
        image::GrayImage::from_pixel(40, 30, image::Luma([value])).save(path).unwrap();
    }

    #[test]
    fn images_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        for k in 1..=10u8 {
            write_png(&dir.path().join(format!("img_{k}.png")), k * 20);
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let seq = ingest_images(dir.path()).unwrap();
        assert_eq!(seq.len(), 10);
        let firsts: Vec<f64> = seq.frames().iter().map(|f| f.pixels()[0]).collect();
        let want: Vec<f64> = (1..=10).map(|k| (k * 20) as f64).collect();
        assert_eq!(firsts, want);
    }

    #[test]
    fn single_image_and_corrupt_file() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("a.png"), 9);
        assert_eq!(ingest_images(dir.path()).unwrap().len(), 1);
        fs::write(dir.path().join("b.png"), b"not an image").unwrap();
        match ingest_images(dir.path()) {
            Err(Error::Decode { path, .. }) => assert!(path.ends_with("b.png")),
            other => panic!("{other:?}"),
        }
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_images(empty.path()), Err(Error::Empty(_))));
    }
}
