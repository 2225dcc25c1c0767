use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Corpus, IdMap, IdMaps, Interaction, PhotoFeatureTable, Split, SplitAssignment, Triads};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"PFV1";
const TRIAD_HEADER: &str = "user_id\titem_id\tphoto_id";
const SPLIT_HEADER: &str = "row_index\tsplit";

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Non-blank lines as `(1-based line number, text)`; rejects non-UTF-8 lines.
fn text_lines<'a>(path: &'a Path, bytes: &'a [u8]) -> impl Iterator<Item = Result<(usize, &'a str)>> + 'a {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .filter_map(move |(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            if raw.is_empty() {
                return None;
            }
            Some(match std::str::from_utf8(raw) {
                Ok(s) => Ok((i + 1, s)),
                Err(_) => Err(Error::Malformed {
                    path: path.to_owned(),
                    line: i + 1,
                    message: "line is not valid UTF-8".into(),
                }),
            })
        })
}

/// Read a `user_id<TAB>item_id<TAB>photo_id` file, densifying IDs in
/// first-seen order.
pub fn ingest_interactions(path: impl AsRef<Path>) -> Result<Triads> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let mut ids = IdMaps::default();
    let mut interactions = Vec::new();

    for line in text_lines(path, &bytes) {
        let (lineno, text) = line?;
        if interactions.is_empty() && ids.photos.is_empty() && text == TRIAD_HEADER {
            continue;
        }
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Malformed {
                path: path.to_owned(),
                line: lineno,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        if ids.photos.get(cols[2]).is_some() {
            return Err(Error::DuplicatePhoto {
                path: path.to_owned(),
                line: lineno,
                photo: cols[2].to_owned(),
            });
        }
        interactions.push(Interaction {
            user: ids.users.intern(cols[0]),
            item: ids.items.intern(cols[1]),
            photo: ids.photos.intern(cols[2]),
        });
    }

    if interactions.is_empty() {
        return Err(Error::EmptyFile(path.to_owned()));
    }
    Ok(Triads { interactions, ids })
}

pub fn write_triads(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ids = corpus.ids();
    write_with(path, |w| {
        writeln!(w, "{TRIAD_HEADER}")?;
        for x in corpus.interactions() {
            writeln!(
                w,
                "{}\t{}\t{}",
                ids.users.name(x.user),
                ids.items.name(x.item),
                ids.photos.name(x.photo)
            )?;
        }
        Ok(())
    })
}

/// Read a binary `PFV1` feature file.
pub fn ingest_features(path: impl AsRef<Path>) -> Result<PhotoFeatureTable> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    decode_features(&bytes)
}

fn decode_features(bytes: &[u8]) -> Result<PhotoFeatureTable> {
    if bytes.len() < 12 {
        let mut magic = [0u8; 4];
        let n = bytes.len().min(4);
        magic[..n].copy_from_slice(&bytes[..n]);
        if magic != FEATURE_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        return Err(Error::LengthMismatch {
            count: 0,
            dim: 0,
            actual: 0,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[12..];
    if !payload.len().is_multiple_of(4) || payload.len() / 4 != count * dim {
        return Err(Error::LengthMismatch {
            count,
            dim,
            actual: payload.len() / 4,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if dim == 0 {
        return Err(Error::LengthMismatch { count, dim, actual: 0 });
    }
    PhotoFeatureTable::new(dim, data)
}

/// Read a TSV feature file (`photo_id` then `dim` float columns) and reorder
/// rows to the dense photo indices of `photos`.
pub fn ingest_features_tsv(path: impl AsRef<Path>, photos: &IdMap) -> Result<PhotoFeatureTable> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let malformed = |line: usize, message: String| Error::Malformed {
        path: path.to_owned(),
        line,
        message,
    };

    let mut dim = None;
    let mut rows: Vec<Option<Vec<f32>>> = vec![None; photos.len()];
    for line in text_lines(path, &bytes) {
        let (lineno, text) = line?;
        let mut cols = text.split('\t');
        let id = cols.next().unwrap_or_default();
        if lineno == 1 && id == "photo_id" {
            continue;
        }
        let values = cols
            .map(|c| c.trim().parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(lineno, format!("bad float: {e}")))?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(malformed(lineno, format!("expected {d} feature columns, found {}", values.len())));
        }
        let Some(p) = photos.get(id) else {
            return Err(malformed(lineno, format!("unknown photo id {id:?}")));
        };
        if rows[p as usize].replace(values).is_some() {
            return Err(malformed(lineno, format!("photo id {id:?} listed twice")));
        }
    }

    let Some(dim) = dim else {
        return Err(Error::EmptyFile(path.to_owned()));
    };
    let mut data = Vec::with_capacity(photos.len() * dim);
    for (p, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => data.extend(r),
            None => {
                return Err(Error::MissingFeatureRow {
                    photo: p,
                    rows: photos.len(),
                })
            }
        }
    }
    PhotoFeatureTable::new(dim, data)
}

/// Read a feature file of either format, detected by the magic bytes.
pub fn load_features(path: impl AsRef<Path>, photos: &IdMap) -> Result<PhotoFeatureTable> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    if bytes.starts_with(&FEATURE_MAGIC) {
        decode_features(&bytes)
    } else {
        ingest_features_tsv(path, photos)
    }
}

pub fn write_features(table: &PhotoFeatureTable, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        w.write_all(&FEATURE_MAGIC)?;
        w.write_all(&(table.rows() as u32).to_le_bytes())?;
        w.write_all(&(table.dim() as u32).to_le_bytes())?;
        for v in table.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn write_split(split: &SplitAssignment, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "{SPLIT_HEADER}")?;
        for (i, l) in split.labels().iter().enumerate() {
            writeln!(w, "{i}\t{}", l.as_str())?;
        }
        Ok(())
    })
}

/// Read a split file; every interaction row must be labeled exactly once.
pub fn read_split(path: impl AsRef<Path>, corpus: &Corpus) -> Result<SplitAssignment> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let n = corpus.interactions().len();
    let mut labels: Vec<Option<Split>> = vec![None; n];
    for line in text_lines(path, &bytes) {
        let (lineno, text) = line?;
        if text == SPLIT_HEADER {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_owned(),
            line: lineno,
            message,
        };
        let (row, label) = text
            .split_once('\t')
            .ok_or_else(|| malformed("expected `row_index<TAB>split`".into()))?;
        let row: usize = row.parse().map_err(|_| malformed(format!("bad row index {row:?}")))?;
        let label = Split::parse(label).ok_or_else(|| malformed(format!("unknown split {label:?}")))?;
        if row >= n {
            return Err(malformed(format!("row {row} out of range ({n} interactions)")));
        }
        if labels[row].replace(label).is_some() {
            return Err(malformed(format!("row {row} labeled twice")));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::InvalidSplit(format!("row {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    SplitAssignment::new(labels, corpus)
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
