//! Canonical listing: one row per labeled region,
//! `filename,width,height,class,xmin,ymin,xmax,ymax`, integer pixel corners
//! with the max corner exclusive, LF line endings, rows sorted by
//! (filename, ymin, xmin, class). Classes order by label id.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::FormatError;
use crate::model::{Annotation, BoundingBox, CellClass, Dataset, ImageRecord};

pub const CSV_HEADER: &str = "filename,width,height,class,xmin,ymin,xmax,ymax";

/// One listing row as integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CsvRow {
    pub filename: String,
    pub width: u32,
    pub height: u32,
    pub class: CellClass,
    pub xmin: i64,
    pub ymin: i64,
    pub xmax: i64,
    pub ymax: i64,
}

impl CsvRow {
    /// Parses one data line; `line` is only used for error messages.
    pub fn parse(text: &str, line: usize) -> Result<CsvRow, FormatError> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(FormatError::MalformedRow {
                line,
                reason: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() {
            return Err(FormatError::MalformedRow {
                line,
                reason: "empty filename".into(),
            });
        }
        let size = |i: usize, name: &str| -> Result<u32, FormatError> {
            match fields[i].parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(FormatError::MalformedRow {
                    line,
                    reason: format!("{name} {:?} is not a positive integer", fields[i]),
                }),
            }
        };
        let coord = |i: usize, name: &str| -> Result<i64, FormatError> {
            fields[i].parse::<i64>().map_err(|_| FormatError::MalformedRow {
                line,
                reason: format!("{name} {:?} is not an integer", fields[i]),
            })
        };
        let width = size(1, "width")?;
        let height = size(2, "height")?;
        let class = fields[3]
            .parse::<CellClass>()
            .map_err(|_| FormatError::UnknownClass {
                line,
                name: fields[3].to_string(),
            })?;
        let row = CsvRow {
            filename: fields[0].to_string(),
            width,
            height,
            class,
            xmin: coord(4, "xmin")?,
            ymin: coord(5, "ymin")?,
            xmax: coord(6, "xmax")?,
            ymax: coord(7, "ymax")?,
        };
        if row.xmin >= row.xmax || row.ymin >= row.ymax {
            return Err(FormatError::DegenerateBox { line });
        }
        if row.xmin < 0 || row.ymin < 0 || row.xmax > i64::from(width) || row.ymax > i64::from(height) {
            return Err(FormatError::OutOfBounds {
                line,
                xmin: row.xmin,
                ymin: row.ymin,
                xmax: row.xmax,
                ymax: row.ymax,
                width,
                height,
            });
        }
        Ok(row)
    }

    /// Row for an annotation; min corner floored, max corner ceiled.
    pub fn from_annotation(img: &ImageRecord, a: &Annotation) -> CsvRow {
        CsvRow {
            filename: img.file_path.clone(),
            width: img.width,
            height: img.height,
            class: a.label,
            xmin: a.bbox.xmin().floor() as i64,
            ymin: a.bbox.ymin().floor() as i64,
            xmax: a.bbox.xmax().ceil() as i64,
            ymax: a.bbox.ymax().ceil() as i64,
        }
    }

    fn sort_key(&self) -> (&str, i64, i64, CellClass, i64, i64) {
        (&self.filename, self.ymin, self.xmin, self.class, self.ymax, self.xmax)
    }

    fn write_to(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.filename,
            self.width,
            self.height,
            self.class,
            self.xmin,
            self.ymin,
            self.xmax,
            self.ymax
        );
    }
}

/// Parses a listing into a dataset. The header line is optional; blank lines
/// are skipped; CRLF is accepted.
pub fn parse_csv(text: &str) -> Result<Dataset, FormatError> {
    let mut images: BTreeMap<String, (ImageRecord, usize)> = BTreeMap::new();
    let mut ids: BTreeMap<String, String> = BTreeMap::new();
    let mut seen_rows: BTreeMap<CsvRow, usize> = BTreeMap::new();
    let mut annotations = Vec::new();
    let mut first_content = true;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first_content) && raw.trim() == CSV_HEADER {
            continue;
        }
        let row = CsvRow::parse(raw, line)?;
        if let Some(&first) = seen_rows.get(&row) {
            return Err(FormatError::DuplicateRow { line, first });
        }
        match images.get(&row.filename) {
            Some((rec, _)) if (rec.width, rec.height) != (row.width, row.height) => {
                return Err(FormatError::InconsistentSize {
                    line,
                    filename: row.filename.clone(),
                    width: row.width,
                    height: row.height,
                    prev_width: rec.width,
                    prev_height: rec.height,
                });
            }
            Some(_) => {}
            None => {
                let rec = ImageRecord::new(row.filename.clone(), row.width, row.height);
                if let Some(other) = ids.get(&rec.image_id) {
                    return Err(FormatError::ImageIdCollision {
                        line,
                        filename: row.filename.clone(),
                        image_id: rec.image_id.clone(),
                        other: other.clone(),
                    });
                }
                ids.insert(rec.image_id.clone(), row.filename.clone());
                images.insert(row.filename.clone(), (rec, line));
            }
        }
        let image_id = images[&row.filename].0.image_id.clone();
        let bbox = BoundingBox::new(
            row.xmin as f64,
            row.ymin as f64,
            row.xmax as f64,
            row.ymax as f64,
        )?;
        annotations.push(Annotation::new(image_id, bbox, row.class));
        seen_rows.insert(row, line);
    }
    Ok(Dataset::new(
        images.into_values().map(|(r, _)| r).collect(),
        annotations,
    )?)
}

/// Canonical, byte-deterministic listing. Images without annotations have
/// no rows and are therefore not represented.
pub fn write_csv(d: &Dataset) -> String {
    let mut rows: Vec<CsvRow> = d
        .annotations()
        .iter()
        .map(|a| {
            let img = d.image(&a.image_id).expect("dataset references are valid");
            CsvRow::from_annotation(img, a)
        })
        .collect();
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        r.write_to(&mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row() {
        let d = parse_csv("a.png,100,200,Artifact,10,20,30,60").unwrap();
        assert_eq!(d.images().len(), 1);
        assert_eq!((d.images()[0].width, d.images()[0].height), (100, 200));
        let a = &d.annotations()[0];
        assert_eq!(a.label, CellClass::Artifact);
        assert_eq!(a.bbox, BoundingBox::new(10., 20., 30., 60.).unwrap());
    }

    #[test]
    fn unknown_class_reports_line() {
        let e = parse_csv("a.png,100,200,BadClass,1,1,2,2").unwrap_err();
        assert!(matches!(e, FormatError::UnknownClass { line: 1, .. }));
        assert_eq!(e.to_string(), "unknown class \"BadClass\" at line 1");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            (format!("{CSV_HEADER}\na.png,10,10,Artifact,1,1,2\n"), 2),
            ("a.png,10,10,Artifact,1,x,2,2\n".to_string(), 1),
            ("a.png,10,10,Artifact,1,1,2,2\n\na.png,10,10,Artifact,5,5,11,6\n".to_string(), 3),
            ("a.png,10,10,Artifact,1,1,2,2\na.png,10,12,Artifact,3,3,4,4\n".to_string(), 2),
            ("a.png,10,10,Artifact,1,1,1,2\n".to_string(), 1),
            ("a.png,10,10,Artifact,1,1,2,2\na.png,10,10,Artifact,1,1,2,2\n".to_string(), 2),
            ("a.png,0,10,Artifact,1,1,2,2\n".to_string(), 1),
        ];
        for (text, line) in cases {
            let msg = parse_csv(&text).unwrap_err().to_string();
            assert!(msg.contains(&format!("line {line}")), "{msg}");
        }
    }

    #[test]
    fn stem_collisions_are_rejected() {
        let t = "x/a.png,10,10,Artifact,1,1,2,2\ny/a.tif,10,10,Artifact,1,1,2,2\n";
        assert!(matches!(parse_csv(t), Err(FormatError::ImageIdCollision { .. })));
    }

    #[test]
    fn empty_dataset_is_header_only() {
        assert_eq!(write_csv(&Dataset::default()), format!("{CSV_HEADER}\n"));
        assert_eq!(parse_csv(&format!("{CSV_HEADER}\n")).unwrap(), Dataset::default());
    }

    #[test]
    fn canonical_text_roundtrips() {
        let t = format!(
            "{CSV_HEADER}\n\
             a.png,100,200,Single_cancer_cell,5,3,9,8\n\
             a.png,100,200,Cancer_cluster,1,20,3,22\n\
             a.png,100,200,Artifact,10,20,30,60\n\
             b.tif,64,64,Single_MSC_cell,0,0,64,64\n\
             b.tif,64,64,MSC_cluster,0,0,64,64\n"
        );
        assert_eq!(write_csv(&parse_csv(&t).unwrap()), t);
    }

    #[test]
    fn crlf_and_unsorted_input_normalizes() {
        let t = "b.png,8,8,Artifact,1,1,3,3\r\na.png,8,8,Artifact,0,0,2,2\r\n";
        let out = write_csv(&parse_csv(t).unwrap());
        assert_eq!(out, format!("{CSV_HEADER}\na.png,8,8,Artifact,0,0,2,2\nb.png,8,8,Artifact,1,1,3,3\n"));
    }

    #[test]
    fn fractional_boxes_round_outward() {
        let img = ImageRecord::new("f.png", 20, 20);
        let d = Dataset::new(
            vec![img],
            vec![Annotation::new("f", BoundingBox::new(1.4, 2.6, 7.2, 9.9).unwrap(), CellClass::Artifact)],
        )
        .unwrap();
        assert!(write_csv(&d).ends_with("f.png,20,20,Artifact,1,2,8,10\n"));
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        prop::collection::vec((0usize..4, 0usize..5, 0u32..30, 0u32..30, 1u32..10, 1u32..10), 0..25).prop_map(|rows| {
            let images: Vec<ImageRecord> = (0..4).map(|i| ImageRecord::new(format!("im{i}.png"), 40, 40)).collect();
            let mut anns: Vec<Annotation> = rows
                .into_iter()
                .map(|(i, c, x, y, w, h)| {
                    Annotation::new(
                        format!("im{i}"),
                        BoundingBox::new(x.into(), y.into(), (x + w).into(), (y + h).into()).unwrap(),
                        CellClass::from_index(c).unwrap(),
                    )
                })
                .collect();
            anns.sort_by(crate::model::annotation_order);
            anns.dedup();
            Dataset::new(images, anns).unwrap()
        })
    }

    proptest! {
        #[test]
        fn write_parse_write_is_stable(d in arb_dataset()) {
            let once = write_csv(&d);
            let parsed = parse_csv(&once).unwrap();
            prop_assert_eq!(write_csv(&parsed), once);
            prop_assert_eq!(parsed.object_count(), d.object_count());
            prop_assert_eq!(parsed.annotations(), d.annotations());
        }
    }
}
