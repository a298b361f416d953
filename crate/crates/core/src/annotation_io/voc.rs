//! LabelImg / Pascal-VOC XML import (read-only).

use roxmltree::{Document, Node};

use super::FormatError;
use crate::model::{Annotation, BoundingBox, CellClass, Dataset, ImageRecord};

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Result<Node<'a, 'i>, FormatError> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .ok_or_else(|| FormatError::MissingElement(name.to_string()))
}

fn text<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, FormatError> {
    Ok(child(node, name)?.text().unwrap_or("").trim())
}

fn number<T: std::str::FromStr>(node: Node<'_, '_>, name: &str) -> Result<T, FormatError> {
    let raw = text(node, name)?;
    raw.parse().map_err(|_| FormatError::BadValue {
        element: name.to_string(),
        value: raw.to_string(),
    })
}

/// One annotation document. `image_size_override` replaces the `<size>`
/// element, which LabelImg sometimes writes as 0×0.
pub fn import_voc_xml(
    doc: &str,
    image_size_override: Option<(u32, u32)>,
) -> Result<(ImageRecord, Vec<Annotation>), FormatError> {
    let parsed = Document::parse(doc).map_err(|e| FormatError::Xml(e.to_string()))?;
    let root = parsed.root_element();
    let filename = text(root, "filename")?;
    if filename.is_empty() {
        return Err(FormatError::BadValue {
            element: "filename".into(),
            value: String::new(),
        });
    }
    let (width, height) = match image_size_override {
        Some(wh) => wh,
        None => {
            let size = child(root, "size")?;
            let w: u32 = number(size, "width")?;
            let h: u32 = number(size, "height")?;
            let depth: u32 = number(size, "depth")?;
            if w == 0 || h == 0 || !matches!(depth, 1 | 3) {
                return Err(FormatError::BadValue {
                    element: "size".into(),
                    value: format!("{w}x{h}x{depth}"),
                });
            }
            (w, h)
        }
    };
    let record = ImageRecord::new(filename, width, height);
    let mut annotations = Vec::new();
    for obj in root.children().filter(|c| c.has_tag_name("object")) {
        let name = text(obj, "name")?;
        let label: CellClass = name
            .parse()
            .map_err(|_| FormatError::UnknownXmlClass(name.to_string()))?;
        let bb = child(obj, "bndbox")?;
        let bbox = BoundingBox::new(
            number(bb, "xmin")?,
            number(bb, "ymin")?,
            number(bb, "xmax")?,
            number(bb, "ymax")?,
        )?;
        if !bbox.within(width, height) {
            return Err(FormatError::BadValue {
                element: "bndbox".into(),
                value: format!("{bbox} outside {width}x{height}"),
            });
        }
        annotations.push(Annotation::new(record.image_id.clone(), bbox, label));
    }
    Ok((record, annotations))
}

/// Combines several documents into one dataset.
pub fn dataset_from_voc<'a>(docs: impl IntoIterator<Item = &'a str>) -> Result<Dataset, FormatError> {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for doc in docs {
        let (rec, anns) = import_voc_xml(doc, None)?;
        images.push(rec);
        annotations.extend(anns);
    }
    Ok(Dataset::new(images, annotations)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation_io::parse_csv;

    fn doc(objects: &str) -> String {
        format!(
            "<annotation>\n  <folder>imgs</folder>\n  <filename>a.png</filename>\n  \
             <size><width>100</width><height>200</height><depth>3</depth></size>\n{objects}</annotation>\n"
        )
    }

    fn obj(name: &str, b: [i32; 4]) -> String {
        format!(
            "  <object><name>{name}</name><pose>Unspecified</pose><bndbox>\
             <xmin>{}</xmin><ymin>{}</ymin><xmax>{}</xmax><ymax>{}</ymax></bndbox></object>\n",
            b[0], b[1], b[2], b[3]
        )
    }

    #[test]
    fn agrees_with_csv() {
        let xml = doc(&obj("Artifact", [10, 20, 30, 60]));
        let from_xml = dataset_from_voc([xml.as_str()]).unwrap();
        let from_csv = parse_csv("a.png,100,200,Artifact,10,20,30,60").unwrap();
        assert_eq!(from_xml, from_csv);
    }

    #[test]
    fn no_objects_is_valid() {
        let (rec, anns) = import_voc_xml(&doc(""), None).unwrap();
        assert!(anns.is_empty());
        assert_eq!((rec.width, rec.height, rec.image_id.as_str()), (100, 200, "a"));
    }

    #[test]
    fn class_names_are_trimmed_but_case_sensitive() {
        let (_, anns) = import_voc_xml(&doc(&obj(" Artifact ", [1, 1, 5, 5])), None).unwrap();
        assert_eq!(anns[0].label, CellClass::Artifact);
        assert!(matches!(
            import_voc_xml(&doc(&obj("artifact", [1, 1, 5, 5])), None),
            Err(FormatError::UnknownXmlClass(_))
        ));
    }

    #[test]
    fn errors() {
        assert!(matches!(import_voc_xml("<annotation>", None), Err(FormatError::Xml(_))));
        assert!(matches!(
            import_voc_xml("<annotation><size/></annotation>", None),
            Err(FormatError::MissingElement(e)) if e == "filename"
        ));
        let no_box = doc("  <object><name>Artifact</name></object>\n");
        assert!(matches!(import_voc_xml(&no_box, None), Err(FormatError::MissingElement(e)) if e == "bndbox"));
        let outside = doc(&obj("Artifact", [90, 10, 120, 20]));
        assert!(import_voc_xml(&outside, None).is_err());
    }

    #[test]
    fn size_override() {
        let xml = "<annotation><filename>z.tif</filename><size><width>0</width><height>0</height>\
                   <depth>3</depth></size></annotation>";
        assert!(import_voc_xml(xml, None).is_err());
        let (rec, _) = import_voc_xml(xml, Some((64, 32))).unwrap();
        assert_eq!((rec.width, rec.height), (64, 32));
    }
}
