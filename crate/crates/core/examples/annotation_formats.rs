//! CSV and VOC-XML import, canonical CSV export, and the JSON manifest.

use celldet::annotation_io::{dataset_from_voc, parse_csv, read_manifest, write_csv, write_manifest, Manifest};
use celldet::crossval::partition;

const CSV: &str = "\
filename,width,height,class,xmin,ymin,xmax,ymax\r
slide_b.tif,320,240,MSC_cluster,40,40,90,110\r
slide_a.png,256,256,Artifact,200,10,240,30\r
slide_a.png,256,256,Single_cancer_cell,12,30,24,44\r
";

const VOC: [&str; 2] = [
    r#"<annotation>
  <filename>slide_a.png</filename>
  <size><width>256</width><height>256</height><depth>3</depth></size>
  <object><name>Single_cancer_cell</name><bndbox><xmin>12</xmin><ymin>30</ymin><xmax>24</xmax><ymax>44</ymax></bndbox></object>
  <object><name> Artifact </name><bndbox><xmin>200</xmin><ymin>10</ymin><xmax>240</xmax><ymax>30</ymax></bndbox></object>
</annotation>"#,
    r#"<annotation>
  <filename>slide_b.tif</filename>
  <size><width>320</width><height>240</height><depth>1</depth></size>
  <object><name>MSC_cluster</name><bndbox><xmin>40</xmin><ymin>40</ymin><xmax>90</xmax><ymax>110</ymax></bndbox></object>
</annotation>"#,
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let from_csv = parse_csv(CSV)?;
    let from_xml = dataset_from_voc(VOC)?;
    println!("CSV and VOC agree: {}", from_csv == from_xml);

    // CRLF input, unsorted rows; the export is canonical
    let canonical = write_csv(&from_csv);
    print!("{canonical}");
    assert_eq!(write_csv(&parse_csv(&canonical)?), canonical);

    match parse_csv("a.png,10,10,Macrophage,0,0,5,5\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let folds = partition(&from_csv, 2, 0)?;
    let manifest = Manifest::new(from_csv, Some(folds), Vec::new());
    let json = write_manifest(&manifest)?;
    println!("manifest: {} bytes, reads back equal: {}", json.len(), read_manifest(&json)? == manifest);
    Ok(())
}
