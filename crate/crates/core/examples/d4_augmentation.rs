//! The eight symmetries of the square acting on pixels and on boxes.

use celldet::augment::{apply_d4_box, apply_d4_image, D4Element};
use celldet::raster::ImageBuffer;
use celldet::BoundingBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (6, 4);
    // a 2x1 bright block at (1, 0)
    let img = ImageBuffer::from_fn(w, h, 1, |x, y, _| if (1..3).contains(&x) && y == 0 { 1.0 } else { 0.0 })?;
    let b = BoundingBox::new(1.0, 0.0, 3.0, 1.0)?;

    print!("{:<14}", "");
    for g in D4Element::ALL {
        print!("{:>6}", &g.name()[..g.name().len().min(6)]);
    }
    println!();
    for a in D4Element::ALL {
        print!("{:<14}", a.name());
        for g in D4Element::ALL {
            print!("{:>6}", a.compose(g).name().chars().take(6).collect::<String>());
        }
        println!();
    }
    println!();

    for g in D4Element::ALL {
        let out = apply_d4_image(&img, g);
        let mapped = apply_d4_box(&b, g, w, h);
        println!("{:<14} {}x{}  box {mapped}", g.name(), out.width(), out.height());
        for y in 0..out.height() {
            let row: String = (0..out.width()).map(|x| if out.get(x, y, 0) > 0.5 { '#' } else { '.' }).collect();
            println!("    {row}");
        }
    }
    Ok(())
}
