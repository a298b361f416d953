use crate::model::BoundingBox;

/// Binary raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "mask size");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// One 8-connected foreground region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// `(x, y)` pixels in raster order.
    pub pixels: Vec<(u32, u32)>,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Tight box around the pixels, max corner exclusive.
    pub fn bbox(&self) -> BoundingBox {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &self.pixels {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::new(x0.into(), y0.into(), f64::from(x1) + 1.0, f64::from(y1) + 1.0)
            .expect("components are non-empty")
    }
}

/// 8-connected components ordered by their top-most, then left-most pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            pixels.push((x as u32, y as u32));
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let q = ny * w + nx;
                    if mask.data[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        out.push(Component { pixels });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Union-find over all 8-neighbour pairs.
    fn union_find_count(mask: &BinaryMask) -> usize {
        let (w, h) = (mask.width as usize, mask.height as usize);
        let mut parent: Vec<usize> = (0..w * h).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for y in 0..h {
            for x in 0..w {
                if !mask.data[y * w + x] {
                    continue;
                }
                for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (-1, 1)] {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if mask.data[q] {
                        let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, q));
                        parent[a] = b;
                    }
                }
            }
        }
        (0..w * h)
            .filter(|&i| mask.data[i] && find(&mut parent, i) == i)
            .count()
    }

    #[test]
    fn empty_mask() {
        assert!(connected_components(&BinaryMask::new(4, 3, vec![false; 12])).is_empty());
    }

    #[test]
    fn diagonal_neighbours_join() {
        let m = BinaryMask::new(2, 2, vec![true, false, false, true]);
        let cc = connected_components(&m);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].bbox(), BoundingBox::new(0., 0., 2., 2.).unwrap());
    }

    #[test]
    fn ordering_is_top_then_left() {
        #[rustfmt::skip]
        let m = BinaryMask::new(5, 3, vec![
            false, false, false, false, true,
            true,  false, false, false, false,
            false, false, true,  false, false,
        ]);
        let firsts: Vec<(u32, u32)> = connected_components(&m).iter().map(|c| c.pixels[0]).collect();
        assert_eq!(firsts, vec![(4, 0), (0, 1), (2, 2)]);
    }

    #[test]
    fn random_masks_match_union_find() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for density in [0.1, 0.3, 0.45, 0.6] {
            for _ in 0..10 {
                let m = BinaryMask::new(64, 64, (0..64 * 64).map(|_| rng.random_bool(density)).collect());
                let cc = connected_components(&m);
                assert_eq!(cc.len(), union_find_count(&m));
                let covered: usize = cc.iter().map(Component::area).sum();
                assert_eq!(covered, m.data.iter().filter(|&&b| b).count());
            }
        }
    }
}
