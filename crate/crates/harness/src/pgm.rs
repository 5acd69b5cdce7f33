//! Binary greyscale (P5) export of feature maps.

use hopfrc_core::features::FeatureMap;

/// One byte per cell, `round(255 * v)`, rows top to bottom.
pub fn encode_pgm(map: &FeatureMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.cols, map.rows).into_bytes();
    out.extend(map.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// Parse a P5 image written by [`encode_pgm`] into `(cols, rows, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Option<(usize, usize, &[u8])> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (cols, rows) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let pixels = bytes.get(pos + 1..)?;
    (pixels.len() == cols * rows).then_some((cols, rows, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hopfrc_core::features::MapKind;

    #[test]
    fn header_and_scaling() {
        let map = FeatureMap {
            data: vec![0.0, 0.5, 1.0, 0.25, 0.75, 1.0],
            rows: 2,
            cols: 3,
            kind: MapKind::HopfVirtualNodes,
            source: "x".into(),
        };
        let b = encode_pgm(&map);
        assert!(b.starts_with(b"P5\n3 2\n255\n"));
        let (c, r, px) = decode_pgm(&b).unwrap();
        assert_eq!((c, r), (3, 2));
        assert_eq!(px, &[0, 128, 255, 64, 191, 255]);
    }
}
