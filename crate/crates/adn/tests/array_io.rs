use std::fs;

use adn::array_io::*;
use adn::Error;
use adn_core::image::{CtImage, Provenance};
use adn_core::sim::MetalMask;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1e4f32..1e4)).collect()
}

#[test]
fn roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.adnarr");
    let data = random(64 * 64, 1);
    let meta = ArrayMeta::new(&[64, 64], 0.75, ProvenanceTag::Ingested);
    write_array(&p, &data, &meta).unwrap();
    let (back, m) = read_array(&p).unwrap();
    assert_eq!(m, meta);
    assert!(back.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn short_payload_is_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("short.adnarr");
    let mut bytes = encode_array(&random(64 * 64, 2), &ArrayMeta::new(&[64, 64], 1.0, ProvenanceTag::Synthetic)).unwrap();
    bytes.truncate(bytes.len() - 4);
    fs::write(&p, &bytes).unwrap();
    assert!(matches!(read_array(&p), Err(Error::Corruption { .. })));
}

fn with_header(header: &str) -> Vec<u8> {
    let mut b = header.as_bytes().to_vec();
    b.push(b'\n');
    b.extend(std::iter::repeat_n(0u8, 16 * 16 * 4));
    b
}

#[test]
fn bad_headers_are_format_errors() {
    let path = std::path::Path::new("mem");
    let ok = r#"{"magic":"ADNARR1","shape":[16,16],"dtype":"f32le","spacing_mm":1.0,"provenance":"synthetic"}"#;
    assert!(decode_array(&with_header(ok), path).is_ok());
    for bad in [
        ok.replace("f32le", "f16le"),
        ok.replace("ADNARR1", "ADNARR2"),
        ok.replace("[16,16]", "[256]"),
        ok.replace("synthetic", "dicom"),
        ok.replace("}", r#","extra":1}"#),
        "not json".to_string(),
    ] {
        assert!(matches!(decode_array(&with_header(&bad), path), Err(Error::Format { .. })), "{bad}");
    }
    assert!(matches!(decode_array(b"no newline", path), Err(Error::Format { .. })));
}

#[test]
fn missing_file_is_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_array(&dir.path().join("nope.adnarr")), Err(Error::MissingInput(_))));
}

#[test]
fn images_and_masks_keep_their_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let img = CtImage::new(random(32 * 16, 3).iter().map(|v| v.abs()).collect(), 32, 16, 0.6, Provenance::Synthetic).unwrap();
    write_image(&dir.path().join("i.adnarr"), &img).unwrap();
    assert_eq!(read_image(&dir.path().join("i.adnarr")).unwrap(), img);

    let bits: Vec<bool> = (0..32 * 32).map(|i| i % 7 == 0).collect();
    let mask = MetalMask::new(bits, 32, 32, 3000.0).unwrap();
    write_mask(&dir.path().join("m.adnarr"), &mask, 0.6).unwrap();
    assert_eq!(read_mask(&dir.path().join("m.adnarr"), 3000.0).unwrap(), mask);
}

#[test]
fn out_of_range_hu_is_clamped_on_read() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("raw.adnarr");
    let mut data = vec![0.0f32; 256];
    data[0] = -3000.0;
    data[1] = 1e6;
    write_array(&p, &data, &ArrayMeta::new(&[16, 16], 1.0, ProvenanceTag::Ingested)).unwrap();
    let img = read_image(&p).unwrap();
    assert_eq!(img.pixels()[0], -1024.0);
    assert_eq!(img.pixels()[1], 32767.0);
    assert_eq!(img.provenance(), Provenance::Ingested);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_array_roundtrips(h in 1usize..20, w in 1usize..20, d in 1usize..3, spacing in 0.1f32..3.0, seed in any::<u64>()) {
        let shape = if d == 1 { vec![h, w] } else { vec![d, h, w] };
        let data = random(shape.iter().product(), seed);
        let meta = ArrayMeta::new(&shape, spacing, ProvenanceTag::Synthetic);
        let bytes = encode_array(&data, &meta).unwrap();
        let (back, m) = decode_array(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(m, meta);
        prop_assert_eq!(back, data);
    }
}
