use std::path::{Path, PathBuf};

use proptest::prelude::*;
use ticket_lab::error::{ParseError, ParseErrorKind};
use ticket_lab::io::{
    decode_mask, encode_mask, parse_cifar_bin, parse_idx, read_all_records, read_mask, write_mask, write_run_record,
    BlobStore, Dataset, IdxData, Split,
};
use ticket_lab::pruning::{LayerMask, Mask};
use ticket_lab::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

fn parse_err(e: ParseError) -> (usize, ParseErrorKind) {
    (e.offset, e.kind)
}

#[test]
fn mask_fixture_decodes_and_reencodes() {
    let bytes = read("mask.tckt");
    let mask = decode_mask(&bytes).unwrap();
    assert_eq!(mask.len(), 2);
    let l0 = mask.layer(0);
    assert_eq!((l0.name(), l0.dims(), l0.tau()), ("dense0", &[3usize, 4][..], 5));
    assert_eq!(l0.kept_indices(), vec![0, 3, 5, 8, 11]);
    assert_eq!(mask.layer(1).kept_indices(), vec![1, 4]);
    assert_eq!(encode_mask(&mask), bytes);
    assert_eq!(read_mask(&fixture("mask.tckt")).unwrap(), mask);
}

#[test]
fn malformed_masks_report_offsets() {
    let bytes = read("mask.tckt");
    // Cut inside the first layer's bitset (header 12 + name 8 + dims 9 + tau 8 = 37).
    let (off, kind) = parse_err(decode_mask(&bytes[..38]).unwrap_err());
    assert_eq!(off, 38);
    assert_eq!(kind, ParseErrorKind::Truncated { needed: 39, available: 38 });

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(parse_err(decode_mask(&bad).unwrap_err()).0, 0);

    let mut bad = bytes.clone();
    bad[4] = 2;
    let (off, kind) = parse_err(decode_mask(&bad).unwrap_err());
    assert_eq!((off, kind), (4, ParseErrorKind::Version { found: 2, supported: 1 }));

    // Wrong τ for the first layer.
    let mut bad = bytes.clone();
    bad[29] = 6;
    assert_eq!(parse_err(decode_mask(&bad).unwrap_err()).0, 29);

    // Padding bit 12 of the 12-bit first layer.
    let mut bad = bytes.clone();
    bad[38] |= 0x10;
    assert_eq!(parse_err(decode_mask(&bad).unwrap_err()).0, 38);

    let mut long = bytes;
    long.push(0);
    assert!(decode_mask(&long).is_err());
}

#[test]
fn idx_fixtures() {
    let IdxData::Images(images) = parse_idx(&read("images.idx3")).unwrap() else {
        panic!("expected images");
    };
    assert_eq!(images.shape(), &[3, 1, 2, 3]);
    assert_eq!(&images.data()[..6], &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    assert_eq!(parse_idx(&read("labels.idx1")).unwrap(), IdxData::Labels(vec![7, 0, 9]));
    let ds = Dataset::from_idx(&read("images.idx3"), &read("labels.idx1"), 10, Split::Train).unwrap();
    assert_eq!(ds.labels, vec![7, 0, 9]);
    assert!(matches!(
        Dataset::from_idx(&read("images.idx3"), &read("labels.idx1"), 8, Split::Train),
        Err(Error::Label { label: 9, classes: 8 })
    ));

    let imgs = read("images.idx3");
    let (off, kind) = parse_err(parse_idx(&imgs[..imgs.len() - 1]).unwrap_err());
    assert_eq!(off, imgs.len() - 1);
    assert_eq!(kind, ParseErrorKind::Truncated { needed: 34, available: 33 });
    let mut bad = imgs;
    bad[3] = 0x02;
    assert_eq!(parse_err(parse_idx(&bad).unwrap_err()).0, 0);
}

#[test]
fn cifar_fixture() {
    let bytes = read("cifar.bin");
    let ds = parse_cifar_bin(&bytes, Split::Test).unwrap();
    assert_eq!(ds.labels, vec![3, 9]);
    assert_eq!(ds.images.shape(), &[2, 3, 32, 32]);
    assert!(ds.images.data()[..3072].iter().all(|&v| v == 0.0));
    assert!(ds.images.data()[3072..].iter().all(|&v| v == 1.0));
    let (off, _) = parse_err(parse_cifar_bin(&bytes[..5000], Split::Test).unwrap_err());
    assert_eq!(off, 3073);
    let mut bad = bytes;
    bad[3073] = 10;
    assert_eq!(parse_err(parse_cifar_bin(&bad, Split::Test).unwrap_err()).0, 3073);
}

#[test]
fn stored_records_round_trip_bit_exactly() {
    let src = fixture("records-5x5");
    let records = read_all_records(&BlobStore::new(&src)).unwrap();
    assert_eq!(records.len(), 25);
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::new(dir.path());
    for r in &records {
        let written = write_run_record(&store, r).unwrap();
        let name = written.file_name().unwrap();
        assert_eq!(std::fs::read(&written).unwrap(), std::fs::read(src.join("records").join(name)).unwrap());
    }
    assert_eq!(read_all_records(&store).unwrap(), records);
}

#[test]
fn tampered_blob_is_detected() {
    let src = fixture("records-5x5");
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::new(dir.path());
    let records = read_all_records(&BlobStore::new(&src)).unwrap();
    let manifest = write_run_record(&store, &records[0]).unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let blob = dir.path().join(json["probe_outputs"]["path"].as_str().unwrap());
    let mut bytes = std::fs::read(&blob).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&blob, bytes).unwrap();
    assert!(matches!(read_all_records(&store), Err(Error::HashMismatch { .. })));
}

fn arb_mask() -> impl Strategy<Value = Mask> {
    prop::collection::vec(
        ("[a-z]{1,8}", prop::collection::vec(1usize..6, 1..4)).prop_flat_map(|(name, dims)| {
            let len: usize = dims.iter().product();
            prop::collection::vec(any::<bool>(), len)
                .prop_map(move |bits| LayerMask::from_bools(name.clone(), dims.clone(), &bits).unwrap())
        }),
        0..5,
    )
    .prop_map(Mask::new)
}

proptest! {
    #[test]
    fn mask_files_round_trip(mask in arb_mask()) {
        let bytes = encode_mask(&mask);
        prop_assert_eq!(&decode_mask(&bytes).unwrap(), &mask);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tckt");
        write_mask(&path, &mask).unwrap();
        prop_assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn truncated_masks_never_decode(mask in arb_mask(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_mask(&mask);
        let at = cut.index(bytes.len());
        prop_assert!(decode_mask(&bytes[..at]).is_err());
    }
}
