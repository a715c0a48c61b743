use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use mrnet::data::{load_cifar10, load_idx, parse_cifar10, parse_idx_images, Split, CIFAR_RECORD_LEN};
use mrnet::network::{load_checkpoint, save_checkpoint};
use mrnet::optim::init_params;
use mrnet::{Architecture, Error};

/// Two 2×3 images.
const PIXELS: [u8; 12] = [0, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6];

fn idx_images() -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
    b.extend_from_slice(&PIXELS);
    b
}

fn idx_labels() -> Vec<u8> {
    vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3]
}

fn gz(bytes: &[u8]) -> Vec<u8> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}

#[test]
fn idx_fixture_round_trips_plain_and_gzipped() {
    let dir = tempfile::tempdir().unwrap();
    for (name, wrap) in [("plain", false), ("gz", true)] {
        let images = dir.path().join(format!("{name}-images"));
        let labels = dir.path().join(format!("{name}-labels"));
        let enc = |b: Vec<u8>| if wrap { gz(&b) } else { b };
        std::fs::write(&images, enc(idx_images())).unwrap();
        std::fs::write(&labels, enc(idx_labels())).unwrap();
        let d = load_idx(&images, &labels, Split::Test).unwrap();
        assert_eq!(d.samples.shape(), [2, 1, 2, 3]);
        assert_eq!(d.labels, [7, 3]);
        assert_eq!(d.split, Split::Test);
        let want: Vec<f64> = PIXELS.iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(d.samples.data(), &want[..]);
    }
}

#[test]
fn idx_errors_name_an_offset() {
    let mut short = idx_images();
    short.pop();
    match parse_idx_images(&short) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, short.len() as u64),
        other => panic!("expected a format error, got {other:?}"),
    }
    let mut bad = idx_images();
    bad[3] = 9;
    assert!(matches!(parse_idx_images(&bad), Err(Error::Format { offset: 0, .. })));
}

fn cifar_record(label: u8, fill: u8) -> Vec<u8> {
    let mut r = vec![label];
    r.extend((0..3072).map(|i| fill.wrapping_add((i % 7) as u8)));
    r
}

#[test]
fn cifar_fixture_parses_channel_major() {
    let mut bytes = cifar_record(4, 10);
    bytes.extend(cifar_record(9, 200));
    let (pixels, labels) = parse_cifar10(&bytes).unwrap();
    assert_eq!(labels, [4, 9]);
    assert_eq!(pixels.len(), 2 * 3072);
    assert_eq!(pixels[0], 10.0 / 255.0);
    assert_eq!(pixels[3072 + 1], 201.0 / 255.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.bin");
    std::fs::write(&path, &bytes).unwrap();
    let d = load_cifar10(&[&path], Split::Train).unwrap();
    assert_eq!(d.samples.shape(), [2, 3, 32, 32]);
    assert_eq!(d.classes, 10);

    bytes.truncate(CIFAR_RECORD_LEN + 5);
    assert!(matches!(parse_cifar10(&bytes), Err(Error::Format { offset, .. }) if offset == CIFAR_RECORD_LEN as u64));
    let mut bad = cifar_record(10, 0);
    bad.truncate(CIFAR_RECORD_LEN);
    assert!(parse_cifar10(&bad).is_err());
}

#[test]
fn checkpoints_round_trip_and_reject_corruption() {
    let arch = Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dropout:0.5,dense:4", 3).unwrap();
    let params = init_params(&arch, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    save_checkpoint(&path, &arch, &params).unwrap();
    let (a2, p2) = load_checkpoint(&path).unwrap();
    assert_eq!(a2, arch);
    assert_eq!(p2, params);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_checkpoint(&path).is_err());
    std::fs::write(&path, b"not a checkpoint").unwrap();
    assert!(load_checkpoint(&path).is_err());
}
