mod common;

use std::fs;

use zeroleaf::exchange::{
    decode, decode_header, encode, read_embedding_file, write_embedding_file, ReadOptions,
    RowDescriptors, Sidecar, TextRow, HEADER_LEN,
};
use zeroleaf::fixtures;
use zeroleaf::vecspace::EmbeddingMatrix;

#[test]
fn round_trips_and_golden_bytes() {
    common::exchange_format(100).unwrap();
}

#[test]
fn golden_header_fields() {
    let bytes = fs::read(common::golden_path()).unwrap();
    let (h, payload) = decode_header(&bytes).unwrap();
    assert_eq!((h.version, h.dim, h.count, h.flags), (1, 3, 2, 0));
    assert_eq!(payload.len(), 24);
    assert_eq!(bytes.len(), HEADER_LEN + 24);
}

#[test]
fn trailing_bytes_and_truncated_header() {
    let m = EmbeddingMatrix::new(2, vec![1.0, 2.0]).unwrap();
    let mut bytes = encode(&m);
    assert_eq!(decode(&bytes[..10]).unwrap_err().name(), "TruncatedHeader");
    bytes.push(0);
    assert_eq!(decode(&bytes).unwrap_err().name(), "TrailingBytes");
}

#[test]
fn unsupported_version() {
    let mut bytes = fs::read(common::golden_path()).unwrap();
    bytes[4] = 2;
    assert_eq!(decode(&bytes).unwrap_err().name(), "UnsupportedVersion");
}

#[test]
fn false_normalized_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.zseb");
    let m = EmbeddingMatrix::new(2, vec![3.0, 4.0]).unwrap();
    let rows = vec![TextRow {
        class_id: 0,
        class_name: "a".into(),
        description_index: 0,
        description_text: "x".into(),
    }];
    write_embedding_file(&path, &m, &Sidecar::new("t", RowDescriptors::Text(rows))).unwrap();
    // The digest covers only the payload, so flipping the flag goes unnoticed there.
    let mut bytes = fs::read(&path).unwrap();
    bytes[HEADER_LEN - 1] = 1;
    fs::write(&path, bytes).unwrap();
    let err = read_embedding_file(&path, ReadOptions::default()).unwrap_err();
    assert_eq!(err.name(), "NormalizationMismatch");
}

#[test]
fn sidecar_row_count_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.zseb");
    let m = fixtures::random_matrix(3, 4, 1);
    let err = write_embedding_file(&path, &m, &Sidecar::new("t", RowDescriptors::Image(vec![])))
        .unwrap_err();
    assert_eq!(err.name(), "SidecarRowCount");
}
