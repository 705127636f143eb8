//! Writing and reading ZSEB embedding files with their JSON sidecars.
//!
//!     cargo run --example exchange_roundtrip

use zeroleaf::exchange::{
    encode, read_embedding_file, read_header, sidecar_path, write_embedding_file, ImageRow,
    ReadOptions, RowDescriptors, Sidecar,
};
use zeroleaf::fixtures;
use zeroleaf::promptbank::{build_text_bank, TextEmbeddingBank};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    let images = fixtures::random_matrix(5, 8, 11);
    let rows = (0..5)
        .map(|i| ImageRow {
            item_id: format!("img-{i}"),
            source: "demo".into(),
            true_label: Some(i % 3),
        })
        .collect();
    let path = dir.path().join("images.zseb");
    let written = write_embedding_file(
        &path,
        &images,
        &Sidecar::new("demo encoder", RowDescriptors::Image(rows)),
    )?;
    println!("payload sha256 {}", written.payload_sha256);

    let header = read_header(&path)?;
    println!(
        "header: v{} dim {} count {} normalized {}",
        header.version,
        header.dim,
        header.count,
        header.normalized()
    );
    let (back, sidecar) = read_embedding_file(&path, ReadOptions { strict: true })?;
    assert_eq!(back.data(), images.data());
    println!(
        "round trip exact, {} descriptors, sidecar at {}",
        sidecar.descriptors.len(),
        sidecar_path(&path).display()
    );

    // The first bytes of any ZSEB file.
    let bytes = encode(&images);
    println!("header bytes: {}", hex(&bytes[..19]));

    // Banks persist as normalized text-row files.
    let sets = fixtures::potato_prompt_sets();
    let bank = build_text_bank(&sets, &fixtures::random_matrix(18, 8, 12), "demo encoder")?;
    let bank_path = dir.path().join("bank.zseb");
    bank.write(&bank_path)?;
    let reread = TextEmbeddingBank::read(&bank_path)?;
    assert_eq!(reread, bank);
    println!("bank reread: {:?}", reread.class_names());

    // A corrupted payload is caught by the digest.
    let mut raw = std::fs::read(&path)?;
    raw[25] ^= 0x01;
    std::fs::write(&path, raw)?;
    match read_embedding_file(&path, ReadOptions::default()) {
        Err(e) => println!("corrupted file: {} ({e})", e.name()),
        Ok(_) => unreachable!("digest must catch the flipped bit"),
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
