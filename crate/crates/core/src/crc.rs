pub(crate) fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Splits `bytes` into payload and little-endian CRC32 trailer and checks it.
pub(crate) fn verify_trailer(bytes: &[u8]) -> Result<&[u8], (u32, u32)> {
    let (payload, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32(payload);
    if stored == computed {
        Ok(payload)
    } else {
        Err((stored, computed))
    }
}
