use sha2::{Digest, Sha256};

/// Seed of one stochastic stage: the first eight bytes of
/// `SHA-256(stage name ‖ 0x00 ‖ master seed as little-endian u64)`.
pub fn stage_seed(stage: &str, master: u64) -> u64 {
    let digest =
        Sha256::new().chain_update(stage.as_bytes()).chain_update([0u8]).chain_update(master.to_le_bytes()).finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
