//! AES-CMAC and the LoRaWAN payload keystream on top of a pluggable
//! 128-bit block cipher.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};

pub type Block = [u8; 16];

/// Encryption direction of a 128-bit block cipher keyed at construction.
pub trait BlockCipher {
    fn with_key(key: &Block) -> Self;
    fn encrypt_block(&self, block: &mut Block);
}

/// AES-128 backed by the `aes` crate.
#[derive(Clone)]
pub struct Aes128(aes::Aes128);

impl BlockCipher for Aes128 {
    fn with_key(key: &Block) -> Self {
        Aes128(aes::Aes128::new(GenericArray::from_slice(key)))
    }

    fn encrypt_block(&self, block: &mut Block) {
        self.0.encrypt_block(GenericArray::from_mut_slice(block));
    }
}

fn dbl(block: &Block) -> Block {
    let mut out = [0u8; 16];
    let mut carry = 0u8;
    for i in (0..16).rev() {
        out[i] = (block[i] << 1) | carry;
        carry = block[i] >> 7;
    }
    if carry == 1 {
        out[15] ^= 0x87;
    }
    out
}

/// RFC 4493 CMAC, full 128-bit tag.
pub fn cmac<C: BlockCipher>(key: &Block, msg: &[u8]) -> Block {
    let cipher = C::with_key(key);
    let mut l = [0u8; 16];
    cipher.encrypt_block(&mut l);
    let k1 = dbl(&l);
    let k2 = dbl(&k1);

    let n_blocks = msg.len().div_ceil(16).max(1);
    let complete_last = !msg.is_empty() && msg.len().is_multiple_of(16);

    let mut x = [0u8; 16];
    for chunk in msg.chunks(16).take(n_blocks - 1) {
        for (xi, mi) in x.iter_mut().zip(chunk) {
            *xi ^= mi;
        }
        cipher.encrypt_block(&mut x);
    }

    let tail = &msg[(n_blocks - 1) * 16..];
    let mut last = [0u8; 16];
    last[..tail.len()].copy_from_slice(tail);
    let subkey = if complete_last {
        &k1
    } else {
        last[tail.len()] = 0x80;
        &k2
    };
    for i in 0..16 {
        x[i] ^= last[i] ^ subkey[i];
    }
    cipher.encrypt_block(&mut x);
    x
}

/// XORs `data` in place with the uplink/downlink FRMPayload keystream.
/// Applying it twice restores the input.
pub fn apply_keystream<C: BlockCipher>(key: &Block, uplink: bool, dev_addr: u32, fcnt: u32, data: &mut [u8]) {
    let cipher = C::with_key(key);
    for (i, chunk) in data.chunks_mut(16).enumerate() {
        let mut a = [0u8; 16];
        a[0] = 0x01;
        a[5] = if uplink { 0 } else { 1 };
        a[6..10].copy_from_slice(&dev_addr.to_le_bytes());
        a[10..14].copy_from_slice(&fcnt.to_le_bytes());
        a[15] = (i + 1) as u8;
        cipher.encrypt_block(&mut a);
        for (d, s) in chunk.iter_mut().zip(a.iter()) {
            *d ^= s;
        }
    }
}

/// 4-byte data-frame MIC over `msg` (MHDR through FRMPayload).
pub fn data_mic<C: BlockCipher>(nwk_skey: &Block, uplink: bool, dev_addr: u32, fcnt: u32, msg: &[u8]) -> [u8; 4] {
    let mut input = Vec::with_capacity(16 + msg.len());
    input.push(0x49);
    input.extend_from_slice(&[0; 4]);
    input.push(if uplink { 0 } else { 1 });
    input.extend_from_slice(&dev_addr.to_le_bytes());
    input.extend_from_slice(&fcnt.to_le_bytes());
    input.push(0);
    input.push(msg.len() as u8);
    input.extend_from_slice(msg);
    let tag = cmac::<C>(nwk_skey, &input);
    [tag[0], tag[1], tag[2], tag[3]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(s: &str) -> Vec<u8> {
        hex::decode(s.replace(' ', "")).unwrap()
    }

    fn key(s: &str) -> Block {
        h(s).try_into().unwrap()
    }

    const RFC_KEY: &str = "2b7e1516 28aed2a6 abf71588 09cf4f3c";
    const RFC_MSG: &str = "6bc1bee2 2e409f96 e93d7e11 7393172a ae2d8a57 1e03ac9c 9eb76fac 45af8e51 \
                           30c81c46 a35ce411 e5fbc119 1a0a52ef f69f2445 df4f9b17 ad2b417b e66c3710";

    #[test]
    fn rfc4493_subkeys() {
        let c = Aes128::with_key(&key(RFC_KEY));
        let mut l = [0u8; 16];
        c.encrypt_block(&mut l);
        assert_eq!(l.to_vec(), h("7df76b0c 1ab899b3 3e42f047 b91b546f"));
        let k1 = dbl(&l);
        assert_eq!(k1.to_vec(), h("fbeed618 35713366 7c85e08f 7236a8de"));
        assert_eq!(dbl(&k1).to_vec(), h("f7ddac30 6ae266cc f90bc11e e46d513b"));
    }

    #[test]
    fn rfc4493_examples() {
        let k = key(RFC_KEY);
        let msg = h(RFC_MSG);
        let cases = [
            (0, "bb1d6929 e9593728 7fa37d12 9b756746"),
            (16, "070a16b4 6b4d4144 f79bdd9d d04a287c"),
            (40, "dfa66747 de9ae630 30ca3261 1497c827"),
            (64, "51f0bebf 7e3b9d92 fc497417 79363cfe"),
        ];
        for (len, want) in cases {
            assert_eq!(cmac::<Aes128>(&k, &msg[..len]).to_vec(), h(want), "len {len}");
        }
    }

    #[test]
    fn zero_key_vectors() {
        // Reference values from an independent CMAC implementation.
        let k = [0u8; 16];
        assert_eq!(cmac::<Aes128>(&k, &[0u8; 16]).to_vec(), h("763cbcde81df9131bf897712c088edad"));
        assert_eq!(cmac::<Aes128>(&k, &[]).to_vec(), h("4387c14b46ef7e176dceefa862d72ff9"));
    }

    #[test]
    fn keystream_is_involution() {
        let k = key(RFC_KEY);
        let orig: Vec<u8> = (0..50).collect();
        let mut data = orig.clone();
        apply_keystream::<Aes128>(&k, true, 0x1234_5663, 9, &mut data);
        assert_ne!(data, orig);
        apply_keystream::<Aes128>(&k, true, 0x1234_5663, 9, &mut data);
        assert_eq!(data, orig);
    }
}
