//! The worker message: fixed header, coordinates, CRC32.

use random_bases::distrib::{self, WorkerMessage};

fn main() {
    let msg = WorkerMessage {
        worker: 2,
        step: 1234,
        seed_tag: distrib::seed_tag(7),
        coords: vec![0.5, -1.25, 3.0],
    };
    let bytes = distrib::encode_message(&msg);
    println!("{} bytes: {:02x?}", bytes.len(), &bytes[..distrib::HEADER_BYTES]);
    assert_eq!(distrib::decode_message(&bytes).unwrap(), msg);

    let mut corrupt = bytes.clone();
    corrupt[distrib::HEADER_BYTES + 3] ^= 1;
    println!("flipped bit: {}", distrib::decode_message(&corrupt).unwrap_err());
    println!("cut short:   {}", distrib::decode_message(&bytes[..20]).unwrap_err());
    println!("d = 250 message: {} bytes", distrib::message_len(250));
}
