//! Counter-based streams: any slice of any direction can be regenerated on
//! demand, in any order, from five integers.

use random_bases::prng::{self, Distribution, Stream};

fn main() -> random_bases::Result<()> {
    let key = prng::derive_stream_key(42, 7, 0, 0, 3);

    for dist in Distribution::ALL {
        let v = prng::sample_chunk(key, 0, 6, dist)?;
        println!("{:>9}: {v:.3?}", dist.name());
    }

    // Element 1000 onward, without touching the first 1000.
    let stream = Stream::new(key)?;
    let mut tail = vec![0.0; 4];
    stream.fill(1000, &mut tail, Distribution::Gaussian)?;
    let whole = prng::sample_chunk(key, 0, 1004, Distribution::Gaussian)?;
    assert_eq!(tail, whole[1000..]);
    println!("offset read matches: {tail:.4?}");

    // A neighbouring step gives an unrelated direction.
    let next = prng::sample_direction(key.with_direction(4), 5, Distribution::Gaussian, true)?;
    let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("unit direction {next:.3?} (norm {norm:.12})");
    println!("key bytes: {:02x?}", &key.to_bytes()[..16]);
    Ok(())
}
