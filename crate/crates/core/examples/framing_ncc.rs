//! Frames a two-channel signal, checks the overlap-add round trip and recovers a planted
//! inter-channel delay from the NCC features of each frame.
//!
//! cargo run --release --example framing_ncc

use fasbeam::features::ncc_against_frame;
use fasbeam::sigcore::{frame_signal, frame_matrices, overlap_add, MultichannelSignal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fasbeam::Result<()> {
    let (len, l, delay) = (4000, 64, 5usize);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let src: Vec<f64> = (0..len + delay).map(|_| rng.random_range(-1.0..1.0)).collect();
    // channel 1 hears the source `delay` samples later than channel 0
    let x = MultichannelSignal::new(vec![src[delay..].to_vec(), src[..len].to_vec()], 8000)?;

    let (grid, frames) = frame_signal(&x, l, l / 2)?;
    println!("{} frames of {} samples, hop {}", grid.n_frames, grid.frame_len, grid.hop);

    let (centers, _) = frame_matrices(x.channel(0), &grid);
    let y = overlap_add(&centers, &grid)?;
    let err = y.iter().zip(x.channel(0)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("overlap-add round trip max error {err:.2e}");

    let mut hits = 0;
    for t in 1..grid.n_frames - 2 {
        let ncc = ncc_against_frame(&frames[1][t].context, &frames[0][t].center)?;
        let best = (0..ncc.len()).max_by(|&a, &b| ncc[a].total_cmp(&ncc[b])).unwrap_or(0);
        let lag = best as isize - l as isize;
        if lag == delay as isize {
            hits += 1;
        }
        if t <= 3 {
            println!("frame {t}: NCC peak {:.3} at lag {lag}", ncc[best]);
        }
    }
    println!("delay {delay} recovered in {hits}/{} interior frames", grid.n_frames - 3);
    Ok(())
}
