use clauseprobe::eval::render_transfer_text;
use clauseprobe::experiment::{run_congruence, CongruenceSettings};

fn main() {
    let s = CongruenceSettings::default();
    for seed in 0..5 {
        let t = std::time::Instant::now();
        let run = run_congruence(seed, &s).unwrap();
        println!("seed {} ({:.1}s)\n{}", seed, t.elapsed().as_secs_f64(), render_transfer_text(&run.matrix));
        println!("{:?}", run.positional);
        println!("trained {:?}\nuntrained {:?}", run.trained_attention.layers, run.untrained_attention.layers);
    }
}
