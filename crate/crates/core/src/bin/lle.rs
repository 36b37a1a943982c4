use clap::Parser;
use lle_core::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    // Sequential kernels keep every output byte-identical across runs.
    faer::set_global_parallelism(faer::Par::Seq);
    std::process::exit(run(cli));
}
