fn main() {
    let code = synapse_cascade_cli::run(std::env::args_os());
    std::process::exit(code);
}
