fn main() {
    let code = policylab_cli::run(std::env::args_os());
    std::process::exit(code);
}
