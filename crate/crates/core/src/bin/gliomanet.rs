fn main() {
    std::process::exit(gliomanet::cli::main());
}
