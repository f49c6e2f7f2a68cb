fn main() {
    eprintln!("command-line interface not wired up yet");
    std::process::exit(1);
}
