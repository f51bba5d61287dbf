fn main() {
    let matches = ventnet_cli::command().get_matches();
    if let Err(e) = ventnet_cli::run(&matches) {
        eprintln!("error: {e}");
        std::process::exit(e.class.exit_code());
    }
}
