fn main() {
    std::process::exit(crowdnav::bench::cli_main(std::env::args_os()));
}
