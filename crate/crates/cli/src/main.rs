fn main() {
    eprintln!("eqdisc: not yet wired");
}
