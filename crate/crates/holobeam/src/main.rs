fn main() { println!("holobeam"); }
