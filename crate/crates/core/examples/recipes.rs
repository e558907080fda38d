//! Runs the synthetic comparison recipes and prints test F1 per strategy.
//!
//! ```text
//! cargo run --release --example recipes -- extension
//! cargo run --release --example recipes -- progressive my_setup.toml
//! ```
//!
//! The optional TOML file overrides fields of the chosen setup.

use tagunify::experiments::{ExtensionSetup, HierarchySetup, ProgressiveSetup};

fn load<T: serde::de::DeserializeOwned + Default>(path: Option<&String>) -> T {
    match path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p).expect("readable setup"))
            .expect("valid setup"),
        None => T::default(),
    }
}

fn main() -> tagunify::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("all");
    let file = args.get(1);
    if which == "all" || which == "extension" {
        println!("tag-set extension\n{}", load::<ExtensionSetup>(file).run()?);
    }
    if which == "all" || which == "hierarchy" {
        println!("hierarchy\n{}", load::<HierarchySetup>(file).run()?);
    }
    if which == "all" || which == "progressive" {
        println!("progressive\n{}", load::<ProgressiveSetup>(file).run()?);
    }
    Ok(())
}
