//! Parsing a tag hierarchy where one data set's PERSON is split into finer
//! types by another, and inspecting how each tag set projects onto the
//! unified leaves.

use tagunify::tagspace::TagHierarchy;

const HIERARCHY: &str = "\
# a news tag set and a clinical one
tagset news: PERSON, GPE, DATE
tagset clinical: DOCTOR, PATIENT, HOSPITAL, DATE
edge PERSON -> DOCTOR
edge PERSON -> PATIENT
open PERSON
";

fn main() -> tagunify::Result<()> {
    let h = TagHierarchy::parse(HIERARCHY)?;
    println!("unified leaves: {}", h.leaves().join(", "));
    for leaf in h.leaves() {
        println!("  {leaf:<14} root {}", h.root_of(leaf)?);
    }

    let unified = h.unified();
    for k in h.tag_sets() {
        let proj = h.projection(k.id()).expect("declared tag set");
        println!("\n{} -> unified", k.id());
        for (src, image) in proj.images().iter().enumerate() {
            let names: Vec<String> = image
                .iter()
                .map(|&u| unified.label(u).to_string())
                .collect();
            println!(
                "  {:<10} covers {:<50} decodes as {}",
                k.label(src).to_string(),
                names.join(" "),
                unified.label(proj.representative(src))
            );
        }
    }

    let (roots, map) = h.root_tag_set()?;
    let collapsed: Vec<String> = (0..unified.label_count())
        .map(|u| format!("{}->{}", unified.label(u), roots.label(map[u])))
        .collect();
    println!("\ncoarse scoring map: {}", collapsed.join(", "));
    Ok(())
}
