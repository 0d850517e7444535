use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR is set by cargo");
    let out = PathBuf::from(&crate_dir).join("include").join("seqdetect.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let bindings = cbindgen::generate(&crate_dir).expect("could not generate C header");
    std::fs::create_dir_all(out.parent().unwrap()).expect("could not create include directory");
    bindings.write_to_file(out);
}
