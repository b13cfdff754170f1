fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let header = std::path::Path::new(&crate_dir).join("include/reviewkit.h");
    std::fs::create_dir_all(header.parent().unwrap()).expect("include dir");

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("REVIEWKIT_H")
        .with_cpp_compat(true)
        .with_documentation(true)
        .with_header("/* C ABI for the reviewkit corpus-analytics library. */")
        .generate()
        .expect("cbindgen generates the header")
        .write_to_file(header);

    println!("cargo:rerun-if-changed=src/lib.rs");
}
