use std::process::Command;

// Bake the git revision into the library so result files record exactly
// what produced them. Falls back to a fixed tag outside a checkout.
fn main() {
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unreleased".to_string());
    println!("cargo:rustc-env=ATOMLENS_BUILD={describe}");
    println!("cargo:rerun-if-changed=.git/HEAD");
}
