use gfol_core::model::BUILTIN_FAMILIES;

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::Status;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Print the listing as JSON.
    #[arg(long)]
    json: bool,
}

pub fn run(args: &Args, manifest: &mut RunManifest) -> Result<Status, CliError> {
    manifest.config = serde_json::json!({ "json": args.json });
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&BUILTIN_FAMILIES).expect("listing serializes")
        );
        return Ok(Status::Ok);
    }
    let w = BUILTIN_FAMILIES
        .iter()
        .map(|f| f.name.len())
        .max()
        .unwrap_or(0);
    let wp = BUILTIN_FAMILIES
        .iter()
        .map(|f| f.params.len())
        .max()
        .unwrap_or(0);
    let wd = BUILTIN_FAMILIES
        .iter()
        .map(|f| f.dim.len())
        .max()
        .unwrap_or(0)
        .max(3);
    println!(
        "{:<w$}  {:<wp$}  {:<wd$}  instantiates",
        "name", "params", "dim"
    );
    for f in &BUILTIN_FAMILIES {
        println!(
            "{:<w$}  {:<wp$}  {:<wd$}  {}",
            f.name, f.params, f.dim, f.instantiates
        );
    }
    Ok(Status::Ok)
}
