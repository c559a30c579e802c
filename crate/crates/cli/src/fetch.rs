//! `fetch`: save a page snapshot with a plain HTTP GET.

use std::path::PathBuf;
use std::time::Duration;

use crate::args::FetchArgs;
use crate::fsio::write_atomic;
use crate::{CliError, CliResult};

/// File-safe page id from a URL: scheme dropped, everything outside
/// `[A-Za-z0-9._-]` mapped to `_`.
pub fn id_from_url(url: &str) -> String {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let rest = rest.split(['?', '#']).next().unwrap_or(rest);
    let mut id: String = rest
        .trim_end_matches('/')
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    id.truncate(120);
    if id.is_empty() {
        id.push_str("page");
    }
    id
}

pub fn run(args: &FetchArgs) -> CliResult<PathBuf> {
    let id = args.id.clone().unwrap_or_else(|| id_from_url(&args.url));
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .user_agent(concat!("harmonic-extract/", env!("CARGO_PKG_VERSION")))
        .build()
        .map_err(|e| CliError::data(e.to_string()))?;
    let resp = client
        .get(&args.url)
        .send()
        .and_then(|r| r.error_for_status())
        .map_err(|e| CliError::data(format!("{}: {e}", args.url)))?;
    let body = resp
        .bytes()
        .map_err(|e| CliError::data(format!("{}: {e}", args.url)))?;
    let dest = args.out.join(format!("{id}.html"));
    write_atomic(&dest, &body).map_err(|e| CliError::data(format!("{}: {e}", dest.display())))?;
    Ok(dest)
}
