// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Replays the checked-in fuzz seeds for the argument and list parsers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use weightlab_cli::config::{parse_counts, parse_reals, Cli};

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    out.sort();
    out
}

#[test]
fn grid_list_seeds() {
    let mut ok = 0;
    for path in seeds("grid_list") {
        let text = fs::read_to_string(&path).unwrap();
        if let Ok(xs) = parse_reals(&text) {
            ok += 1;
            assert!(!xs.is_empty() && xs.iter().all(|x| x.is_finite() && *x > 0.0));
        }
        if let Ok(ns) = parse_counts(&text) {
            assert!(!ns.is_empty() && ns.iter().all(|&n| n > 0));
        }
    }
    assert_eq!(ok, 3);
}

#[test]
fn cli_args_seeds() {
    let mut parsed = 0;
    for path in seeds("cli_args") {
        let text = fs::read_to_string(&path).unwrap();
        let args = std::iter::once("weightlab").chain(text.split('\0'));
        parsed += usize::from(Cli::try_parse_from(args).is_ok());
    }
    assert_eq!(parsed, 3);
}
