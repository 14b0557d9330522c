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

//! Replays the checked-in fuzz seeds for the space parser.

use std::fs;
use std::path::Path;

use weightlab::corpus::{load_str, space_to_string};

#[test]
fn space_file_seeds_round_trip_or_reject() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/space_file");
    let mut accepted = 0;
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        seen += 1;
        let Ok((space, weight)) = load_str(&text) else {
            continue;
        };
        accepted += 1;
        let again = space_to_string(&space, weight.as_ref());
        let (back, back_w) = load_str(&again).unwrap();
        for i in 0..space.len() {
            assert_eq!(back.dist_row(i), space.dist_row(i));
        }
        assert_eq!(back.mu(), space.mu());
        assert_eq!(
            back_w.map(|w| w.values().to_vec()),
            weight.map(|w| w.values().to_vec())
        );
        // a written document is a fixed point of read-then-write
        assert_eq!(space_to_string(&back, None), space_to_string(&space, None));
    }
    assert!(seen >= 2 && accepted >= 1 && accepted < seen);
}
