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

#![no_main]

use libfuzzer_sys::fuzz_target;
use weightlab::corpus::{load_str, space_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok((space, weight)) = load_str(text) else {
        return;
    };
    // anything accepted must survive a write/read round trip unchanged
    let again = space_to_string(&space, weight.as_ref());
    let (back, back_w) = load_str(&again).expect("re-reading a written space");
    assert_eq!(back.len(), space.len());
    for i in 0..space.len() {
        assert_eq!(back.dist_row(i), space.dist_row(i));
    }
    assert_eq!(back.mu(), space.mu());
    assert_eq!(back_w.map(|w| w.values().to_vec()), weight.map(|w| w.values().to_vec()));
});
