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
use weightlab_cli::config::{parse_counts, parse_reals};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(xs) = parse_reals(text) {
        assert!(!xs.is_empty());
        assert!(xs.iter().all(|x| x.is_finite() && *x > 0.0));
    }
    if let Ok(ns) = parse_counts(text) {
        assert!(!ns.is_empty());
        assert!(ns.iter().all(|&n| n > 0));
    }
});
