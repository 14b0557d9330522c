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

//! Space/weight documents and report emission.
//!
//! Both formats are JSON. Floats are written in scientific notation with a
//! fixed number of significant digits: 17 in space files (bit-exact round
//! trip), 15 in reports.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::CorpusError;
use crate::graph;
use crate::space::{Edge, Space, SpaceError, SpaceParts, Weight};

const SPACE_DIGITS: usize = 17;
const REPORT_DIGITS: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

/// Exactly one way of deriving the distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpec {
    /// Explicit n×n distances.
    Matrix(Vec<Vec<f64>>),
    /// Euclidean distances between point coordinates.
    Euclidean,
    /// Shortest-path lengths over the listed edges; the edges become the
    /// skeleton.
    Graph(Vec<Edge>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub points: Vec<PointEntry>,
    pub metric: MetricSpec,
    pub measure: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    /// Skeleton for `matrix`/`euclidean` metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<Vec<Edge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
}

impl SpaceFile {
    pub fn from_space(space: &Space, weight: Option<&Weight>) -> Self {
        let n = space.len();
        let points = (0..n)
            .map(|id| PointEntry {
                id,
                coords: space.coords().map(|c| c[id].clone()),
            })
            .collect();
        let matrix = (0..n).map(|i| space.dist_row(i).to_vec()).collect();
        SpaceFile {
            points,
            metric: MetricSpec::Matrix(matrix),
            measure: space.mu().to_vec(),
            q: space.q(),
            skeleton: space.skeleton().map(|s| s.to_vec()),
            weight: weight.map(|w| w.values().to_vec()),
        }
    }

    pub fn into_space(self) -> Result<(Space, Option<Weight>), CorpusError> {
        let n = self.measure.len();
        if self.points.len() != n {
            return Err(CorpusError::Validation(SpaceError::Shape {
                n,
                len: self.points.len(),
            }));
        }
        if let Some((pos, p)) = self.points.iter().enumerate().find(|(i, p)| p.id != *i) {
            return Err(CorpusError::Argument(format!(
                "point ids must be 0..n in order: entry {pos} has id {}",
                p.id
            )));
        }
        let coords: Option<Vec<Vec<f64>>> =
            if self.points.iter().all(|p| p.coords.is_some()) && n > 0 {
                Some(
                    self.points
                        .iter()
                        .map(|p| p.coords.clone().unwrap())
                        .collect(),
                )
            } else if self.points.iter().any(|p| p.coords.is_some()) {
                return Err(CorpusError::Validation(SpaceError::Coordinates));
            } else {
                None
            };
        let (dist, skeleton) = match self.metric {
            MetricSpec::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    let len = rows.iter().map(Vec::len).sum();
                    return Err(CorpusError::Validation(SpaceError::Shape { n, len }));
                }
                (rows.concat(), self.skeleton)
            }
            MetricSpec::Euclidean => {
                let c = coords
                    .as_ref()
                    .ok_or(CorpusError::Validation(SpaceError::Coordinates))?;
                if c.iter().any(|row| row.len() != c[0].len()) {
                    return Err(CorpusError::Validation(SpaceError::Coordinates));
                }
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        d[i * n + j] = c[i]
                            .iter()
                            .zip(&c[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                    }
                }
                (d, self.skeleton)
            }
            MetricSpec::Graph(edges) => {
                if self.skeleton.is_some() {
                    return Err(CorpusError::Argument(
                        "graph metric takes its skeleton from the edge list; drop `skeleton`"
                            .into(),
                    ));
                }
                for e in &edges {
                    if e.a >= n
                        || e.b >= n
                        || e.a == e.b
                        || !(e.length.is_finite() && e.length > 0.0)
                    {
                        return Err(CorpusError::Validation(SpaceError::Edge { a: e.a, b: e.b }));
                    }
                }
                let adj = graph::adjacency(n, &edges);
                let mut d = Vec::with_capacity(n * n);
                for i in 0..n {
                    let sp = graph::dijkstra(&adj, &[i], |_, _, l| l);
                    if let Some(j) = sp.dist.iter().position(|x| !x.is_finite()) {
                        return Err(CorpusError::Argument(format!(
                            "graph metric is disconnected: no path from {i} to {j}"
                        )));
                    }
                    d.extend(sp.dist);
                }
                // symmetrize against accumulation-order differences
                for i in 0..n {
                    for j in (i + 1)..n {
                        let m = d[i * n + j].min(d[j * n + i]);
                        d[i * n + j] = m;
                        d[j * n + i] = m;
                    }
                }
                (d, Some(edges))
            }
        };
        let space = Space::new(SpaceParts {
            dist,
            mu: self.measure,
            q: self.q,
            coords,
            skeleton,
        })?;
        let weight = match self.weight {
            Some(w) => {
                let w = Weight::new(w)?;
                w.check_len(&space)?;
                Some(w)
            }
            None => None,
        };
        Ok((space, weight))
    }
}

/// Parses and validates a space document.
pub fn load_str(text: &str) -> Result<(Space, Option<Weight>), CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SpaceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        CorpusError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    file.into_space()
}

pub fn load(path: &Path) -> Result<(Space, Option<Weight>), CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_str(&text)
}

pub fn space_to_string(space: &Space, weight: Option<&Weight>) -> String {
    to_string_with(&SpaceFile::from_space(space, weight), SPACE_DIGITS)
}

pub fn save_space(path: &Path, space: &Space, weight: Option<&Weight>) -> Result<(), CorpusError> {
    write_atomic(path, space_to_string(space, weight).as_bytes())
}

/// Report text with 15 significant digits per number.
pub fn to_report_string<T: Serialize>(report: &T) -> String {
    to_string_with(report, REPORT_DIGITS)
}

pub fn save_report<T: Serialize>(path: &Path, report: &T) -> Result<(), CorpusError> {
    write_atomic(path, to_report_string(report).as_bytes())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| CorpusError::Argument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

fn to_string_with<T: Serialize>(value: &T, digits: usize) -> String {
    let mut buf = Vec::new();
    let fmt = FixedDigits {
        inner: PrettyFormatter::with_indent(b"  "),
        digits,
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json output is utf-8")
}

/// Pretty JSON with every float in `d.ddde±x` form.
struct FixedDigits {
    inner: PrettyFormatter<'static>,
    digits: usize,
}

impl FixedDigits {
    fn float<W: ?Sized + io::Write>(&self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{:.*e}", self.digits - 1, v)
        } else {
            // JSON has no infinities; callers map them to sentinels first.
            w.write_all(b"null")
        }
    }
}

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        self.float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.float(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{grid_space, segment_pair_space};

    #[test]
    fn segment_pair_round_trip_is_bit_exact() {
        let (s, w) = segment_pair_space(7).unwrap();
        let text = space_to_string(&s, Some(&w));
        let (s2, w2) = load_str(&text).unwrap();
        assert_eq!(s.dist_matrix(), s2.dist_matrix());
        assert_eq!(s.mu(), s2.mu());
        assert_eq!(Some(w), w2);
        assert_eq!(space_to_string(&s2, w2.as_ref()), text);
    }

    #[test]
    fn grid_round_trip_keeps_skeleton() {
        let g = grid_space(1, 9, 1.0).unwrap();
        let (g2, w) = load_str(&space_to_string(&g, None)).unwrap();
        assert_eq!(g, g2);
        assert!(w.is_none());
    }

    #[test]
    fn malformed_documents_name_the_field() {
        let err = load_str(
            "{\"points\": [], \"metric\": \"euclidean\", \"measure\": [1.0], \"Q\": \"x\"}",
        )
        .unwrap_err();
        match err {
            CorpusError::Parse { field, line, .. } => {
                assert_eq!(field, "Q");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing =
            load_str("{\"points\": [], \"metric\": \"euclidean\", \"Q\": 1.0}").unwrap_err();
        assert!(missing.to_string().contains("measure"), "{missing}");
        let two_modes =
            load_str("{\"points\": [], \"metric\": {\"matrix\": [], \"graph\": []}, \"measure\": [], \"Q\": 1}")
                .unwrap_err();
        assert!(matches!(two_modes, CorpusError::Parse { .. }));
    }

    #[test]
    fn invariant_violations_are_named() {
        let text = r#"{"points": [{"id": 0}, {"id": 1}],
            "metric": {"matrix": [[0.0, 1.0], [2.0, 0.0]]},
            "measure": [1.0, 1.0], "Q": 1.0}"#;
        let err = load_str(text).unwrap_err();
        assert!(err.to_string().contains("dist(0,1) != dist(1,0)"), "{err}");
    }

    #[test]
    fn graph_and_euclidean_modes() {
        let text = r#"{"points": [{"id": 0}, {"id": 1}, {"id": 2}],
            "metric": {"graph": [{"a": 0, "b": 1, "length": 1.0}, {"a": 1, "b": 2, "length": 2.0}]},
            "measure": [1.0, 1.0, 1.0], "Q": 1.0}"#;
        let (s, _) = load_str(text).unwrap();
        assert_eq!(s.dist(0, 2), 3.0);
        assert_eq!(s.skeleton().unwrap().len(), 2);
        let text = r#"{"points": [{"id": 0, "coords": [0.0, 0.0]}, {"id": 1, "coords": [3.0, 4.0]}],
            "metric": "euclidean", "measure": [1.0, 2.0], "Q": 2.0, "weight": [1.0, 0.5]}"#;
        let (s, w) = load_str(text).unwrap();
        assert_eq!(s.dist(0, 1), 5.0);
        assert_eq!(w.unwrap().values(), &[1.0, 0.5]);
    }

    #[test]
    fn floats_use_fixed_significant_digits() {
        assert_eq!(to_report_string(&0.5), "5.00000000000000e-1\n");
        assert_eq!(to_string_with(&1.0, SPACE_DIGITS), "1.0000000000000000e0\n");
    }
}
