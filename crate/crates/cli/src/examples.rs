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

//! Named example spaces and refinement families.

use weightlab::corpus::{
    grid_space, jacobian_weight, lattice_space, power_weight, random_weight, segment_pair_space,
    sphere_plane_space, CorpusError, GridSpec, ModelMap,
};
use weightlab::space::{Space, Weight};

use crate::config::{ExampleName, Family};

pub const DEFAULT_GRID1D_N: usize = 101;
pub const DEFAULT_GRID2D_N: usize = 33;
pub const DEFAULT_SEGMENT_N: usize = 32;
pub const DEFAULT_SPHERE_N: usize = 64;
pub const RANDOM_RANGE: f64 = 10.0;

/// Point nearest the origin of a grid (lowest id on ties).
fn origin(space: &Space) -> usize {
    let coords = space.coords().expect("grid spaces carry coordinates");
    let norm = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>();
    (0..space.len())
        .min_by(|&a, &b| {
            norm(&coords[a])
                .total_cmp(&norm(&coords[b]))
                .then(a.cmp(&b))
        })
        .expect("grids are nonempty")
}

fn power(space: Space, alpha: f64) -> Result<(Space, Weight), CorpusError> {
    let w = power_weight(&space, alpha, origin(&space))?;
    Ok((space, w))
}

/// Builds an example at resolution `n` (points per axis or per segment).
pub fn build(
    name: ExampleName,
    n: Option<usize>,
    seed: u64,
) -> Result<(Space, Weight), CorpusError> {
    match name {
        ExampleName::Grid1d => {
            let s = grid_space(1, n.unwrap_or(DEFAULT_GRID1D_N), 1.0)?;
            let w = Weight::constant(s.len(), 1.0);
            Ok((s, w))
        }
        ExampleName::Grid2d => {
            let s = lattice_space(2, n.unwrap_or(DEFAULT_GRID2D_N), 1.0)?;
            let w = Weight::constant(s.len(), 1.0);
            Ok((s, w))
        }
        ExampleName::SegmentPair => segment_pair_space(n.unwrap_or(DEFAULT_SEGMENT_N)),
        ExampleName::SpherePlane => {
            let s = sphere_plane_space(n.unwrap_or(DEFAULT_SPHERE_N))?.space;
            let w = Weight::constant(s.len(), 1.0);
            Ok((s, w))
        }
        ExampleName::PowerAlpha1 => power(grid_space(1, n.unwrap_or(DEFAULT_GRID1D_N), 1.0)?, 1.0),
        ExampleName::A1Power => power(grid_space(1, n.unwrap_or(DEFAULT_GRID1D_N), 1.0)?, -0.5),
        ExampleName::Random => {
            let s = grid_space(1, n.unwrap_or(DEFAULT_GRID1D_N), 1.0)?;
            let w = random_weight(s.len(), seed, RANDOM_RANGE)?;
            Ok((s, w))
        }
        ExampleName::Jacobian2d => {
            let spec = GridSpec::new(2, n.unwrap_or(DEFAULT_GRID2D_N), 1.0)?;
            let s = grid_space(2, spec.n, spec.extent)?;
            let map = ModelMap::RadialStretch { beta: 2.0 };
            let target = map.image_grid(&spec)?;
            let w = jacobian_weight(&s, &map, &target)?;
            Ok((s, w))
        }
    }
}

pub fn default_scales(family: Family) -> Vec<usize> {
    match family {
        Family::Constant | Family::PowerAlpha1 | Family::A1Power => vec![101, 201],
        Family::Power2dAlpha1 | Family::Power2dAlpha2 => vec![17, 33],
        Family::SegmentPair => vec![16, 32],
    }
}

/// One member of a refinement family at resolution `n`.
pub fn family_member(family: Family, n: usize) -> Result<(Space, Weight), CorpusError> {
    match family {
        Family::Constant => {
            let s = grid_space(1, n, 1.0)?;
            let w = Weight::constant(s.len(), 1.0);
            Ok((s, w))
        }
        Family::PowerAlpha1 => power(grid_space(1, n, 1.0)?, 1.0),
        Family::A1Power => power(grid_space(1, n, 1.0)?, -0.5),
        Family::Power2dAlpha1 => power(grid_space(2, n, 1.0)?, 1.0),
        Family::Power2dAlpha2 => power(grid_space(2, n, 1.0)?, 2.0),
        Family::SegmentPair => segment_pair_space(n),
    }
}
