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

//! Computable weight theory on finite metric measure spaces.
//!
//! * [`space`]: validated finite metric measure spaces, balls, doubling and
//!   Ahlfors-regularity diagnostics.
//! * [`corpus`]: reference spaces and weights, file formats.
//! * [`weights`]: `A_1`/`A_p` constants, the five `A_∞`-type conditions as
//!   constant curves, reverse Hölder constants and their implication table.
//! * [`strong`]: the quasi-distance `δ_ν`, its chain metrization and the
//!   distortion certificate for strong `A_∞`.
//! * [`mollify`]: separated nets, partitions of unity and mollified weights.
//! * [`modulus`]: `p`-modulus of curve families on graph skeletons.

pub mod corpus;
pub mod graph;
pub mod modulus;
pub mod mollify;
pub mod space;
pub mod strong;
pub mod weights;
