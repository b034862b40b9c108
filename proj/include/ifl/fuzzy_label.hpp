// SPDX-License-Identifier: Apache-2.0
//
// Intuitionistic fuzzy label construction from crisp label volumes.
//
// The membership of class c at voxel x is the fraction of x's spatial
// neighbors carrying label c. The neighborhood is the Chebyshev ball of
// radius r around x, excluding x itself (26 neighbors for r=1 in 3D);
// out-of-bounds neighbors are dropped and the denominator is the
// in-bounds count, so memberships stay true fractions at the volume
// edge. Non-membership is nu = (1 - mu) * rho2 and hesitation
// pi = 1 - mu - nu.
#pragma once

#include "ifl/volume.hpp"

namespace ifl {

/// Neighbor-label fractions for every voxel and class. The result rows
/// sum to 1; mu of the voxel's own label is 1 exactly when every
/// in-bounds neighbor agrees with it.
/// Throws InvalidParameter (radius < 1) or DegenerateVolume (1x1x1
/// volume, whose neighborhood is empty).
ProbField compute_membership(const LabelVolume& labels, int radius);

/// Full intuitionistic fuzzy volume: mu per compute_membership,
/// nu = (1 - mu) * rho2, pi = 1 - mu - nu. rho2 must lie in (0,1].
FuzzyLabelVolume fuzzify(const LabelVolume& labels, int radius, double rho2);

/// 1 where the voxel's own-label membership is below 1 - 1e-9 (some
/// in-bounds neighbor disagrees with the crisp label), else 0.
ScalarField boundary_mask(const FuzzyLabelVolume& fuzzy, const LabelVolume& labels);

/// Label-free variant: 1 where the dominant membership is below
/// 1 - 1e-9, i.e. the neighborhood itself is mixed. Agrees with the
/// two-argument form except at voxels whose entire neighborhood
/// disagrees with them (an isolated voxel has a pure neighborhood).
ScalarField boundary_mask(const FuzzyLabelVolume& fuzzy);

} // namespace ifl
