#pragma once

#include <array>
#include <vector>

#include "vastopo/edt.hpp"
#include "vastopo/volume.hpp"

namespace vastopo {

using Voxel = std::array<int, 3>;

struct Skeleton {
  std::vector<Voxel> voxels;  // sorted lexicographically by (x, y, z)
  Dims source_dims;
};

struct KeypointSet {
  std::vector<Vec3> points;        // voxel units
  std::vector<double> radii;       // EDT at the point
  std::vector<Vec3> orientations;  // unit EDT gradient, or zero
  std::size_t size() const noexcept { return points.size(); }
};

// Directional thinning: each pass runs six sub-iterations (-x, +x, -y, +y,
// -z, +z). A sub-iteration collects border voxels in that direction that are
// simple and not curve endpoints, then deletes them one at a time in raster
// order, re-testing each against the already-thinned image. Stops when a
// full pass deletes nothing.
Skeleton skeletonize(const LabelVolume& mask);

LabelVolume skeleton_mask(const Skeleton& sk);

// Topology-preservation test for deleting the centre of a 3x3x3 block
// (index x + 3y + 9z, centre 13): exactly one 26-component of foreground
// among the 26 neighbours and exactly one 6-component of background in the
// 18-neighbourhood touching a face neighbour.
bool is_simple_point(const std::array<bool, 27>& block);

// Farthest-point sampling seeded at the first (lexicographically smallest)
// skeleton voxel; ties go to the lexicographically smaller voxel. With no
// more than n_req voxels, every voxel is kept in skeleton order.
KeypointSet sample_keypoints(const Skeleton& sk, const DistanceField& d, int n_req);

}  // namespace vastopo
