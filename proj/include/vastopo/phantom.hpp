#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vastopo/volume.hpp"

namespace vastopo {

struct PhantomSpec {
  Dims dims{32, 32, 32};
  std::uint64_t seed = 7;
  int branch_count = 2;
  std::array<double, 2> tube_radius_range{1.5, 2.5};  // voxels, (min, max)
  int class_count = 3;
};

// One straight piece of the vessel centerline, endpoints on integer voxel
// centres.
struct CenterlineSegment {
  std::array<double, 3> a{};
  std::array<double, 3> b{};
  double radius = 1.0;
};

struct Phantom {
  FloatVolume intensity;
  LabelVolume vessel_mask;  // 0/1
  LabelVolume labels;       // 0 = background, 1..class_count inside the liver region
  std::vector<CenterlineSegment> centerline;
};

// Width of the background shell around the liver region.
inline constexpr int kPhantomBorder = 2;

// Multi-branch vessel tree inside a box "liver":
//  - branch_count == 1: one straight axis-aligned tube along x;
//  - otherwise a trunk from the low-x side to a junction, then branch_count
//    branches fanning out towards the high-x side.
// A voxel is vessel iff its distance to a segment is strictly below that
// segment's radius. Liver voxels are labelled by nearest segment s
// (ties -> smaller s) as class 1 + s % class_count.
Phantom make_phantom(const PhantomSpec& spec);

// Squared distance from point p to segment [a, b].
double segment_distance_sq(const std::array<double, 3>& p, const CenterlineSegment& s) noexcept;

}  // namespace vastopo
