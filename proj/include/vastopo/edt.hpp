#pragma once

#include <array>
#include <cstdint>

#include "vastopo/parallel.hpp"
#include "vastopo/volume.hpp"

namespace vastopo {

using Vec3 = std::array<double, 3>;

// Distance of every foreground voxel to the nearest background voxel, in
// voxel units (spacing is ignored). Background voxels hold 0.
struct DistanceField {
  Grid<std::int64_t> squared;  // exact integer squared distances
  Grid<double> dist;
  Grid<Vec3> grad;       // central differences of dist
  Grid<Vec3> unit_grad;  // grad / |grad|, or zero where |grad| < kGradEpsilon
};

inline constexpr double kGradEpsilon = 1e-6;

// Thrown when the mask has no background voxel, so no distance exists.
class NoBackgroundError : public ValueError {
 public:
  using ValueError::ValueError;
};

// Separable exact squared EDT (lower envelope of parabolas, one pass per
// axis). The per-scanline envelope uses integer arithmetic only, so Serial
// and Parallel agree bit for bit.
Grid<std::int64_t> squared_edt(const LabelVolume& mask, Exec exec = Exec::Parallel);

DistanceField exact_edt(const LabelVolume& mask, Exec exec = Exec::Parallel);

// All-pairs O(n^2) reference. Meant for tests on volumes up to ~16^3.
DistanceField brute_force_edt(const LabelVolume& mask);

// Fills grad/unit_grad from dist. D grows toward the vessel interior, so
// unit_grad points inward. One-sided differences on the volume border.
DistanceField edt_gradient(DistanceField d);

}  // namespace vastopo
