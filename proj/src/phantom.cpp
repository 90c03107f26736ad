#include "vastopo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vastopo/seed.hpp"

namespace vastopo {
namespace {

void validate(const PhantomSpec& spec) {
  if (spec.branch_count < 1) throw ValueError("phantom branch_count must be >= 1");
  if (spec.class_count < 1 || spec.class_count > 254) throw ValueError("phantom class_count must be in [1, 254]");
  const auto [rmin, rmax] = spec.tube_radius_range;
  if (!(rmin >= 1.0) || !(rmax >= rmin) || !std::isfinite(rmax)) {
    throw ValueError("phantom tube_radius_range must satisfy 1 <= min <= max");
  }
  const int margin = kPhantomBorder + static_cast<int>(std::ceil(rmax));
  const int need = 2 * margin + 2;
  const Dims d = spec.dims;
  if (d.nx < need || d.ny < need || d.nz < need) {
    throw ValueError("phantom dims " + to_string(d) + " too small for tubes of radius " + std::to_string(rmax) +
                     ": every axis needs at least " + std::to_string(need) + " voxels (2-voxel border + radius margin)");
  }
}

std::array<double, 3> point(int x, int y, int z) {
  return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
}

}  // namespace

double segment_distance_sq(const std::array<double, 3>& p, const CenterlineSegment& s) noexcept {
  std::array<double, 3> ab{}, ap{};
  double len2 = 0.0, dot = 0.0;
  for (int i = 0; i < 3; ++i) {
    ab[i] = s.b[i] - s.a[i];
    ap[i] = p[i] - s.a[i];
    len2 += ab[i] * ab[i];
    dot += ab[i] * ap[i];
  }
  const double t = len2 > 0.0 ? std::clamp(dot / len2, 0.0, 1.0) : 0.0;
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = ap[i] - t * ab[i];
    d2 += e * e;
  }
  return d2;
}

Phantom make_phantom(const PhantomSpec& spec) {
  validate(spec);
  const Dims d = spec.dims;
  const auto [rmin, rmax] = spec.tube_radius_range;
  const int margin = kPhantomBorder + static_cast<int>(std::ceil(rmax));
  const int lo[3] = {margin, margin, margin};
  const int hi[3] = {d.nx - 1 - margin, d.ny - 1 - margin, d.nz - 1 - margin};

  CounterRng geom(derive_seed(spec.seed, "phantom/geometry"));
  auto draw_radius = [&] { return rmin == rmax ? rmin : geom.uniform(rmin, rmax); };

  std::vector<CenterlineSegment> segs;
  if (spec.branch_count == 1) {
    const int y = static_cast<int>(geom.integer(lo[1], hi[1]));
    const int z = static_cast<int>(geom.integer(lo[2], hi[2]));
    segs.push_back({point(lo[0], y, z), point(hi[0], y, z), draw_radius()});
  } else {
    const int span[3] = {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
    const int cy = (lo[1] + hi[1]) / 2;
    const int cz = (lo[2] + hi[2]) / 2;
    auto jitter = [&](int s) { return static_cast<int>(geom.integer(-(s / 8), s / 8)); };
    auto clamp_axis = [&](int v, int a) { return std::clamp(v, lo[a], hi[a]); };

    const auto root = point(lo[0], clamp_axis(cy + jitter(span[1]), 1), clamp_axis(cz + jitter(span[2]), 2));
    const int jx = lo[0] + static_cast<int>(std::lround(0.4 * span[0]));
    const auto junction = point(jx, clamp_axis(cy + jitter(span[1]), 1), clamp_axis(cz + jitter(span[2]), 2));
    segs.push_back({root, junction, draw_radius()});

    const double phase = geom.uniform(0.0, 2.0 * std::numbers::pi);
    for (int b = 0; b < spec.branch_count; ++b) {
      const double theta = phase + 2.0 * std::numbers::pi * b / spec.branch_count;
      const int ex = clamp_axis(hi[0] - static_cast<int>(geom.integer(0, span[0] / 8)), 0);
      const int ey = clamp_axis(static_cast<int>(std::lround(cy + 0.8 * 0.5 * span[1] * std::cos(theta))), 1);
      const int ez = clamp_axis(static_cast<int>(std::lround(cz + 0.8 * 0.5 * span[2] * std::sin(theta))), 2);
      segs.push_back({junction, point(ex, ey, ez), draw_radius()});
    }
  }

  Phantom ph{FloatVolume(d), LabelVolume(d), LabelVolume(d), segs};
  const std::uint64_t noise_key = derive_seed(spec.seed, "phantom/noise");
  const int b = kPhantomBorder;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const bool liver = x >= b && y >= b && z >= b && x < d.nx - b && y < d.ny - b && z < d.nz - b;
        const auto p = point(x, y, z);

        bool vessel = false;
        std::size_t nearest = 0;
        double best = 0.0;
        for (std::size_t s = 0; s < segs.size(); ++s) {
          const double d2 = segment_distance_sq(p, segs[s]);
          if (d2 < segs[s].radius * segs[s].radius) vessel = true;
          if (s == 0 || d2 < best) {
            best = d2;
            nearest = s;
          }
        }

        double value = 0.0;
        if (liver) {
          ph.labels[i] = static_cast<std::uint8_t>(1 + nearest % static_cast<std::size_t>(spec.class_count));
          value = 0.3 + 0.05 * std::sin(2.0 * std::numbers::pi * x / d.nx) * std::cos(2.0 * std::numbers::pi * y / d.ny);
          if (vessel) {
            ph.vessel_mask[i] = 1;
            value += 0.5;
          }
        }
        value += uniform(noise_key, i, -0.05, 0.05);
        ph.intensity[i] = static_cast<float>(value);
      }
  return ph;
}

}  // namespace vastopo
