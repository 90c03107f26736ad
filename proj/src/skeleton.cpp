#include "vastopo/skeleton.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

namespace vastopo {
namespace {

struct NeighbourTables {
  std::array<std::vector<int>, 27> adj26;
  std::array<std::vector<int>, 27> adj6;
  std::array<bool, 27> in_n18{};
  std::array<bool, 27> face{};

  NeighbourTables() {
    for (int i = 0; i < 27; ++i) {
      const int xi = i % 3, yi = (i / 3) % 3, zi = i / 9;
      const int m = std::abs(xi - 1) + std::abs(yi - 1) + std::abs(zi - 1);
      in_n18[i] = m >= 1 && m <= 2;
      face[i] = m == 1;
      for (int j = 0; j < 27; ++j) {
        if (i == j) continue;
        const int dx = std::abs(xi - j % 3), dy = std::abs(yi - (j / 3) % 3), dz = std::abs(zi - j / 9);
        if (std::max({dx, dy, dz}) == 1) adj26[i].push_back(j);
        if (dx + dy + dz == 1) adj6[i].push_back(j);
      }
    }
  }
};

const NeighbourTables& tables() {
  static const NeighbourTables t;
  return t;
}

constexpr int kCentre = 13;

int foreground_components(const std::array<bool, 27>& b) {
  const auto& t = tables();
  std::array<bool, 27> seen{};
  int comps = 0;
  int stack[27];
  for (int s = 0; s < 27; ++s) {
    if (s == kCentre || !b[s] || seen[s]) continue;
    ++comps;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top) {
      const int v = stack[--top];
      for (int w : t.adj26[v])
        if (w != kCentre && b[w] && !seen[w]) {
          seen[w] = true;
          stack[top++] = w;
        }
    }
  }
  return comps;
}

int background_components(const std::array<bool, 27>& b) {
  const auto& t = tables();
  std::array<bool, 27> seen{};
  int comps = 0;
  int stack[27];
  for (int s = 0; s < 27; ++s) {
    if (!t.face[s] || b[s] || seen[s]) continue;
    ++comps;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top) {
      const int v = stack[--top];
      for (int w : t.adj6[v])
        if (t.in_n18[w] && !b[w] && !seen[w]) {
          seen[w] = true;
          stack[top++] = w;
        }
    }
  }
  return comps;
}

std::array<bool, 27> gather(const LabelVolume& img, int x, int y, int z) {
  std::array<bool, 27> b{};
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        b[(dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)] = img.get_or(x + dx, y + dy, z + dz, 0) != 0;
  return b;
}

bool deletable(const LabelVolume& img, int x, int y, int z) {
  const auto b = gather(img, x, y, z);
  int neighbours = 0;
  for (int i = 0; i < 27; ++i) neighbours += (i != kCentre && b[i]);
  if (neighbours <= 1) return false;  // isolated point or curve end
  return is_simple_point(b);
}

constexpr std::array<std::array<int, 3>, 6> kDirections{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

}  // namespace

bool is_simple_point(const std::array<bool, 27>& block) {
  return foreground_components(block) == 1 && background_components(block) == 1;
}

Skeleton skeletonize(const LabelVolume& mask) {
  require_binary(mask);
  if (count_nonzero(mask) == 0) throw ValueError("skeletonize: mask has no foreground voxel");
  const Dims d = mask.dims();
  LabelVolume img = mask;
  std::vector<std::uint8_t> flag(img.size());
  std::vector<std::size_t> candidates;

  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& dir : kDirections) {
      // Candidate detection reads the image only, so it can run per slice.
#pragma omp parallel for schedule(static)
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
          for (int x = 0; x < d.nx; ++x) {
            const std::size_t i = d.index(x, y, z);
            flag[i] = img[i] && !img.get_or(x + dir[0], y + dir[1], z + dir[2], 0) && deletable(img, x, y, z);
          }
      candidates.clear();
      for (std::size_t i = 0; i < flag.size(); ++i)
        if (flag[i]) candidates.push_back(i);

      for (std::size_t i : candidates) {
        const auto [x, y, z] = d.coord(i);
        if (deletable(img, x, y, z)) {
          img[i] = 0;
          changed = true;
        }
      }
    }
  }

  Skeleton sk{{}, d};
  for (std::size_t i = 0; i < img.size(); ++i)
    if (img[i]) sk.voxels.push_back(d.coord(i));
  std::sort(sk.voxels.begin(), sk.voxels.end());
  return sk;
}

LabelVolume skeleton_mask(const Skeleton& sk) {
  LabelVolume m(sk.source_dims);
  for (const auto& v : sk.voxels) m.at(v[0], v[1], v[2]) = 1;
  return m;
}

KeypointSet sample_keypoints(const Skeleton& sk, const DistanceField& d, int n_req) {
  if (n_req < 1) throw ValueError("sample_keypoints: n must be >= 1");
  if (sk.voxels.empty()) throw ValueError("sample_keypoints: empty skeleton");
  if (d.dist.dims() != sk.source_dims) {
    throw ShapeError("sample_keypoints: distance field " + to_string(d.dist.dims()) + " vs skeleton " + to_string(sk.source_dims));
  }
  const auto& v = sk.voxels;
  std::vector<std::size_t> chosen;
  if (v.size() <= static_cast<std::size_t>(n_req)) {
    chosen.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) chosen[i] = i;
  } else {
    auto dist2 = [&](std::size_t a, std::size_t b) {
      std::int64_t s = 0;
      for (int k = 0; k < 3; ++k) s += static_cast<std::int64_t>(v[a][k] - v[b][k]) * (v[a][k] - v[b][k]);
      return s;
    };
    std::vector<std::int64_t> nearest(v.size(), std::numeric_limits<std::int64_t>::max());
    std::size_t current = 0;
    chosen.push_back(current);
    while (chosen.size() < static_cast<std::size_t>(n_req)) {
      std::size_t best = 0;
      std::int64_t best_d = -1;
      for (std::size_t i = 0; i < v.size(); ++i) {
        nearest[i] = std::min(nearest[i], dist2(i, current));
        if (nearest[i] > best_d) {  // strict: earlier (smaller) voxel wins ties
          best_d = nearest[i];
          best = i;
        }
      }
      current = best;
      chosen.push_back(current);
    }
  }

  KeypointSet kp;
  for (std::size_t i : chosen) {
    const auto& p = v[i];
    kp.points.push_back({static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])});
    kp.radii.push_back(d.dist.at(p[0], p[1], p[2]));
    kp.orientations.push_back(d.unit_grad.at(p[0], p[1], p[2]));
  }
  return kp;
}

}  // namespace vastopo
