#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vastopo/error.hpp"

namespace vastopo {

struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  // x-fastest: index = x + nx * (y + ny * z)
  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
  }
  std::array<int, 3> coord(std::size_t i) const noexcept {
    const auto x = static_cast<int>(i % static_cast<std::size_t>(nx));
    i /= static_cast<std::size_t>(nx);
    const auto y = static_cast<int>(i % static_cast<std::size_t>(ny));
    const auto z = static_cast<int>(i / static_cast<std::size_t>(ny));
    return {x, y, z};
  }
  int operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

std::string to_string(const Dims& d);

// Dense voxel grid. Immutable by convention once handed to a consumer.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Dims dims, T fill = T{}, Spacing spacing = {})
      : dims_(validated(dims)), spacing_(validated(spacing)), data_(dims_.count(), fill) {}
  Grid(Dims dims, std::vector<T> data, Spacing spacing = {})
      : dims_(validated(dims)), spacing_(validated(spacing)), data_(std::move(data)) {
    if (data_.size() != dims_.count()) {
      throw LengthMismatchError("volume data length " + std::to_string(data_.size()) + " does not match dims " +
                                to_string(dims_));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return data_.size(); }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& at(int x, int y, int z) noexcept { return data_[dims_.index(x, y, z)]; }
  const T& at(int x, int y, int z) const noexcept { return data_[dims_.index(x, y, z)]; }

  // Out-of-bounds reads return `outside`.
  T get_or(int x, int y, int z, T outside) const noexcept {
    return dims_.contains(x, y, z) ? data_[dims_.index(x, y, z)] : outside;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static Dims validated(Dims d) {
    if (d.nx < 1 || d.ny < 1 || d.nz < 1) throw ValueError("volume dims must be >= 1, got " + to_string(d));
    return d;
  }
  static Spacing validated(Spacing s) {
    if (!(s.sx > 0.0) || !(s.sy > 0.0) || !(s.sz > 0.0)) throw ValueError("volume spacing must be > 0");
    return s;
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_ = std::vector<T>(1);
};

using FloatVolume = Grid<float>;
using LabelVolume = Grid<std::uint8_t>;
// Element kinds that can be stored in an RVOL file.
using Volume = std::variant<FloatVolume, LabelVolume>;

// Throws NonBinaryError if any voxel is not 0 or 1.
void require_binary(const LabelVolume& mask, const char* what = "mask");

std::size_t count_nonzero(const LabelVolume& v);

// Volume with axes reordered: output axis a takes input axis perm[a].
template <class T>
Grid<T> permute_axes(const Grid<T>& v, std::array<int, 3> perm) {
  const Dims in = v.dims();
  const Dims out{in[perm[0]], in[perm[1]], in[perm[2]]};
  Grid<T> r(out);
  for (int z = 0; z < in.nz; ++z)
    for (int y = 0; y < in.ny; ++y)
      for (int x = 0; x < in.nx; ++x) {
        const int c[3] = {x, y, z};
        r.at(c[perm[0]], c[perm[1]], c[perm[2]]) = v.at(x, y, z);
      }
  return r;
}

// Mirror along one axis.
template <class T>
Grid<T> reflect_axis(const Grid<T>& v, int axis) {
  const Dims d = v.dims();
  Grid<T> r(d);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        int c[3] = {x, y, z};
        c[axis] = d[axis] - 1 - c[axis];
        r.at(c[0], c[1], c[2]) = v.at(x, y, z);
      }
  return r;
}

}  // namespace vastopo
