#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vastopo/edt.hpp"

using namespace vastopo;

namespace {

// Independent oracle: nearest background by exhaustive search, in doubles.
double naive_dist(const LabelVolume& m, int x, int y, int z) {
  if (!m.at(x, y, z)) return 0.0;
  const Dims d = m.dims();
  long best = -1;
  for (int c = 0; c < d.nz; ++c)
    for (int b = 0; b < d.ny; ++b)
      for (int a = 0; a < d.nx; ++a)
        if (!m.at(a, b, c)) {
          const long s = long(a - x) * (a - x) + long(b - y) * (b - y) + long(c - z) * (c - z);
          if (best < 0 || s < best) best = s;
        }
  return std::sqrt(double(best));
}

bool has_background(const LabelVolume& m) { return count_nonzero(m) < m.size(); }

}  // namespace

TEST_SUITE("edt") {

TEST_CASE("single voxel and centred cube") {
  LabelVolume one(Dims{3, 3, 3}, 0);
  one.at(1, 1, 1) = 1;
  CHECK(exact_edt(one).dist.at(1, 1, 1) == 1.0);

  LabelVolume cube(Dims{7, 7, 7}, 0);
  for (int z = 2; z < 5; ++z)
    for (int y = 2; y < 5; ++y)
      for (int x = 2; x < 5; ++x) cube.at(x, y, z) = 1;
  const auto d = exact_edt(cube);
  CHECK(d.dist.at(3, 3, 3) == 2.0);
  CHECK(d.squared.at(3, 3, 3) == 4);
  CHECK(d.squared.at(2, 2, 2) == 1);
  CHECK(brute_force_edt(cube).squared == d.squared);
}

TEST_CASE("all background gives zero everywhere") {
  LabelVolume m(Dims{4, 5, 6}, 0);
  for (auto* f : {&exact_edt, +[](const LabelVolume& v, Exec) { return brute_force_edt(v); }}) {
    const auto d = f(m, Exec::Serial);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(d.dist[i] == 0.0);
      CHECK(d.unit_grad[i] == Vec3{0, 0, 0});
    }
  }
}

TEST_CASE("no background is rejected") {
  LabelVolume m(Dims{3, 3, 3}, 1);
  CHECK_THROWS_AS(exact_edt(m), NoBackgroundError);
  CHECK_THROWS_AS(brute_force_edt(m), NoBackgroundError);
  LabelVolume bad(Dims{2, 1, 1}, std::vector<std::uint8_t>{0, 3});
  CHECK_THROWS_AS(exact_edt(bad), NonBinaryError);
}

TEST_CASE("single background voxel at origin gives the norm") {
  LabelVolume m(Dims{6, 5, 7}, 1);
  m.at(0, 0, 0) = 0;
  const auto d = exact_edt(m);
  for (int z = 0; z < 7; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) CHECK(d.dist.at(x, y, z) == std::sqrt(double(x * x + y * y + z * z)));
}

TEST_CASE("separable transform equals the exhaustive oracle") {
  CounterRng rng(42);
  for (int t = 0; t < 40; ++t) {
    const auto m = vt::random_mask(1000 + t, vt::random_dims(rng, 1, 12), rng.uniform(0.2, 0.97));
    if (!has_background(m)) continue;
    const auto serial = squared_edt(m, Exec::Serial);
    CHECK(serial == squared_edt(m, Exec::Parallel));
    CHECK(serial == brute_force_edt(m).squared);
    const auto d = exact_edt(m);
    for (int z = 0; z < m.dims().nz; ++z)
      for (int y = 0; y < m.dims().ny; ++y)
        for (int x = 0; x < m.dims().nx; ++x) CHECK(d.dist.at(x, y, z) == naive_dist(m, x, y, z));
  }
}

TEST_CASE("equivariant under axis permutation and reflection") {
  const std::array<std::array<int, 3>, 5> perms{{{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  CounterRng rng(7);
  for (int t = 0; t < 15; ++t) {
    const auto m = vt::random_mask(2000 + t, vt::random_dims(rng, 2, 10), 0.8);
    if (!has_background(m)) continue;
    const auto base = squared_edt(m);
    for (const auto& p : perms) CHECK(squared_edt(permute_axes(m, p)) == permute_axes(base, p));
    for (int axis = 0; axis < 3; ++axis) CHECK(squared_edt(reflect_axis(m, axis)) == reflect_axis(base, axis));
  }
}

TEST_CASE("distance is 1-Lipschitz across axis neighbours and always finite") {
  CounterRng rng(9);
  for (int t = 0; t < 15; ++t) {
    const auto m = vt::random_mask(3000 + t, vt::random_dims(rng, 1, 14), 0.85);
    if (!has_background(m)) continue;
    const auto d = exact_edt(m);
    const Dims n = m.dims();
    for (int z = 0; z < n.nz; ++z)
      for (int y = 0; y < n.ny; ++y)
        for (int x = 0; x < n.nx; ++x) {
          const double v = d.dist.at(x, y, z);
          if (x + 1 < n.nx) CHECK(std::abs(v - d.dist.at(x + 1, y, z)) <= 1.0);
          if (y + 1 < n.ny) CHECK(std::abs(v - d.dist.at(x, y + 1, z)) <= 1.0);
          if (z + 1 < n.nz) CHECK(std::abs(v - d.dist.at(x, y, z + 1)) <= 1.0);
          for (int a = 0; a < 3; ++a) {
            CHECK(std::isfinite(d.grad.at(x, y, z)[a]));
            CHECK(std::isfinite(d.unit_grad.at(x, y, z)[a]));
          }
          const auto& u = d.unit_grad.at(x, y, z);
          const double norm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
          CHECK((norm == 0.0 || std::abs(norm - 1.0) < 1e-12));
        }
  }
}

TEST_CASE("half-space gradient points into the foreground") {
  LabelVolume m(Dims{8, 8, 8}, 0);
  const int k = 3;
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = k; x < 8; ++x) m.at(x, y, z) = 1;
  const auto d = exact_edt(m);
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = k; x < 8; ++x) {
        CHECK(d.dist.at(x, y, z) == double(x - k + 1));
        CHECK(d.unit_grad.at(x, y, z) == Vec3{1, 0, 0});
      }
}

TEST_CASE("ridge where differences cancel gives a zero vector") {
  LabelVolume m(Dims{5, 5, 5}, 1);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 5; ++y) m.at(0, y, z) = m.at(4, y, z) = 0;
  const auto d = exact_edt(m);
  CHECK(d.dist.at(2, 2, 2) == 2.0);
  CHECK(d.grad.at(2, 2, 2) == Vec3{0, 0, 0});
  CHECK(d.unit_grad.at(2, 2, 2) == Vec3{0, 0, 0});
  CHECK(d.unit_grad.at(1, 2, 2) == Vec3{1, 0, 0});
  CHECK(d.unit_grad.at(3, 2, 2) == Vec3{-1, 0, 0});
}

TEST_CASE("gradient on a degenerate axis is zero") {
  LabelVolume m(Dims{5, 1, 1}, std::vector<std::uint8_t>{0, 1, 1, 1, 1});
  const auto d = exact_edt(m);
  CHECK(d.dist.data() == std::vector<double>{0, 1, 2, 3, 4});
  CHECK(d.grad.at(4, 0, 0) == Vec3{1, 0, 0});
  CHECK(d.grad.at(0, 0, 0) == Vec3{1, 0, 0});
}

}
