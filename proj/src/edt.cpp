#include "vastopo/edt.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace vastopo {
namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// Intersection abscissa of two parabolas, kept as an exact fraction num/den
// with den > 0.
struct Frac {
  std::int64_t num;
  std::int64_t den;
};

bool frac_le(Frac a, Frac b) {
  return static_cast<__int128>(a.num) * b.den <= static_cast<__int128>(b.num) * a.den;
}
bool frac_lt_int(Frac a, std::int64_t q) { return static_cast<__int128>(a.num) < static_cast<__int128>(q) * a.den; }

struct Scratch {
  std::vector<std::int64_t> f;
  std::vector<std::int64_t> out;
  std::vector<int> sites;
  std::vector<Frac> bounds;

  explicit Scratch(int n) : f(n), out(n), sites(n), bounds(n + 1) {}
};

// 1D squared distance over one scanline; kInf marks cells with no finite
// source. Output stays kInf only if the whole line is kInf.
void envelope_1d(int n, Scratch& s) {
  const auto parabola_key = [&](int q) { return s.f[q] + static_cast<std::int64_t>(q) * q; };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (s.f[q] == kInf) continue;
    Frac cut{0, 1};
    while (k >= 0) {
      const int v = s.sites[k];
      cut = Frac{parabola_key(q) - parabola_key(v), 2 * static_cast<std::int64_t>(q - v)};
      if (k > 0 && frac_le(cut, s.bounds[k])) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    s.sites[k] = q;
    s.bounds[k] = cut;  // unused for k == 0 (treated as -inf)
  }
  if (k < 0) {
    std::fill(s.out.begin(), s.out.begin() + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (j < k && frac_lt_int(s.bounds[j + 1], q)) ++j;
    const std::int64_t dq = q - s.sites[j];
    s.out[q] = dq * dq + s.f[s.sites[j]];
  }
}

// Runs envelope_1d along `axis` for every scanline of `grid`, in place.
void pass_axis(std::vector<std::int64_t>& grid, const Dims& d, int axis, Exec exec) {
  const int n = d[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(d.nx) : static_cast<std::size_t>(d.nx) * d.ny;
  const int u_axis = axis == 0 ? 1 : 0;
  const int w_axis = axis == 2 ? 1 : 2;
  const int nu = d[u_axis];
  const long long lines = static_cast<long long>(nu) * d[w_axis];

  auto line_origin = [&](long long line) {
    int c[3] = {0, 0, 0};
    c[u_axis] = static_cast<int>(line % nu);
    c[w_axis] = static_cast<int>(line / nu);
    return d.index(c[0], c[1], c[2]);
  };
  auto run_line = [&](long long line, Scratch& s) {
    const std::size_t base = line_origin(line);
    for (int q = 0; q < n; ++q) s.f[q] = grid[base + q * stride];
    envelope_1d(n, s);
    for (int q = 0; q < n; ++q) grid[base + q * stride] = s.out[q];
  };

  if (exec == Exec::Serial) {
    Scratch s(n);
    for (long long line = 0; line < lines; ++line) run_line(line, s);
    return;
  }
#pragma omp parallel
  {
    Scratch s(n);
#pragma omp for schedule(static)
    for (long long line = 0; line < lines; ++line) run_line(line, s);
  }
}

void check_mask(const LabelVolume& mask) {
  require_binary(mask);
  for (std::uint8_t v : mask.data())
    if (v == 0) return;
  throw NoBackgroundError("distance transform undefined: mask has no background voxel");
}

DistanceField from_squared(Grid<std::int64_t> sq) {
  const Dims d = sq.dims();
  DistanceField out{std::move(sq), Grid<double>(d), Grid<Vec3>(d), Grid<Vec3>(d)};
  for (std::size_t i = 0; i < out.squared.size(); ++i) out.dist[i] = std::sqrt(static_cast<double>(out.squared[i]));
  return edt_gradient(std::move(out));
}

}  // namespace

Grid<std::int64_t> squared_edt(const LabelVolume& mask, Exec exec) {
  check_mask(mask);
  const Dims d = mask.dims();
  std::vector<std::int64_t> g(mask.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask[i] ? kInf : 0;
  for (int axis = 0; axis < 3; ++axis) pass_axis(g, d, axis, exec);
  return Grid<std::int64_t>(d, std::move(g), mask.spacing());
}

DistanceField exact_edt(const LabelVolume& mask, Exec exec) { return from_squared(squared_edt(mask, exec)); }

DistanceField brute_force_edt(const LabelVolume& mask) {
  check_mask(mask);
  const Dims d = mask.dims();
  std::vector<std::array<int, 3>> background;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) background.push_back(d.coord(i));

  Grid<std::int64_t> sq(d, 0, mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const auto p = d.coord(i);
    std::int64_t best = kInf;
    for (const auto& q : background) {
      std::int64_t s = 0;
      for (int a = 0; a < 3; ++a) s += static_cast<std::int64_t>(p[a] - q[a]) * (p[a] - q[a]);
      if (s < best) best = s;
    }
    sq[i] = best;
  }
  return from_squared(std::move(sq));
}

DistanceField edt_gradient(DistanceField f) {
  const Dims d = f.dist.dims();
  if (f.grad.dims() != d) f.grad = Grid<Vec3>(d);
  if (f.unit_grad.dims() != d) f.unit_grad = Grid<Vec3>(d);
  const auto& D = f.dist;

  auto partial = [&](int x, int y, int z, int axis) {
    int c[3] = {x, y, z};
    const int n = d[axis];
    if (n == 1) return 0.0;
    const int i = c[axis];
    int lo[3] = {x, y, z}, hi[3] = {x, y, z};
    double h = 2.0;
    if (i == 0) {
      hi[axis] = 1;
      h = 1.0;
    } else if (i == n - 1) {
      lo[axis] = n - 2;
      h = 1.0;
    } else {
      lo[axis] = i - 1;
      hi[axis] = i + 1;
    }
    return (D.at(hi[0], hi[1], hi[2]) - D.at(lo[0], lo[1], lo[2])) / h;
  };

#pragma omp parallel for schedule(static)
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const Vec3 g{partial(x, y, z, 0), partial(x, y, z, 1), partial(x, y, z, 2)};
        const double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        f.grad.at(x, y, z) = g;
        f.unit_grad.at(x, y, z) = norm >= kGradEpsilon ? Vec3{g[0] / norm, g[1] / norm, g[2] / norm} : Vec3{0.0, 0.0, 0.0};
      }
  return f;
}

}  // namespace vastopo
