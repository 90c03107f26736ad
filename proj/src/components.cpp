#include "vastopo/components.hpp"

#include <array>
#include <vector>

namespace vastopo {

ComponentLabels connected_components(const LabelVolume& mask, Connectivity conn) {
  require_binary(mask);
  const Dims d = mask.dims();

  std::vector<std::array<int, 3>> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (conn == Connectivity::Six && manhattan != 1) continue;
        offsets.push_back({dx, dy, dz});
      }

  ComponentLabels out{Grid<std::int32_t>(d, 0, mask.spacing()), 0};
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || out.labels[i] != 0) continue;
    const std::int32_t label = ++out.count;
    out.labels[i] = label;
    stack.push_back(i);
    while (!stack.empty()) {
      const auto [x, y, z] = d.coord(stack.back());
      stack.pop_back();
      for (const auto& o : offsets) {
        const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
        if (!d.contains(nx, ny, nz)) continue;
        const std::size_t j = d.index(nx, ny, nz);
        if (mask[j] && out.labels[j] == 0) {
          out.labels[j] = label;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

int count_components(const LabelVolume& mask, Connectivity conn) {
  return connected_components(mask, conn).count;
}

}  // namespace vastopo
