#pragma once

#include <cstdint>

#include "vastopo/volume.hpp"

namespace vastopo {

enum class Connectivity { Six = 6, TwentySix = 26 };

struct ComponentLabels {
  Grid<std::int32_t> labels;  // 0 = background, components numbered 1..count
  int count = 0;
};

// Labels are assigned in first-encounter scan order (x fastest).
ComponentLabels connected_components(const LabelVolume& mask, Connectivity conn);

int count_components(const LabelVolume& mask, Connectivity conn);

}  // namespace vastopo
