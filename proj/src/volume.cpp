#include "vastopo/volume.hpp"

#include <algorithm>

namespace vastopo {

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

void require_binary(const LabelVolume& mask, const char* what) {
  const auto& d = mask.data();
  if (std::any_of(d.begin(), d.end(), [](std::uint8_t v) { return v > 1; })) {
    throw NonBinaryError(std::string(what) + " must be binary (values 0/1)");
  }
}

std::size_t count_nonzero(const LabelVolume& v) {
  return static_cast<std::size_t>(std::count_if(v.data().begin(), v.data().end(), [](std::uint8_t x) { return x != 0; }));
}

}  // namespace vastopo
