#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "vastopo/volume.hpp"

namespace vastopo {

// RVOL container:
//   "RVOL1\n"
//   "dims=nx,ny,nz;spacing=sx,sy,sz;dtype=f32|u8;\n"
//   nx*ny*nz little-endian elements
//
// Spacing is printed with 17 significant digits so save/load is bit-exact.

void write_rvol(std::ostream& out, const Volume& v);
Volume read_rvol(std::istream& in);

void save_rvol(const Volume& v, const std::filesystem::path& path);
Volume load_rvol(const std::filesystem::path& path);

// Typed loaders; a dtype other than the requested one is a FormatError.
LabelVolume load_label_rvol(const std::filesystem::path& path);
FloatVolume load_float_rvol(const std::filesystem::path& path);

}  // namespace vastopo
