#include "vastopo/rvol.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string_view>

namespace vastopo {
namespace {

constexpr std::string_view kMagic = "RVOL1\n";
constexpr std::size_t kMaxHeader = 4096;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void write_payload(std::ostream& out, const std::vector<T>& data) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
  } else {
    for (T v : data) {
      char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
      out.write(b, sizeof(T));
    }
  }
}

template <class T>
std::vector<T> decode_payload(const std::string& bytes) {
  std::vector<T> data(bytes.size() / sizeof(T));
  std::memcpy(data.data(), bytes.data(), data.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (T& v : data) {
      char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
      std::memcpy(&v, b, sizeof(T));
    }
  }
  return data;
}

// Consumes "<key>=" from the front of `s`.
void expect_key(std::string_view& s, std::string_view key) {
  if (s.substr(0, key.size()) != key || s.size() <= key.size() || s[key.size()] != '=') {
    throw HeaderError("RVOL header: expected '" + std::string(key) + "='");
  }
  s.remove_prefix(key.size() + 1);
}

template <class N>
N parse_number(std::string_view& s, char terminator) {
  N v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr == s.data() + s.size() || *ptr != terminator) {
    throw HeaderError("RVOL header: malformed number near '" + std::string(s.substr(0, 16)) + "'");
  }
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()) + 1);
  return v;
}

}  // namespace

void write_rvol(std::ostream& out, const Volume& v) {
  std::visit(
      [&out](const auto& vol) {
        using T = typename std::decay_t<decltype(vol)>::value_type;
        const Dims& d = vol.dims();
        const Spacing& s = vol.spacing();
        out << kMagic;
        out << "dims=" << d.nx << ',' << d.ny << ',' << d.nz << ";spacing=" << format_double(s.sx) << ','
            << format_double(s.sy) << ',' << format_double(s.sz) << ";dtype=" << (sizeof(T) == 1 ? "u8" : "f32")
            << ";\n";
        write_payload(out, vol.data());
      },
      v);
  if (!out) throw Error("RVOL write failed");
}

Volume read_rvol(std::istream& in) {
  char magic[kMagic.size()];
  in.read(magic, static_cast<std::streamsize>(kMagic.size()));
  if (in.gcount() != static_cast<std::streamsize>(kMagic.size()) ||
      std::string_view(magic, kMagic.size()) != kMagic) {
    throw FormatError("not an RVOL file (magic bytes absent)");
  }

  std::string header;
  for (char c; in.get(c);) {
    if (c == '\n') break;
    header.push_back(c);
    if (header.size() > kMaxHeader) throw HeaderError("RVOL header line too long");
  }
  if (!in) throw HeaderError("RVOL header line not terminated");

  std::string_view h = header;
  Dims dims;
  Spacing spacing;
  expect_key(h, "dims");
  dims.nx = parse_number<int>(h, ',');
  dims.ny = parse_number<int>(h, ',');
  dims.nz = parse_number<int>(h, ';');
  expect_key(h, "spacing");
  spacing.sx = parse_number<double>(h, ',');
  spacing.sy = parse_number<double>(h, ',');
  spacing.sz = parse_number<double>(h, ';');
  expect_key(h, "dtype");
  std::size_t elem = 0;
  bool is_float = false;
  if (h == "f32;") {
    elem = 4;
    is_float = true;
  } else if (h == "u8;") {
    elem = 1;
  } else {
    throw HeaderError("RVOL header: unknown dtype '" + std::string(h) + "'");
  }
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw HeaderError("RVOL header: dims must be >= 1");
  if (!(spacing.sx > 0) || !(spacing.sy > 0) || !(spacing.sz > 0)) throw HeaderError("RVOL header: spacing must be > 0");

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() % elem != 0) {
    throw TruncatedError("RVOL payload truncated: " + std::to_string(payload.size()) + " bytes is not a whole number of " +
                         std::to_string(elem) + "-byte elements");
  }
  const std::size_t n = payload.size() / elem;
  if (n != dims.count()) {
    throw LengthMismatchError("RVOL payload has " + std::to_string(n) + " elements, header dims " + to_string(dims) +
                              " require " + std::to_string(dims.count()));
  }
  if (is_float) return FloatVolume(dims, decode_payload<float>(payload), spacing);
  return LabelVolume(dims, decode_payload<std::uint8_t>(payload), spacing);
}

void save_rvol(const Volume& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_rvol(out, v);
}

Volume load_rvol(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return read_rvol(in);
}

LabelVolume load_label_rvol(const std::filesystem::path& path) {
  Volume v = load_rvol(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw FormatError("'" + path.string() + "' holds f32 data, expected u8 labels");
}

FloatVolume load_float_rvol(const std::filesystem::path& path) {
  Volume v = load_rvol(path);
  if (auto* f = std::get_if<FloatVolume>(&v)) return std::move(*f);
  throw FormatError("'" + path.string() + "' holds u8 data, expected f32 values");
}

}  // namespace vastopo
