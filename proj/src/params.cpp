#include "vastopo/params.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vastopo/seed.hpp"

namespace vastopo::nn {

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape, Init init) {
  if (name.empty() || name.find('\n') != std::string::npos) throw ValueError("invalid parameter name '" + name + "'");
  if (params_.count(name)) throw ValueError("duplicate parameter '" + name + "'");
  Tensor t(std::move(shape));
  const std::uint64_t key = derive_seed(seed_, name);
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      std::fill(t.data().begin(), t.data().end(), 1.0);
      break;
    case Init::Xavier: {
      const double fan = static_cast<double>(t.shape().front() + t.shape().back());
      const double limit = std::sqrt(6.0 / fan);
      for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = uniform(key, i, -limit, limit);
      break;
    }
    case Init::Embedding:
      for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = uniform(key, i, -0.5, 0.5);
      break;
  }
  t.requires_grad = true;
  return params_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::add_constant(const std::string& name, std::vector<std::size_t> shape, double value) {
  Tensor& t = add(name, std::move(shape), Init::Zeros);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.grad.assign(t.size(), 0.0);
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps) {
  for (const auto& [name, t] : store.params_) {
    if (t.grad.size() != t.size()) throw ValueError("adam_step: parameter '" + name + "' has no gradient");
  }
  ++store.steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(store.steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(store.steps_));
  for (auto& [name, t] : store.params_) {
    auto& mom = store.moments_[name];
    if (mom.m.size() != t.size()) {
      mom.m.assign(t.size(), 0.0);
      mom.v.assign(t.size(), 0.0);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = t.grad[i];
      mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g;
      mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g * g;
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      t.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------- VGNP

namespace {

constexpr std::string_view kMagic = "VGNP1\n";

std::string read_line(std::istream& in, const char* what) {
  std::string s;
  if (!std::getline(in, s)) throw TruncatedError(std::string("VGNP: missing ") + what);
  return s;
}

std::vector<std::size_t> parse_shape(const std::string& line) {
  std::vector<std::size_t> shape;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    std::size_t v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{} || v == 0) throw HeaderError("VGNP: malformed shape line '" + line + "'");
    shape.push_back(v);
    p = next;
    if (p < end) {
      if (*p != ',') throw HeaderError("VGNP: malformed shape line '" + line + "'");
      ++p;
    }
  }
  if (shape.empty()) throw HeaderError("VGNP: empty shape line");
  return shape;
}

}  // namespace

void write_vgnp(std::ostream& out, const TensorMap& records) {
  out << kMagic;
  for (const auto& [name, t] : records) {
    out << name << '\n';
    for (std::size_t i = 0; i < t.shape().size(); ++i) out << (i ? "," : "") << t.shape()[i];
    out << '\n';
    for (double v : t.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
      out.write(b, 8);
    }
  }
  if (!out) throw Error("VGNP write failed");
}

TensorMap read_vgnp(std::istream& in) {
  char magic[kMagic.size()];
  in.read(magic, static_cast<std::streamsize>(kMagic.size()));
  if (in.gcount() != static_cast<std::streamsize>(kMagic.size()) || std::string_view(magic, kMagic.size()) != kMagic) {
    throw FormatError("not a VGNP checkpoint (magic bytes absent)");
  }
  TensorMap out;
  while (in.peek() != std::char_traits<char>::eof()) {
    std::string name = read_line(in, "record name");
    auto shape = parse_shape(read_line(in, "shape line"));
    Tensor t(shape);
    for (double& v : t.data()) {
      unsigned char b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      if (in.gcount() != 8) throw TruncatedError("VGNP: payload of '" + name + "' truncated");
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      v = std::bit_cast<double>(bits);
    }
    if (!out.emplace(std::move(name), std::move(t)).second) throw FormatError("VGNP: duplicate record name");
  }
  return out;
}

void save_vgnp(const TensorMap& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_vgnp(out, records);
}

TensorMap load_vgnp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return read_vgnp(in);
}

TensorMap snapshot(const ParamStore& params) {
  TensorMap out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape(), t.data()));
  return out;
}

void restore(ParamStore& params, const TensorMap& records) {
  for (auto& [name, t] : params) {
    auto it = records.find(name);
    if (it == records.end()) throw FormatError("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                       shape_string(t.shape()));
    }
    t.data() = it->second.data();
  }
}

}  // namespace vastopo::nn
