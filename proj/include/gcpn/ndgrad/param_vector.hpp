#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gcpn/error.hpp"

namespace gcpn::ndgrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One named block of a flat parameter array. Blocks are stored column-major.
struct Slice {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  bool operator==(const Slice&) const = default;
};

/// Flat array of doubles plus a manifest mapping named blocks onto it.
class ParamVector {
 public:
  // Aligned storage keeps Eigen's kernels on one code path, so results do not
  // depend on where the allocator happened to put the data.
  using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

  ParamVector() = default;

  void add_slice(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) {
      throw DimensionError("slice '" + name + "' needs positive shape");
    }
    layout_.push_back({std::move(name), rows, cols, values_.size()});
    values_.resize(values_.size() + layout_.back().size(), 0.0);
  }

  /// Same manifest, all values zero.
  ParamVector zeros_like() const {
    ParamVector out = *this;
    std::fill(out.values_.begin(), out.values_.end(), 0.0);
    return out;
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<Slice>& layout() const { return layout_; }
  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }

  Eigen::Map<Matrix> block(std::size_t slice) {
    const Slice& s = layout_.at(slice);
    return {values_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Matrix> block(std::size_t slice) const {
    const Slice& s = layout_.at(slice);
    return {values_.data() + s.offset, s.rows, s.cols};
  }

  Eigen::Map<Vector> flat() { return {values_.data(), static_cast<Eigen::Index>(values_.size())}; }
  Eigen::Map<const Vector> flat() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  /// "W0[3]" style label for a flat index, used in error messages.
  std::string label(std::size_t index) const {
    for (const Slice& s : layout_) {
      if (index >= s.offset && index < s.offset + s.size()) {
        return s.name + "[" + std::to_string(index - s.offset) + "]";
      }
    }
    return "[" + std::to_string(index) + "]";
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const ParamVector&) const = default;

 private:
  Storage values_;
  std::vector<Slice> layout_;
};

inline void require_same_layout(const ParamVector& a, const ParamVector& b, const char* what) {
  if (!a.same_layout(b)) {
    throw DimensionError(std::string(what) + ": parameter layouts differ");
  }
}

/// FNV-1a over the raw bytes of the values; used to prove parameters did not move.
inline std::uint64_t checksum(const ParamVector& p) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : p.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

// Checkpoint text format:
//
//   gcpn-params 1
//   slices <n>
//   <name> <rows> <cols>      (n lines, manifest order)
//   values <count>
//   <hexfloat>                (count lines)
//
// Hexfloat keeps the round trip bit-exact.

inline void write_params(std::ostream& os, const ParamVector& p) {
  os << "gcpn-params 1\n";
  os << "slices " << p.layout().size() << "\n";
  for (const Slice& s : p.layout()) {
    os << s.name << ' ' << s.rows << ' ' << s.cols << "\n";
  }
  os << "values " << p.size() << "\n";
  os << std::hexfloat;
  for (double v : p.values()) os << v << "\n";
  os << std::defaultfloat;
}

inline ParamVector read_params(std::istream& is, const std::string& source = "<stream>") {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "gcpn-params" || version != 1) {
    throw ParseError(source, "missing 'gcpn-params 1' header");
  }
  std::size_t n_slices = 0;
  if (!(is >> tag >> n_slices) || tag != "slices") {
    throw ParseError(source, "expected 'slices <n>'");
  }
  ParamVector p;
  for (std::size_t i = 0; i < n_slices; ++i) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> name >> rows >> cols)) {
      throw ParseError(source, "bad manifest entry " + std::to_string(i));
    }
    p.add_slice(name, rows, cols);
  }
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "values" || count != p.size()) {
    throw ParseError(source, "value count does not match manifest");
  }
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> token)) throw ParseError(source, "truncated at value " + std::to_string(i));
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      throw ParseError(source, "bad number '" + token + "' at value " + std::to_string(i));
    }
    p[i] = v;
  }
  return p;
}

inline void save_params(const std::string& path, const ParamVector& p) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_params(os, p);
}

inline ParamVector load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_params(is, path);
}

}  // namespace gcpn::ndgrad
