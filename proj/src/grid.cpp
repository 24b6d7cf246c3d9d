#include "ewlab/grid.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>

namespace ewlab {

namespace {
std::atomic<bool> g_quiet{false};
}

void log_warning(const std::string& msg) {
  if (!g_quiet.load()) std::cerr << "warning: " << msg << "\n";
}

void set_warnings_quiet(bool quiet) { g_quiet.store(quiet); }

Grid3::Grid3(int n, double box_len) : n_(n), box_len_(box_len) {
  if (n < 8 || (n & (n - 1)) != 0)
    throw InputError("grid n must be a power of two >= 8, got " + std::to_string(n));
  if (!(box_len > 0) || !std::isfinite(box_len)) throw InputError("grid box_len must be positive");
}

std::size_t Grid3::index(int i, int j, int k) const {
  const int m = n_ - 1;  // n is a power of two
  return (std::size_t(i & m) * n_ + std::size_t(j & m)) * n_ + std::size_t(k & m);
}

double Grid3::wavenumber(int m) const { return 2.0 * std::numbers::pi * m / box_len_; }

double Grid3::nyquist() const { return wavenumber(n_ / 2); }

const char* rank_name(Rank r) {
  switch (r) {
    case Rank::scalar: return "scalar";
    case Rank::vector3: return "vector3";
    case Rank::matrix3x3: return "matrix3x3";
  }
  return "?";
}

Rank rank_from_name(const std::string& s) {
  if (s == "scalar") return Rank::scalar;
  if (s == "vector3") return Rank::vector3;
  if (s == "matrix3x3") return Rank::matrix3x3;
  throw InputError("unknown field rank '" + s + "'");
}

Field::Field(const Grid3& g, Rank r) : grid_(g), rank_(r), data_(components(r) * g.points(), 0.0) {}

Field::Field(const Grid3& g, Rank r, std::vector<double> data)
    : grid_(g), rank_(r), data_(std::move(data)) {
  if (data_.size() != components(r) * g.points())
    throw ContractViolation("field data length does not match grid and rank");
}

std::span<const double> Field::component(int c) const {
  return std::span<const double>(data_).subspan(c * grid_.points(), grid_.points());
}

std::span<double> Field::component(int c) {
  return std::span<double>(data_).subspan(c * grid_.points(), grid_.points());
}

double Field::max_abs() const {
  double m = 0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Field::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Field::require_finite(const char* where) const {
  if (!all_finite()) throw InputError(std::string(where) + ": field has non-finite samples");
}

static void same_shape(const Field& a, const Field& b) {
  if (!(a.grid() == b.grid()) || a.rank() != b.rank())
    throw ContractViolation("field shape mismatch");
}

Field& Field::operator+=(const Field& o) {
  same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Field& Field::operator*=(double a) {
  for (double& v : data_) v *= a;
  return *this;
}

void Field::axpy(double a, const Field& o) {
  same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

Field slice(const Field& f, int c0, Rank r) {
  const int nc = components(r);
  if (c0 < 0 || c0 + nc > f.ncomp()) throw ContractViolation("slice out of range");
  const auto np = f.grid().points();
  std::vector<double> d(f.data().begin() + c0 * np, f.data().begin() + (c0 + nc) * np);
  return Field(f.grid(), r, std::move(d));
}

Field stack(const Field& a, const Field& b, Rank r) {
  if (!(a.grid() == b.grid()) || a.ncomp() + b.ncomp() != components(r))
    throw ContractViolation("stack shape mismatch");
  std::vector<double> d(a.data().begin(), a.data().end());
  d.insert(d.end(), b.data().begin(), b.data().end());
  return Field(a.grid(), r, std::move(d));
}

}  // namespace ewlab
