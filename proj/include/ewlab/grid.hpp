#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewlab {

// Caller broke a documented precondition (wrong rank, bad index ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Input data or configuration rejected.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown during a run (non-finite values, lost signature).
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log_warning(const std::string& msg);
void set_warnings_quiet(bool quiet);

class Grid3 {
 public:
  Grid3(int n, double box_len);

  int n() const { return n_; }
  double box_len() const { return box_len_; }
  double spacing() const { return box_len_ / n_; }
  std::size_t points() const { return std::size_t(n_) * n_ * n_; }
  // Point index with periodic wrap.
  std::size_t index(int i, int j, int k) const;
  double coord(int i) const { return i * spacing(); }
  // Integer wave index for storage index i, in (-n/2, n/2].
  int wave_index(int i) const { return i <= n_ / 2 ? i : i - n_; }
  double wavenumber(int m) const;
  // Largest |xi| along one axis.
  double nyquist() const;

  bool operator==(const Grid3& o) const { return n_ == o.n_ && box_len_ == o.box_len_; }

 private:
  int n_;
  double box_len_;
};

enum class Rank { scalar, vector3, matrix3x3 };

constexpr int components(Rank r) {
  switch (r) {
    case Rank::scalar: return 1;
    case Rank::vector3: return 3;
    case Rank::matrix3x3: return 9;
  }
  return 0;
}

const char* rank_name(Rank r);
Rank rank_from_name(const std::string& s);

// Samples of a scalar, vector or matrix field. Component c of a matrix is
// entry (c / 3, c % 3).
class Field {
 public:
  Field(const Grid3& g, Rank r);
  Field(const Grid3& g, Rank r, std::vector<double> data);

  const Grid3& grid() const { return grid_; }
  Rank rank() const { return rank_; }
  int ncomp() const { return components(rank_); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::span<const double> component(int c) const;
  std::span<double> component(int c);

  double& at(int c, int i, int j, int k) { return data_[offset(c, i, j, k)]; }
  double at(int c, int i, int j, int k) const { return data_[offset(c, i, j, k)]; }

  double max_abs() const;
  bool all_finite() const;
  void require_finite(const char* where) const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double a);
  // this += a * o
  void axpy(double a, const Field& o);

 private:
  std::size_t offset(int c, int i, int j, int k) const {
    return c * grid_.points() + grid_.index(i, j, k);
  }
  Grid3 grid_;
  Rank rank_;
  std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

// Sample a function of position on the grid.
template <class F>
Field sample(const Grid3& g, Rank r, F&& f) {
  Field out(g, r);
  const int n = g.n();
  const int nc = components(r);
  std::vector<double> val(nc);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        f(g.coord(i), g.coord(j), g.coord(k), val.data());
        for (int c = 0; c < nc; ++c) out.at(c, i, j, k) = val[c];
      }
  return out;
}

// Component range [c0, c0 + nc) of f as a new field of rank r.
Field slice(const Field& f, int c0, Rank r);
// Concatenate components.
Field stack(const Field& a, const Field& b, Rank r);

}  // namespace ewlab
