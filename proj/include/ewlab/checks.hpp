#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ewlab {

// One measured quantity against a closed interval [lo, hi]; an infinite end
// means one-sided.
struct CheckPart {
  std::string name;
  double measured = std::numeric_limits<double>::quiet_NaN();
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool pass = false;
  std::string bound_text() const;
};

CheckPart check_le(std::string name, double measured, double hi);
CheckPart check_ge(std::string name, double measured, double lo);
CheckPart check_in(std::string name, double measured, double lo, double hi);

struct CriterionResult {
  int id = 0;
  std::string name;
  std::vector<CheckPart> parts;
  double seconds = 0;  // wall time, kept out of the serialized report
  bool pass() const;
};

struct SuiteReport {
  std::string suite;
  std::vector<CriterionResult> criteria;
  bool pass() const;
  // One line per check; deterministic (no timings).
  std::string text() const;
  std::string json() const;
};

// Criterion ids of a suite: piola, decoupling, linear-waves, raychaudhuri,
// coercive, convergence, all. Unknown names raise InputError.
std::vector<int> suite_criteria(const std::string& suite);
std::vector<std::string> suite_names();
std::string criterion_name(int id);

// Called after each criterion finishes (progress output).
using CriterionCallback = std::function<void(const CriterionResult&)>;

SuiteReport run_suite(const std::string& suite, const CriterionCallback& done = {});

}  // namespace ewlab
