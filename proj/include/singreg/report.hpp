#pragma once

#include <string>
#include <vector>

#include "singreg/common.hpp"

namespace singreg {

// One certified condition. Constants are tabulated per window and per
// derivative order; a condition passes when every constant is finite and the
// tables plateau across the nested windows within the relative tolerance.
struct ConditionResult {
  std::string condition;
  bool pass = false;
  std::vector<int> windows;
  std::vector<std::vector<double>> constants;  // [window][order]; order dim may be 1
  double growth_ratio = 1.0;                   // last-window max / first-window max
  std::string witness;
  std::string note;
};

struct CertReport {
  std::string subject;
  bool pass = false;
  int kmax = 4;
  double tol = 0.05;
  std::vector<int> windows;
  std::vector<ConditionResult> conditions;
  std::string truncation_note;  // always set: certification is up to kmax only
  std::string sampling_note;    // grid/chart subsampling description

  std::string first_failure() const;
  std::string to_json() const;
  std::string summary_line() const;
};

// plateau verdict for one constants table: finite everywhere and relative
// change between consecutive windows at most tol
bool plateau_ok(const std::vector<std::vector<double>>& constants, double tol);
double growth_of(const std::vector<std::vector<double>>& constants);

ConditionResult make_condition(std::string name, std::vector<int> windows,
                               std::vector<std::vector<double>> constants, double tol,
                               std::string witness = "", std::string note = "");

}  // namespace singreg
