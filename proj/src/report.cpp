#include "singreg/report.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace singreg {

namespace {

double table_max(const std::vector<double>& row) {
  double m = 0.0;
  for (double v : row) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

bool plateau_ok(const std::vector<std::vector<double>>& constants, double tol) {
  for (const auto& row : constants)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  for (std::size_t w = 0; w + 1 < constants.size(); ++w) {
    const auto& a = constants[w];
    const auto& b = constants[w + 1];
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      // entries below the noise floor are certified zeros, not ratios
      if (std::abs(a[i]) <= 1e-8 && std::abs(b[i]) <= 1e-8) continue;
      double denom = std::max(std::abs(a[i]), 1e-300);
      if (std::abs(b[i] - a[i]) / denom > tol) return false;
    }
  }
  return true;
}

double growth_of(const std::vector<std::vector<double>>& constants) {
  if (constants.empty()) return 1.0;
  double first = table_max(constants.front());
  double last = table_max(constants.back());
  if (first <= 0.0) return last > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return last / first;
}

ConditionResult make_condition(std::string name, std::vector<int> windows,
                               std::vector<std::vector<double>> constants, double tol,
                               std::string witness, std::string note) {
  ConditionResult c;
  c.condition = std::move(name);
  c.windows = std::move(windows);
  c.pass = plateau_ok(constants, tol);
  c.growth_ratio = growth_of(constants);
  c.constants = std::move(constants);
  c.witness = std::move(witness);
  c.note = std::move(note);
  return c;
}

std::string CertReport::first_failure() const {
  for (const auto& c : conditions)
    if (!c.pass) return c.condition;
  return "";
}

std::string CertReport::summary_line() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " " << subject;
  if (!pass) os << " [" << first_failure() << "]";
  return os.str();
}

std::string CertReport::to_json() const {
  nlohmann::json j;
  j["subject"] = subject;
  j["verdict"] = pass ? "PASS" : "FAIL";
  j["kmax"] = kmax;
  j["tol"] = tol;
  j["windows"] = windows;
  j["truncation_note"] = truncation_note;
  if (!sampling_note.empty()) j["sampling_note"] = sampling_note;
  if (!pass) j["first_failure"] = first_failure();
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json cj;
    cj["condition"] = c.condition;
    cj["verdict"] = c.pass ? "PASS" : "FAIL";
    cj["windows"] = c.windows;
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t w = 0; w < c.constants.size(); ++w) {
      nlohmann::json row;
      row["window"] = w < c.windows.size() ? c.windows[w] : static_cast<int>(w);
      row["constants"] = c.constants[w];
      table.push_back(row);
    }
    cj["constants"] = table;
    cj["growth_ratio"] = c.growth_ratio;
    if (!c.witness.empty()) cj["witness"] = c.witness;
    if (!c.note.empty()) cj["note"] = c.note;
    conds.push_back(cj);
  }
  j["conditions"] = conds;
  return j.dump(2);
}

}  // namespace singreg
