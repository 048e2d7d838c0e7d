#pragma once

#include <Eigen/Dense>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace singreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error hierarchy. Every throw carries a human-readable diagnostic; the CLI
// maps any SingregError to exit code 1 with the message on stderr.
class SingregError : public std::runtime_error {
public:
  explicit SingregError(const std::string& what) : std::runtime_error(what) {}
};

// evaluation outside a primitive's domain (log/sqrt/pow of nonpositive, 1/0)
class DomainError : public SingregError {
public:
  using SingregError::SingregError;
};

// lattice step exceeds the safe bound for the requested core region
class DeltaTooLarge : public SingregError {
public:
  using SingregError::SingregError;
};

// product construction requires both weights bounded above
class UnboundedWeight : public SingregError {
public:
  using SingregError::SingregError;
};

// patching input violates one of its named hypotheses
class HypothesisViolated : public SingregError {
public:
  using SingregError::SingregError;
};

// boundary restriction of a manifold without boundary charts
class NoBoundary : public SingregError {
public:
  using SingregError::SingregError;
};

// wedge parameters outside both admissible cases
class CaseMismatch : public SingregError {
public:
  using SingregError::SingregError;
};

// model-end exponent outside the admissible range for the requested shape
class AlphaOutOfRange : public SingregError {
public:
  using SingregError::SingregError;
};

// metric sample loses positive definiteness
class SingularMetric : public SingregError {
public:
  using SingregError::SingregError;
};

// parametrization Jacobian loses rank; no induced metric
class RankDeficient : public SingregError {
public:
  using SingregError::SingregError;
};

// window extension keeps changing an integral that should stabilize
class NoConvergence : public SingregError {
public:
  using SingregError::SingregError;
};

// explicit time step exceeds the stability bound
class CFLViolation : public SingregError {
public:
  using SingregError::SingregError;
};

// malformed input specification
class SpecError : public SingregError {
public:
  using SingregError::SingregError;
};

// chart or window index outside its valid range
class IndexError : public SingregError {
public:
  using SingregError::SingregError;
};

// Axis-aligned box. Chart codomains, lattice cells, sampling regions.
struct Box {
  VectorXd lo;
  VectorXd hi;

  Box() = default;
  Box(VectorXd l, VectorXd h) : lo(std::move(l)), hi(std::move(h)) {}

  static Box cube(int m, double a, double b) {
    return Box(VectorXd::Constant(m, a), VectorXd::Constant(m, b));
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const VectorXd& x, double tol = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }

  VectorXd center() const { return 0.5 * (lo + hi); }

  Box intersect(const Box& o) const {
    Box r(lo.cwiseMax(o.lo), hi.cwiseMin(o.hi));
    return r;
  }

  bool empty() const {
    for (int i = 0; i < dim(); ++i)
      if (lo[i] >= hi[i]) return true;
    return false;
  }

  // concatenation along coordinates, for product charts
  static Box product(const Box& a, const Box& b) {
    VectorXd l(a.dim() + b.dim()), h(a.dim() + b.dim());
    l << a.lo, b.lo;
    h << a.hi, b.hi;
    return Box(std::move(l), std::move(h));
  }
};

// Worker count from SINGREG_THREADS (default 1). Parallelism never changes
// results: work items write to per-index slots and reductions run in index
// order on the caller thread.
inline int thread_count() {
  if (const char* env = std::getenv("SINGREG_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

inline void parallel_for(int n, const std::function<void(int)>& body) {
  int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline double sq(double x) { return x * x; }

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace singreg
