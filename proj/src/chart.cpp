#include "singreg/atlas_ops.hpp"

namespace singreg::atlas {

bool chart_contains(const Chart& c, const VectorXd& p, double shrink_tol) {
  try {
    VectorXd x = c.fwd->value(p);
    return c.codomain.contains(x, shrink_tol);
  } catch (const DomainError&) {
    return false;
  } catch (const SingregError&) {
    return false;
  }
}

std::vector<VectorXd> chart_grid(const Chart& c, int resolution, double margin) {
  calculus::GridSampler gs(c.codomain, resolution, margin, c.closed_low_faces());
  return gs.nodes();
}

int auto_resolution(int m) {
  if (m <= 1) return 33;
  if (m == 2) return 9;
  return 5;
}

}  // namespace singreg::atlas
