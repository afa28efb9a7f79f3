#include "marblix/nn.hpp"

namespace marblix {

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

namespace {

double check_coordinate(const GradTarget& target, Eigen::VectorXd point, double analytic,
                        Index coord, double step) {
  const double saved = point[coord];
  point[coord] = saved + step;
  const double plus = target.value(point);
  point[coord] = saved - step;
  const double minus = target.value(point);
  point[coord] = saved;
  if (!std::isfinite(plus) || !std::isfinite(minus)) {
    throw Error("grad_check: non-finite evaluation at coordinate " + std::to_string(coord));
  }
  const double numeric = (plus - minus) / (2.0 * step);
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-6);
}

}  // namespace

double grad_check(const GradTarget& target, const Eigen::VectorXd& point, double step) {
  const Eigen::VectorXd analytic = target.gradient(point);
  if (analytic.size() != point.size()) {
    throw DimensionError("grad_check: gradient size mismatch");
  }
  double worst = 0.0;
  for (Index i = 0; i < point.size(); ++i) {
    worst = std::max(worst, check_coordinate(target, point, analytic[i], i, step));
  }
  return worst;
}

double grad_check_sampled(const GradTarget& target, const Eigen::VectorXd& point, double step,
                          int max_coords, Rng& rng) {
  const Eigen::VectorXd analytic = target.gradient(point);
  if (analytic.size() != point.size()) {
    throw DimensionError("grad_check: gradient size mismatch");
  }
  double worst = 0.0;
  for (int k = 0; k < max_coords; ++k) {
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(point.size())));
    worst = std::max(worst, check_coordinate(target, point, analytic[i], i, step));
  }
  return worst;
}

}  // namespace marblix
