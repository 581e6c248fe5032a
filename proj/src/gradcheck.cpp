#include "gradpred/gradcheck.hpp"

#include <cmath>

#include "gradpred/errors.hpp"

namespace gradpred {

double finite_diff_check(Model& model, const Tensor& batch,
                         std::span<const int> labels, double epsilon) {
  if (!(epsilon > 0.0)) throw EngineError("epsilon must be positive");

  model.forward_collect(batch, labels);
  const GradientSet analytic = model.backward_collect();

  double max_rel = 0.0;
  for (std::size_t t = 0; t < model.trainable_count(); ++t) {
    Layer& layer = model.trainable_layer(t);
    const Tensor* grads[2] = {&analytic.layers[t].weight,
                              &analytic.layers[t].bias};
    Tensor* params[2] = {layer.weight(), layer.bias()};
    for (int which = 0; which < 2; ++which) {
      Tensor& p = *params[which];
      const Tensor& g = *grads[which];
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double saved = p[i];
        p[i] = saved + epsilon;
        const double lp = model.forward_collect(batch, labels);
        p[i] = saved - epsilon;
        const double lm = model.forward_collect(batch, labels);
        p[i] = saved;
        const double central = (lp - lm) / (2.0 * epsilon);
        if (!std::isfinite(central)) {
          throw EngineError("non-finite central difference in gradient check");
        }
        const double rel =
            std::abs(g[i] - central) / std::max(1.0, std::abs(central));
        if (rel > max_rel) max_rel = rel;
      }
    }
  }
  return max_rel;
}

}  // namespace gradpred
