#pragma once

#include <span>
#include <vector>

#include "permrank/core.hpp"

// Pairwise-preference baseline: for every in-list pair (i, j) with i ranked
// above j, the margin d = s_{pi_i} - s_{pi_j} should come out positive. Risk
// is the mean pairwise loss plus a quadratic penalty on both factor matrices.

namespace permrank {

enum class LossKind { squared, hinge, logistic };

struct RegWeights {
    double alpha = 0.0;  // penalty on W
    double beta = 0.0;   // penalty on H
};

// Margin between positions i < j (0-based) of a list whose in-order scores
// are given. Throws std::invalid_argument unless 0 <= i < j < n.
double margin(std::span<const double> scores_in_list_order, std::size_t i, std::size_t j);

// Pointwise loss L(d) for the chosen kind.
double pair_loss(LossKind kind, double d);

// dL/dd. The hinge subgradient at d == 1 is fixed to 0.
double pair_loss_grad(LossKind kind, double d);

// Mean in-list pairwise loss over all users plus alpha*|W|^2 + beta*|H|^2.
double risk(const FactorPair& factors, const Dataset& data, LossKind kind,
            const RegWeights& reg);

// Gradient of risk with respect to both factor matrices.
struct FactorGrad {
    Matrix w;
    Matrix h;
};
FactorGrad risk_gradient(const FactorPair& factors, const Dataset& data, LossKind kind,
                         const RegWeights& reg);

// Full-batch descent schedule shared by the gradient trainers. `halving`
// backtracks the step whenever the objective would get worse; with it off the
// step is applied unconditionally.
struct GdSchedule {
    int epochs = 100;
    double step = 0.1;
    bool halving = true;
    int max_halvings = 60;
    double init_scale = 0.01;
    std::uint64_t seed = 0;
};

// Shared initialisation convention: every factor entry i.i.d. uniform in
// [-scale, scale] drawn from the given stream (W fully, then H fully).
class RngStream;
FactorPair init_factors(std::size_t num_users, std::size_t num_items, std::size_t k,
                        double scale, RngStream& rng);

// Minimises risk by full-batch gradient descent from a small random
// initialisation. Appends the post-epoch risk to *trace when given.
// Throws DivergenceError naming the epoch if the risk goes non-finite.
FactorPair train_pairwise(const Dataset& data, std::size_t k, LossKind kind,
                          const RegWeights& reg, const GdSchedule& schedule,
                          std::vector<double>* trace = nullptr);

}  // namespace permrank
