#include "permrank/pairwise.hpp"

#include <cmath>
#include <string>

#include "permrank/rng.hpp"

namespace permrank {

double margin(std::span<const double> scores, std::size_t i, std::size_t j) {
    if (i >= j || j >= scores.size())
        throw std::invalid_argument("margin: need 0 <= i < j < n, got i=" + std::to_string(i) +
                                    " j=" + std::to_string(j));
    const double sign = j > i ? 1.0 : -1.0;  // always +1 under the guard above
    return sign * (scores[i] - scores[j]);
}

double pair_loss(LossKind kind, double d) {
    switch (kind) {
        case LossKind::squared: {
            const double r = 1.0 - d;
            return r * r;
        }
        case LossKind::hinge:
            return d < 1.0 ? 1.0 - d : 0.0;
        case LossKind::logistic:
            return softplus(-d);
    }
    return 0.0;
}

double pair_loss_grad(LossKind kind, double d) {
    switch (kind) {
        case LossKind::squared:
            return -2.0 * (1.0 - d);
        case LossKind::hinge:
            return d < 1.0 ? -1.0 : 0.0;
        case LossKind::logistic:
            // -sigma(-d)
            return -1.0 / (1.0 + std::exp(d));
    }
    return 0.0;
}

namespace {

void check_dims(const FactorPair& factors, const Dataset& data) {
    if (factors.num_users() != static_cast<std::size_t>(data.num_users) ||
        factors.num_items() != static_cast<std::size_t>(data.num_items) ||
        factors.w.cols() != factors.h.rows())
        throw std::invalid_argument("pairwise: factor/dataset dimension mismatch");
}

}  // namespace

double risk(const FactorPair& factors, const Dataset& data, LossKind kind,
            const RegWeights& reg) {
    check_dims(factors, data);
    double total = 0.0;
    for (const RankedList& list : data.lists) {
        const ScoreVector s = user_scores(factors, list.user, list.items);
        const std::size_t n = s.size();
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) total += pair_loss(kind, s[i] - s[j]);
    }
    total /= static_cast<double>(data.num_users);
    total += reg.alpha * factors.w.frobenius_sq() + reg.beta * factors.h.frobenius_sq();
    return total;
}

FactorGrad risk_gradient(const FactorPair& factors, const Dataset& data, LossKind kind,
                         const RegWeights& reg) {
    check_dims(factors, data);
    const std::size_t k = factors.rank();
    FactorGrad grad{Matrix(factors.w.rows(), k), Matrix(k, factors.h.cols())};
    const double inv_n = 1.0 / static_cast<double>(data.num_users);

    for (const RankedList& list : data.lists) {
        const ScoreVector s = user_scores(factors, list.user, list.items);
        const std::size_t n = s.size();
        // Accumulate dRisk/ds per list position, then push through the factoring.
        std::vector<double> ds(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double g = inv_n * pair_loss_grad(kind, s[i] - s[j]);
                ds[i] += g;
                ds[j] -= g;
            }
        for (std::size_t p = 0; p < n; ++p) {
            const ItemId y = list.items[p];
            for (std::size_t kk = 0; kk < k; ++kk) {
                grad.w.at(list.user, kk) += ds[p] * factors.h.at(kk, y);
                grad.h.at(kk, y) += ds[p] * factors.w.at(list.user, kk);
            }
        }
    }
    for (std::size_t i = 0; i < grad.w.data().size(); ++i)
        grad.w.data()[i] += 2.0 * reg.alpha * factors.w.data()[i];
    for (std::size_t i = 0; i < grad.h.data().size(); ++i)
        grad.h.data()[i] += 2.0 * reg.beta * factors.h.data()[i];
    return grad;
}

FactorPair init_factors(std::size_t num_users, std::size_t num_items, std::size_t k,
                        double scale, RngStream& rng) {
    FactorPair f{Matrix(num_users, k), Matrix(k, num_items)};
    for (double& v : f.w.data()) v = rng.uniform(-scale, scale);
    for (double& v : f.h.data()) v = rng.uniform(-scale, scale);
    return f;
}

FactorPair train_pairwise(const Dataset& data, std::size_t k, LossKind kind,
                          const RegWeights& reg, const GdSchedule& schedule,
                          std::vector<double>* trace) {
    validate_dataset(data);
    if (k > static_cast<std::size_t>(std::min(data.num_users, data.num_items)))
        throw std::invalid_argument("train_pairwise: k exceeds min(users, items)");
    RngStream rng(schedule.seed);
    FactorPair factors = init_factors(data.num_users, data.num_items, k,
                                      schedule.init_scale, rng);
    double current = risk(factors, data, kind, reg);
    if (!std::isfinite(current)) throw DivergenceError("train_pairwise: non-finite initial risk");

    double step = schedule.step;
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        const FactorGrad grad = risk_gradient(factors, data, kind, reg);
        bool accepted = false;
        for (int h = 0; h <= (schedule.halving ? schedule.max_halvings : 0); ++h) {
            FactorPair candidate = factors;
            for (std::size_t i = 0; i < candidate.w.data().size(); ++i)
                candidate.w.data()[i] -= step * grad.w.data()[i];
            for (std::size_t i = 0; i < candidate.h.data().size(); ++i)
                candidate.h.data()[i] -= step * grad.h.data()[i];
            const double next = risk(candidate, data, kind, reg);
            if (!std::isfinite(next)) {
                if (!schedule.halving)
                    throw DivergenceError("train_pairwise: non-finite risk at epoch " +
                                          std::to_string(epoch));
                step *= 0.5;
                continue;
            }
            if (!schedule.halving || next <= current) {
                factors = std::move(candidate);
                current = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // If every halved step still increased the risk, keep the current
        // iterate; the trace stays monotone.
        (void)accepted;
        if (trace) trace->push_back(current);
    }
    return factors;
}

}  // namespace permrank
