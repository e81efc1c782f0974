#include "permrank/factored_pl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "permrank/rng.hpp"

namespace permrank {

double DampingSchedule::rho(std::size_t i) const {
    switch (kind) {
        case DampingKind::none:
            return 1.0;
        case DampingKind::logarithmic:
            return 1.0 / std::log(1.0 + static_cast<double>(i));
        case DampingKind::custom:
            return i <= custom.size() ? custom[i - 1] : 0.0;
    }
    return 1.0;
}

void DampingSchedule::validate(std::size_t max_stages) const {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= max_stages; ++i) {
        const double r = rho(i);
        if (r < 0.0 || r > prev)
            throw std::invalid_argument("damping schedule must be non-increasing and >= 0");
        prev = r;
    }
}

double log_likelihood(const FplModel& model, const RankedList& list) {
    const ScoreVector s = user_scores(model.factors, list.user, list.items);
    const std::size_t n = s.size();
    double ll = 0.0;
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rho = model.damping.rho(i + 1);
        // The stage temperature applies to every term in this denominator,
        // so the suffix array cannot be shared across stages.
        for (std::size_t j = i; j < n; ++j) scaled[j] = rho * s[j];
        const double denom = suffix_log_denominators({scaled.data() + i, n - i})[0];
        ll += rho * s[i] - denom;
    }
    return ll;
}

namespace {

// d log P / d s_y accumulated per list position.
std::vector<double> score_space_grad(const FplModel& model, const ScoreVector& s) {
    const std::size_t n = s.size();
    std::vector<double> ds(n, 0.0);
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rho = model.damping.rho(i + 1);
        if (rho == 0.0) continue;  // stage contributes a constant
        for (std::size_t j = i; j < n; ++j) scaled[j] = rho * s[j];
        const double denom = suffix_log_denominators({scaled.data() + i, n - i})[0];
        ds[i] += rho;
        for (std::size_t j = i; j < n; ++j) ds[j] -= rho * std::exp(scaled[j] - denom);
    }
    return ds;
}

}  // namespace

FplListGrad grad_log_likelihood(const FplModel& model, const RankedList& list,
                                bool with_reg) {
    const ScoreVector s = user_scores(model.factors, list.user, list.items);
    const std::vector<double> ds = score_space_grad(model, s);
    const std::size_t k = model.factors.rank();

    FplListGrad grad;
    grad.w_row.assign(k, 0.0);
    grad.h_cols.reserve(list.items.size());
    for (std::size_t p = 0; p < list.items.size(); ++p) {
        const ItemId y = list.items[p];
        std::vector<double> col(k, 0.0);
        for (std::size_t kk = 0; kk < k; ++kk) {
            grad.w_row[kk] += ds[p] * model.factors.h.at(kk, y);
            col[kk] = ds[p] * model.factors.w.at(list.user, kk);
        }
        if (with_reg)
            for (std::size_t kk = 0; kk < k; ++kk)
                col[kk] -= 2.0 * model.reg.beta * model.factors.h.at(kk, y);
        grad.h_cols.emplace_back(y, std::move(col));
    }
    if (with_reg)
        for (std::size_t kk = 0; kk < k; ++kk)
            grad.w_row[kk] -= 2.0 * model.reg.alpha * model.factors.w.at(list.user, kk);
    return grad;
}

double fpl_objective(const FplModel& model, const Dataset& data) {
    double obj = 0.0;
    for (const RankedList& list : data.lists) obj += log_likelihood(model, list);
    obj -= model.reg.alpha * model.factors.w.frobenius_sq();
    obj -= model.reg.beta * model.factors.h.frobenius_sq();
    return obj;
}

namespace {

struct FullGrad {
    Matrix w;
    Matrix h;
};

FullGrad objective_gradient(const FplModel& model, const Dataset& data) {
    const std::size_t k = model.factors.rank();
    FullGrad g{Matrix(model.factors.w.rows(), k), Matrix(k, model.factors.h.cols())};
    for (const RankedList& list : data.lists) {
        const ScoreVector s = user_scores(model.factors, list.user, list.items);
        const std::vector<double> ds = score_space_grad(model, s);
        for (std::size_t p = 0; p < list.items.size(); ++p) {
            const ItemId y = list.items[p];
            for (std::size_t kk = 0; kk < k; ++kk) {
                g.w.at(list.user, kk) += ds[p] * model.factors.h.at(kk, y);
                g.h.at(kk, y) += ds[p] * model.factors.w.at(list.user, kk);
            }
        }
    }
    for (std::size_t i = 0; i < g.w.data().size(); ++i)
        g.w.data()[i] -= 2.0 * model.reg.alpha * model.factors.w.data()[i];
    for (std::size_t i = 0; i < g.h.data().size(); ++i)
        g.h.data()[i] -= 2.0 * model.reg.beta * model.factors.h.data()[i];
    return g;
}

}  // namespace

FplModel train_fpl(const Dataset& data, std::size_t k, const DampingSchedule& damping,
                   const RegWeights& reg, const GdSchedule& schedule,
                   std::vector<double>* trace) {
    validate_dataset(data);
    if (k > static_cast<std::size_t>(std::min(data.num_users, data.num_items)))
        throw std::invalid_argument("train_fpl: k exceeds min(users, items)");
    std::size_t max_len = 0;
    for (const RankedList& l : data.lists) max_len = std::max(max_len, l.size());
    damping.validate(max_len);

    RngStream rng(schedule.seed);
    FplModel model{init_factors(data.num_users, data.num_items, k, schedule.init_scale, rng),
                   damping, reg};
    double current = fpl_objective(model, data);
    if (!std::isfinite(current))
        throw DivergenceError("train_fpl: non-finite initial objective");

    double step_w = schedule.step;
    double step_h = schedule.step;
    for (int iter = 0; iter < schedule.epochs; ++iter) {
        for (int phase = 0; phase < 2; ++phase) {
            const bool w_phase = phase == 0;
            const FullGrad grad = objective_gradient(model, data);
            double& step = w_phase ? step_w : step_h;
            for (int h = 0; h <= (schedule.halving ? schedule.max_halvings : 0); ++h) {
                FplModel candidate = model;
                Matrix& target = w_phase ? candidate.factors.w : candidate.factors.h;
                const Matrix& g = w_phase ? grad.w : grad.h;
                for (std::size_t i = 0; i < target.data().size(); ++i)
                    target.data()[i] += step * g.data()[i];
                const double next = fpl_objective(candidate, data);
                if (!std::isfinite(next)) {
                    if (!schedule.halving)
                        throw DivergenceError(std::string("train_fpl: non-finite objective in ") +
                                              (w_phase ? "W" : "H") + " phase at iteration " +
                                              std::to_string(iter));
                    step *= 0.5;
                    continue;
                }
                if (!schedule.halving || next >= current) {
                    model = std::move(candidate);
                    current = next;
                    break;
                }
                step *= 0.5;
            }
        }
        if (trace) trace->push_back(current);
    }
    return model;
}

std::vector<ItemId> predict_sort(const FactorPair& factors, UserId user,
                                 std::span<const ItemId> candidates) {
    const ScoreVector s = user_scores(factors, user, candidates);
    std::vector<std::size_t> idx(candidates.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return candidates[a] < candidates[b];
    });
    std::vector<ItemId> out(candidates.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = candidates[idx[i]];
    return out;
}

}  // namespace permrank
