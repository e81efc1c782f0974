#include "permrank/loglinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace permrank {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr long long kEnergyRecheckInterval = 10000;

}  // namespace

// ---- moves -----------------------------------------------------------------

void validate_move(const Move& move, std::size_t n) {
    std::visit(
        overloaded{
            [&](const Relocate& mv) {
                if (mv.from >= n || mv.to >= n)
                    throw std::invalid_argument("relocate: position out of range");
                if (mv.from == mv.to)
                    throw std::invalid_argument("relocate: from == to is not a move");
            },
            [&](const Swap& mv) {
                if (mv.l >= mv.m || mv.m >= n)
                    throw std::invalid_argument("swap: need l < m < n");
            },
            [&](const SublistPerm& mv) {
                const std::size_t w = mv.order.size();
                if (w < 2) throw std::invalid_argument("sublist: width must be >= 2");
                if (mv.start + w > n)
                    throw std::invalid_argument("sublist: window past end of list");
                std::vector<bool> seen(w, false);
                for (std::size_t v : mv.order) {
                    if (v >= w || seen[v])
                        throw std::invalid_argument("sublist: order is not a permutation");
                    seen[v] = true;
                }
            },
        },
        move);
}

void apply_move(std::vector<ItemId>& perm, const Move& move) {
    validate_move(move, perm.size());
    std::visit(overloaded{
                   [&](const Relocate& mv) {
                       const ItemId item = perm[mv.from];
                       perm.erase(perm.begin() + static_cast<std::ptrdiff_t>(mv.from));
                       perm.insert(perm.begin() + static_cast<std::ptrdiff_t>(mv.to), item);
                   },
                   [&](const Swap& mv) { std::swap(perm[mv.l], perm[mv.m]); },
                   [&](const SublistPerm& mv) {
                       std::vector<ItemId> window(mv.order.size());
                       for (std::size_t t = 0; t < mv.order.size(); ++t)
                           window[t] = perm[mv.start + mv.order[t]];
                       std::copy(window.begin(), window.end(),
                                 perm.begin() + static_cast<std::ptrdiff_t>(mv.start));
                   },
               },
               move);
}

Move MoveProposal::draw(std::size_t n, RngStream& rng) const {
    const double ws = n >= 2 ? swap_weight : 0.0;
    const double wr = n >= 2 ? relocate_weight : 0.0;
    const double wl = (sublist_width >= 2 && n >= sublist_width) ? sublist_weight : 0.0;
    const double total = ws + wr + wl;
    if (total <= 0.0)
        throw std::invalid_argument("move proposal: no valid move type for n=" +
                                    std::to_string(n));
    const double u = rng.uniform() * total;
    if (u < ws) {
        std::size_t l = rng.uniform_int(n);
        std::size_t m = rng.uniform_int(n - 1);
        if (m >= l) ++m;
        if (l > m) std::swap(l, m);
        return Swap{l, m};
    }
    if (u < ws + wr) {
        // uniform over ordered (from, to) pairs, from != to; the inverse pair
        // is drawn with the same probability, keeping the proposal symmetric
        std::size_t from = rng.uniform_int(n);
        std::size_t to = rng.uniform_int(n - 1);
        if (to >= from) ++to;
        return Relocate{from, to};
    }
    SublistPerm sp;
    sp.start = rng.uniform_int(n - sublist_width + 1);
    sp.order.resize(sublist_width);
    std::iota(sp.order.begin(), sp.order.end(), std::size_t{0});
    for (std::size_t i = sublist_width - 1; i > 0; --i) {
        const std::size_t j = rng.uniform_int(i + 1);
        std::swap(sp.order[i], sp.order[j]);
    }
    return sp;
}

// ---- energies --------------------------------------------------------------

double energy(const PositionalModel& model, std::span<const ItemId> perm, UserId user) {
    const std::size_t n = perm.size();
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        e -= model.factors.score(user, perm[i]) * PositionalModel::position_weight(i + 1, n);
    return e;
}

double energy(const PairwiseModel& model, std::span<const ItemId> perm, UserId /*user*/) {
    const std::size_t n = perm.size();
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        e -= model.gamma[perm[i]] * PairwiseModel::position_weight(i + 1, n);
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) e -= model.lambda_at(perm[i], perm[j]);
    return e;
}

namespace {

// Positional term of a move's delta under any per-position weight g and any
// per-item value v: sum over changed positions of g(i) * (v(old) - v(new)).
template <typename ValueFn, typename WeightFn>
double positional_delta(std::span<const ItemId> perm, const Move& move, ValueFn&& value,
                        WeightFn&& weight) {
    return std::visit(
        overloaded{
            [&](const Swap& mv) {
                return (value(perm[mv.l]) - value(perm[mv.m])) *
                       (weight(mv.l) - weight(mv.m));
            },
            [&](const Relocate& mv) {
                const std::size_t lo = std::min(mv.from, mv.to);
                const std::size_t hi = std::max(mv.from, mv.to);
                double d = 0.0;
                for (std::size_t i = lo; i <= hi; ++i) {
                    ItemId moved;
                    if (i == mv.to)
                        moved = perm[mv.from];
                    else
                        moved = mv.from < mv.to ? perm[i + 1] : perm[i - 1];
                    d += weight(i) * (value(perm[i]) - value(moved));
                }
                return d;
            },
            [&](const SublistPerm& mv) {
                double d = 0.0;
                for (std::size_t t = 0; t < mv.order.size(); ++t)
                    d += weight(mv.start + t) *
                         (value(perm[mv.start + t]) - value(perm[mv.start + mv.order[t]]));
                return d;
            },
        },
        move);
}

}  // namespace

double delta_energy(const PositionalModel& model, std::span<const ItemId> perm, UserId user,
                    const Move& move) {
    validate_move(move, perm.size());
    const std::size_t n = perm.size();
    return positional_delta(
        perm, move, [&](ItemId y) { return model.factors.score(user, y); },
        [&](std::size_t i) { return PositionalModel::position_weight(i + 1, n); });
}

double delta_energy(const PairwiseModel& model, std::span<const ItemId> perm, UserId /*user*/,
                    const Move& move) {
    validate_move(move, perm.size());
    const std::size_t n = perm.size();
    double d = positional_delta(
        perm, move, [&](ItemId y) { return model.gamma[y]; },
        [&](std::size_t i) { return PairwiseModel::position_weight(i + 1, n); });
    d += std::visit(
        overloaded{
            [&](const Swap& mv) {
                const ItemId a = perm[mv.l];
                const ItemId b = perm[mv.m];
                double dd = model.lambda_at(a, b) - model.lambda_at(b, a);
                for (std::size_t i = mv.l + 1; i < mv.m; ++i) {
                    const ItemId c = perm[i];
                    dd += model.lambda_at(a, c) + model.lambda_at(c, b) -
                          model.lambda_at(b, c) - model.lambda_at(c, a);
                }
                return dd;
            },
            [&](const Relocate& mv) {
                const ItemId x = perm[mv.from];
                double dd = 0.0;
                if (mv.from < mv.to) {
                    for (std::size_t i = mv.from + 1; i <= mv.to; ++i) {
                        const ItemId c = perm[i];
                        dd += model.lambda_at(x, c) - model.lambda_at(c, x);
                    }
                } else {
                    for (std::size_t i = mv.to; i < mv.from; ++i) {
                        const ItemId c = perm[i];
                        dd += model.lambda_at(c, x) - model.lambda_at(x, c);
                    }
                }
                return dd;
            },
            [&](const SublistPerm& mv) {
                double dd = 0.0;
                const std::size_t w = mv.order.size();
                for (std::size_t t = 0; t + 1 < w; ++t)
                    for (std::size_t u2 = t + 1; u2 < w; ++u2) {
                        dd += model.lambda_at(perm[mv.start + t], perm[mv.start + u2]);
                        dd -= model.lambda_at(perm[mv.start + mv.order[t]],
                                              perm[mv.start + mv.order[u2]]);
                    }
                return dd;
            },
        },
        move);
    return d;
}

// ---- sampling --------------------------------------------------------------

namespace {

template <typename Model>
bool metropolis_step_impl(const Model& model, ChainState& state, const MoveProposal& proposal,
                          RngStream& rng) {
    const Move mv = proposal.draw(state.perm.size(), rng);
    const double d = delta_energy(model, state.perm, state.user, mv);
    ++state.proposed;
    const bool accept = rng.uniform() < std::exp(-d);
    if (accept) {
        apply_move(state.perm, mv);
        state.energy += d;
        ++state.accepted;
        if (++state.accepted_since_check >= kEnergyRecheckInterval) {
            state.energy = energy(model, state.perm, state.user);
            state.accepted_since_check = 0;
        }
    }
    return accept;
}

}  // namespace

bool metropolis_step(const PositionalModel& model, ChainState& state,
                     const MoveProposal& proposal, RngStream& rng) {
    return metropolis_step_impl(model, state, proposal, rng);
}

bool metropolis_step(const PairwiseModel& model, ChainState& state,
                     const MoveProposal& proposal, RngStream& rng) {
    return metropolis_step_impl(model, state, proposal, rng);
}

// ---- pairwise skeleton -----------------------------------------------------

PairwiseModel build_pairwise_params(const Dataset& data, std::int64_t tau) {
    if (tau < 1) throw std::invalid_argument("build_pairwise_params: tau must be >= 1");
    validate_dataset(data);
    PairwiseModel model;
    model.num_items = data.num_items;
    model.gamma.assign(static_cast<std::size_t>(data.num_items), 0.0);
    model.tau = tau;

    std::unordered_map<std::uint64_t, std::int64_t> counts;
    for (const RankedList& list : data.lists)
        for (std::size_t i = 0; i + 1 < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j) {
                const ItemId a = std::min(list.items[i], list.items[j]);
                const ItemId b = std::max(list.items[i], list.items[j]);
                ++counts[pair_key(a, b)];
            }
    for (const auto& [key, count] : counts)
        if (count >= tau) {
            const ItemId a = static_cast<ItemId>(key >> 32);
            const ItemId b = static_cast<ItemId>(key & 0xffffffffULL);
            model.lambda.emplace(pair_key(a, b), 0.0);
            model.lambda.emplace(pair_key(b, a), 0.0);
        }
    return model;
}

// ---- contrastive divergence ------------------------------------------------

namespace {

std::vector<ItemId> cd_chain_end(const auto& model, const RankedList& list, int steps,
                                 RngStream rng) {
    ChainState state = make_chain(model, list.user, list.items);
    const MoveProposal proposal = MoveProposal::swap_only();
    for (int t = 0; t < steps; ++t) metropolis_step(model, state, proposal, rng);
    return std::move(state.perm);
}

void check_finite(std::span<const double> values, const char* what, int epoch) {
    for (double v : values)
        if (!std::isfinite(v))
            throw DivergenceError(std::string("cd_train: non-finite ") + what + " at epoch " +
                                  std::to_string(epoch));
}

}  // namespace

PositionalModel cd_train_positional(const Dataset& data, std::size_t k,
                                    const CdSchedule& schedule, std::vector<double>* trace) {
    validate_dataset(data);
    if (k > static_cast<std::size_t>(std::min(data.num_users, data.num_items)))
        throw std::invalid_argument("cd_train_positional: k exceeds min(users, items)");
    RngStream root(schedule.seed);
    RngStream init = root.child(0);
    PositionalModel model{init_factors(data.num_users, data.num_items, k,
                                       schedule.init_scale, init)};

    Matrix delta_w(model.factors.w.rows(), k);
    Matrix delta_h(k, model.factors.h.cols());
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        std::fill(delta_w.data().begin(), delta_w.data().end(), 0.0);
        std::fill(delta_h.data().begin(), delta_h.data().end(), 0.0);
        RngStream echild = root.child(1 + static_cast<std::uint64_t>(epoch));
        for (std::size_t l = 0; l < data.lists.size(); ++l) {
            const RankedList& list = data.lists[l];
            const std::size_t n = list.size();
            if (n < 2) continue;  // a singleton list has a single configuration
            const int steps = schedule.chain_steps > 0 ? schedule.chain_steps
                                                       : static_cast<int>(n);
            const std::vector<ItemId> sample =
                cd_chain_end(model, list, steps, echild.child(l));
            // update direction: data statistics minus chain-end statistics
            for (std::size_t i = 0; i < n; ++i) {
                const double g = PositionalModel::position_weight(i + 1, n);
                const ItemId yd = list.items[i];
                const ItemId ys = sample[i];
                for (std::size_t kk = 0; kk < k; ++kk) {
                    delta_w.at(list.user, kk) +=
                        g * (model.factors.h.at(kk, yd) - model.factors.h.at(kk, ys));
                    delta_h.at(kk, yd) += g * model.factors.w.at(list.user, kk);
                    delta_h.at(kk, ys) -= g * model.factors.w.at(list.user, kk);
                }
            }
        }
        for (std::size_t i = 0; i < delta_w.data().size(); ++i)
            model.factors.w.data()[i] += schedule.learning_rate * delta_w.data()[i];
        for (std::size_t i = 0; i < delta_h.data().size(); ++i)
            model.factors.h.data()[i] += schedule.learning_rate * delta_h.data()[i];
        check_finite(model.factors.w.data(), "W", epoch);
        check_finite(model.factors.h.data(), "H", epoch);
        if (trace) {
            double mean_energy = 0.0;
            for (const RankedList& list : data.lists)
                mean_energy += energy(model, list.items, list.user);
            trace->push_back(mean_energy / static_cast<double>(data.lists.size()));
        }
    }
    return model;
}

PairwiseModel cd_train_pairwise(const Dataset& data, std::int64_t tau,
                                const CdSchedule& schedule, std::vector<double>* trace) {
    PairwiseModel model = build_pairwise_params(data, tau);
    RngStream root(schedule.seed);

    std::vector<double> delta_gamma(model.gamma.size());
    std::unordered_map<std::uint64_t, double> delta_lambda;
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        std::fill(delta_gamma.begin(), delta_gamma.end(), 0.0);
        delta_lambda.clear();
        RngStream echild = root.child(1 + static_cast<std::uint64_t>(epoch));
        for (std::size_t l = 0; l < data.lists.size(); ++l) {
            const RankedList& list = data.lists[l];
            const std::size_t n = list.size();
            if (n < 2) continue;
            const int steps = schedule.chain_steps > 0 ? schedule.chain_steps
                                                       : static_cast<int>(n);
            const std::vector<ItemId> sample =
                cd_chain_end(model, list, steps, echild.child(l));
            for (std::size_t i = 0; i < n; ++i) {
                const double g = PairwiseModel::position_weight(i + 1, n);
                delta_gamma[list.items[i]] += g;
                delta_gamma[sample[i]] -= g;
            }
            for (std::size_t i = 0; i + 1 < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const std::uint64_t kd = pair_key(list.items[i], list.items[j]);
                    if (model.lambda.count(kd)) delta_lambda[kd] += 1.0;
                    const std::uint64_t ks = pair_key(sample[i], sample[j]);
                    if (model.lambda.count(ks)) delta_lambda[ks] -= 1.0;
                }
        }
        for (std::size_t y = 0; y < model.gamma.size(); ++y)
            model.gamma[y] += schedule.learning_rate * delta_gamma[y];
        for (const auto& [key, d] : delta_lambda)
            model.lambda[key] += schedule.learning_rate * d;
        check_finite(model.gamma, "gamma", epoch);
        for (const auto& [key, v] : model.lambda)
            if (!std::isfinite(v))
                throw DivergenceError("cd_train: non-finite lambda at epoch " +
                                      std::to_string(epoch));
        if (trace) {
            double mean_energy = 0.0;
            for (const RankedList& list : data.lists)
                mean_energy += energy(model, list.items, list.user);
            trace->push_back(mean_energy / static_cast<double>(data.lists.size()));
        }
    }
    return model;
}

// ---- pseudo-likelihood -----------------------------------------------------

template <typename Model>
std::vector<double> relocation_energies(const Model& model, UserId user,
                                        std::span<const ItemId> perm, std::size_t index) {
    const std::size_t n = perm.size();
    if (index >= n) throw std::invalid_argument("relocation_energies: index out of range");
    std::vector<ItemId> config(perm.begin(), perm.end());
    double e = energy(model, config, user);
    if (index != 0) {
        const Move to_front = Relocate{index, 0};
        e += delta_energy(model, config, user, to_front);
        apply_move(config, to_front);
    }
    std::vector<double> out(n);
    out[0] = e;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        // adjacent swap walks the extracted item one slot to the right
        const Move step = Swap{j, j + 1};
        e += delta_energy(model, config, user, step);
        apply_move(config, step);
        out[j + 1] = e;
    }
    return out;
}

template std::vector<double> relocation_energies<PositionalModel>(const PositionalModel&,
                                                                  UserId,
                                                                  std::span<const ItemId>,
                                                                  std::size_t);
template std::vector<double> relocation_energies<PairwiseModel>(const PairwiseModel&, UserId,
                                                                std::span<const ItemId>,
                                                                std::size_t);

namespace {

void check_sublist_width(std::size_t width, std::size_t n) {
    if (width < 2 || width > 6)
        throw std::invalid_argument("sublist width must be in [2, 6]");
    if (width > n)
        throw std::invalid_argument("sublist width exceeds list length");
}

template <typename Model>
double pseudo_likelihood_impl(const Model& model, const Dataset& data, PseudoStructure st,
                              std::size_t width) {
    validate_dataset(data);
    double total = 0.0;
    for (const RankedList& list : data.lists) {
        const std::size_t n = list.size();
        switch (st) {
            case PseudoStructure::relocation: {
                for (std::size_t i = 0; i < n; ++i) {
                    const std::vector<double> energies =
                        relocation_energies(model, list.user, list.items, i);
                    double lse = -std::numeric_limits<double>::infinity();
                    for (double e : energies) lse = log_add_exp(lse, -e);
                    total += -energies[i] - lse;
                }
                break;
            }
            case PseudoStructure::swapping: {
                for (std::size_t l = 0; l + 1 < n; ++l)
                    for (std::size_t m = l + 1; m < n; ++m) {
                        const double d =
                            delta_energy(model, list.items, list.user, Swap{l, m});
                        total += -softplus(-d);
                    }
                break;
            }
            case PseudoStructure::sublist: {
                check_sublist_width(width, n);
                std::vector<std::size_t> order(width);
                for (std::size_t start = 0; start + width <= n; ++start) {
                    std::iota(order.begin(), order.end(), std::size_t{0});
                    double lse = -std::numeric_limits<double>::infinity();
                    do {
                        const double d = delta_energy(model, list.items, list.user,
                                                      SublistPerm{start, order});
                        lse = log_add_exp(lse, -d);
                    } while (std::next_permutation(order.begin(), order.end()));
                    total += -lse;  // the observed ordering has delta 0
                }
                break;
            }
        }
    }
    return total;
}

// Calls fn(variant_perm, weight) for the observed configuration with weight
// -1 and for every local configuration with its local-law probability; the
// sum of weighted energy gradients is the pseudo-likelihood gradient.
template <typename Model, typename Fn>
void for_each_weighted_config(const Model& model, const RankedList& list, PseudoStructure st,
                              std::size_t width, Fn&& fn) {
    const std::size_t n = list.size();
    const std::vector<ItemId> obs(list.items.begin(), list.items.end());
    switch (st) {
        case PseudoStructure::relocation: {
            for (std::size_t i = 0; i < n; ++i) {
                const std::vector<double> energies =
                    relocation_energies(model, list.user, obs, i);
                double lse = -std::numeric_limits<double>::infinity();
                for (double e : energies) lse = log_add_exp(lse, -e);
                fn(obs, -1.0);
                for (std::size_t j = 0; j < n; ++j) {
                    std::vector<ItemId> variant = obs;
                    if (j != i) apply_move(variant, Relocate{i, j});
                    fn(variant, std::exp(-energies[j] - lse));
                }
            }
            break;
        }
        case PseudoStructure::swapping: {
            for (std::size_t l = 0; l + 1 < n; ++l)
                for (std::size_t m = l + 1; m < n; ++m) {
                    const double d = delta_energy(model, obs, list.user, Swap{l, m});
                    const double p_swapped = 1.0 / (1.0 + std::exp(d));
                    fn(obs, -1.0);
                    fn(obs, 1.0 - p_swapped);
                    std::vector<ItemId> variant = obs;
                    apply_move(variant, Swap{l, m});
                    fn(variant, p_swapped);
                }
            break;
        }
        case PseudoStructure::sublist: {
            check_sublist_width(width, n);
            std::vector<std::size_t> order(width);
            for (std::size_t start = 0; start + width <= n; ++start) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                double lse = -std::numeric_limits<double>::infinity();
                std::vector<double> deltas;
                do {
                    deltas.push_back(delta_energy(model, obs, list.user,
                                                  SublistPerm{start, order}));
                    lse = log_add_exp(lse, -deltas.back());
                } while (std::next_permutation(order.begin(), order.end()));
                fn(obs, -1.0);
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::size_t v = 0;
                do {
                    std::vector<ItemId> variant = obs;
                    apply_move(variant, SublistPerm{start, order});
                    fn(variant, std::exp(-deltas[v] - lse));
                    ++v;
                } while (std::next_permutation(order.begin(), order.end()));
            }
            break;
        }
    }
}

}  // namespace

double pseudo_likelihood(const PositionalModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width) {
    return pseudo_likelihood_impl(model, data, structure, sublist_width);
}

double pseudo_likelihood(const PairwiseModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width) {
    return pseudo_likelihood_impl(model, data, structure, sublist_width);
}

PositionalGrad pseudo_grad(const PositionalModel& model, const Dataset& data,
                           PseudoStructure structure, std::size_t sublist_width) {
    PositionalGrad grad{Matrix(model.factors.w.rows(), model.factors.w.cols()),
                        Matrix(model.factors.h.rows(), model.factors.h.cols())};
    const std::size_t k = model.factors.rank();
    for (const RankedList& list : data.lists) {
        const UserId u = list.user;
        auto add_energy_grad = [&](const std::vector<ItemId>& perm, double w) {
            const std::size_t n = perm.size();
            for (std::size_t i = 0; i < n; ++i) {
                const double g = PositionalModel::position_weight(i + 1, n);
                const ItemId y = perm[i];
                for (std::size_t kk = 0; kk < k; ++kk) {
                    grad.w.at(u, kk) -= w * g * model.factors.h.at(kk, y);
                    grad.h.at(kk, y) -= w * g * model.factors.w.at(u, kk);
                }
            }
        };
        // d logP / d theta = -dE(obs) + sum_x p_x dE(x); the callback weights
        // are exactly those coefficients
        for_each_weighted_config(model, list, structure, sublist_width, add_energy_grad);
    }
    return grad;
}

PairwiseGrad pseudo_grad(const PairwiseModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width) {
    PairwiseGrad grad;
    grad.gamma.assign(model.gamma.size(), 0.0);
    for (const auto& [key, v] : model.lambda) grad.lambda.emplace(key, 0.0);
    for (const RankedList& list : data.lists) {
        auto add_energy_grad = [&](const std::vector<ItemId>& perm, double w) {
            const std::size_t n = perm.size();
            for (std::size_t i = 0; i < n; ++i)
                grad.gamma[perm[i]] -= w * PairwiseModel::position_weight(i + 1, n);
            for (std::size_t i = 0; i + 1 < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const auto it = grad.lambda.find(pair_key(perm[i], perm[j]));
                    if (it != grad.lambda.end()) it->second -= w * 1.0;
                }
        };
        for_each_weighted_config(model, list, structure, sublist_width, add_energy_grad);
    }
    return grad;
}

PositionalModel pl_train_positional(const Dataset& data, std::size_t k,
                                    PseudoStructure structure, std::size_t sublist_width,
                                    const GdSchedule& schedule, std::vector<double>* trace) {
    validate_dataset(data);
    if (k > static_cast<std::size_t>(std::min(data.num_users, data.num_items)))
        throw std::invalid_argument("pl_train_positional: k exceeds min(users, items)");
    RngStream rng(schedule.seed);
    PositionalModel model{init_factors(data.num_users, data.num_items, k,
                                       schedule.init_scale, rng)};
    double current = pseudo_likelihood(model, data, structure, sublist_width);
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        const PositionalGrad grad = pseudo_grad(model, data, structure, sublist_width);
        double step = schedule.step;
        for (int h = 0; h <= (schedule.halving ? schedule.max_halvings : 0); ++h) {
            PositionalModel candidate = model;
            for (std::size_t i = 0; i < candidate.factors.w.data().size(); ++i)
                candidate.factors.w.data()[i] += step * grad.w.data()[i];
            for (std::size_t i = 0; i < candidate.factors.h.data().size(); ++i)
                candidate.factors.h.data()[i] += step * grad.h.data()[i];
            const double next = pseudo_likelihood(candidate, data, structure, sublist_width);
            if (!std::isfinite(next)) {
                if (!schedule.halving)
                    throw DivergenceError("pl_train: non-finite objective at epoch " +
                                          std::to_string(epoch));
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
        if (trace) trace->push_back(current);
    }
    return model;
}

PairwiseModel pl_train_pairwise(const Dataset& data, std::int64_t tau,
                                PseudoStructure structure, std::size_t sublist_width,
                                const GdSchedule& schedule, std::vector<double>* trace) {
    PairwiseModel model = build_pairwise_params(data, tau);
    double current = pseudo_likelihood(model, data, structure, sublist_width);
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        const PairwiseGrad grad = pseudo_grad(model, data, structure, sublist_width);
        double step = schedule.step;
        for (int h = 0; h <= (schedule.halving ? schedule.max_halvings : 0); ++h) {
            PairwiseModel candidate = model;
            for (std::size_t y = 0; y < candidate.gamma.size(); ++y)
                candidate.gamma[y] += step * grad.gamma[y];
            for (auto& [key, v] : candidate.lambda) v += step * grad.lambda.at(key);
            const double next = pseudo_likelihood(candidate, data, structure, sublist_width);
            if (!std::isfinite(next)) {
                if (!schedule.halving)
                    throw DivergenceError("pl_train: non-finite objective at epoch " +
                                          std::to_string(epoch));
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
        if (trace) trace->push_back(current);
    }
    return model;
}

// ---- prediction ------------------------------------------------------------

template <typename Model>
EnergyInsert predict_insert(const Model& model, UserId user, std::span<const ItemId> seen,
                            ItemId item) {
    if (std::find(seen.begin(), seen.end(), item) != seen.end())
        throw std::invalid_argument("predict_insert: item " + std::to_string(item) +
                                    " already in the list");
    std::vector<ItemId> config;
    config.reserve(seen.size() + 1);
    config.push_back(item);
    config.insert(config.end(), seen.begin(), seen.end());

    double e = energy(model, config, user);
    EnergyInsert best{1, e, e};
    for (std::size_t j = 0; j + 1 < config.size(); ++j) {
        const Move step = Swap{j, j + 1};
        e += delta_energy(model, config, user, step);
        apply_move(config, step);
        if (e < best.energy) {
            best.position = static_cast<int>(j) + 2;
            best.energy = e;
        }
    }
    return best;
}

template EnergyInsert predict_insert<PositionalModel>(const PositionalModel&, UserId,
                                                      std::span<const ItemId>, ItemId);
template EnergyInsert predict_insert<PairwiseModel>(const PairwiseModel&, UserId,
                                                    std::span<const ItemId>, ItemId);

template <typename Model>
std::vector<ItemId> rank_unseen_energy(const Model& model, UserId user,
                                       std::span<const ItemId> seen,
                                       std::span<const ItemId> candidates) {
    struct Entry {
        ItemId item;
        int position;
        double front_energy;
    };
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (ItemId y : candidates) {
        const EnergyInsert r = predict_insert(model, user, seen, y);
        entries.push_back({y, r.position, r.front_energy});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.position != b.position) return a.position < b.position;
        if (a.front_energy != b.front_energy) return a.front_energy < b.front_energy;
        return a.item < b.item;
    });
    std::vector<ItemId> out;
    out.reserve(entries.size());
    for (const Entry& e : entries) out.push_back(e.item);
    return out;
}

template std::vector<ItemId> rank_unseen_energy<PositionalModel>(const PositionalModel&,
                                                                 UserId,
                                                                 std::span<const ItemId>,
                                                                 std::span<const ItemId>);
template std::vector<ItemId> rank_unseen_energy<PairwiseModel>(const PairwiseModel&, UserId,
                                                               std::span<const ItemId>,
                                                               std::span<const ItemId>);

}  // namespace permrank
