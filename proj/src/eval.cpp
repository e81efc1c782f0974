#include "permrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace permrank {

std::vector<Ordering> enumerate_orderings(std::span<const ItemId> items) {
    if (items.size() > 8)
        throw std::invalid_argument("enumerate_orderings: refusing n > 8 (n = " +
                                    std::to_string(items.size()) + ")");
    std::unordered_set<ItemId> dedup(items.begin(), items.end());
    if (dedup.size() != items.size())
        throw std::invalid_argument("enumerate_orderings: duplicate items");
    Ordering sorted(items.begin(), items.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Ordering> out;
    do {
        out.push_back(sorted);
    } while (std::next_permutation(sorted.begin(), sorted.end()));
    return out;
}

namespace {

// Product-form models: the per-ordering probability is exp(log_likelihood).
template <typename Model>
ExactDistribution product_distribution(const Model& model, UserId user,
                                       std::span<const ItemId> items) {
    ExactDistribution dist;
    dist.items.assign(items.begin(), items.end());
    for (Ordering& ordering : enumerate_orderings(items)) {
        RankedList list{user, ordering};
        dist.probabilities.emplace(std::move(ordering),
                                   std::exp(log_likelihood(model, list)));
    }
    return dist;
}

// Energy models: exp(-E) normalised by the enumerated partition function.
template <typename Model>
ExactDistribution energy_distribution(const Model& model, UserId user,
                                      std::span<const ItemId> items) {
    ExactDistribution dist;
    dist.items.assign(items.begin(), items.end());
    std::vector<Ordering> orderings = enumerate_orderings(items);
    std::vector<double> neg_energy;
    neg_energy.reserve(orderings.size());
    double lse = -std::numeric_limits<double>::infinity();
    for (const Ordering& ordering : orderings) {
        neg_energy.push_back(-energy(model, ordering, user));
        lse = log_add_exp(lse, neg_energy.back());
    }
    for (std::size_t i = 0; i < orderings.size(); ++i)
        dist.probabilities.emplace(std::move(orderings[i]), std::exp(neg_energy[i] - lse));
    return dist;
}

}  // namespace

ExactDistribution exact_distribution(const FplModel& model, UserId user,
                                     std::span<const ItemId> items) {
    return product_distribution(model, user, items);
}

ExactDistribution exact_distribution(const MixtureModel& model, UserId user,
                                     std::span<const ItemId> items) {
    return product_distribution(model, user, items);
}

ExactDistribution exact_distribution(const PositionalModel& model, UserId user,
                                     std::span<const ItemId> items) {
    return energy_distribution(model, user, items);
}

ExactDistribution exact_distribution(const PairwiseModel& model, UserId user,
                                     std::span<const ItemId> items) {
    return energy_distribution(model, user, items);
}

double kendall_tau(std::span<const ItemId> a, std::span<const ItemId> b) {
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("kendall_tau: need at least two items");
    if (b.size() != n) throw std::invalid_argument("kendall_tau: size mismatch");
    std::map<ItemId, std::size_t> rank_b;
    for (std::size_t i = 0; i < n; ++i) rank_b[b[i]] = i;
    if (rank_b.size() != n) throw std::invalid_argument("kendall_tau: duplicate items");
    long long concordant = 0;
    long long discordant = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto it_i = rank_b.find(a[i]);
        if (it_i == rank_b.end())
            throw std::invalid_argument("kendall_tau: orders are over different sets");
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto it_j = rank_b.find(a[j]);
            if (it_j == rank_b.end())
                throw std::invalid_argument("kendall_tau: orders are over different sets");
            if (it_i->second < it_j->second)
                ++concordant;
            else
                ++discordant;
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / pairs;
}

double ndcg_at_k(std::span<const ItemId> predicted,
                 const std::map<ItemId, double>& relevance, std::size_t k) {
    if (k == 0) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    auto rel = [&](ItemId y) {
        const auto it = relevance.find(y);
        if (it == relevance.end())
            throw std::invalid_argument("ndcg_at_k: no relevance for item " +
                                        std::to_string(y));
        return it->second;
    };
    const std::size_t limit = std::min(k, predicted.size());
    double dcg = 0.0;
    for (std::size_t r = 0; r < limit; ++r)
        dcg += rel(predicted[r]) / std::log2(static_cast<double>(r) + 2.0);
    std::vector<double> ideal;
    ideal.reserve(relevance.size());
    for (const auto& [item, value] : relevance) ideal.push_back(value);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r)
        idcg += ideal[r] / std::log2(static_cast<double>(r) + 2.0);
    if (idcg == 0.0) return 1.0;  // all-zero relevance: any order is ideal
    return dcg / idcg;
}

double tv_distance(const std::map<Ordering, std::uint64_t>& empirical_counts,
                   const ExactDistribution& exact) {
    std::uint64_t total = 0;
    for (const auto& [ordering, count] : empirical_counts) {
        if (!exact.probabilities.count(ordering))
            throw std::invalid_argument("tv_distance: empirical ordering outside the support");
        total += count;
    }
    if (total == 0) throw std::invalid_argument("tv_distance: no empirical mass");
    double tv = 0.0;
    for (const auto& [ordering, p] : exact.probabilities) {
        const auto it = empirical_counts.find(ordering);
        const double freq =
            it == empirical_counts.end()
                ? 0.0
                : static_cast<double>(it->second) / static_cast<double>(total);
        tv += std::abs(freq - p);
    }
    return 0.5 * tv;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out << "evaluated users: " << evaluated_users << "\n";
    out << "skipped users:   " << skipped_users << "\n";
    out << "mean kendall tau: " << format_double(mean_tau) << "\n";
    out << "mean ndcg:        " << format_double(mean_ndcg) << "\n";
    if (has_log_likelihood)
        out << "mean held-out log-likelihood: " << format_double(mean_log_likelihood) << "\n";
    return out.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "user,held_out,tau,ndcg,log_likelihood,skipped\n";
    for (const UserEval& u : users) {
        out << u.user << ',' << u.held_out << ',';
        if (u.skipped) {
            out << ",,,1\n";
            continue;
        }
        out << format_double(u.tau) << ',' << format_double(u.ndcg) << ',';
        if (has_log_likelihood && std::isfinite(u.log_likelihood))
            out << format_double(u.log_likelihood);
        out << ",0\n";
    }
    out << "mean," << ',' << format_double(mean_tau) << ',' << format_double(mean_ndcg)
        << ',';
    if (has_log_likelihood) out << format_double(mean_log_likelihood);
    out << ",\n";
    return out.str();
}

}  // namespace permrank
