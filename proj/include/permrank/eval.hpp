#pragma once

#include <map>
#include <vector>

#include "permrank/core.hpp"
#include "permrank/factored_pl.hpp"
#include "permrank/latent_pl.hpp"
#include "permrank/loglinear.hpp"

// Exact brute-force references over small permutation spaces, plus the
// ranking-quality metrics used by the evaluation command. Everything here is
// deliberately naive: these are the oracles the fast paths are checked
// against.

namespace permrank {

using Ordering = std::vector<ItemId>;

struct ExactDistribution {
    std::vector<ItemId> items;
    std::map<Ordering, double> probabilities;
};

// All n! orderings of the item set in lexicographic order.
// Refuses n > 8 (40320 orderings is the desk-scale cap).
std::vector<Ordering> enumerate_orderings(std::span<const ItemId> items);

// Exact distribution over all orderings of the item set: the stage-wise
// product formula for the choice models, exp(-E)/Z for the log-linear ones.
ExactDistribution exact_distribution(const FplModel& model, UserId user,
                                     std::span<const ItemId> items);
ExactDistribution exact_distribution(const MixtureModel& model, UserId user,
                                     std::span<const ItemId> items);
ExactDistribution exact_distribution(const PositionalModel& model, UserId user,
                                     std::span<const ItemId> items);
ExactDistribution exact_distribution(const PairwiseModel& model, UserId user,
                                     std::span<const ItemId> items);

// (concordant - discordant) / C(n, 2) over all item pairs; the two orders
// must be permutations of the same set of at least two items.
double kendall_tau(std::span<const ItemId> a, std::span<const ItemId> b);

// DCG@k of the predicted order under the given per-item relevances, divided
// by the ideal DCG@k. Discount is log2(rank + 1). Throws on k == 0.
double ndcg_at_k(std::span<const ItemId> predicted,
                 const std::map<ItemId, double>& relevance, std::size_t k);

// Half the L1 distance between the empirical frequencies and the exact
// distribution; empirical orderings must all appear in the exact support.
double tv_distance(const std::map<Ordering, std::uint64_t>& empirical_counts,
                   const ExactDistribution& exact);

// Per-user evaluation results; NaN marks an undefined entry.
struct UserEval {
    UserId user = 0;
    std::size_t held_out = 0;
    double tau = 0.0;
    double ndcg = 0.0;
    double log_likelihood = 0.0;
    bool skipped = false;
};

struct EvalReport {
    std::vector<UserEval> users;
    double mean_tau = 0.0;
    double mean_ndcg = 0.0;
    double mean_log_likelihood = 0.0;
    std::size_t evaluated_users = 0;
    std::size_t skipped_users = 0;
    bool has_log_likelihood = false;

    std::string to_text() const;
    std::string to_csv() const;
};

}  // namespace permrank
