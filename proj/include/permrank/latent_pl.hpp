#pragma once

#include <vector>

#include "permrank/core.hpp"

// Latent-community Plackett-Luce model: each stage's choice is a mixture over
// K communities, each with its own score table. Learned with EM; a new item
// is ranked by sweeping its insertion position with the odds recursion, which
// keeps prediction linear in the list length.

namespace permrank {

struct MixtureModel {
    Matrix mixture;           // num_users x k, rows sum to 1
    Matrix community_scores;  // k x num_items

    std::size_t num_users() const { return mixture.rows(); }
    std::size_t num_items() const { return community_scores.cols(); }
    std::size_t num_communities() const { return mixture.cols(); }
};

// Per-(list, position, community) posterior weights from the E-step.
// q[l] has one row per position of data.lists[l] and one column per community.
struct Responsibilities {
    std::vector<Matrix> q;
};

// P_i(pi | z, u): softmax of community z's score for the item at `stage`
// (0-based) over the items still unplaced at that stage.
double stage_prob(const MixtureModel& model, const RankedList& list, std::size_t stage,
                  std::size_t z);

// sum_i log sum_z P(z|u) P_i(pi|z,u), computed in O(n k) using one suffix
// log-denominator array per community.
double log_likelihood(const MixtureModel& model, const RankedList& list);

Responsibilities e_step(const MixtureModel& model, const Dataset& data);

// Closed-form mixture update P(z|u) <- mean_i Q_i(z|pi,u) for observed users,
// with entries floored at 1e-12 and renormalised.
void m_step_mixture(const Responsibilities& resp, const Dataset& data, MixtureModel& model);

// Gradient of the EM lower bound with respect to the community score table.
Matrix m_step_scores_grad(const MixtureModel& model, const Responsibilities& resp,
                          const Dataset& data);

// The EM lower bound itself (used by the backtracking score steps and by the
// finite-difference tests).
double q_bound(const MixtureModel& model, const Responsibilities& resp, const Dataset& data);

struct EmSchedule {
    int iterations = 50;
    int inner_score_steps = 3;
    double score_step = 0.5;
    int max_halvings = 60;
    double init_scale = 0.01;
    std::uint64_t seed = 0;
};

// EM: E-step, closed-form mixture update, then a few backtracking ascent
// steps on the community scores. The incomplete log-likelihood trace (one
// entry per iteration, appended to *trace) is non-decreasing.
MixtureModel em_train(const Dataset& data, std::size_t k, const EmSchedule& schedule,
                      std::vector<double>* trace = nullptr);

// Incomplete log-likelihood of the whole dataset.
double total_log_likelihood(const MixtureModel& model, const Dataset& data);

struct InsertResult {
    int position = 1;       // 1-based position in the merged list
    double log_prob = 0.0;  // log-likelihood of the merged list at that position
    // log of the introduction's own stage factor at that position,
    // log sum_z P(z|u) P_{j*}(pi'|z,u); comparable across candidate items
    double intro_log_prob = 0.0;
    long long stage_factor_evals = 0;  // per-community stage factor count
};

// Best insertion position for a new item among the seen items, keeping their
// relative order. Position 1 is evaluated as a full likelihood; positions
// 2..n are reached through the odds recursion at four stage factors per
// community each. Ties go to the smaller position.
// When sweep_log_probs is given it receives the log-probability of every
// candidate position (index j-1 holds position j).
// Throws std::invalid_argument if the item is already in the list.
InsertResult insert_position(const MixtureModel& model, UserId user,
                             std::span<const ItemId> seen, ItemId item,
                             std::vector<double>* sweep_log_probs = nullptr);

// Ranks candidates by their independent insertion results: position
// ascending, then the introduction's stage likelihood descending, then item
// id. Two items landing in the same position are separated by how likely
// their own introduction was, which for a single community reduces exactly
// to the score order.
std::vector<ItemId> rank_unseen(const MixtureModel& model, UserId user,
                                std::span<const ItemId> seen,
                                std::span<const ItemId> candidates);

}  // namespace permrank
