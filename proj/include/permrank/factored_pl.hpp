#pragma once

#include <vector>

#include "permrank/core.hpp"
#include "permrank/pairwise.hpp"

// Damped factored Plackett-Luce model: a stage-wise choice likelihood with
// per-stage damping weights and factored scores, trained by regularised
// maximum likelihood with alternating full-batch ascent.

namespace permrank {

enum class DampingKind { none, logarithmic, custom };

// Produces the per-stage damping weight rho_i for 1-based stage i.
//   none:        rho_i = 1
//   logarithmic: rho_i = 1 / log(1 + i)   (natural log)
//   custom:      caller-provided non-increasing, non-negative weights
struct DampingSchedule {
    DampingKind kind = DampingKind::none;
    std::vector<double> custom;

    double rho(std::size_t stage_1based) const;
    void validate(std::size_t max_stages) const;

    static DampingSchedule none() { return {DampingKind::none, {}}; }
    static DampingSchedule logarithmic() { return {DampingKind::logarithmic, {}}; }
};

struct FplModel {
    FactorPair factors;
    DampingSchedule damping;
    RegWeights reg;
};

// Log-probability of one list under the damped stage-wise likelihood:
// sum_i [ rho_i * s_{pi_i} - log sum_{j>=i} exp(rho_i * s_{pi_j}) ].
// The damping weight scales every score in its stage's denominator.
double log_likelihood(const FplModel& model, const RankedList& list);

// Gradient of log_likelihood (plus the -alpha|W|^2 - beta|H|^2 terms when
// with_reg is set) with respect to the user's W row and all touched H columns.
struct FplListGrad {
    std::vector<double> w_row;                       // length k
    std::vector<std::pair<ItemId, std::vector<double>>> h_cols;  // per touched item
};
FplListGrad grad_log_likelihood(const FplModel& model, const RankedList& list,
                                bool with_reg = false);

// Regularised objective: sum_u log P(pi|u) - alpha|W|^2 - beta|H|^2.
double fpl_objective(const FplModel& model, const Dataset& data);

// Alternating full-batch ascent (W phase with H fixed, then H phase) with
// backtracking halving; the objective never decreases across accepted steps.
// Appends the post-iteration objective to *trace when given.
FplModel train_fpl(const Dataset& data, std::size_t k, const DampingSchedule& damping,
                   const RegWeights& reg, const GdSchedule& schedule,
                   std::vector<double>* trace = nullptr);

// Candidates sorted by score descending, ties broken by ascending item id.
// Damping never enters here: sorting is invariant under any positive
// per-stage temperature, so prediction uses the raw scores.
std::vector<ItemId> predict_sort(const FactorPair& factors, UserId user,
                                 std::span<const ItemId> candidates);

}  // namespace permrank
