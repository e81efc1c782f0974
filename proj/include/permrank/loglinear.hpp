#pragma once

#include <cstdint>
#include <unordered_map>
#include <variant>
#include <vector>

#include "permrank/core.hpp"
#include "permrank/pairwise.hpp"
#include "permrank/rng.hpp"

// Log-linear permutation models: P(pi|u) proportional to exp(-E(pi,u)).
// Exact normalisation is intractable, so sampling and learning go through
// Metropolis-Hastings over three local move types, Contrastive Divergence,
// and pseudo-likelihood. Two parameterisations: factored position-wise
// scores, and thresholded item-pair potentials with a per-item fallback.

namespace permrank {

// ---- moves -----------------------------------------------------------------

// All positions are 0-based indices into the current permutation.
struct Relocate {
    std::size_t from = 0;
    std::size_t to = 0;  // position of the item after the move
};
struct Swap {
    std::size_t l = 0;
    std::size_t m = 0;  // l < m
};
struct SublistPerm {
    std::size_t start = 0;
    std::vector<std::size_t> order;  // permutation of 0..width-1, width >= 2
};
using Move = std::variant<Relocate, Swap, SublistPerm>;

// Throws std::invalid_argument if the move is malformed for a list of size n.
void validate_move(const Move& move, std::size_t n);

void apply_move(std::vector<ItemId>& perm, const Move& move);

// Symmetric proposal mix. Weights are renormalised over the move types that
// are valid for the current list length.
struct MoveProposal {
    double swap_weight = 0.7;
    double relocate_weight = 0.2;
    double sublist_weight = 0.1;
    std::size_t sublist_width = 3;

    static MoveProposal swap_only() { return {1.0, 0.0, 0.0, 3}; }

    Move draw(std::size_t n, RngStream& rng) const;
};

// ---- parameterisations -----------------------------------------------------

// E(pi, u) = -sum_i s[pi_i, u] * g(i) with g(i) = (1 + n - 2i) / n (1-based i),
// so earlier positions carry larger positive weight and sum_i g(i) = 0.
struct PositionalModel {
    FactorPair factors;

    static double position_weight(std::size_t i_1based, std::size_t n) {
        return (1.0 + static_cast<double>(n) - 2.0 * static_cast<double>(i_1based)) /
               static_cast<double>(n);
    }
};

inline std::uint64_t pair_key(ItemId a, ItemId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

// E(pi, u) = -sum_i gamma[pi_i] * g(i) - sum_{i<j} lambda[pi_i, pi_j] with
// g(i) = 1 - i/n. Only pairs that co-occurred at least tau times in training
// carry a lambda entry; absent pairs contribute zero energy.
struct PairwiseModel {
    std::int32_t num_items = 0;
    std::vector<double> gamma;
    std::unordered_map<std::uint64_t, double> lambda;
    std::int64_t tau = 1;

    static double position_weight(std::size_t i_1based, std::size_t n) {
        return 1.0 - static_cast<double>(i_1based) / static_cast<double>(n);
    }

    double lambda_at(ItemId a, ItemId b) const {
        const auto it = lambda.find(pair_key(a, b));
        return it == lambda.end() ? 0.0 : it->second;
    }
};

// Counts unordered in-list co-occurrences and allocates zero-initialised
// lambda slots (both directions) for every pair seen at least tau times,
// plus a gamma slot per item.
PairwiseModel build_pairwise_params(const Dataset& data, std::int64_t tau);

// ---- energies --------------------------------------------------------------

double energy(const PositionalModel& model, std::span<const ItemId> perm, UserId user);
double energy(const PairwiseModel& model, std::span<const ItemId> perm, UserId user);

// Energy change of a move; always equals energy(after) - energy(before).
// Positional swaps are O(1); pairwise swaps and relocations are O(span);
// sublist permutations are O(width^2).
double delta_energy(const PositionalModel& model, std::span<const ItemId> perm, UserId user,
                    const Move& move);
double delta_energy(const PairwiseModel& model, std::span<const ItemId> perm, UserId user,
                    const Move& move);

// ---- sampling --------------------------------------------------------------

struct ChainState {
    UserId user = 0;
    std::vector<ItemId> perm;
    double energy = 0.0;
    long long proposed = 0;
    long long accepted = 0;
    long long accepted_since_check = 0;
};

template <typename Model>
ChainState make_chain(const Model& model, UserId user, std::vector<ItemId> perm) {
    ChainState state;
    state.user = user;
    state.energy = energy(model, perm, user);
    state.perm = std::move(perm);
    return state;
}

inline double acceptance_probability(double delta_e) {
    const double p = std::exp(-delta_e);
    return p < 1.0 ? p : 1.0;
}

// One Metropolis-Hastings step with the symmetric proposal: accept with
// probability min{1, exp(-dE)}. The cached energy is refreshed from scratch
// every 10^4 accepted moves. Returns whether the move was accepted.
bool metropolis_step(const PositionalModel& model, ChainState& state,
                     const MoveProposal& proposal, RngStream& rng);
bool metropolis_step(const PairwiseModel& model, ChainState& state,
                     const MoveProposal& proposal, RngStream& rng);

// ---- contrastive divergence ------------------------------------------------

struct CdSchedule {
    int epochs = 100;
    double learning_rate = 0.05;
    int chain_steps = 0;  // 0: one swap-move chain of length n_u per user
    double init_scale = 0.01;
    std::uint64_t seed = 0;
};

// CD learning: per user and epoch, run a short swap-move chain from the
// observed list; the update lowers the data energy relative to the chain-end
// energy. Appends the mean data energy per epoch to *trace when given.
PositionalModel cd_train_positional(const Dataset& data, std::size_t k,
                                    const CdSchedule& schedule,
                                    std::vector<double>* trace = nullptr);
PairwiseModel cd_train_pairwise(const Dataset& data, std::int64_t tau,
                                const CdSchedule& schedule,
                                std::vector<double>* trace = nullptr);

// ---- pseudo-likelihood -----------------------------------------------------

enum class PseudoStructure { relocation, swapping, sublist };

// Full-configuration energies of moving perm[index] across every position,
// computed left-to-right in a single pass of adjacent-swap deltas. Entry j is
// the energy with the item at position j.
template <typename Model>
std::vector<double> relocation_energies(const Model& model, UserId user,
                                        std::span<const ItemId> perm, std::size_t index);

double pseudo_likelihood(const PositionalModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width = 3);
double pseudo_likelihood(const PairwiseModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width = 3);

struct PositionalGrad {
    Matrix w;
    Matrix h;
};
struct PairwiseGrad {
    std::vector<double> gamma;
    std::unordered_map<std::uint64_t, double> lambda;  // retained keys only
};

PositionalGrad pseudo_grad(const PositionalModel& model, const Dataset& data,
                           PseudoStructure structure, std::size_t sublist_width = 3);
PairwiseGrad pseudo_grad(const PairwiseModel& model, const Dataset& data,
                         PseudoStructure structure, std::size_t sublist_width = 3);

// Full-batch backtracking ascent on the pseudo-likelihood.
PositionalModel pl_train_positional(const Dataset& data, std::size_t k,
                                    PseudoStructure structure, std::size_t sublist_width,
                                    const GdSchedule& schedule,
                                    std::vector<double>* trace = nullptr);
PairwiseModel pl_train_pairwise(const Dataset& data, std::int64_t tau,
                                PseudoStructure structure, std::size_t sublist_width,
                                const GdSchedule& schedule,
                                std::vector<double>* trace = nullptr);

// ---- prediction ------------------------------------------------------------

struct EnergyInsert {
    int position = 1;  // 1-based position in the merged list
    double energy = 0.0;
    // energy of the merged list with the item fronted (position 1); the seen
    // items sit identically across candidates there, so this compares
    // candidates on their own potentials alone
    double front_energy = 0.0;
};

// Lowest-energy insertion position for a new item with the seen order fixed,
// found in a single pass of adjacent-swap deltas. Ties go to the smallest
// position. Throws std::invalid_argument if the item is already present.
template <typename Model>
EnergyInsert predict_insert(const Model& model, UserId user, std::span<const ItemId> seen,
                            ItemId item);

// Candidates ranked by their independent insertions: position ascending, then
// fronted-insertion energy ascending, then item id. The total energy at the
// best position cannot break position ties: its pair terms measure how
// compatible the whole arrangement is, which at late positions rewards the
// items everything else beats. The fronted energy compares the candidates'
// own potentials at a shared reference instead (for the positional
// parameterisation it reduces exactly to score order).
template <typename Model>
std::vector<ItemId> rank_unseen_energy(const Model& model, UserId user,
                                       std::span<const ItemId> seen,
                                       std::span<const ItemId> candidates);

}  // namespace permrank
