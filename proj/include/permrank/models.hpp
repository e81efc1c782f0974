#pragma once

#include <string>
#include <variant>

#include "permrank/factored_pl.hpp"
#include "permrank/latent_pl.hpp"
#include "permrank/loglinear.hpp"

namespace permrank {

// The trained artifact of the pairwise-preference baseline is just the
// factor pair; prediction sorts by score.
struct BaselineModel {
    FactorPair factors;
};

enum class ModelKind {
    pairwise_baseline,
    factored_pl,
    latent_pl,
    loglin_positional,
    loglin_pairwise,
};

using AnyModel =
    std::variant<BaselineModel, FplModel, MixtureModel, PositionalModel, PairwiseModel>;

std::string kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);
ModelKind kind_of(const AnyModel& model);

}  // namespace permrank
