#include "permrank/core.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace permrank {

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

ScoreVector user_scores(const FactorPair& factors, UserId user,
                        std::span<const ItemId> items) {
    if (user < 0 || static_cast<std::size_t>(user) >= factors.num_users())
        throw std::out_of_range("user_scores: user " + std::to_string(user) +
                                " outside [0, " + std::to_string(factors.num_users()) + ")");
    ScoreVector out;
    out.reserve(items.size());
    for (ItemId y : items) {
        if (y < 0 || static_cast<std::size_t>(y) >= factors.num_items())
            throw std::out_of_range("user_scores: item " + std::to_string(y) +
                                    " outside [0, " + std::to_string(factors.num_items()) + ")");
        out.push_back(factors.score(user, y));
    }
    return out;
}

std::vector<double> suffix_log_denominators(std::span<const double> scores,
                                            std::size_t start) {
    if (scores.empty()) throw std::invalid_argument("suffix_log_denominators: empty scores");
    if (start >= scores.size())
        throw std::invalid_argument("suffix_log_denominators: start past end");
    const std::size_t n = scores.size();
    std::vector<double> out(n - start);
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t i = n; i-- > start;) {
        acc = log_add_exp(acc, scores[i]);
        out[i - start] = acc;
    }
    return out;
}

std::string ListValidation::message() const {
    switch (violation) {
        case ListViolation::none:
            return "ok";
        case ListViolation::duplicate_item:
            return "duplicate item " + std::to_string(item) + " at position " +
                   std::to_string(position);
        case ListViolation::item_out_of_range:
            return "item " + std::to_string(item) + " out of range at position " +
                   std::to_string(position);
    }
    return "ok";
}

ListValidation validate_ranked_list(const RankedList& list, std::int32_t num_items) {
    std::unordered_set<ItemId> seen;
    seen.reserve(list.items.size());
    for (std::size_t i = 0; i < list.items.size(); ++i) {
        const ItemId y = list.items[i];
        if (y < 0 || y >= num_items)
            return {ListViolation::item_out_of_range, i + 1, y};
        if (!seen.insert(y).second)
            return {ListViolation::duplicate_item, i + 1, y};
    }
    return {};
}

void validate_dataset(const Dataset& data) {
    std::unordered_set<UserId> users;
    for (const RankedList& list : data.lists) {
        if (list.user < 0 || list.user >= data.num_users)
            throw std::invalid_argument("dataset: user " + std::to_string(list.user) +
                                        " outside [0, " + std::to_string(data.num_users) + ")");
        if (!users.insert(list.user).second)
            throw std::invalid_argument("dataset: more than one list for user " +
                                        std::to_string(list.user));
        if (list.items.empty())
            throw std::invalid_argument("dataset: empty list for user " +
                                        std::to_string(list.user));
        const ListValidation v = validate_ranked_list(list, data.num_items);
        if (!v.ok())
            throw std::invalid_argument("dataset: user " + std::to_string(list.user) + ": " +
                                        v.message());
    }
}

}  // namespace permrank
