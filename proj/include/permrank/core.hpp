#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Core domain types shared by every model family: ranked lists, the
// factored score matrices, and the suffix log-sum-exp recursion that all
// stage-wise likelihoods are built on.

namespace permrank {

using UserId = std::int32_t;
using ItemId = std::int32_t;

// Per-item real scores, aligned with the item sequence the caller passed in.
using ScoreVector = std::vector<double>;

// Thrown when a training run produces a non-finite objective or parameter.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of doubles. Small, owning, no view tricks.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double frobenius_sq() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return s;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// One user's ordered preference list, most-preferred first.
struct RankedList {
    UserId user = 0;
    std::vector<ItemId> items;

    std::size_t size() const { return items.size(); }
};

// Sparse collection of ranked lists over a fixed user/item universe.
struct Dataset {
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;
    std::vector<RankedList> lists;  // at most one per user
};

// The factored score parameterisation: score(u, y) = W.row(u) . H.col(y).
struct FactorPair {
    Matrix w;  // num_users x k
    Matrix h;  // k x num_items

    std::size_t num_users() const { return w.rows(); }
    std::size_t num_items() const { return h.cols(); }
    std::size_t rank() const { return w.cols(); }

    double score(UserId user, ItemId item) const {
        double s = 0.0;
        for (std::size_t k = 0; k < w.cols(); ++k) s += w.at(user, k) * h.at(k, item);
        return s;
    }
};

// log(e^a + e^b) without overflow; handles -inf identities.
double log_add_exp(double a, double b);

// Numerically stable log(1 + e^x).
double softplus(double x);

// Scores for one user over a requested item subset.
// Throws std::out_of_range on a bad user or item index.
ScoreVector user_scores(const FactorPair& factors, UserId user,
                        std::span<const ItemId> items);

// Log-denominators of the stage-wise choice model: entry i (relative to
// `start`) is log sum_{j>=i} exp(scores[j]), computed right-to-left in one
// streaming log-sum-exp pass. Throws std::invalid_argument on empty input.
std::vector<double> suffix_log_denominators(std::span<const double> scores,
                                            std::size_t start = 0);

enum class ListViolation { none, duplicate_item, item_out_of_range };

// Outcome of validate_ranked_list. Positions are reported 1-based.
struct ListValidation {
    ListViolation violation = ListViolation::none;
    std::size_t position = 0;
    ItemId item = 0;

    bool ok() const { return violation == ListViolation::none; }
    std::string message() const;
};

ListValidation validate_ranked_list(const RankedList& list, std::int32_t num_items);

// Validates every list in a dataset plus the dimension bookkeeping.
// Throws std::invalid_argument describing the first violation found.
void validate_dataset(const Dataset& data);

}  // namespace permrank
