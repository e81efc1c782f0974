#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "permrank/core.hpp"
#include "permrank/models.hpp"
#include "permrank/rng.hpp"

// File formats, synthetic data generation, and model serialization.
//
// Rankings file: one record per line, `user<TAB>item,item,...`, `#` comments
// and blank lines ignored. Ratings file: `user<TAB>item<TAB>rating`. Model
// file: `PERMRANK-MODEL 1 <kind>`, a dimension line, then whitespace-
// separated decimal parameters at 17 significant digits (bit-exact round
// trip).

namespace permrank {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// External id <-> dense index mapping. When every token in a file is a
// canonical decimal integer the indices are the token values themselves
// (numeric mode); otherwise indices are assigned in first-seen order.
class IdMap {
public:
    static IdMap numeric(std::int32_t size);
    static IdMap tokens(std::vector<std::string> tokens);

    std::optional<std::int32_t> find(const std::string& token) const;
    std::string token(std::int32_t id) const;
    std::int32_t size() const { return size_; }
    bool is_numeric() const { return numeric_; }

private:
    bool numeric_ = true;
    std::int32_t size_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct ParsedDataset {
    Dataset data;
    IdMap users;
    IdMap items;
};

// Parses a rankings file. A leading `# permrank <N> <M>` comment (written by
// serialize_dataset) pins the universe sizes; otherwise they are inferred
// from the records. Throws ParseError with the 1-based line number.
ParsedDataset parse_rankings(std::istream& in);

// Parses a ratings file and converts it per user to a ranking: items sorted
// by rating descending, ties broken by ascending item index. A duplicate
// (user, item) pair is an error.
ParsedDataset parse_ratings(std::istream& in);

// Writes records in parse_rankings format, preceded by the universe header.
void serialize_dataset(const Dataset& data, const IdMap& users, const IdMap& items,
                       std::ostream& out);

// Draws `length` items from the pool without replacement; at each stage the
// next item is chosen with probability exp(s) / sum of exp over the items
// still in the pool. The draw inverts the cumulative stage distribution in
// pool order with one uniform per stage, so streams replay byte-identically.
std::vector<ItemId> sample_pl_permutation(std::span<const ItemId> pool,
                                          std::span<const double> scores, std::size_t length,
                                          RngStream& rng);

struct SynthSpec {
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;
    std::size_t k = 1;
    std::size_t n_min = 1;
    std::size_t n_max = 1;
    double score_scale = 1.0;
    std::uint64_t seed = 0;
};

struct SynthResult {
    Dataset data;
    FactorPair truth;
};

// Ground-truth factors i.i.d. uniform in [-scale, scale]; each user ranks a
// uniformly chosen item subset by the stage-wise choice process on the true
// scores. Fully reproducible from the seed.
SynthResult generate_synthetic(const SynthSpec& spec);

void write_model(const AnyModel& model, std::ostream& out);
AnyModel read_model(std::istream& in);

}  // namespace permrank
