#include "permrank/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "permrank/pairwise.hpp"

namespace permrank {

// ---- id mapping ------------------------------------------------------------

IdMap IdMap::numeric(std::int32_t size) {
    IdMap map;
    map.numeric_ = true;
    map.size_ = size;
    return map;
}

IdMap IdMap::tokens(std::vector<std::string> tokens) {
    IdMap map;
    map.numeric_ = false;
    map.size_ = static_cast<std::int32_t>(tokens.size());
    map.tokens_ = std::move(tokens);
    for (std::int32_t i = 0; i < map.size_; ++i) map.index_.emplace(map.tokens_[i], i);
    return map;
}

namespace {

// A token is canonical-decimal iff it round-trips: no sign, no leading zeros.
std::optional<std::int32_t> canonical_decimal(const std::string& token) {
    if (token.empty() || token.size() > 9) return std::nullopt;
    if (token.size() > 1 && token[0] == '0') return std::nullopt;
    std::int64_t value = 0;
    for (char c : token) {
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
    }
    return static_cast<std::int32_t>(value);
}

}  // namespace

std::optional<std::int32_t> IdMap::find(const std::string& token) const {
    if (numeric_) {
        const auto v = canonical_decimal(token);
        if (v && *v < size_) return v;
        return std::nullopt;
    }
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string IdMap::token(std::int32_t id) const {
    if (id < 0 || id >= size_) throw std::out_of_range("IdMap::token: id out of range");
    if (numeric_) return std::to_string(id);
    return tokens_[id];
}

// ---- line scanning ---------------------------------------------------------

namespace {

struct RawRecord {
    std::size_t line = 0;
    std::string user;
    std::vector<std::string> fields;  // tab-separated fields after the user
};

struct ScannedFile {
    std::vector<RawRecord> records;
    bool has_header = false;
    std::int32_t header_users = 0;
    std::int32_t header_items = 0;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t end = text.find(sep, begin);
        if (end == std::string::npos) {
            out.push_back(text.substr(begin));
            return out;
        }
        out.push_back(text.substr(begin, end - begin));
        begin = end + 1;
    }
}

ScannedFile scan_lines(std::istream& in, std::size_t expected_fields) {
    ScannedFile scanned;
    std::string line;
    std::size_t line_no = 0;
    bool seen_record = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            // The serializer pins the universe sizes in a comment header so
            // that unobserved trailing users/items survive a round trip.
            std::istringstream hs(line);
            std::string hash, magic;
            std::int64_t n = 0, m = 0;
            if (!seen_record && !scanned.has_header && (hs >> hash >> magic >> n >> m) &&
                hash == "#" && magic == "permrank" && n >= 0 && m >= 0) {
                scanned.has_header = true;
                scanned.header_users = static_cast<std::int32_t>(n);
                scanned.header_items = static_cast<std::int32_t>(m);
            }
            continue;
        }
        std::vector<std::string> fields = split(line, '\t');
        if (fields.size() != expected_fields)
            throw ParseError(line_no, "expected " + std::to_string(expected_fields) +
                                          " tab-separated fields, got " +
                                          std::to_string(fields.size()));
        for (const std::string& f : fields)
            if (f.empty()) throw ParseError(line_no, "empty field");
        RawRecord rec;
        rec.line = line_no;
        rec.user = fields[0];
        rec.fields.assign(fields.begin() + 1, fields.end());
        scanned.records.push_back(std::move(rec));
        seen_record = true;
    }
    return scanned;
}

// Builds the id map for one axis: numeric when every token is canonical
// decimal, first-seen order otherwise.
IdMap build_map(const std::vector<std::string>& in_order, std::int32_t header_size) {
    bool numeric = true;
    std::int32_t max_id = -1;
    for (const std::string& token : in_order) {
        const auto v = canonical_decimal(token);
        if (!v) {
            numeric = false;
            break;
        }
        max_id = std::max(max_id, *v);
    }
    if (numeric) return IdMap::numeric(std::max(max_id + 1, header_size));
    std::vector<std::string> uniq;
    std::unordered_map<std::string, bool> seen;
    for (const std::string& token : in_order)
        if (seen.emplace(token, true).second) uniq.push_back(token);
    return IdMap::tokens(std::move(uniq));
}

}  // namespace

ParsedDataset parse_rankings(std::istream& in) {
    const ScannedFile scanned = scan_lines(in, 2);

    std::vector<std::string> user_tokens;
    std::vector<std::string> item_tokens;
    std::vector<std::vector<std::string>> record_items;
    record_items.reserve(scanned.records.size());
    for (const RawRecord& rec : scanned.records) {
        user_tokens.push_back(rec.user);
        std::vector<std::string> items = split(rec.fields[0], ',');
        for (const std::string& tok : items)
            if (tok.empty()) throw ParseError(rec.line, "empty item token");
        for (const std::string& tok : items) item_tokens.push_back(tok);
        record_items.push_back(std::move(items));
    }

    ParsedDataset out;
    out.users = build_map(user_tokens, scanned.has_header ? scanned.header_users : 0);
    out.items = build_map(item_tokens, scanned.has_header ? scanned.header_items : 0);
    out.data.num_users = out.users.size();
    out.data.num_items = out.items.size();

    std::unordered_map<UserId, std::size_t> user_lines;
    for (std::size_t r = 0; r < scanned.records.size(); ++r) {
        const RawRecord& rec = scanned.records[r];
        RankedList list;
        list.user = *out.users.find(rec.user);
        if (!user_lines.emplace(list.user, rec.line).second)
            throw ParseError(rec.line, "second list for user " + rec.user);
        for (const std::string& tok : record_items[r])
            list.items.push_back(*out.items.find(tok));
        const ListValidation v = validate_ranked_list(list, out.data.num_items);
        if (!v.ok()) throw ParseError(rec.line, v.message());
        out.data.lists.push_back(std::move(list));
    }
    return out;
}

ParsedDataset parse_ratings(std::istream& in) {
    const ScannedFile scanned = scan_lines(in, 3);

    std::vector<std::string> user_tokens;
    std::vector<std::string> item_tokens;
    std::vector<double> ratings;
    for (const RawRecord& rec : scanned.records) {
        user_tokens.push_back(rec.user);
        item_tokens.push_back(rec.fields[0]);
        char* end = nullptr;
        const double value = std::strtod(rec.fields[1].c_str(), &end);
        if (end != rec.fields[1].c_str() + rec.fields[1].size() || !std::isfinite(value))
            throw ParseError(rec.line, "bad rating '" + rec.fields[1] + "'");
        ratings.push_back(value);
    }

    ParsedDataset out;
    out.users = build_map(user_tokens, scanned.has_header ? scanned.header_users : 0);
    out.items = build_map(item_tokens, scanned.has_header ? scanned.header_items : 0);
    out.data.num_users = out.users.size();
    out.data.num_items = out.items.size();

    // per user: (item, rating), rejecting duplicate pairs
    std::map<UserId, std::vector<std::pair<ItemId, double>>> by_user;
    for (std::size_t r = 0; r < scanned.records.size(); ++r) {
        const RawRecord& rec = scanned.records[r];
        const UserId u = *out.users.find(rec.user);
        const ItemId y = *out.items.find(rec.fields[0]);
        auto& entries = by_user[u];
        for (const auto& [item, rating] : entries)
            if (item == y)
                throw ParseError(rec.line,
                                 "duplicate rating for user " + rec.user + " item " +
                                     rec.fields[0]);
        entries.emplace_back(y, ratings[r]);
    }
    for (auto& [user, entries] : by_user) {
        std::sort(entries.begin(), entries.end(),
                  [](const std::pair<ItemId, double>& a, const std::pair<ItemId, double>& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                  });
        RankedList list;
        list.user = user;
        for (const auto& [item, rating] : entries) list.items.push_back(item);
        out.data.lists.push_back(std::move(list));
    }
    return out;
}

void serialize_dataset(const Dataset& data, const IdMap& users, const IdMap& items,
                       std::ostream& out) {
    out << "# permrank " << data.num_users << ' ' << data.num_items << '\n';
    for (const RankedList& list : data.lists) {
        out << users.token(list.user) << '\t';
        for (std::size_t i = 0; i < list.items.size(); ++i) {
            if (i) out << ',';
            out << items.token(list.items[i]);
        }
        out << '\n';
    }
}

// ---- synthetic data --------------------------------------------------------

std::vector<ItemId> sample_pl_permutation(std::span<const ItemId> pool,
                                          std::span<const double> scores, std::size_t length,
                                          RngStream& rng) {
    if (pool.size() != scores.size())
        throw std::invalid_argument("sample_pl_permutation: pool/scores size mismatch");
    if (length > pool.size())
        throw std::invalid_argument("sample_pl_permutation: length exceeds pool size");
    std::vector<ItemId> remaining(pool.begin(), pool.end());
    std::vector<double> rem_scores(scores.begin(), scores.end());
    std::vector<ItemId> out;
    out.reserve(length);
    for (std::size_t stage = 0; stage < length; ++stage) {
        double hi = rem_scores[0];
        for (double s : rem_scores) hi = std::max(hi, s);
        double total = 0.0;
        for (double s : rem_scores) total += std::exp(s - hi);
        const double threshold = rng.uniform() * total;
        double cum = 0.0;
        std::size_t pick = remaining.size() - 1;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            cum += std::exp(rem_scores[i] - hi);
            if (threshold < cum) {
                pick = i;
                break;
            }
        }
        out.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
        rem_scores.erase(rem_scores.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

SynthResult generate_synthetic(const SynthSpec& spec) {
    if (spec.num_users < 1 || spec.num_items < 1)
        throw std::invalid_argument("generate_synthetic: need users and items");
    if (spec.n_min < 1 || spec.n_min > spec.n_max ||
        spec.n_max > static_cast<std::size_t>(spec.num_items))
        throw std::invalid_argument("generate_synthetic: bad list-length range");
    if (spec.k < 1 || spec.k > static_cast<std::size_t>(
                                   std::min(spec.num_users, spec.num_items)))
        throw std::invalid_argument("generate_synthetic: bad latent dimension");
    if (!(spec.score_scale >= 0.0))
        throw std::invalid_argument("generate_synthetic: bad score scale");

    RngStream root(spec.seed);
    RngStream init = root.child(0);
    SynthResult out;
    out.truth = init_factors(spec.num_users, spec.num_items, spec.k, spec.score_scale, init);
    out.data.num_users = spec.num_users;
    out.data.num_items = spec.num_items;

    std::vector<ItemId> pool(static_cast<std::size_t>(spec.num_items));
    for (std::int32_t u = 0; u < spec.num_users; ++u) {
        RngStream user_rng = root.child(1 + static_cast<std::uint64_t>(u));
        const std::size_t n =
            spec.n_min + static_cast<std::size_t>(
                             user_rng.uniform_int(spec.n_max - spec.n_min + 1));
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<ItemId>(i);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(user_rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        const std::span<const ItemId> subset{pool.data(), n};
        const ScoreVector scores = user_scores(out.truth, u, subset);
        RankedList list;
        list.user = u;
        list.items = sample_pl_permutation(subset, scores, n, user_rng);
        out.data.lists.push_back(std::move(list));
    }
    return out;
}

// ---- model serialization ---------------------------------------------------

std::string kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::pairwise_baseline: return "pairwise-baseline";
        case ModelKind::factored_pl: return "factored-pl";
        case ModelKind::latent_pl: return "latent-pl";
        case ModelKind::loglin_positional: return "loglin-positional";
        case ModelKind::loglin_pairwise: return "loglin-pairwise";
    }
    return "?";
}

ModelKind kind_from_name(const std::string& name) {
    if (name == "pairwise-baseline") return ModelKind::pairwise_baseline;
    if (name == "factored-pl") return ModelKind::factored_pl;
    if (name == "latent-pl") return ModelKind::latent_pl;
    if (name == "loglin-positional") return ModelKind::loglin_positional;
    if (name == "loglin-pairwise") return ModelKind::loglin_pairwise;
    throw FormatError("unknown model kind '" + name + "'");
}

ModelKind kind_of(const AnyModel& model) {
    if (std::holds_alternative<BaselineModel>(model)) return ModelKind::pairwise_baseline;
    if (std::holds_alternative<FplModel>(model)) return ModelKind::factored_pl;
    if (std::holds_alternative<MixtureModel>(model)) return ModelKind::latent_pl;
    if (std::holds_alternative<PositionalModel>(model)) return ModelKind::loglin_positional;
    return ModelKind::loglin_pairwise;
}

namespace {

void write_number(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            write_number(out, m.at(r, c));
        }
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        if (!(in >> v)) throw FormatError("truncated model file: missing parameters");
        if (!std::isfinite(v)) throw FormatError("non-finite parameter in model file");
    }
    return m;
}

void write_factors(std::ostream& out, const FactorPair& f) {
    write_matrix(out, f.w);
    write_matrix(out, f.h);
}

struct Dims {
    std::size_t n = 0, m = 0, k = 0;
};

Dims read_dims(std::istream& in) {
    std::int64_t n = 0, m = 0, k = 0;
    if (!(in >> n >> m >> k) || n < 0 || m < 0 || k < 0)
        throw FormatError("bad dimension line");
    return {static_cast<std::size_t>(n), static_cast<std::size_t>(m),
            static_cast<std::size_t>(k)};
}

FactorPair read_factors(std::istream& in, const Dims& d) {
    return {read_matrix(in, d.n, d.k), read_matrix(in, d.k, d.m)};
}

std::string damping_token(const DampingSchedule& damping) {
    switch (damping.kind) {
        case DampingKind::none: return "none";
        case DampingKind::logarithmic: return "log";
        case DampingKind::custom: break;
    }
    throw std::invalid_argument("write_model: custom damping schedules are not serializable");
}

}  // namespace

void write_model(const AnyModel& model, std::ostream& out) {
    out << "PERMRANK-MODEL 1 " << kind_name(kind_of(model)) << '\n';
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BaselineModel>) {
                out << m.factors.num_users() << ' ' << m.factors.num_items() << ' '
                    << m.factors.rank() << '\n';
                write_factors(out, m.factors);
            } else if constexpr (std::is_same_v<T, FplModel>) {
                out << m.factors.num_users() << ' ' << m.factors.num_items() << ' '
                    << m.factors.rank() << ' ' << damping_token(m.damping) << ' ';
                write_number(out, m.reg.alpha);
                out << ' ';
                write_number(out, m.reg.beta);
                out << '\n';
                write_factors(out, m.factors);
            } else if constexpr (std::is_same_v<T, MixtureModel>) {
                out << m.num_users() << ' ' << m.num_items() << ' ' << m.num_communities()
                    << '\n';
                write_matrix(out, m.mixture);
                write_matrix(out, m.community_scores);
            } else if constexpr (std::is_same_v<T, PositionalModel>) {
                out << m.factors.num_users() << ' ' << m.factors.num_items() << ' '
                    << m.factors.rank() << '\n';
                write_factors(out, m.factors);
            } else {
                out << m.num_items << ' ' << m.lambda.size() << ' ' << m.tau << '\n';
                for (std::size_t y = 0; y < m.gamma.size(); ++y) {
                    if (y) out << ' ';
                    write_number(out, m.gamma[y]);
                }
                out << '\n';
                std::vector<std::uint64_t> keys;
                keys.reserve(m.lambda.size());
                for (const auto& [key, value] : m.lambda) keys.push_back(key);
                std::sort(keys.begin(), keys.end());
                for (std::uint64_t key : keys) {
                    out << static_cast<ItemId>(key >> 32) << ' '
                        << static_cast<ItemId>(key & 0xffffffffULL) << ' ';
                    write_number(out, m.lambda.at(key));
                    out << '\n';
                }
            }
        },
        model);
    if (!out) throw FormatError("write_model: stream failure");
}

AnyModel read_model(std::istream& in) {
    std::string magic, kind_token;
    int version = 0;
    if (!(in >> magic >> version >> kind_token) || magic != "PERMRANK-MODEL")
        throw FormatError("not a permrank model file");
    if (version != 1) throw FormatError("unsupported model version " + std::to_string(version));
    const ModelKind kind = kind_from_name(kind_token);

    switch (kind) {
        case ModelKind::pairwise_baseline: {
            const Dims d = read_dims(in);
            return BaselineModel{read_factors(in, d)};
        }
        case ModelKind::factored_pl: {
            const Dims d = read_dims(in);
            std::string damping;
            FplModel model;
            if (!(in >> damping >> model.reg.alpha >> model.reg.beta) ||
                !std::isfinite(model.reg.alpha) || !std::isfinite(model.reg.beta))
                throw FormatError("bad factored-pl dimension line");
            if (damping == "none")
                model.damping = DampingSchedule::none();
            else if (damping == "log")
                model.damping = DampingSchedule::logarithmic();
            else
                throw FormatError("unknown damping '" + damping + "'");
            model.factors = read_factors(in, d);
            return model;
        }
        case ModelKind::latent_pl: {
            const Dims d = read_dims(in);
            MixtureModel model;
            model.mixture = read_matrix(in, d.n, d.k);
            model.community_scores = read_matrix(in, d.k, d.m);
            return model;
        }
        case ModelKind::loglin_positional: {
            const Dims d = read_dims(in);
            return PositionalModel{read_factors(in, d)};
        }
        case ModelKind::loglin_pairwise: {
            std::int64_t m = 0, entries = 0, tau = 0;
            if (!(in >> m >> entries >> tau) || m < 0 || entries < 0 || tau < 1)
                throw FormatError("bad loglin-pairwise dimension line");
            PairwiseModel model;
            model.num_items = static_cast<std::int32_t>(m);
            model.tau = tau;
            model.gamma.resize(static_cast<std::size_t>(m));
            for (double& v : model.gamma) {
                if (!(in >> v)) throw FormatError("truncated model file: missing gamma");
                if (!std::isfinite(v)) throw FormatError("non-finite gamma in model file");
            }
            for (std::int64_t e = 0; e < entries; ++e) {
                ItemId a = 0, b = 0;
                double value = 0.0;
                if (!(in >> a >> b >> value))
                    throw FormatError("truncated model file: missing lambda triples");
                if (a < 0 || b < 0 || a >= model.num_items || b >= model.num_items)
                    throw FormatError("lambda triple out of range");
                if (!std::isfinite(value))
                    throw FormatError("non-finite lambda in model file");
                model.lambda.emplace(pair_key(a, b), value);
            }
            return model;
        }
    }
    throw FormatError("unreachable model kind");
}

}  // namespace permrank
