#include "permrank/latent_pl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "permrank/rng.hpp"

namespace permrank {

namespace {

constexpr double kMixtureFloor = 1e-12;

void check_model(const MixtureModel& model) {
    if (model.mixture.cols() != model.community_scores.rows())
        throw std::invalid_argument("latent-pl: mixture/score dimension mismatch");
}

// Scores of one list under every community: k rows, n columns.
Matrix community_list_scores(const MixtureModel& model, const RankedList& list) {
    const std::size_t k = model.num_communities();
    const std::size_t n = list.size();
    Matrix s(k, n);
    for (std::size_t z = 0; z < k; ++z)
        for (std::size_t i = 0; i < n; ++i) {
            const ItemId y = list.items[i];
            if (y < 0 || static_cast<std::size_t>(y) >= model.num_items())
                throw std::out_of_range("latent-pl: item out of range");
            s.at(z, i) = model.community_scores.at(z, y);
        }
    return s;
}

// One suffix log-denominator array per community.
Matrix community_suffix_denoms(const Matrix& s) {
    Matrix a(s.rows(), s.cols());
    for (std::size_t z = 0; z < s.rows(); ++z) {
        const std::vector<double> d = suffix_log_denominators(s.row(z));
        for (std::size_t i = 0; i < d.size(); ++i) a.at(z, i) = d[i];
    }
    return a;
}

}  // namespace

double stage_prob(const MixtureModel& model, const RankedList& list, std::size_t stage,
                  std::size_t z) {
    check_model(model);
    if (stage >= list.size() || z >= model.num_communities())
        throw std::invalid_argument("stage_prob: stage or community out of range");
    std::vector<double> s(list.size() - stage);
    for (std::size_t j = stage; j < list.size(); ++j)
        s[j - stage] = model.community_scores.at(z, list.items[j]);
    const double denom = suffix_log_denominators(s)[0];
    return std::exp(s[0] - denom);
}

double log_likelihood(const MixtureModel& model, const RankedList& list) {
    check_model(model);
    const Matrix s = community_list_scores(model, list);
    const Matrix a = community_suffix_denoms(s);
    const std::size_t k = model.num_communities();
    double ll = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
        double mix = 0.0;
        for (std::size_t z = 0; z < k; ++z)
            mix += model.mixture.at(list.user, z) * std::exp(s.at(z, i) - a.at(z, i));
        ll += std::log(mix);
    }
    return ll;
}

double total_log_likelihood(const MixtureModel& model, const Dataset& data) {
    double ll = 0.0;
    for (const RankedList& list : data.lists) ll += log_likelihood(model, list);
    return ll;
}

Responsibilities e_step(const MixtureModel& model, const Dataset& data) {
    check_model(model);
    Responsibilities resp;
    resp.q.reserve(data.lists.size());
    const std::size_t k = model.num_communities();
    for (const RankedList& list : data.lists) {
        const Matrix s = community_list_scores(model, list);
        const Matrix a = community_suffix_denoms(s);
        Matrix q(list.size(), k);
        for (std::size_t i = 0; i < list.size(); ++i) {
            double total = 0.0;
            for (std::size_t z = 0; z < k; ++z) {
                const double prior = std::max(model.mixture.at(list.user, z), kMixtureFloor);
                q.at(i, z) = prior * std::exp(s.at(z, i) - a.at(z, i));
                total += q.at(i, z);
            }
            for (std::size_t z = 0; z < k; ++z) q.at(i, z) /= total;
        }
        resp.q.push_back(std::move(q));
    }
    return resp;
}

void m_step_mixture(const Responsibilities& resp, const Dataset& data, MixtureModel& model) {
    if (resp.q.size() != data.lists.size())
        throw std::invalid_argument("m_step_mixture: responsibilities/data mismatch");
    const std::size_t k = model.num_communities();
    for (std::size_t l = 0; l < data.lists.size(); ++l) {
        const RankedList& list = data.lists[l];
        const Matrix& q = resp.q[l];
        double total = 0.0;
        for (std::size_t z = 0; z < k; ++z) {
            double mean = 0.0;
            for (std::size_t i = 0; i < list.size(); ++i) mean += q.at(i, z);
            mean /= static_cast<double>(list.size());
            mean = std::max(mean, kMixtureFloor);
            model.mixture.at(list.user, z) = mean;
            total += mean;
        }
        for (std::size_t z = 0; z < k; ++z) model.mixture.at(list.user, z) /= total;
    }
}

Matrix m_step_scores_grad(const MixtureModel& model, const Responsibilities& resp,
                          const Dataset& data) {
    check_model(model);
    const std::size_t k = model.num_communities();
    Matrix grad(k, model.num_items());
    for (std::size_t l = 0; l < data.lists.size(); ++l) {
        const RankedList& list = data.lists[l];
        const Matrix s = community_list_scores(model, list);
        const Matrix a = community_suffix_denoms(s);
        const Matrix& q = resp.q[l];
        for (std::size_t z = 0; z < k; ++z)
            for (std::size_t i = 0; i < list.size(); ++i) {
                const double w = q.at(i, z);
                if (w == 0.0) continue;
                grad.at(z, list.items[i]) += w;
                // softmax over the suffix at stage i
                for (std::size_t j = i; j < list.size(); ++j)
                    grad.at(z, list.items[j]) -= w * std::exp(s.at(z, j) - a.at(z, i));
            }
    }
    return grad;
}

double q_bound(const MixtureModel& model, const Responsibilities& resp, const Dataset& data) {
    check_model(model);
    const std::size_t k = model.num_communities();
    double bound = 0.0;
    for (std::size_t l = 0; l < data.lists.size(); ++l) {
        const RankedList& list = data.lists[l];
        const Matrix s = community_list_scores(model, list);
        const Matrix a = community_suffix_denoms(s);
        const Matrix& q = resp.q[l];
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t z = 0; z < k; ++z) {
                const double w = q.at(i, z);
                if (w == 0.0) continue;
                const double prior = std::max(model.mixture.at(list.user, z), kMixtureFloor);
                bound += w * (std::log(prior) + s.at(z, i) - a.at(z, i));
            }
    }
    return bound;
}

MixtureModel em_train(const Dataset& data, std::size_t k, const EmSchedule& schedule,
                      std::vector<double>* trace) {
    validate_dataset(data);
    if (k < 1) throw std::invalid_argument("em_train: k must be >= 1");
    RngStream rng(schedule.seed);

    MixtureModel model{Matrix(data.num_users, k), Matrix(k, data.num_items)};
    // Dirichlet(1) rows via normalised exponentials.
    for (std::int32_t u = 0; u < data.num_users; ++u) {
        double total = 0.0;
        for (std::size_t z = 0; z < k; ++z) {
            const double e = -std::log1p(-rng.uniform());
            model.mixture.at(u, z) = e;
            total += e;
        }
        for (std::size_t z = 0; z < k; ++z) model.mixture.at(u, z) /= total;
    }
    for (double& v : model.community_scores.data())
        v = rng.uniform(-schedule.init_scale, schedule.init_scale);

    for (int iter = 0; iter < schedule.iterations; ++iter) {
        const Responsibilities resp = e_step(model, data);
        m_step_mixture(resp, data, model);

        double bound = q_bound(model, resp, data);
        if (!std::isfinite(bound))
            throw DivergenceError("em_train: non-finite bound at iteration " +
                                  std::to_string(iter));
        for (int t = 0; t < schedule.inner_score_steps; ++t) {
            const Matrix grad = m_step_scores_grad(model, resp, data);
            double step = schedule.score_step;
            for (int h = 0; h <= schedule.max_halvings; ++h) {
                MixtureModel candidate = model;
                for (std::size_t i = 0; i < candidate.community_scores.data().size(); ++i)
                    candidate.community_scores.data()[i] += step * grad.data()[i];
                const double next = q_bound(candidate, resp, data);
                if (std::isfinite(next) && next >= bound) {
                    model = std::move(candidate);
                    bound = next;
                    break;
                }
                step *= 0.5;
            }
        }
        if (trace) trace->push_back(total_log_likelihood(model, data));
    }
    return model;
}

InsertResult insert_position(const MixtureModel& model, UserId user,
                             std::span<const ItemId> seen, ItemId item,
                             std::vector<double>* sweep_log_probs) {
    check_model(model);
    if (sweep_log_probs) sweep_log_probs->clear();
    if (std::find(seen.begin(), seen.end(), item) != seen.end())
        throw std::invalid_argument("insert_position: item " + std::to_string(item) +
                                    " already in the list");
    const std::size_t k = model.num_communities();
    const std::size_t n = seen.size();

    InsertResult result;
    std::vector<double> prior(k);
    for (std::size_t z = 0; z < k; ++z) prior[z] = model.mixture.at(user, z);
    std::vector<double> s_new(k);
    for (std::size_t z = 0; z < k; ++z) s_new[z] = model.community_scores.at(z, item);

    long long evals = 0;
    // Mixes one stage factor over communities; every per-community term is
    // one counted stage-factor evaluation.
    auto mixed = [&](auto&& log_num, auto&& log_den) {
        double f = 0.0;
        for (std::size_t z = 0; z < k; ++z) {
            f += prior[z] * std::exp(log_num(z) - log_den(z));
            ++evals;
        }
        return std::log(f);
    };

    if (n == 0) {
        // A single-item list is certain.
        const double lp = mixed([&](std::size_t) { return 0.0; },
                                [&](std::size_t) { return 0.0; });
        if (sweep_log_probs) sweep_log_probs->push_back(lp);
        return {1, lp, lp, evals};
    }

    // Suffix log-denominators of the seen list per community: b.at(z, t) =
    // log sum_{j >= t} exp(s^z_{seen[j]}).
    RankedList seen_list{user, {seen.begin(), seen.end()}};
    const Matrix s = community_list_scores(model, seen_list);
    const Matrix b = community_suffix_denoms(s);

    // Base case: the item at position 1, evaluated stage by stage.
    const double intro_first =
        mixed([&](std::size_t z) { return s_new[z]; },
              [&](std::size_t z) { return log_add_exp(b.at(z, 0), s_new[z]); });
    double logp = intro_first;
    for (std::size_t t = 0; t < n; ++t)
        logp += mixed([&](std::size_t z) { return s.at(z, t); },
                      [&](std::size_t z) { return b.at(z, t); });

    result.position = 1;
    result.log_prob = logp;
    result.intro_log_prob = intro_first;
    if (sweep_log_probs) sweep_log_probs->push_back(logp);

    // Odds recursion: moving the new item from position j to j+1 only
    // changes the two stage factors at j and j+1.
    for (std::size_t j = 1; j + 1 <= n; ++j) {
        const std::size_t t = j - 1;  // 0-based index of the seen item displaced
        const double f_old_j =
            mixed([&](std::size_t z) { return s_new[z]; },
                  [&](std::size_t z) { return log_add_exp(b.at(z, t), s_new[z]); });
        const double f_old_j1 = mixed([&](std::size_t z) { return s.at(z, t); },
                                      [&](std::size_t z) { return b.at(z, t); });
        const double f_new_j =
            mixed([&](std::size_t z) { return s.at(z, t); },
                  [&](std::size_t z) { return log_add_exp(b.at(z, t), s_new[z]); });
        const double f_new_j1 =
            mixed([&](std::size_t z) { return s_new[z]; },
                  [&](std::size_t z) { return log_add_exp(b.at(z, t + 1), s_new[z]); });
        logp += f_new_j + f_new_j1 - f_old_j - f_old_j1;
        if (sweep_log_probs) sweep_log_probs->push_back(logp);
        if (logp > result.log_prob) {
            result.log_prob = logp;
            result.position = static_cast<int>(j) + 1;
            result.intro_log_prob = f_new_j1;  // the introduction's own factor
        }
    }
    result.stage_factor_evals = evals;
    return result;
}

std::vector<ItemId> rank_unseen(const MixtureModel& model, UserId user,
                                std::span<const ItemId> seen,
                                std::span<const ItemId> candidates) {
    struct Entry {
        ItemId item;
        int position;
        double intro;
    };
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (ItemId y : candidates) {
        const InsertResult r = insert_position(model, user, seen, y);
        entries.push_back({y, r.position, r.intro_log_prob});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.position != b.position) return a.position < b.position;
        if (a.intro != b.intro) return a.intro > b.intro;
        return a.item < b.item;
    });
    std::vector<ItemId> out;
    out.reserve(entries.size());
    for (const Entry& e : entries) out.push_back(e.item);
    return out;
}

}  // namespace permrank
