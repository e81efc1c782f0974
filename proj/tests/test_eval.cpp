#include <doctest.h>

#include <cmath>
#include <set>

#include "permrank/eval.hpp"
#include "test_util.hpp"

using namespace permrank;

TEST_SUITE("eval") {

TEST_CASE("enumerate_orderings: counts, order, refusal") {
    CHECK(enumerate_orderings(std::vector<ItemId>{4}).size() == 1);
    const std::vector<ItemId> three{2, 0, 1};
    const std::vector<Ordering> all3 = enumerate_orderings(three);
    REQUIRE(all3.size() == 6);
    CHECK(all3.front() == Ordering{0, 1, 2});  // lexicographic
    CHECK(all3.back() == Ordering{2, 1, 0});

    const std::vector<ItemId> five{0, 1, 2, 3, 4};
    const std::vector<Ordering> all5 = enumerate_orderings(five);
    CHECK(all5.size() == 120);
    CHECK(std::set<Ordering>(all5.begin(), all5.end()).size() == 120);

    std::vector<ItemId> nine(9);
    for (int i = 0; i < 9; ++i) nine[i] = i;
    CHECK_THROWS_AS(enumerate_orderings(nine), std::invalid_argument);
    CHECK_THROWS_AS(enumerate_orderings(std::vector<ItemId>{1, 1}), std::invalid_argument);
}

TEST_CASE("exact_distribution: uniform cases and normalization") {
    RngStream rng(101);
    const std::vector<ItemId> items3{0, 1, 2};
    PairwiseModel zero;
    zero.num_items = 3;
    zero.gamma.assign(3, 0.0);
    const ExactDistribution uniform3 = exact_distribution(zero, 0, items3);
    for (const auto& [ordering, p] : uniform3.probabilities)
        CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

    FplModel equal{{Matrix(1, 1, 1.0), Matrix(1, 4, 0.9)}, DampingSchedule::none(), {}};
    const std::vector<ItemId> items4{0, 1, 2, 3};
    const ExactDistribution uniform4 = exact_distribution(equal, 0, items4);
    for (const auto& [ordering, p] : uniform4.probabilities)
        CHECK(p == doctest::Approx(1.0 / 24.0).epsilon(1e-12));

    // any random model sums to 1 over the full support
    MixtureModel mm{Matrix(1, 2), Matrix(2, 5)};
    mm.mixture.at(0, 0) = 0.35;
    mm.mixture.at(0, 1) = 0.65;
    for (double& v : mm.community_scores.data()) v = rng.uniform(-2.0, 2.0);
    const std::vector<ItemId> items5{0, 1, 2, 3, 4};
    double total = 0.0;
    for (const auto& [ordering, p] : exact_distribution(mm, 0, items5).probabilities)
        total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
}

TEST_CASE("kendall_tau: pinned values and symmetry") {
    const std::vector<ItemId> a{1, 2, 3};
    CHECK(kendall_tau(a, a) == 1.0);
    const std::vector<ItemId> rev{3, 2, 1};
    CHECK(kendall_tau(a, rev) == -1.0);
    const std::vector<ItemId> b{1, 3, 2};
    CHECK(kendall_tau(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(kendall_tau(b, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(kendall_tau(a, std::vector<ItemId>{1, 2, 4}), std::invalid_argument);
    CHECK_THROWS_AS(kendall_tau(std::vector<ItemId>{1}, std::vector<ItemId>{1}),
                    std::invalid_argument);

    // invariance under item relabeling
    RngStream rng(102);
    for (int t = 0; t < 50; ++t) {
        std::vector<ItemId> x{0, 1, 2, 3, 4};
        std::vector<ItemId> y = x;
        for (int i = 4; i > 0; --i) std::swap(x[i], x[rng.uniform_int(i + 1)]);
        for (int i = 4; i > 0; --i) std::swap(y[i], y[rng.uniform_int(i + 1)]);
        std::vector<ItemId> relabel{7, 13, 2, 29, 5};
        std::vector<ItemId> xr(5), yr(5);
        for (int i = 0; i < 5; ++i) {
            xr[i] = relabel[x[i]];
            yr[i] = relabel[y[i]];
        }
        CHECK(kendall_tau(x, y) == doctest::Approx(kendall_tau(xr, yr)).epsilon(1e-15));
        CHECK(kendall_tau(x, y) == doctest::Approx(kendall_tau(y, x)).epsilon(1e-15));
    }
}

TEST_CASE("ndcg_at_k: perfect, flat, reversed") {
    const std::map<ItemId, double> rel{{10, 2.0}, {11, 1.0}, {12, 0.0}};
    const std::vector<ItemId> ideal{10, 11, 12};
    CHECK(ndcg_at_k(ideal, rel, 3) == doctest::Approx(1.0).epsilon(1e-12));

    const std::map<ItemId, double> flat{{10, 1.0}, {11, 1.0}, {12, 1.0}};
    const std::vector<ItemId> any{12, 10, 11};
    CHECK(ndcg_at_k(any, flat, 3) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<ItemId> reversed{12, 11, 10};
    // dcg = 0/log2(2) + 1/log2(3) + 2/log2(4); idcg = 2 + 1/log2(3)
    const double dcg = 1.0 / std::log2(3.0) + 2.0 / 2.0;
    const double idcg = 2.0 + 1.0 / std::log2(3.0);
    CHECK(ndcg_at_k(reversed, rel, 3) == doctest::Approx(dcg / idcg).epsilon(1e-12));

    CHECK_THROWS_AS(ndcg_at_k(ideal, rel, 0), std::invalid_argument);
}

TEST_CASE("tv_distance: zero, disjoint, direct formula") {
    PairwiseModel zero;
    zero.num_items = 3;
    zero.gamma.assign(3, 0.0);
    const std::vector<ItemId> items{0, 1, 2};
    const ExactDistribution exact = exact_distribution(zero, 0, items);

    std::map<Ordering, std::uint64_t> match;
    for (const auto& [ordering, p] : exact.probabilities) match[ordering] = 10;
    CHECK(tv_distance(match, exact) == doctest::Approx(0.0).epsilon(1e-12));

    std::map<Ordering, std::uint64_t> point;
    point[Ordering{0, 1, 2}] = 50;
    // TV = 1/2 (|1 - 1/6| + 5 * 1/6) = 5/6
    CHECK(tv_distance(point, exact) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    std::map<Ordering, std::uint64_t> outside;
    outside[Ordering{0, 2, 1}] = 1;
    outside[Ordering{9, 9, 9}] = 1;
    CHECK_THROWS_AS(tv_distance(outside, exact), std::invalid_argument);
}

TEST_CASE("report rendering stays line-oriented and csv-parsable") {
    EvalReport report;
    report.users.push_back({0, 2, 1.0, 1.0, -0.7, false});
    report.users.push_back({1, 1, 0.0, 0.0, 0.0, true});
    report.evaluated_users = 1;
    report.skipped_users = 1;
    report.mean_tau = 1.0;
    report.mean_ndcg = 1.0;
    report.mean_log_likelihood = -0.7;
    report.has_log_likelihood = true;
    const std::string text = report.to_text();
    CHECK(text.find("mean kendall tau") != std::string::npos);
    const std::string csv = report.to_csv();
    CHECK(csv.find("user,held_out,tau,ndcg,log_likelihood,skipped") == 0);
    CHECK(csv.find("\n0,2,1,1,-0.7,0\n") != std::string::npos);
    CHECK(csv.find("\n1,1,,,,1\n") != std::string::npos);
}

}  // TEST_SUITE
