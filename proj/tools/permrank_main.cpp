// permrank: train, predict, evaluate, sample and synthesize collaborative
// ranking models from the command line. All commands echo their resolved
// configuration and are byte-reproducible given the same inputs and seed.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "permrank/data_io.hpp"
#include "permrank/eval.hpp"

namespace {

using namespace permrank;

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input file '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file '" + path + "'");
    return out;
}

ParsedDataset load_dataset(const std::string& path) {
    std::ifstream in = open_input(path);
    return parse_rankings(in);
}

AnyModel load_model(const std::string& path) {
    std::ifstream in = open_input(path);
    return read_model(in);
}

void store_model(const AnyModel& model, const std::string& path) {
    std::ofstream out = open_output(path);
    write_model(model, out);
    if (!out) throw IoError("failed writing model file '" + path + "'");
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ---- shared option bag -------------------------------------------------------

struct Options {
    std::string model;  // kind for train, file path elsewhere, truth path for synth
    std::string in_path;
    std::string out_path;
    std::size_t k = 5;
    double alpha = 0.01;
    double beta = 0.01;
    std::int64_t tau = 5;
    std::string damping = "none";
    std::string loss = "logistic";
    int epochs = 100;
    double step = 0.1;
    int cd_steps = 0;
    std::string structure = "none";
    std::size_t delta = 3;
    std::uint64_t seed = 0;
    double split = 0.2;
    std::size_t ndcg_k = 10;
    std::string config_path;
    // sample
    std::string user;
    long long steps = 1000;
    long long burnin = 1000;
    // synth
    std::int32_t users = 50;
    std::int32_t items = 20;
    std::size_t nmin = 5;
    std::size_t nmax = 5;
    double scale = 1.0;
};

// Flat `key = value` config support: tokens derived from the file are
// injected right after the subcommand name, so anything the user passes
// explicitly comes later and wins (every option takes its last value).
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() < 2) return args;
    std::string config_path;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file '" + config_path + "'");
    std::vector<std::string> injected;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        auto trim = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t");
            const std::size_t e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key or value");
        injected.push_back("--" + key);
        injected.push_back(value);
    }
    std::vector<std::string> out;
    out.reserve(args.size() + injected.size());
    out.push_back(args[0]);
    out.push_back(args[1]);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + 2, args.end());
    return out;
}

DampingSchedule parse_damping(const std::string& name) {
    if (name == "none") return DampingSchedule::none();
    if (name == "log") return DampingSchedule::logarithmic();
    throw std::invalid_argument("unknown damping rule '" + name + "' (use none|log)");
}

LossKind parse_loss(const std::string& name) {
    if (name == "squared") return LossKind::squared;
    if (name == "hinge") return LossKind::hinge;
    if (name == "logistic") return LossKind::logistic;
    throw std::invalid_argument("unknown loss '" + name + "' (use squared|hinge|logistic)");
}

std::optional<PseudoStructure> parse_structure(const std::string& name) {
    if (name == "none") return std::nullopt;  // contrastive divergence
    if (name == "relocation") return PseudoStructure::relocation;
    if (name == "swapping") return PseudoStructure::swapping;
    if (name == "sublist") return PseudoStructure::sublist;
    throw std::invalid_argument("unknown structure '" + name +
                                "' (use none|relocation|swapping|sublist)");
}

// ---- prediction dispatch -----------------------------------------------------

std::int32_t model_num_users(const AnyModel& model) {
    return std::visit(
        overloaded{
            [](const BaselineModel& m) { return static_cast<std::int32_t>(m.factors.num_users()); },
            [](const FplModel& m) { return static_cast<std::int32_t>(m.factors.num_users()); },
            [](const MixtureModel& m) { return static_cast<std::int32_t>(m.num_users()); },
            [](const PositionalModel& m) { return static_cast<std::int32_t>(m.factors.num_users()); },
            [](const PairwiseModel&) { return std::numeric_limits<std::int32_t>::max(); },
        },
        model);
}

std::int32_t model_num_items(const AnyModel& model) {
    return std::visit(
        overloaded{
            [](const BaselineModel& m) { return static_cast<std::int32_t>(m.factors.num_items()); },
            [](const FplModel& m) { return static_cast<std::int32_t>(m.factors.num_items()); },
            [](const MixtureModel& m) { return static_cast<std::int32_t>(m.num_items()); },
            [](const PositionalModel& m) { return static_cast<std::int32_t>(m.factors.num_items()); },
            [](const PairwiseModel& m) { return m.num_items; },
        },
        model);
}

std::vector<ItemId> rank_candidates(const AnyModel& model, UserId user,
                                    std::span<const ItemId> seen,
                                    std::span<const ItemId> candidates) {
    return std::visit(
        overloaded{
            [&](const BaselineModel& m) { return predict_sort(m.factors, user, candidates); },
            [&](const FplModel& m) { return predict_sort(m.factors, user, candidates); },
            [&](const MixtureModel& m) { return rank_unseen(m, user, seen, candidates); },
            [&](const PositionalModel& m) {
                return rank_unseen_energy(m, user, seen, candidates);
            },
            [&](const PairwiseModel& m) {
                return rank_unseen_energy(m, user, seen, candidates);
            },
        },
        model);
}

std::optional<double> heldout_log_likelihood(const AnyModel& model, UserId user,
                                             const std::vector<ItemId>& held) {
    RankedList list{user, held};
    return std::visit(
        overloaded{
            [&](const BaselineModel&) -> std::optional<double> { return std::nullopt; },
            [&](const FplModel& m) -> std::optional<double> {
                return log_likelihood(m, list);
            },
            [&](const MixtureModel& m) -> std::optional<double> {
                return log_likelihood(m, list);
            },
            [&](const auto& m) -> std::optional<double> {
                if (held.size() > 8) return std::nullopt;
                double lse = -std::numeric_limits<double>::infinity();
                for (const Ordering& ordering : enumerate_orderings(held))
                    lse = log_add_exp(lse, -energy(m, ordering, user));
                return -energy(m, held, user) - lse;
            },
        },
        model);
}

// ---- commands ------------------------------------------------------------

void echo_config(const std::string& command, const std::vector<std::string>& kv) {
    std::cout << "# config command=" << command;
    for (const std::string& entry : kv) std::cout << ' ' << entry;
    std::cout << '\n';
}

int cmd_train(const Options& opt) {
    echo_config("train",
                {"model=" + opt.model, "in=" + opt.in_path, "out=" + opt.out_path,
                 "k=" + std::to_string(opt.k), "alpha=" + fmt17(opt.alpha),
                 "beta=" + fmt17(opt.beta), "tau=" + std::to_string(opt.tau),
                 "damping=" + opt.damping, "loss=" + opt.loss,
                 "epochs=" + std::to_string(opt.epochs), "step=" + fmt17(opt.step),
                 "cd-steps=" + std::to_string(opt.cd_steps), "structure=" + opt.structure,
                 "delta=" + std::to_string(opt.delta), "seed=" + std::to_string(opt.seed)});
    const ModelKind kind = kind_from_name(opt.model);
    const ParsedDataset parsed = load_dataset(opt.in_path);
    const RegWeights reg{opt.alpha, opt.beta};
    const GdSchedule gd{opt.epochs, opt.step, true, 60, 0.01, opt.seed};
    const std::optional<PseudoStructure> structure = parse_structure(opt.structure);

    std::vector<double> trace;
    AnyModel model = BaselineModel{};
    switch (kind) {
        case ModelKind::pairwise_baseline:
            model = BaselineModel{
                train_pairwise(parsed.data, opt.k, parse_loss(opt.loss), reg, gd, &trace)};
            break;
        case ModelKind::factored_pl:
            model = train_fpl(parsed.data, opt.k, parse_damping(opt.damping), reg, gd, &trace);
            break;
        case ModelKind::latent_pl: {
            EmSchedule em;
            em.iterations = opt.epochs;
            em.score_step = opt.step;
            em.seed = opt.seed;
            model = em_train(parsed.data, opt.k, em, &trace);
            break;
        }
        case ModelKind::loglin_positional:
            if (structure) {
                model = pl_train_positional(parsed.data, opt.k, *structure, opt.delta, gd,
                                            &trace);
            } else {
                CdSchedule cd{opt.epochs, opt.step, opt.cd_steps, 0.01, opt.seed};
                model = cd_train_positional(parsed.data, opt.k, cd, &trace);
            }
            break;
        case ModelKind::loglin_pairwise:
            if (structure) {
                model = pl_train_pairwise(parsed.data, opt.tau, *structure, opt.delta, gd,
                                          &trace);
            } else {
                CdSchedule cd{opt.epochs, opt.step, opt.cd_steps, 0.01, opt.seed};
                model = cd_train_pairwise(parsed.data, opt.tau, cd, &trace);
            }
            break;
    }
    store_model(model, opt.out_path);
    std::ofstream tf = open_output(opt.out_path + ".trace");
    for (std::size_t i = 0; i < trace.size(); ++i)
        tf << i << '\t' << fmt17(trace[i]) << '\n';
    if (!tf) throw IoError("failed writing trace file");
    return 0;
}

int cmd_predict(const Options& opt) {
    echo_config("predict", {"model=" + opt.model, "in=" + opt.in_path,
                            "out=" + (opt.out_path.empty() ? "-" : opt.out_path)});
    const AnyModel model = load_model(opt.model);
    const ParsedDataset parsed = load_dataset(opt.in_path);
    if (model_num_items(model) != parsed.data.num_items)
        throw std::invalid_argument(
            "item universe mismatch: model has " + std::to_string(model_num_items(model)) +
            " items, dataset has " + std::to_string(parsed.data.num_items));

    std::ostringstream body;
    for (const RankedList& list : parsed.data.lists) {
        if (list.user >= model_num_users(model))
            throw std::invalid_argument("unknown user " + parsed.users.token(list.user));
        std::vector<char> seen(parsed.data.num_items, 0);
        for (ItemId y : list.items) seen[y] = 1;
        std::vector<ItemId> candidates;
        for (std::int32_t y = 0; y < parsed.data.num_items; ++y)
            if (!seen[y]) candidates.push_back(y);
        if (candidates.empty()) continue;  // nothing unseen to rank
        const std::vector<ItemId> ranked =
            rank_candidates(model, list.user, list.items, candidates);
        body << parsed.users.token(list.user) << '\t';
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (i) body << ',';
            body << parsed.items.token(ranked[i]);
        }
        body << '\n';
    }
    if (opt.out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out = open_output(opt.out_path);
        out << body.str();
        if (!out) throw IoError("failed writing predictions");
    }
    return 0;
}

int cmd_evaluate(const Options& opt) {
    echo_config("evaluate",
                {"model=" + opt.model, "in=" + opt.in_path,
                 "out=" + (opt.out_path.empty() ? "-" : opt.out_path),
                 "split=" + fmt17(opt.split), "ndcg-k=" + std::to_string(opt.ndcg_k)});
    if (!(opt.split > 0.0 && opt.split < 1.0))
        throw std::invalid_argument("--split must lie in (0, 1)");
    const AnyModel model = load_model(opt.model);
    const ParsedDataset parsed = load_dataset(opt.in_path);
    if (model_num_items(model) != parsed.data.num_items)
        throw std::invalid_argument("item universe mismatch between model and dataset");

    EvalReport report;
    double sum_tau = 0.0, sum_ndcg = 0.0, sum_ll = 0.0;
    std::size_t ll_users = 0;
    for (const RankedList& list : parsed.data.lists) {
        if (list.user >= model_num_users(model))
            throw std::invalid_argument("unknown user " + parsed.users.token(list.user));
        const std::size_t n = list.size();
        const std::size_t n_held =
            static_cast<std::size_t>(std::ceil(opt.split * static_cast<double>(n)));
        UserEval ue;
        ue.user = list.user;
        ue.held_out = n_held;
        if (n_held < 2 || n_held > n) {
            // tau needs at least two held-out items
            ue.skipped = true;
            report.users.push_back(ue);
            ++report.skipped_users;
            std::cerr << "warning: user " << parsed.users.token(list.user)
                      << " skipped (holdout too small to rank)\n";
            continue;
        }
        const std::vector<ItemId> seen(list.items.begin(),
                                       list.items.end() - static_cast<std::ptrdiff_t>(n_held));
        const std::vector<ItemId> held(list.items.end() - static_cast<std::ptrdiff_t>(n_held),
                                       list.items.end());
        std::vector<ItemId> candidates = held;
        std::sort(candidates.begin(), candidates.end());
        const std::vector<ItemId> predicted =
            rank_candidates(model, list.user, seen, candidates);
        ue.tau = kendall_tau(predicted, held);
        std::map<ItemId, double> relevance;
        for (std::size_t p = 0; p < held.size(); ++p)
            relevance[held[p]] = static_cast<double>(n_held - 1 - p);
        ue.ndcg = ndcg_at_k(predicted, relevance, opt.ndcg_k);
        const std::optional<double> ll = heldout_log_likelihood(model, list.user, held);
        ue.log_likelihood = ll ? *ll : std::numeric_limits<double>::quiet_NaN();
        if (ll) {
            sum_ll += *ll;
            ++ll_users;
        }
        sum_tau += ue.tau;
        sum_ndcg += ue.ndcg;
        ++report.evaluated_users;
        report.users.push_back(ue);
    }
    if (report.evaluated_users > 0) {
        report.mean_tau = sum_tau / static_cast<double>(report.evaluated_users);
        report.mean_ndcg = sum_ndcg / static_cast<double>(report.evaluated_users);
    }
    if (ll_users > 0) {
        report.has_log_likelihood = true;
        report.mean_log_likelihood = sum_ll / static_cast<double>(ll_users);
    }
    std::cout << report.to_text();
    if (!opt.out_path.empty()) {
        std::ofstream out = open_output(opt.out_path);
        out << report.to_csv();
        if (!out) throw IoError("failed writing evaluation report");
    }
    return 0;
}

int cmd_sample(const Options& opt) {
    echo_config("sample", {"model=" + opt.model, "in=" + opt.in_path,
                           "out=" + (opt.out_path.empty() ? "-" : opt.out_path),
                           "user=" + opt.user, "steps=" + std::to_string(opt.steps),
                           "burnin=" + std::to_string(opt.burnin),
                           "seed=" + std::to_string(opt.seed)});
    const AnyModel model = load_model(opt.model);
    const ModelKind kind = kind_of(model);
    if (kind != ModelKind::loglin_positional && kind != ModelKind::loglin_pairwise)
        throw std::invalid_argument(
            "sample requires a log-linear model; the choice models are sampled directly by "
            "synth");
    const ParsedDataset parsed = load_dataset(opt.in_path);
    const auto uid = parsed.users.find(opt.user);
    if (!uid) throw std::invalid_argument("unknown user " + opt.user);
    const RankedList* list = nullptr;
    for (const RankedList& l : parsed.data.lists)
        if (l.user == *uid) list = &l;
    if (!list) throw std::invalid_argument("user " + opt.user + " has no ranked list");
    if (list->size() < 2 && opt.steps + opt.burnin > 0)
        throw std::invalid_argument("list of user " + opt.user + " is too short to permute");

    std::ostringstream body;
    RngStream rng(opt.seed);
    const MoveProposal proposal{};  // default 70/20/10 mix
    auto run_chain = [&](const auto& m) {
        ChainState state = make_chain(m, *uid, list->items);
        for (long long t = 0; t < opt.burnin; ++t) metropolis_step(m, state, proposal, rng);
        auto emit = [&]() {
            for (std::size_t i = 0; i < state.perm.size(); ++i) {
                if (i) body << ',';
                body << parsed.items.token(state.perm[i]);
            }
            body << '\n';
        };
        emit();  // state after burn-in
        for (long long t = 0; t < opt.steps; ++t) {
            metropolis_step(m, state, proposal, rng);
            emit();
        }
        const double rate = state.proposed == 0
                                ? 0.0
                                : static_cast<double>(state.accepted) /
                                      static_cast<double>(state.proposed);
        body << "# accepted " << state.accepted << " proposed " << state.proposed << " rate "
             << fmt17(rate) << '\n';
    };
    if (kind == ModelKind::loglin_positional)
        run_chain(std::get<PositionalModel>(model));
    else
        run_chain(std::get<PairwiseModel>(model));

    if (opt.out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out = open_output(opt.out_path);
        out << body.str();
        if (!out) throw IoError("failed writing samples");
    }
    return 0;
}

int cmd_synth(const Options& opt) {
    echo_config("synth",
                {"users=" + std::to_string(opt.users), "items=" + std::to_string(opt.items),
                 "k=" + std::to_string(opt.k), "nmin=" + std::to_string(opt.nmin),
                 "nmax=" + std::to_string(opt.nmax), "scale=" + fmt17(opt.scale),
                 "seed=" + std::to_string(opt.seed), "out=" + opt.out_path,
                 "model=" + opt.model});
    SynthSpec spec;
    spec.num_users = opt.users;
    spec.num_items = opt.items;
    spec.k = opt.k;
    spec.n_min = opt.nmin;
    spec.n_max = opt.nmax;
    spec.score_scale = opt.scale;
    spec.seed = opt.seed;
    const SynthResult result = generate_synthetic(spec);

    std::ofstream out = open_output(opt.out_path);
    serialize_dataset(result.data, IdMap::numeric(result.data.num_users),
                      IdMap::numeric(result.data.num_items), out);
    if (!out) throw IoError("failed writing dataset");
    store_model(FplModel{result.truth, DampingSchedule::none(), RegWeights{0.0, 0.0}},
                opt.model);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"permutation models for collaborative ranking"};
    app.require_subcommand(1);
    Options opt;

    CLI::App* train = app.add_subcommand("train", "fit a model to a rankings file");
    train->add_option("--model", opt.model,
                      "model kind: pairwise-baseline|factored-pl|latent-pl|"
                      "loglin-positional|loglin-pairwise")
        ->required()->take_last();
    train->add_option("--in", opt.in_path, "training rankings file")->required()->take_last();
    train->add_option("--out", opt.out_path, "output model file")->required()->take_last();
    train->add_option("--k", opt.k, "latent dimension")->capture_default_str()->take_last();
    train->add_option("--alpha", opt.alpha, "W penalty")->capture_default_str()->take_last();
    train->add_option("--beta", opt.beta, "H penalty")->capture_default_str()->take_last();
    train->add_option("--tau", opt.tau, "pair co-occurrence threshold")->capture_default_str()->take_last();
    train->add_option("--damping", opt.damping, "damping rule: none|log")
        ->capture_default_str()->take_last();
    train->add_option("--loss", opt.loss, "pairwise loss: squared|hinge|logistic")
        ->capture_default_str()->take_last();
    train->add_option("--epochs", opt.epochs, "training epochs / EM iterations")
        ->capture_default_str()->take_last();
    train->add_option("--step", opt.step, "step size / CD learning rate")
        ->capture_default_str()->take_last();
    train->add_option("--cd-steps", opt.cd_steps, "CD chain length (0: list length)")
        ->capture_default_str()->take_last();
    train->add_option("--structure", opt.structure,
                      "log-linear trainer: none (CD)|relocation|swapping|sublist")
        ->capture_default_str()->take_last();
    train->add_option("--delta", opt.delta, "sublist width")->capture_default_str()->take_last();
    train->add_option("--seed", opt.seed, "RNG seed")->capture_default_str()->take_last();
    train->add_option("--config", opt.config_path, "flat key=value config file")
        ->take_last();

    CLI::App* predict = app.add_subcommand("predict", "rank unseen items per user");
    predict->add_option("--model", opt.model, "model file")->required()->take_last();
    predict->add_option("--in", opt.in_path, "rankings file with the seen lists")->required()->take_last();
    predict->add_option("--out", opt.out_path, "output file (default stdout)")->take_last();
    predict->add_option("--config", opt.config_path, "flat key=value config file")
        ->take_last();

    CLI::App* evaluate = app.add_subcommand("evaluate", "tail-holdout evaluation");
    evaluate->add_option("--model", opt.model, "model file")->required()->take_last();
    evaluate->add_option("--in", opt.in_path, "rankings file")->required()->take_last();
    evaluate->add_option("--out", opt.out_path,
                         "CSV report file (text goes to stdout)")->take_last();
    evaluate->add_option("--split", opt.split, "held-out fraction of each list, in (0,1)")
        ->capture_default_str()->take_last();
    evaluate->add_option("--ndcg-k", opt.ndcg_k, "NDCG cutoff")->capture_default_str()->take_last();
    evaluate->add_option("--config", opt.config_path, "flat key=value config file")
        ->take_last();

    CLI::App* sample = app.add_subcommand("sample", "Metropolis chain over one user's list");
    sample->add_option("--model", opt.model, "log-linear model file")->required()->take_last();
    sample->add_option("--in", opt.in_path, "rankings file with the user's list")->required()->take_last();
    sample->add_option("--user", opt.user, "user id token")->required()->take_last();
    sample->add_option("--out", opt.out_path, "output file (default stdout)")->take_last();
    sample->add_option("--steps", opt.steps, "retained steps")->capture_default_str()->take_last();
    sample->add_option("--burnin", opt.burnin, "burn-in steps")->capture_default_str()->take_last();
    sample->add_option("--seed", opt.seed, "RNG seed")->capture_default_str()->take_last();
    sample->add_option("--config", opt.config_path, "flat key=value config file")
        ->take_last();

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--users", opt.users, "number of users")->capture_default_str()->take_last();
    synth->add_option("--items", opt.items, "number of items")->capture_default_str()->take_last();
    synth->add_option("--k", opt.k, "latent dimension")->capture_default_str()->take_last();
    synth->add_option("--nmin", opt.nmin, "minimum list length")->capture_default_str()->take_last();
    synth->add_option("--nmax", opt.nmax, "maximum list length")->capture_default_str()->take_last();
    synth->add_option("--scale", opt.scale, "score scale")->capture_default_str()->take_last();
    synth->add_option("--seed", opt.seed, "RNG seed")->capture_default_str()->take_last();
    synth->add_option("--out", opt.out_path, "output dataset file")->required()->take_last();
    synth->add_option("--model", opt.model, "output ground-truth model file")->required()->take_last();
    synth->add_option("--config", opt.config_path, "flat key=value config file")
        ->take_last();

    try {
        std::vector<std::string> expanded = expand_config_args(argc, argv);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        reversed.pop_back();  // drop the program name (CLI11 wants reversed args)
        app.parse(std::move(reversed));
        if (train->parsed()) return cmd_train(opt);
        if (predict->parsed()) return cmd_predict(opt);
        if (evaluate->parsed()) return cmd_evaluate(opt);
        if (sample->parsed()) return cmd_sample(opt);
        if (synth->parsed()) return cmd_synth(opt);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
