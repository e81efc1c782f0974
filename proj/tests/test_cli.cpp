#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "permrank/data_io.hpp"
#include "permrank/pairwise.hpp"

namespace fs = std::filesystem;
using namespace permrank;

namespace {

const std::string kCli = PERMRANK_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

// Runs the CLI with stdout captured into a file; stderr is left visible for
// debugging failed tests.
RunResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out_file = dir / "stdout.txt";
    const std::string cmd = kCli + " " + args + " > " + out_file.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(out_file);
    std::stringstream buf;
    buf << in.rdbuf();
    r.out = buf.str();
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth: deterministic artifacts that re-parse cleanly") {
    const fs::path dir = fresh_dir("synth");
    const std::string base =
        "synth --users 6 --items 8 --k 2 --nmin 3 --nmax 5 --scale 1.2 --seed 17";
    const RunResult a =
        run_cli(dir, base + " --out " + (dir / "a.tsv").string() + " --model " +
                         (dir / "a.model").string());
    CHECK(a.exit_code == 0);
    CHECK(a.out.find("# config command=synth") == 0);
    const RunResult b =
        run_cli(dir, base + " --out " + (dir / "b.tsv").string() + " --model " +
                         (dir / "b.model").string());
    CHECK(b.exit_code == 0);
    CHECK(slurp(dir / "a.tsv") == slurp(dir / "b.tsv"));
    CHECK(slurp(dir / "a.model") == slurp(dir / "b.model"));

    // generated dataset passes parsing and validation, universe preserved
    std::ifstream in(dir / "a.tsv");
    const ParsedDataset parsed = parse_rankings(in);
    CHECK(parsed.data.num_users == 6);
    CHECK(parsed.data.num_items == 8);
    CHECK(parsed.data.lists.size() == 6);

    // two users, one item each: two singleton records
    const RunResult tiny =
        run_cli(dir, "synth --users 2 --items 3 --k 1 --nmin 1 --nmax 1 --seed 2 --out " +
                         (dir / "tiny.tsv").string() + " --model " +
                         (dir / "tiny.model").string());
    REQUIRE(tiny.exit_code == 0);
    std::ifstream tin(dir / "tiny.tsv");
    const ParsedDataset tparsed = parse_rankings(tin);
    REQUIRE(tparsed.data.lists.size() == 2);
    for (const RankedList& list : tparsed.data.lists) CHECK(list.size() == 1);
}

TEST_CASE("train: zero epochs writes the initialisation; reruns are byte-identical") {
    const fs::path dir = fresh_dir("train0");
    run_cli(dir, "synth --users 5 --items 7 --k 2 --nmin 3 --nmax 4 --seed 3 --out " +
                     (dir / "data.tsv").string() + " --model " + (dir / "truth.model").string());
    for (const std::string kind :
         {"pairwise-baseline", "factored-pl", "latent-pl", "loglin-positional",
          "loglin-pairwise"}) {
        // identical resolved config run twice: byte-identical outputs
        const std::string args = "train --model " + kind + " --in " +
                                 (dir / "data.tsv").string() + " --k 2 --epochs 0 --seed 5" +
                                 " --out " + (dir / (kind + ".model")).string();
        const RunResult a = run_cli(dir, args);
        REQUIRE(a.exit_code == 0);
        const std::string first = slurp(dir / (kind + ".model"));
        const RunResult b = run_cli(dir, args);
        REQUIRE(b.exit_code == 0);
        CHECK(first == slurp(dir / (kind + ".model")));
        CHECK(a.out == b.out);
        // trace exists and is empty at zero epochs
        CHECK(slurp(dir / (kind + ".model.trace")).empty());
    }
}

TEST_CASE("train + evaluate: latent-pl trace column is non-decreasing") {
    const fs::path dir = fresh_dir("train_latent");
    run_cli(dir, "synth --users 20 --items 10 --k 2 --nmin 4 --nmax 6 --scale 1.4 --seed 8 "
                 "--out " + (dir / "data.tsv").string() + " --model " +
                     (dir / "truth.model").string());
    const RunResult r =
        run_cli(dir, "train --model latent-pl --in " + (dir / "data.tsv").string() +
                         " --k 2 --epochs 12 --step 0.5 --seed 1 --out " +
                         (dir / "m.model").string());
    REQUIRE(r.exit_code == 0);
    std::istringstream trace(slurp(dir / "m.model.trace"));
    std::string line;
    double prev = -1e300;
    int rows = 0;
    while (std::getline(trace, line)) {
        std::istringstream fields(line);
        int epoch = 0;
        double value = 0.0;
        REQUIRE((fields >> epoch >> value));
        CHECK(epoch == rows);
        CHECK(value >= prev - 1e-8);
        prev = value;
        ++rows;
    }
    CHECK(rows == 12);
}

TEST_CASE("predict: factored-pl ranks the complement; empty candidate set") {
    const fs::path dir = fresh_dir("predict");
    // two users; user 1 has ranked every item, so there is nothing to predict
    spit(dir / "data.tsv", "# permrank 2 3\n0\t2\n1\t0,2,1\n");
    // hand-written model: k=1, scores H = [0.1, 2.0, -1.0], W = [1; 1]
    spit(dir / "m.model",
         "PERMRANK-MODEL 1 factored-pl\n2 3 1 none 0 0\n1\n1\n0.1 2 -1\n");
    const RunResult r = run_cli(dir, "predict --model " + (dir / "m.model").string() +
                                         " --in " + (dir / "data.tsv").string() + " --out " +
                                         (dir / "pred.tsv").string());
    REQUIRE(r.exit_code == 0);
    // user 0: candidates {0, 1} sorted by score desc -> 1, 0; user 1: no line
    CHECK(slurp(dir / "pred.tsv") == "0\t1,0\n");
}

TEST_CASE("predict: latent-pl k=1 agrees with factored-pl on the same scores") {
    const fs::path dir = fresh_dir("predict_k1");
    run_cli(dir, "synth --users 8 --items 12 --k 2 --nmin 4 --nmax 7 --scale 1.3 --seed 21 "
                 "--out " + (dir / "data.tsv").string() + " --model " +
                     (dir / "truth.model").string());
    // craft the two models with identical scores from one RNG
    RngStream rng(77);
    Matrix scores(1, 12);
    for (double& v : scores.data()) v = rng.uniform(-2.0, 2.0);
    {
        std::ofstream latent(dir / "latent.model");
        MixtureModel mm{Matrix(8, 1, 1.0), scores};
        write_model(AnyModel{mm}, latent);
        std::ofstream factored(dir / "factored.model");
        FplModel fm{{Matrix(8, 1, 1.0), scores}, DampingSchedule::none(), {}};
        write_model(AnyModel{fm}, factored);
    }
    const RunResult a = run_cli(dir, "predict --model " + (dir / "latent.model").string() +
                                         " --in " + (dir / "data.tsv").string() + " --out " +
                                         (dir / "latent.out").string());
    const RunResult b = run_cli(dir, "predict --model " + (dir / "factored.model").string() +
                                         " --in " + (dir / "data.tsv").string() + " --out " +
                                         (dir / "factored.out").string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "latent.out") == slurp(dir / "factored.out"));
}

TEST_CASE("predict: unknown user exits 1 and names the user") {
    const fs::path dir = fresh_dir("predict_unknown");
    spit(dir / "data.tsv", "# permrank 9 3\n7\t0,1\n");
    spit(dir / "m.model", "PERMRANK-MODEL 1 factored-pl\n2 3 1 none 0 0\n1\n1\n0.1 2 -1\n");
    const RunResult r = run_cli(dir, "predict --model " + (dir / "m.model").string() +
                                         " --in " + (dir / "data.tsv").string());
    CHECK(r.exit_code == 1);
}

TEST_CASE("evaluate: perfect model scores tau 1 and ndcg 1; short lists skipped") {
    const fs::path dir = fresh_dir("evaluate");
    // user 0 ranks 0 > 1 > 2 > 3; a model with matching scores is perfect.
    // user 1 has 2 items: split 0.5 holds out one -> skipped.
    spit(dir / "data.tsv", "# permrank 2 4\n0\t0,1,2,3\n1\t2,3\n");
    spit(dir / "m.model",
         "PERMRANK-MODEL 1 factored-pl\n2 4 1 none 0 0\n1\n1\n3 2 1 0\n");
    const RunResult r = run_cli(dir, "evaluate --model " + (dir / "m.model").string() +
                                         " --in " + (dir / "data.tsv").string() +
                                         " --split 0.5 --ndcg-k 3 --out " +
                                         (dir / "report.csv").string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("mean kendall tau: 1") != std::string::npos);
    CHECK(r.out.find("mean ndcg:        1") != std::string::npos);
    CHECK(r.out.find("skipped users:   1") != std::string::npos);
    const std::string csv = slurp(dir / "report.csv");
    CHECK(csv.find("0,2,1,1,") != std::string::npos);
    CHECK(csv.find("1,1,,,,1") != std::string::npos);
}

TEST_CASE("evaluate: a random-score model hovers near tau 0 on many users") {
    const fs::path dir = fresh_dir("evaluate_null");
    run_cli(dir, "synth --users 250 --items 20 --k 3 --nmin 8 --nmax 8 --scale 1.5 --seed 33 "
                 "--out " + (dir / "data.tsv").string() + " --model " +
                     (dir / "truth.model").string());
    // an untrained (0-epoch) model is random with respect to the data
    run_cli(dir, "train --model factored-pl --in " + (dir / "data.tsv").string() +
                     " --k 3 --epochs 0 --seed 99 --out " + (dir / "rand.model").string());
    const RunResult r = run_cli(dir, "evaluate --model " + (dir / "rand.model").string() +
                                         " --in " + (dir / "data.tsv").string() +
                                         " --split 0.5 --ndcg-k 4");
    REQUIRE(r.exit_code == 0);
    const std::size_t pos = r.out.find("mean kendall tau: ");
    REQUIRE(pos != std::string::npos);
    const double tau = std::stod(r.out.substr(pos + 18));
    CHECK(std::abs(tau) <= 0.1);
}

TEST_CASE("sample: PL models refuse; log-linear chains are reproducible") {
    const fs::path dir = fresh_dir("sample");
    spit(dir / "data.tsv", "# permrank 1 4\n0\t0,1,2,3\n");
    spit(dir / "fpl.model", "PERMRANK-MODEL 1 factored-pl\n1 4 1 none 0 0\n1\n0 0 0 0\n");
    const RunResult refuse = run_cli(dir, "sample --model " + (dir / "fpl.model").string() +
                                              " --in " + (dir / "data.tsv").string() +
                                              " --user 0 --steps 5 --burnin 0");
    CHECK(refuse.exit_code == 1);

    spit(dir / "pw.model", "PERMRANK-MODEL 1 loglin-pairwise\n4 0 1\n0 0 0 0\n");
    const std::string args = "sample --model " + (dir / "pw.model").string() + " --in " +
                             (dir / "data.tsv").string() +
                             " --user 0 --steps 40 --burnin 10 --seed 6";
    const RunResult a = run_cli(dir, args + " --out " + (dir / "a.samples").string());
    const RunResult b = run_cli(dir, args + " --out " + (dir / "b.samples").string());
    REQUIRE(a.exit_code == 0);
    CHECK(slurp(dir / "a.samples") == slurp(dir / "b.samples"));
    // 1 initial line + 40 samples + acceptance summary
    std::istringstream lines(slurp(dir / "a.samples"));
    std::string line;
    int count = 0;
    std::string last;
    while (std::getline(lines, line)) {
        last = line;
        ++count;
    }
    CHECK(count == 42);
    CHECK(last.find("# accepted") == 0);

    const RunResult zero = run_cli(dir, "sample --model " + (dir / "pw.model").string() +
                                            " --in " + (dir / "data.tsv").string() +
                                            " --user 0 --steps 0 --burnin 0 --seed 6 --out " +
                                            (dir / "zero.samples").string());
    REQUIRE(zero.exit_code == 0);
    const std::string text = slurp(dir / "zero.samples");
    CHECK(text == "0,1,2,3\n# accepted 0 proposed 0 rate 0\n");

    const RunResult missing = run_cli(dir, "sample --model " + (dir / "pw.model").string() +
                                               " --in " + (dir / "data.tsv").string() +
                                               " --user 9 --steps 1 --burnin 0");
    CHECK(missing.exit_code == 1);
}

TEST_CASE("sample: zero-parameter chain is near-uniform over 3! orders") {
    const fs::path dir = fresh_dir("sample_uniform");
    spit(dir / "data.tsv", "# permrank 1 3\n0\t0,1,2\n");
    spit(dir / "pw.model", "PERMRANK-MODEL 1 loglin-pairwise\n3 0 1\n0 0 0\n");
    const RunResult r = run_cli(dir, "sample --model " + (dir / "pw.model").string() +
                                         " --in " + (dir / "data.tsv").string() +
                                         " --user 0 --steps 30000 --burnin 2000 --seed 5 "
                                         "--out " + (dir / "s.txt").string());
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(slurp(dir / "s.txt"));
    std::string line;
    std::map<std::string, int> counts;
    int total = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        ++counts[line];
        ++total;
    }
    REQUIRE(counts.size() == 6);
    double tv = 0.0;
    for (const auto& [order, count] : counts)
        tv += std::abs(count / static_cast<double>(total) - 1.0 / 6.0);
    CHECK(tv / 2.0 < 0.05);
}

TEST_CASE("config file supplies defaults that flags override") {
    const fs::path dir = fresh_dir("config");
    spit(dir / "synth.cfg",
         "users = 4\nitems = 6\nk = 2\nnmin = 2\nnmax = 3\nseed = 12\n");
    const RunResult a =
        run_cli(dir, "synth --config " + (dir / "synth.cfg").string() + " --out " +
                         (dir / "a.tsv").string() + " --model " + (dir / "a.model").string());
    REQUIRE(a.exit_code == 0);
    CHECK(a.out.find("users=4") != std::string::npos);
    const RunResult b =
        run_cli(dir, "synth --config " + (dir / "synth.cfg").string() + " --seed 13 --out " +
                         (dir / "b.tsv").string() + " --model " + (dir / "b.model").string());
    REQUIRE(b.exit_code == 0);
    CHECK(b.out.find("seed=13") != std::string::npos);
    CHECK(slurp(dir / "a.tsv") != slurp(dir / "b.tsv"));
}

TEST_CASE("exit codes: bad input 1, divergence 2, io 3") {
    const fs::path dir = fresh_dir("exit_codes");
    spit(dir / "bad.tsv", "0\t1,1\n");
    const RunResult parse_fail =
        run_cli(dir, "train --model factored-pl --in " + (dir / "bad.tsv").string() +
                         " --out " + (dir / "x.model").string());
    CHECK(parse_fail.exit_code == 1);

    const RunResult io_fail = run_cli(dir, "train --model factored-pl --in " +
                                               (dir / "missing.tsv").string() + " --out " +
                                               (dir / "x.model").string());
    CHECK(io_fail.exit_code == 3);

    const RunResult bad_kind = run_cli(dir, "train --model no-such-kind --in " +
                                                (dir / "bad.tsv").string() + " --out " +
                                                (dir / "x.model").string());
    CHECK(bad_kind.exit_code == 1);

    // CD with an absurd learning rate overflows the parameters
    spit(dir / "ok.tsv", "0\t0,1,2\n1\t2,0,3\n2\t1,3,0\n");
    const RunResult diverged =
        run_cli(dir, "train --model loglin-positional --in " + (dir / "ok.tsv").string() +
                         " --k 2 --epochs 40 --step 1e250 --seed 1 --out " +
                         (dir / "x.model").string());
    CHECK(diverged.exit_code == 2);
}

TEST_CASE("train with zero epochs writes exactly the serialized initialisation") {
    const fs::path dir = fresh_dir("train_init");
    spit(dir / "data.tsv", "# permrank 3 5\n0\t1,4\n1\t0,2,3\n2\t4,0\n");
    const RunResult r =
        run_cli(dir, "train --model factored-pl --in " + (dir / "data.tsv").string() +
                         " --k 2 --alpha 0.25 --beta 0.5 --damping log --epochs 0 --seed 21"
                         " --out " + (dir / "m.model").string());
    REQUIRE(r.exit_code == 0);
    RngStream rng(21);
    const FplModel expect{init_factors(3, 5, 2, 0.01, rng), DampingSchedule::logarithmic(),
                          RegWeights{0.25, 0.5}};
    std::ostringstream serialized;
    write_model(AnyModel{expect}, serialized);
    CHECK(slurp(dir / "m.model") == serialized.str());
}

}  // TEST_SUITE
