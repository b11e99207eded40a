#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "hwcost/cli.hpp"
#include "hwcost/util.hpp"
#include "reference.hpp"

using namespace hwcost;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("hwcost_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

bool is_number(const std::string& s) {
    try {
        parse_double(s);
        return true;
    } catch (...) {
        return false;
    }
}

const std::vector<std::string> kSmallModel{"--embed-dim", "8",        "--conv-channels", "8", "--fc-sizes",
                                           "16,8,1",      "--max-len", "48",              "--epochs", "2",
                                           "--quiet"};

}  // namespace

TEST_CASE("usage errors") {
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"gen-data", "--out", "x.csv", "--bogus"}).code == cli::kUsage);
    CHECK(run({"gen-data"}).code == cli::kUsage);
    auto help = run({"train", "--help"});
    CHECK(help.code == cli::kOk);
    CHECK(help.out.find("--arch") != std::string::npos);
    for (const char* sub : {"gen-data", "augment", "split", "build-vocab", "tokenize", "train", "eval", "compare",
                            "predict", "oracle"})
        CHECK(run({sub, "--help"}).code == cli::kOk);
}

TEST_CASE("oracle subcommand prints numbers only") {
    TempDir dir;
    write_file(dir / "f.mlir", ref::kFig2);
    auto r = run({"oracle", "--ir", dir / "f.mlir"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out == "3072\n1\n");

    write_file(dir / "m.cfg", "register_width_bytes = 128\n");
    r = run({"oracle", "--ir", dir / "f.mlir", "--machine-config", dir / "m.cfg"});
    CHECK(r.out == "1536\n1\n");

    write_file(dir / "bad.mlir", "func @broken(");
    r = run({"oracle", "--ir", dir / "bad.mlir"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.out.empty());
    CHECK_FALSE(r.err.empty());
    CHECK(run({"oracle", "--ir", dir / "missing.mlir"}).code == cli::kDataError);
}

TEST_CASE("end-to-end pipeline") {
    TempDir dir;
    auto r = run({"gen-data", "--out", dir / "d.csv", "--n", "60", "--seed", "3", "--op-max", "15"});
    REQUIRE(r.code == cli::kOk);
    r = run({"augment", "--data", dir / "d.csv", "--out", dir / "a.csv", "--factor", "2"});
    REQUIRE(r.code == cli::kOk);
    r = run({"split", "--data", dir / "a.csv", "--train-out", dir / "tr.csv", "--val-out", dir / "va.csv",
             "--test-out", dir / "te.csv"});
    REQUIRE(r.code == cli::kOk);
    r = run({"build-vocab", "--data", dir / "a.csv", "--mode", "ops-only", "--min-freq", "1", "--out", dir / "v.txt"});
    REQUIRE(r.code == cli::kOk);

    write_file(dir / "f.mlir", ref::kFig2);
    r = run({"tokenize", "--ir", dir / "f.mlir", "--vocab", dir / "v.txt", "--max-len", "12"});
    REQUIRE(r.code == cli::kOk);
    CHECK(split(trim(r.out), ' ').size() == 12);

    std::vector<std::string> train{"train",  "--data", dir / "tr.csv", "--val-data", dir / "va.csv", "--vocab",
                                   dir / "v.txt", "--arch", "convstack", "--target", "register-pressure",
                                   "--out", dir / "m.ckpt", "--history", dir / "h.txt"};
    train.insert(train.end(), kSmallModel.begin(), kSmallModel.end());
    r = run(train);
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.empty());
    CHECK(split(trim(read_file(dir / "h.txt")), '\n').size() <= 2);

    r = run({"eval", "--model", dir / "m.ckpt", "--data", dir / "te.csv", "--report", dir / "report.txt"});
    REQUIRE(r.code == cli::kOk);
    auto report = KeyValueMap::parse(read_file(dir / "report.txt"));
    CHECK(report.contains("rmse_pct_of_range"));
    CHECK(report.get("target_kind") == "RegisterPressure");
    CHECK(r.out == read_file(dir / "report.txt"));

    r = run({"predict", "--model", dir / "m.ckpt", "--ir", dir / "f.mlir"});
    REQUIRE(r.code == cli::kOk);
    auto lines = split(r.out, '\n');
    REQUIRE(lines.size() == 2);
    CHECK(is_number(lines[0]));
    CHECK(lines[1].empty());

    write_file(dir / "c.mlir", ref::kCopy);
    write_file(dir / "list.txt", (dir / "f.mlir") + "\n" + (dir / "c.mlir") + "\n");
    r = run({"predict", "--model", dir / "m.ckpt", "--ir-list", dir / "list.txt", "--ir", dir / "c.mlir"});
    REQUIRE(r.code == cli::kOk);
    CHECK(split(trim(r.out), '\n').size() == 3);

    write_file(dir / "bad.mlir", "func @g(%arg0: tensor<4xf32>) -> (tensor<4xf32>) {\n  return %9\n}\n");
    r = run({"predict", "--model", dir / "m.ckpt", "--ir", dir / "bad.mlir"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.out.empty());
    CHECK_FALSE(r.err.empty());

    CHECK(run({"predict", "--model", dir / "m.ckpt"}).code == cli::kUsage);
    CHECK(run({"eval", "--model", dir / "d.csv", "--data", dir / "te.csv"}).code == cli::kDataError);

    std::vector<std::string> cmp{"compare", "--data", dir / "a.csv", "--vocab", dir / "v.txt", "--archs",
                                 "bagfc,convstack"};
    cmp.insert(cmp.end(), kSmallModel.begin(), kSmallModel.end());
    r = run(cmp);
    REQUIRE(r.code == cli::kOk);
    CHECK(split(trim(r.out), '\n').size() == 3);
}

TEST_CASE("config file supplies defaults that flags override") {
    TempDir dir;
    write_file(dir / "gen.cfg", "n = 4\nseed = 5\n# comment\n");
    REQUIRE(run({"gen-data", "--config", dir / "gen.cfg", "--out", dir / "a.csv"}).code == cli::kOk);
    REQUIRE(run({"gen-data", "--out", dir / "b.csv", "--n", "4", "--seed", "5"}).code == cli::kOk);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    REQUIRE(run({"gen-data", "--config", dir / "gen.cfg", "--out", dir / "c.csv", "--n", "6"}).code == cli::kOk);
    CHECK(split(read_file(dir / "c.csv"), '\n').size() > split(read_file(dir / "a.csv"), '\n').size());
    write_file(dir / "bad.cfg", "unknown-key = 1\n");
    CHECK(run({"gen-data", "--config", dir / "bad.cfg", "--out", dir / "d.csv"}).code == cli::kUsage);
    CHECK(run({"gen-data", "--config", dir / "missing.cfg", "--out", dir / "d.csv"}).code != cli::kOk);
}
