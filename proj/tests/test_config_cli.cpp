#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "obsyn/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace obsyn;
namespace fs = std::filesystem;

namespace {

const char* kFixture1d = R"({
  "variables": {"n": 1, "m": 1},
  "dynamics": {"f": ["-x1"], "h": ["x1"]},
  "sets": {
    "X":   {"type": "box", "lower": [-1.0], "upper": [1.0]},
    "E":   {"type": "box", "lower": [-1.0], "upper": [1.0]},
    "E_T": {"type": "box", "lower": [-0.05], "upper": [0.05]},
    "L":   {"type": "box", "lower": [-10.0], "upper": [10.0]}
  },
  "horizon": 1.0,
  "degree": 4,
  "selector": {"k": 1000, "grid_e": 101, "grid_l": 101},
  "validator": {"steps": 400, "grid_e": 21, "grid_l": 21},
  "output_dir": "out"
})";

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "missing " << path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("config parsing") {
    auto c = ProblemConfig::parse(kFixture1d);
    CHECK(c.n == 1);
    CHECK(c.degree == 4);
    CHECK(c.selector_k == 1000);
    CHECK(c.validator.steps == 400);
    auto p = c.to_problem();
    CHECK(p.horizon() == 1.0);
    CHECK(p.fingerprint() != 0);

    // unknown keys are rejected with the section named
    CHECK_THROWS_WITH_AS(
        ProblemConfig::parse(R"({"variables": {"n":1,"m":1,"q":2}})"),
        doctest::Contains("variables"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(ProblemConfig::parse(R"({"bogus": 1})"),
                         doctest::Contains("unknown key"),
                         std::invalid_argument);
    // missing section is named
    CHECK_THROWS_WITH_AS(
        ProblemConfig::parse(
            R"({"variables":{"n":1,"m":1},"dynamics":{"f":["-x1"],"h":["x1"]}})"),
        doctest::Contains("sets"), std::invalid_argument);

    // defaults are recorded in the resolved echo
    const std::string echo = ProblemConfig::parse(
        R"({"variables":{"n":1,"m":1},"dynamics":{"f":["-x1"],"h":["x1"]},
            "sets":{"X":{"type":"box","lower":[-1],"upper":[1]},
                    "E":{"type":"box","lower":[-1],"upper":[1]},
                    "E_T":{"type":"box","lower":[-0.05],"upper":[0.05]},
                    "L":{"type":"box","lower":[-10],"upper":[10]}}})")
                                 .resolved_json();
    for (const char* needle :
         {"\"degree\": 6", "\"k\": 1000", "\"grid_e\": 201", "\"grid_l\": 101",
          "\"steps\": 1000", "\"x0_per_dim\": 25", "\"seed\": 1",
          "\"output_dir\": \"out\"", "\"horizon\": 1.0"})
        CHECK_MESSAGE(echo.find(needle) != std::string::npos, needle);
}

#ifndef OBSYN_CLI_PATH
#define OBSYN_CLI_PATH "./obsyn"
#endif

TEST_CASE("cli pipeline on the 1D fixture") {
    const std::string cli = OBSYN_CLI_PATH;
    const fs::path dir = fs::temp_directory_path() / "obsyn_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "fixture.json").string();
    spit(cfg, kFixture1d);
    const std::string out = (dir / "run").string();

    // compile
    CHECK(run(cli + " compile " + cfg + " --out " + out) == 0);
    CHECK(fs::exists(out + "/problem.dat-s"));
    CHECK(fs::exists(out + "/manifest.json"));
    CHECK(fs::exists(out + "/resolved_config.json"));

    // solve: exit 0 only when the SDP reaches optimal status
    CHECK(run(cli + " solve " + out) == 0);
    CHECK(fs::exists(out + "/certificate.json"));
    CHECK(fs::exists(out + "/solve.log"));

    // select
    CHECK(run(cli + " select " + out + "/certificate.json " + cfg + " --out " +
              out) == 0);
    CHECK(fs::exists(out + "/gain_ranking.csv"));
    CHECK(fs::exists(out + "/selected_gain.json"));
    CHECK(fs::exists(out + "/levelset_e.csv"));

    // validate with containment
    CHECK(run(cli + " validate " + cfg + " --certificate " + out +
              "/certificate.json --out " + out) == 0);
    CHECK(fs::exists(out + "/validation_report.csv"));
    CHECK(fs::exists(out + "/validation_summary.json"));

    // reproducibility: a second full run produces byte-identical outputs
    const std::string out2 = (dir / "run2").string();
    CHECK(run(cli + " compile " + cfg + " --out " + out2) == 0);
    CHECK(run(cli + " solve " + out2) == 0);
    CHECK(run(cli + " select " + out2 + "/certificate.json " + cfg +
              " --out " + out2) == 0);
    CHECK(run(cli + " validate " + cfg + " --certificate " + out2 +
              "/certificate.json --out " + out2) == 0);
    for (const char* f :
         {"/problem.dat-s", "/manifest.json", "/resolved_config.json",
          "/certificate.json", "/gain_ranking.csv", "/selected_gain.json",
          "/levelset_e.csv", "/validation_report.csv",
          "/validation_summary.json"})
        CHECK_MESSAGE(slurp(out + f) == slurp(out2 + f), f);

    // golden resolved-config: byte-for-byte as expected
    const std::string golden = R"({
 "variables": {
  "n": 1,
  "m": 1
 },
 "dynamics": {
  "f": [
   "-x1"
  ],
  "h": [
   "x1"
  ]
 },
 "sets": {
  "X": {
   "type": "box",
   "lower": [
    -1.0
   ],
   "upper": [
    1.0
   ]
  },
  "E": {
   "type": "box",
   "lower": [
    -1.0
   ],
   "upper": [
    1.0
   ]
  },
  "E_T": {
   "type": "box",
   "lower": [
    -0.05
   ],
   "upper": [
    0.05
   ]
  },
  "L": {
   "type": "box",
   "lower": [
    -10.0
   ],
   "upper": [
    10.0
   ]
  }
 },
 "horizon": 1.0,
 "degree": 4,
 "selector": {
  "k": 1000,
  "grid_e": 101,
  "grid_l": 101
 },
 "validator": {
  "steps": 400,
  "x0_per_dim": 25,
  "grid_e": 21,
  "grid_l": 21,
  "seed": 1,
  "threads": 1
 },
 "output_dir": "out"
}
)";
    CHECK(slurp(out + "/resolved_config.json") == golden);
}

TEST_CASE("cli error paths") {
    const std::string cli = OBSYN_CLI_PATH;
    const fs::path dir = fs::temp_directory_path() / "obsyn_cli_err";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // config error: missing E_T section -> exit code 2, section named
    const std::string bad = (dir / "bad.json").string();
    spit(bad, R"({"variables":{"n":1,"m":1},
                  "dynamics":{"f":["-x1"],"h":["x1"]},
                  "sets":{"X":{"type":"box","lower":[-1],"upper":[1]},
                          "E":{"type":"box","lower":[-1],"upper":[1]},
                          "L":{"type":"box","lower":[-10],"upper":[10]}}})");
    CHECK(run(cli + " compile " + bad + " --out " + (dir / "o").string()) ==
          2);
    {
        const int rc = std::system((cli + " compile " + bad + " --out " +
                                    (dir / "o").string() + " 2> " +
                                    (dir / "err.txt").string() + " >/dev/null")
                                       .c_str());
        (void)rc;
        CHECK(slurp((dir / "err.txt").string()).find("E_T") !=
              std::string::npos);
    }

    // odd degree: warns and rounds up
    const std::string cfg = (dir / "cfg.json").string();
    spit(cfg, kFixture1d);
    {
        const int rc =
            std::system((cli + " compile " + cfg + " --degree 5 --out " +
                         (dir / "o5").string() + " > " +
                         (dir / "out5.txt").string() + " 2>&1")
                            .c_str());
        CHECK(WEXITSTATUS(rc) == 0);
        const std::string text = slurp((dir / "out5.txt").string());
        CHECK(text.find("rounded to 6") != std::string::npos);
    }

    // corrupted problem file -> checksum error
    const std::string out = (dir / "run").string();
    REQUIRE(run(cli + " compile " + cfg + " --out " + out) == 0);
    {
        std::ofstream f(out + "/problem.dat-s", std::ios::app);
        f << "\n\" tampered\n";
    }
    CHECK(run(cli + " solve " + out) == 1);

    // fingerprint mismatch between certificate and config -> exit 2
    REQUIRE(run(cli + " compile " + cfg + " --out " + out) == 0);
    REQUIRE(run(cli + " solve " + out) == 0);
    const std::string other = (dir / "other.json").string();
    std::string text = kFixture1d;
    const auto pos = text.find("-x1");
    text.replace(pos, 3, "-2*x1");
    spit(other, text);
    CHECK(run(cli + " select " + out + "/certificate.json " + other +
              " --out " + out) == 2);
}
