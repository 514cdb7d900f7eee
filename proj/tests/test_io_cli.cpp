#include <doctest.h>

#include <waves/errors.hpp>
#include <waves/heightfield.hpp>
#include <waves/io.hpp>
#include <waves/streamflow.hpp>
#include <waves/vorticity.hpp>

#include <sys/stat.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

namespace {

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd =
        std::string(WAVES_CLI_PATH) + " " + args + " >" + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) : path("/tmp/" + name) {
        std::string cmd = "rm -rf " + path;
        REQUIRE(std::system(cmd.c_str()) == 0);
        REQUIRE(::mkdir(path.c_str(), 0755) == 0);
    }
};

} // namespace

TEST_CASE("fmt17 round trips doubles through text") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        double v = uni(rng) * std::pow(10.0, (k % 61) - 30);
        if (k % 17 == 0) v = -v;
        const double back = std::stod(waves::io::fmt17(v));
        CHECK(back == v);
    }
    CHECK(waves::io::fmt17(0.0) == "0");
    CHECK(waves::io::fmt17(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(waves::io::fmt17(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("json writer emits ordered single-line objects") {
    waves::io::JsonWriter w;
    w.integer("n", 3)
        .number("x", 0.5)
        .boolean("flag", true)
        .text("name", "a\"b\\c")
        .null("angle")
        .raw("list", "[1, 2]");
    CHECK(w.str() ==
          "{\"n\": 3, \"x\": 0.5, \"flag\": true, \"name\": \"a\\\"b\\\\c\", "
          "\"angle\": null, \"list\": [1, 2]}");

    CHECK(waves::io::json_escape("tab\tnewline\n") == "tab\\tnewline\\n");

    // Non-finite numbers become quoted words so the files stay parseable.
    waves::io::JsonWriter w2;
    w2.number("d0", std::numeric_limits<double>::infinity());
    CHECK(w2.str() == "{\"d0\": \"inf\"}");

    std::vector<double> xs = {1.0, 0.5};
    CHECK(waves::io::json_number_array(xs) == "[1, 0.5]");
}

TEST_CASE("atomic_write followed by read_file round trips") {
    const std::string path = "/tmp/waves_test_atomic.txt";
    waves::io::atomic_write(path, "line1\nline2\n");
    CHECK(waves::io::read_file(path) == "line1\nline2\n");
    waves::io::atomic_write(path, "rewritten");
    CHECK(waves::io::read_file(path) == "rewritten");
    std::remove(path.c_str());
    CHECK_THROWS_AS(waves::io::read_file(path), waves::ParseError);
}

TEST_CASE("config parser handles comments, blanks and typed lookups") {
    const std::string text =
        "# branch configuration\n"
        "vorticity = constant 0.5\n"
        "\n"
        "r = 1.8   # the Bernoulli constant\n"
        "Nq = 64\n"
        "flag=  yes\n";
    const auto cfg = waves::io::Config::parse_text(text, "inline");

    CHECK(cfg.has("r"));
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get_string("vorticity") == "constant 0.5");
    CHECK(cfg.get_double("r") == 1.8);
    CHECK(cfg.get_int("Nq") == 64);
    CHECK(cfg.get_string("flag") == "yes");
    CHECK(cfg.get_double_or("a0", 0.25) == 0.25);
    CHECK(cfg.get_int_or("Np", 48) == 48);
    CHECK(cfg.get_string_or("out", "runs") == "runs");

    // Missing keys and bad numbers name the offender.
    try {
        cfg.get_double("absent_key");
        FAIL("expected ParseError");
    } catch (const waves::ParseError& e) {
        CHECK(std::string(e.what()).find("absent_key") != std::string::npos);
    }
    try {
        cfg.get_double("flag");
        FAIL("expected ParseError");
    } catch (const waves::ParseError& e) {
        CHECK(std::string(e.what()).find("flag") != std::string::npos);
    }
    CHECK_THROWS_AS(waves::io::Config::parse_text("novalue\n", "inline"),
                    waves::ParseError);
    CHECK_THROWS_AS(waves::io::parse_double("1.2.3", "x"), waves::ParseError);
}

TEST_CASE("cli: regime report and exit codes") {
    const TempDir dir("waves_cli_regime");
    spit(dir.path + "/ok.cfg", "vorticity = zero\nr = 1.8\n");
    CHECK(run_cli("regime --config " + dir.path + "/ok.cfg --out " + dir.path) == 0);
    const auto regime = slurp(dir.path + "/regime.json");
    CHECK(regime.find("\"s_minus\"") != std::string::npos);
    CHECK(regime.find("\"d_plus\"") != std::string::npos);

    // Inadmissible head: regime error, exit 2.
    spit(dir.path + "/low.cfg", "vorticity = zero\nr = 1.4\n");
    CHECK(run_cli("regime --config " + dir.path + "/low.cfg --out " + dir.path) == 2);

    // Bad config: parse error, exit 3.
    spit(dir.path + "/bad.cfg", "vorticity = zero\n");
    CHECK(run_cli("regime --config " + dir.path + "/bad.cfg --out " + dir.path) == 3);
    CHECK(run_cli("regime --config " + dir.path + "/nonexistent.cfg") == 3);

    // Sweep over a list writes one report per head.
    spit(dir.path + "/sweep.cfg", "vorticity = zero\nr_list = 1.7, 1.8, 2.0\n");
    CHECK(run_cli("regime --config " + dir.path + "/sweep.cfg --out " + dir.path +
                  " --jobs 2") == 0);
    CHECK(slurp(dir.path + "/regime_001.json").find("\"r\": 1.7") !=
          std::string::npos);
    CHECK(slurp(dir.path + "/regime_003.json").find("\"r\": 2") !=
          std::string::npos);

    // Usage errors report as parse failures.
    CHECK(run_cli("regime") == 3);
    CHECK(run_cli("nonsense") == 3);
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: verify accepts stored waves and flags tampering") {
    const auto model = waves::VorticityModel::zero();
    const auto regime = waves::conjugate_streams(model, 1.8);
    const auto grid = waves::StripGrid::stretched(32, 24);
    const auto gs = waves::grid_dispersion(grid, model, regime.r, regime.s_minus);
    waves::HeightField init =
        waves::stream_field(grid, model, regime.r, gs.column, gs.lambda0);
    for (int j = 0; j <= grid.Np; ++j)
        for (int i = 0; i <= grid.M(); ++i)
            init.h(i, j) += 5e-3 * gs.phi0(j) * std::cos(grid.q(i));
    auto wave = waves::newton_solve(init, 5e-3);

    const TempDir dir("waves_cli_verify");
    const auto csv = dir.path + "/wave.csv";
    const auto json = dir.path + "/wave.json";
    waves::save_field(wave, waves::residual_norm(wave), csv, json);

    CHECK(run_cli("verify " + csv + " " + json + " --out " + dir.path) == 0);
    const auto report = slurp(dir.path + "/diagnostics.json");
    CHECK(report.find("\"pass\": true") != std::string::npos);
    CHECK(report.find("\"residual_norm\"") != std::string::npos);

    // Perturb a mirrored surface pair: evenness and amplitude survive, the
    // Bernoulli relation does not. Exit 1 is the verification failure code.
    auto tampered = wave;
    tampered.h(5, grid.Np) += 2e-4;
    waves::save_field(tampered, waves::residual_norm(wave), csv, json);
    CHECK(run_cli("verify " + csv + " " + json, dir.path + "/verify.log") == 1);

    // Unreadable artifacts are parse errors.
    spit(csv, "q,p,h\n0,0,0\n");
    CHECK(run_cli("verify " + csv + " " + json) == 3);
}

TEST_CASE("cli: export tabulates a branch log") {
    const TempDir dir("waves_cli_export");
    const auto log = dir.path + "/branch_log.jsonl";

    auto line = [](double t, double lam, double gap, double ff) {
        std::ostringstream os;
        os << "{\"t\": " << t << ", \"lambda\": " << lam
           << ", \"Lambda\": " << 2.0 * M_PI / lam << ", \"max_eta\": 1.7"
           << ", \"min_eta\": 1.5, \"stagnation_gap\": " << gap
           << ", \"max_slope\": 0.3, \"residual_norm\": 1e-12"
           << ", \"diagnostics_pass\": true, \"r\": 1.8, \"flow_force\": " << ff
           << ", \"flowforce_spread\": 2e-6}\n";
        return os.str();
    };
    spit(log, line(0.0, 2.5, 0.2, 3.1) + line(0.1, 2.4, 0.15, 3.1) +
                  line(0.25, 2.3, 0.1, 3.1));

    CHECK(run_cli("export " + log + " --out " + dir.path) == 0);

    const auto tvl = slurp(dir.path + "/t_vs_Lambda.csv");
    CHECK(tvl.substr(0, 9) == "t,Lambda\n");
    CHECK(std::count(tvl.begin(), tvl.end(), '\n') == 4);

    const auto tvg = slurp(dir.path + "/t_vs_gap.csv");
    CHECK(tvg.substr(0, 17) == "t,stagnation_gap\n");

    const auto rff = slurp(dir.path + "/r_vs_flowforce.csv");
    CHECK(rff.substr(0, 13) == "r,flow_force\n");
    CHECK(std::count(rff.begin(), rff.end(), '\n') == 4);

    // Mixed Bernoulli constants in one log cannot be tabulated against r.
    spit(log, line(0.0, 2.5, 0.2, 3.1) +
                  "{\"t\": 0.1, \"lambda\": 2.4, \"Lambda\": 2.6, \"max_eta\": 1.7, "
                  "\"min_eta\": 1.5, \"stagnation_gap\": 0.15, \"max_slope\": 0.3, "
                  "\"residual_norm\": 1e-12, \"diagnostics_pass\": true, \"r\": 2.0, "
                  "\"flow_force\": 3.0, \"flowforce_spread\": 2e-6}\n");
    CHECK(run_cli("export " + log + " --out " + dir.path) == 3);

    // An empty log still writes headers.
    spit(log, "");
    CHECK(run_cli("export " + log + " --out " + dir.path) == 0);
    CHECK(slurp(dir.path + "/t_vs_Lambda.csv") == "t,Lambda\n");

    // Corrupt JSONL is a parse error.
    spit(log, "{broken\n");
    CHECK(run_cli("export " + log + " --out " + dir.path) == 3);
}

TEST_CASE("cli: bifurcate writes seed artifacts and a first wave") {
    const TempDir dir("waves_cli_bifurcate");
    spit(dir.path + "/onset.cfg",
         "vorticity = zero\nr = 1.8\nNq = 32\nNp = 24\na0 = 1e-3\n");
    CHECK(run_cli("bifurcate --config " + dir.path + "/onset.cfg --out " +
                  dir.path) == 0);

    const auto seed = slurp(dir.path + "/seed.json");
    CHECK(seed.find("\"lambda0\"") != std::string::npos);
    const auto state = slurp(dir.path + "/branch_state.json");
    CHECK(state.find("\"index\": 1") != std::string::npos);
    CHECK(slurp(dir.path + "/branch_log.jsonl").find("\"t\": 0") !=
          std::string::npos);

    // Missing amplitude is a config error.
    spit(dir.path + "/noamp.cfg", "vorticity = zero\nr = 1.8\nNq = 32\nNp = 24\n");
    const auto code = run_cli("bifurcate --config " + dir.path +
                              "/noamp.cfg --out " + dir.path + "/b2",
                              dir.path + "/noamp.log");
    CHECK(code == 3);
    CHECK(slurp(dir.path + "/noamp.log").find("a0") != std::string::npos);
}
