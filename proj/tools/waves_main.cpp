#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "waves/continuation.hpp"
#include "waves/diagnostics.hpp"
#include "waves/dispersion.hpp"
#include "waves/errors.hpp"
#include "waves/heightfield.hpp"
#include "waves/io.hpp"
#include "waves/log.hpp"
#include "waves/streamflow.hpp"
#include "waves/vorticity.hpp"

namespace fs = std::filesystem;
using namespace waves;

namespace {

struct RunConfig {
    VorticityModel model = VorticityModel::zero();
    double r = 0.0;
    std::vector<double> r_list; // regime sweeps only
    int Nq = 64;
    int Np = 48;
    double a0 = 0.0;
    ContinuationPolicy policy;
    std::string out_dir;
    std::string config_text; // verbatim copy stored next to the run
};

std::string dirname_of(const std::string& path) {
    const fs::path p = fs::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

RunConfig load_config(const std::string& path, bool need_a0) {
    RunConfig rc;
    rc.config_text = io::read_file(path);
    const io::Config cfg = io::Config::parse_text(rc.config_text, path);

    rc.model = build_vorticity_model(cfg.get_string_or("vorticity", "zero"),
                                     cfg.get_double_or("gamma", 0.5), dirname_of(path));

    if (cfg.has("r_list")) {
        std::stringstream ss(cfg.get_string("r_list"));
        std::string item;
        while (std::getline(ss, item, ','))
            rc.r_list.push_back(io::parse_double(item, "r_list entry"));
        if (rc.r_list.empty())
            throw ParseError(path + ": key 'r_list' is empty");
        rc.r = rc.r_list.front();
    } else {
        rc.r = cfg.get_double("r");
    }
    if (!std::isfinite(rc.r))
        throw ParseError(path + ": key 'r' must be finite");

    rc.Nq = static_cast<int>(cfg.get_int_or("Nq", 64));
    rc.Np = static_cast<int>(cfg.get_int_or("Np", 48));
    if (rc.Nq < 16 || rc.Np < 12)
        throw ParseError(path + ": grid must be at least 16x12 (Nq = " +
                         std::to_string(rc.Nq) + ", Np = " + std::to_string(rc.Np) + ")");
    if (rc.Nq % 2 != 0)
        throw ParseError(path + ": key 'Nq' must be even");

    if (need_a0) {
        rc.a0 = cfg.get_double("a0");
        if (!(rc.a0 > 0.0))
            throw ParseError(path + ": key 'a0' must be positive, got " +
                             io::fmt17(rc.a0));
    }

    ContinuationPolicy& pol = rc.policy;
    pol.gap_min = cfg.get_double_or("gap_min", 0.0);
    pol.lambda_min = cfg.get_double_or("lambda_min", pol.lambda_min);
    pol.slope_max = cfg.get_double_or("slope_max", pol.slope_max);
    pol.ds0 = cfg.get_double_or("ds0", 0.0);
    pol.ds_min = cfg.get_double_or("ds_min", 0.0);
    pol.ds_max = cfg.get_double_or("ds_max", 0.0);
    pol.max_steps = static_cast<int>(cfg.get_int_or("max_steps", pol.max_steps));
    for (const char* key : {"gap_min", "lambda_min", "slope_max", "ds0", "ds_min",
                            "ds_max", "max_steps"})
        if (cfg.has(key) && !(cfg.get_double(key) > 0.0))
            throw ParseError(path + ": key '" + std::string(key) +
                             "' must be positive");

    rc.out_dir = cfg.get_string_or("out", "");
    return rc;
}

/// Branch run directory: checkpoints, state, log, reports. Data files are
/// replaced atomically; the JSONL log is append-only.
struct BranchDir {
    fs::path dir;

    explicit BranchDir(const std::string& d) : dir(d) {}

    std::string p(const char* name) const { return (dir / name).string(); }

    void prepare_fresh(const RunConfig& rc, const FlowRegime& regime,
                       const BifurcationSeed& seed) const {
        fs::create_directories(dir);
        io::atomic_write(p("config.txt"), rc.config_text);
        io::atomic_write(p("regime.json"), regime_json(rc.model, regime) + "\n");
        io::atomic_write(p("seed.json"), seed_json(seed) + "\n");
        io::atomic_write(p("branch_log.jsonl"), "");
        io::atomic_write(p("events.log"), "");
    }

    void append(const char* name, const std::string& text) const {
        std::ofstream f(dir / name, std::ios::app | std::ios::binary);
        f << text;
        if (!f)
            throw ParseError("cannot append to " + p(name));
    }

    BranchSink sink(double r) const {
        BranchSink s;
        s.on_accept = [this, r](const BranchPoint& cur, const HeightField* prev,
                                const BranchState& st) {
            append("branch_log.jsonl", branch_log_line(cur, r));
            save_field(cur.field, cur.residual_norm, p("checkpoint_cur.csv"),
                       p("checkpoint_cur.json"));
            if (prev)
                save_field(*prev, residual_norm(*prev), p("checkpoint_prev.csv"),
                           p("checkpoint_prev.json"));
            io::atomic_write(p("branch_state.json"), branch_state_json(st) + "\n");
        };
        s.on_event = [this](const std::string& note) {
            append("events.log", note + "\n");
        };
        return s;
    }

    void finish(const BranchState& st, double r, bool omega_nonnegative,
                double slope_ceiling) const {
        std::vector<double> gaps, Lambdas, slopes;
        std::stringstream ss(io::read_file(p("branch_log.jsonl")));
        std::string line;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw ParseError(p("branch_log.jsonl") + ": malformed log line");
            gaps.push_back(j.at("stagnation_gap").get<double>());
            Lambdas.push_back(j.at("Lambda").get<double>());
            slopes.push_back(j.at("max_slope").get<double>());
        }
        const BranchOutcome oc = classify_sequences(r, omega_nonnegative, gaps,
                                                    Lambdas, slopes, slope_ceiling);
        io::atomic_write(p("outcome.json"),
                         outcome_json(oc, st.halt_reason, r) + "\n");
        io::atomic_write(p("branch_state.json"), branch_state_json(st) + "\n");
        std::cout << "halted (" << st.halt_reason << ") after " << st.index
                  << " accepted points; label " << branch_label_name(oc.label)
                  << "\n  " << oc.reason << "\n  outputs in " << dir.string() << "\n";
    }
};

BranchState onset_state(const BranchPoint& start, const ContinuationPolicy& pol) {
    BranchState st;
    st.index = 1;
    st.t = start.t;
    st.ds0 = pol.ds0;
    st.Lambda0 = start.Lambda;
    return st;
}

int cmd_regime(const RunConfig& rc, const std::string& out, int jobs) {
    const std::vector<double> values =
        rc.r_list.empty() ? std::vector<double>{rc.r} : rc.r_list;
    const CriticalParams crit = critical_parameters(rc.model);
    std::vector<std::string> reports(values.size());
    std::vector<std::string> errors(values.size());

    auto work = [&](size_t i) {
        try {
            const FlowRegime regime = conjugate_streams(rc.model, crit, values[i]);
            reports[i] = regime_json(rc.model, regime);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    };
    if (jobs > 1 && values.size() > 1) {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        const int n = std::min<int>(jobs, static_cast<int>(values.size()));
        for (int k = 0; k < n; ++k)
            pool.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < values.size();
                     i = next.fetch_add(1))
                    work(i);
            });
        for (auto& th : pool) th.join();
    } else {
        for (size_t i = 0; i < values.size(); ++i) work(i);
    }

    for (size_t i = 0; i < values.size(); ++i) {
        if (!errors[i].empty()) continue;
        std::cout << reports[i] << "\n";
        if (!out.empty()) {
            fs::create_directories(out);
            std::string name = "regime.json";
            if (values.size() > 1) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "regime_%03zu.json", i + 1);
                name = buf;
            }
            io::atomic_write((fs::path(out) / name).string(), reports[i] + "\n");
        }
    }
    for (size_t i = 0; i < values.size(); ++i)
        if (!errors[i].empty()) {
            std::cerr << "r = " << io::fmt17(values[i]) << ": " << errors[i] << "\n";
            return static_cast<int>(ExitCode::Regime);
        }
    return 0;
}

struct Onset {
    FlowRegime regime;
    BifurcationSeed seed;
    BranchPoint start;
};

Onset run_onset(const RunConfig& rc, const BranchDir& bd) {
    const FlowRegime regime = conjugate_streams(rc.model, rc.r);
    BifurcationSeed seed = dispersion_eigenvalue(stream_solution(rc.model, regime.s_minus));
    bd.prepare_fresh(rc, regime, seed);
    const StripGrid grid = branch_grid(regime, rc.Nq, rc.Np);
    BranchPoint start = start_branch(regime, seed, rc.a0, grid, rc.policy.newton);
    return Onset{regime, std::move(seed), std::move(start)};
}

int cmd_bifurcate(const RunConfig& rc, const std::string& out) {
    const BranchDir bd(out);
    const Onset onset = run_onset(rc, bd);
    const BranchSink sink = bd.sink(rc.r);
    sink.on_accept(onset.start, nullptr, onset_state(onset.start, rc.policy));
    std::cout << "onset converged: lambda = " << io::fmt17(onset.start.field.lambda())
              << ", amplitude = " << io::fmt17(onset.start.field.amplitude())
              << ", stagnation gap = " << io::fmt17(onset.start.stagnation_gap)
              << "\n  checkpoint in " << bd.dir.string() << "\n";
    return 0;
}

int cmd_continue_fresh(const RunConfig& rc, const std::string& out) {
    const BranchDir bd(out);
    const Onset onset = run_onset(rc, bd);
    const BranchRun run = continue_branch(onset.start, onset.regime, rc.policy,
                                          bd.sink(rc.r));
    bd.finish(run.state, rc.r, rc.model.omega_class() != OmegaClass::General,
              rc.policy.slope_max);
    return 0;
}

int cmd_continue_resume(const std::string& resume_dir, const std::string& config_path) {
    const BranchDir bd(resume_dir);
    const std::string cfg_path =
        config_path.empty() ? bd.p("config.txt") : config_path;
    const RunConfig rc = load_config(cfg_path, false);

    BranchState st = parse_branch_state(io::read_file(bd.p("branch_state.json")));
    st.halt_reason.clear(); // an interrupt halt is exactly what resume undoes
    st.failures = std::min(st.failures, 2);

    const LoadedField cur = load_field(bd.p("checkpoint_cur.csv"),
                                       bd.p("checkpoint_cur.json"));
    std::optional<HeightField> prev;
    if (st.have_prev)
        prev = load_field(bd.p("checkpoint_prev.csv"), bd.p("checkpoint_prev.json"))
                   .field;

    const VorticityModel model = cur.field.model();
    const FlowRegime regime = conjugate_streams(model, cur.field.r());
    const BranchRun run = resume_branch(std::move(prev), cur.field, st, regime,
                                        rc.policy, bd.sink(regime.r));
    bd.finish(run.state, regime.r, model.omega_class() != OmegaClass::General,
              rc.policy.slope_max);
    return 0;
}

int cmd_verify(const std::string& csv, const std::string& meta,
               const std::string& out) {
    const LoadedField lf = load_field(csv, meta);
    const FlowRegime regime = conjugate_streams(lf.field.model(), lf.field.r());
    const WaveDiagnostics d = run_diagnostics(lf.field, lf.field.model(), regime);
    const double resid = residual_norm(lf.field);
    const bool residual_pass = resid < 1e-6;
    const bool pass = d.pass && residual_pass;

    io::JsonWriter w;
    w.raw("diagnostics", diagnostics_json(d))
        .number("residual_norm", resid)
        .boolean("residual_pass", residual_pass)
        .boolean("pass", pass);
    const std::string report = w.str();
    std::cout << report << "\n";
    if (!out.empty()) {
        fs::create_directories(out);
        io::atomic_write((fs::path(out) / "diagnostics.json").string(), report + "\n");
    }
    if (!pass) {
        std::string why;
        if (!d.bernoulli.pass) why += " bernoulli";
        if (!d.bounds_pass)
            for (const auto& b : d.bounds)
                if (!b.pass) why += " " + b.name;
        if (!residual_pass) why += " residual_norm";
        throw VerificationError("stored wave failed:" + why);
    }
    return 0;
}

int cmd_export(const std::string& log_path, const std::string& out) {
    const std::string text = io::read_file(log_path);
    std::string lambda_tbl = "t,Lambda\n";
    std::string gap_tbl = "t,stagnation_gap\n";
    std::string force_tbl = "r,flow_force\n";
    std::stringstream ss(text);
    std::string line;
    bool have_r = false;
    double r0 = 0.0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError(log_path + ": malformed log line");
        const double r = j.at("r").get<double>();
        if (!have_r) {
            r0 = r;
            have_r = true;
        } else if (r != r0) {
            throw ParseError(log_path + ": mixed r values (" + io::fmt17(r0) +
                             " and " + io::fmt17(r) + "); branches are fixed-r");
        }
        lambda_tbl += io::fmt17(j.at("t").get<double>()) + "," +
                      io::fmt17(j.at("Lambda").get<double>()) + "\n";
        gap_tbl += io::fmt17(j.at("t").get<double>()) + "," +
                   io::fmt17(j.at("stagnation_gap").get<double>()) + "\n";
        force_tbl += io::fmt17(r) + "," +
                     io::fmt17(j.at("flow_force").get<double>()) + "\n";
    }
    const fs::path out_dir = out.empty() ? fs::path(log_path).parent_path()
                                         : fs::path(out);
    fs::create_directories(out_dir.empty() ? "." : out_dir.string());
    io::atomic_write((out_dir / "t_vs_Lambda.csv").string(), lambda_tbl);
    io::atomic_write((out_dir / "t_vs_gap.csv").string(), gap_tbl);
    io::atomic_write((out_dir / "r_vs_flowforce.csv").string(), force_tbl);
    std::cout << "wrote t_vs_Lambda.csv, t_vs_gap.csv, r_vs_flowforce.csv to "
              << out_dir.string() << "\n";
    return 0;
}

std::string resolve_out(const RunConfig& rc, const std::string& flag,
                        const char* cmd) {
    if (!flag.empty()) return flag;
    if (!rc.out_dir.empty()) return rc.out_dir;
    throw ParseError(std::string(cmd) +
                     " needs an output directory (--out or config key 'out')");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"steady periodic water waves with vorticity at fixed Bernoulli "
                 "constant: regime analysis, bifurcation, branch continuation, "
                 "verification, export"};
    app.require_subcommand(1);

    std::string config_path, out_flag, resume_dir, verify_csv, verify_json, log_path;
    int jobs = 1;

    CLI::App* c_regime = app.add_subcommand("regime", "laminar conjugate streams for r (or r_list)");
    c_regime->add_option("--config", config_path, "key = value config file")->required();
    c_regime->add_option("--out", out_flag, "directory for regime JSON files");
    c_regime->add_option("--jobs", jobs, "parallel workers for r_list sweeps");

    CLI::App* c_bif = app.add_subcommand("bifurcate", "converge the onset wave and checkpoint it");
    c_bif->add_option("--config", config_path, "key = value config file")->required();
    c_bif->add_option("--out", out_flag, "run directory");

    CLI::App* c_cont = app.add_subcommand("continue", "follow the branch; fresh from --config or resumed from --resume");
    c_cont->add_option("--config", config_path, "key = value config file");
    c_cont->add_option("--resume", resume_dir, "run directory with checkpoints");
    c_cont->add_option("--out", out_flag, "run directory (fresh runs)");

    CLI::App* c_verify = app.add_subcommand("verify", "re-certify a stored wave field");
    c_verify->add_option("field_csv", verify_csv, "wave field CSV")->required();
    c_verify->add_option("field_json", verify_json, "field JSON sidecar")->required();
    c_verify->add_option("--out", out_flag, "directory for diagnostics.json");

    CLI::App* c_export = app.add_subcommand("export", "plot-ready tables from a branch log");
    c_export->add_option("branch_log", log_path, "branch_log.jsonl path")->required();
    c_export->add_option("--out", out_flag, "directory for the CSV tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::Parse);
    }

    try {
        if (app.got_subcommand(c_regime)) {
            const RunConfig rc = load_config(config_path, false);
            return cmd_regime(rc, !out_flag.empty() ? out_flag : rc.out_dir, jobs);
        }
        if (app.got_subcommand(c_bif)) {
            const RunConfig rc = load_config(config_path, true);
            return cmd_bifurcate(rc, resolve_out(rc, out_flag, "bifurcate"));
        }
        if (app.got_subcommand(c_cont)) {
            if (!resume_dir.empty())
                return cmd_continue_resume(resume_dir, config_path);
            if (config_path.empty())
                throw ParseError("continue needs --config (fresh) or --resume DIR");
            const RunConfig rc = load_config(config_path, true);
            return cmd_continue_fresh(rc, resolve_out(rc, out_flag, "continue"));
        }
        if (app.got_subcommand(c_verify)) return cmd_verify(verify_csv, verify_json, out_flag);
        if (app.got_subcommand(c_export)) return cmd_export(log_path, out_flag);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Solver);
    }
    return 0;
}
