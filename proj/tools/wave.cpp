// wave: travelling-wave continuation driver.
//
//   wave run <config.json> [--sweep D=a,b,c]
//   wave resume <checkpoint.json> <config.json> [--force]
//   wave profile <checkpoint.json> <out.csv>
//   wave symbol-scan <config.json>
//   wave oned <config.json>
//
// WAVE_OUT overrides the output directory. Exit codes: 0 ok, 2 validation, 3 solver, 4 I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "wave/cli.hpp"

namespace {

using namespace wave;
namespace fs = std::filesystem;

void print_stages(const cli::RunResult& res) {
    for (const auto& [letter, st] : res.stages)
        std::printf("stage %c  param=%s  c=%.12g  records=%zu  invariants=%s  (%.2fs)\n", letter,
                    cli::param_tag(st.final_parameter).c_str(), st.c, st.records, st.invariants_ok ? "ok" : "FAILED",
                    st.seconds);
}

// Runs fn, turning library errors into an error record and an exit code.
template <class F>
int guarded(const fs::path& error_dir, F&& fn) {
    try {
        fn();
        return cli::kOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (!error_dir.empty()) cli::write_error_record(error_dir, e);
        return cli::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (!error_dir.empty()) cli::write_error_record(error_dir, Error(ErrorCode::Io, e.what()));
        return cli::kIo;
    }
}

struct Sweep {
    std::string field;
    std::vector<double> values;
};

Sweep parse_sweep(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Validation, "--sweep expects FIELD=v1,v2,...");
    Sweep s;
    s.field = spec.substr(0, eq);
    if (s.field != "d" && s.field != "D" && s.field != "mu" && s.field != "L")
        throw Error(ErrorCode::Validation, "--sweep field must be one of d, D, mu, L");
    std::string rest = spec.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        const std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            s.values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Validation, "--sweep value '" + item + "' is not a number");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return s;
}

int cmd_run(const std::string& config_path, const std::string& sweep_spec) {
    cli::RunConfig cfg;
    fs::path out;
    int rc = guarded({}, [&] {
        cfg = cli::load_config(config_path);
        out = cli::output_directory(cfg);
    });
    if (rc != cli::kOk) return rc;

    if (sweep_spec.empty()) {
        return guarded(out, [&] {
            const auto res = cli::run(cfg, out);
            print_stages(res);
        });
    }

    Sweep sweep;
    rc = guarded(out, [&] { sweep = parse_sweep(sweep_spec); });
    if (rc != cli::kOk) return rc;
    std::vector<std::future<int>> jobs;
    for (double v : sweep.values) {
        cli::RunConfig c = cfg;
        if (sweep.field == "d") c.params.d = v;
        if (sweep.field == "D") c.params.D = v;
        if (sweep.field == "mu") c.params.mu = v;
        if (sweep.field == "L") c.params.L = v;
        const fs::path dir = out / (sweep.field + "=" + cli::param_tag(v));
        jobs.push_back(std::async(std::launch::async, [c, dir] {
            return guarded(dir, [&] {
                // Re-validate: the swept value bypassed parse_config.
                const cli::RunConfig checked = cli::parse_config(cli::to_json(c));
                cli::run(checked, dir);
            });
        }));
    }
    int worst = cli::kOk;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const int code = jobs[k].get();
        std::printf("%s=%s exit %d\n", sweep.field.c_str(), cli::param_tag(sweep.values[k]).c_str(), code);
        worst = std::max(worst, code);
    }
    return worst;
}

int cmd_resume(const std::string& ckpt_path, const std::string& config_path, bool force) {
    cli::RunConfig cfg;
    fs::path out;
    int rc = guarded({}, [&] {
        cfg = cli::load_config(config_path);
        out = cli::output_directory(cfg);
    });
    if (rc != cli::kOk) return rc;
    return guarded(out, [&] {
        const cli::Checkpoint ck = cli::read_checkpoint(ckpt_path);
        const auto res = cli::resume(ck, cfg, out, force);
        print_stages(res);
    });
}

int cmd_profile(const std::string& ckpt_path, const std::string& out_path) {
    return guarded({}, [&] { cli::emit_profile(ckpt_path, out_path); });
}

int cmd_symbol_scan(const std::string& config_path) {
    cli::RunConfig cfg;
    fs::path out;
    int rc = guarded({}, [&] {
        cfg = cli::load_config(config_path);
        out = cli::output_directory(cfg);
    });
    if (rc != cli::kOk) return rc;
    return guarded(out, [&] {
        fs::create_directories(out);
        cli::write_text(out / "symbol_scan.csv", cli::symbol_scan_csv(cfg));
        const auto& s = cfg.symbol_scan;
        const SymbolScan scan = scan_symbol_zero_free(cfg.params, s.epsilon, s.c0, s.c1, s.xi_max, s.n);
        std::printf("min |F| = %.17g at xi = %.17g (%s)\n", scan.min_abs, scan.argmin_xi,
                    scan.zero_free() ? "zero-free" : "ZERO FOUND");
    });
}

int cmd_oned(const std::string& config_path) {
    cli::RunConfig cfg;
    fs::path out;
    int rc = guarded({}, [&] {
        cfg = cli::load_config(config_path);
        out = cli::output_directory(cfg);
    });
    if (rc != cli::kOk) return rc;
    return guarded(out, [&] {
        const OneDimWave w = solve_1d_ignition_shooting(cfg.params.d, cfg.nonlinearity, cfg.continuation.shooting_tol);
        fs::create_directories(out);
        const double span = w.x_end() + 10.0 / w.right_rate;
        cli::write_text(out / "oned.csv", cli::oned_csv(w, -span, span, 2001));
        std::printf("c = %.17g\n", w.c);
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Travelling-wave continuation for a strip coupled to a line of fast diffusion"};
    app.require_subcommand(1);

    std::string config, ckpt, out_csv, sweep;
    bool force = false;

    auto* run = app.add_subcommand("run", "Full continuation A -> B -> C");
    run->add_option("config", config, "Run configuration (JSON)")->required();
    run->add_option("--sweep", sweep, "Independent runs over one parameter, e.g. D=2,4,8");

    auto* resume = app.add_subcommand("resume", "Continue a path from a checkpoint");
    resume->add_option("checkpoint", ckpt, "Checkpoint (JSON)")->required();
    resume->add_option("config", config, "Run configuration (JSON)")->required();
    resume->add_flag("--force", force, "Accept a config whose hash differs from the checkpoint's");

    auto* profile = app.add_subcommand("profile", "Plot-ready slices of a checkpointed state");
    profile->add_option("checkpoint", ckpt, "Checkpoint (JSON)")->required();
    profile->add_option("out", out_csv, "Output CSV")->required();

    auto* scan = app.add_subcommand("symbol-scan", "Boundary symbol denominator on the real axis");
    scan->add_option("config", config, "Run configuration (JSON)")->required();

    auto* oned = app.add_subcommand("oned", "1-D shooting wave only");
    oned->add_option("config", config, "Run configuration (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kValidation;
    }

    if (*run) return cmd_run(config, sweep);
    if (*resume) return cmd_resume(ckpt, config, force);
    if (*profile) return cmd_profile(ckpt, out_csv);
    if (*scan) return cmd_symbol_scan(config);
    if (*oned) return cmd_oned(config);
    return cli::kValidation;
}
