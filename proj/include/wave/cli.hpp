#pragma once

// Run configuration, checkpoints and plot-ready output for full homotopy runs.
//
// Files written into the output directory by run/resume:
//   path.csv                         one row per continuation record (kept up to the
//                                    checkpoint row on resume)
//   profile_<stage>_<param>.csv      x,y,psi at every stage end
//   profile_<stage>_<param>_line.csv x,phi at Exchange stage ends
//   checkpoint_<stage>_<index>.json  resumable state
//   summary.json                     final c per stage, diagnostics, timings
//   error.json                       only on failure

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wave/analysis.hpp"
#include "wave/continuation.hpp"
#include "wave/diagnostics.hpp"
#include "wave/error.hpp"
#include "wave/grid.hpp"
#include "wave/model.hpp"
#include "wave/residual.hpp"
#include "wave/solver.hpp"

namespace wave::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kCheckpointSchema = 1;

inline constexpr const char* kPathHeader =
    "stage,family_param,c,residual_norm,speed_identity_gap,cmax_margin,min_psi,max_psi,min_dx_psi,gamma_fit,"
    "gamma_pred,bounds_ok,monotone_ok,sandwich_ok,left_decay_ok";

inline constexpr const char* kProfileHeader = "x,psi_top,psi_mid,psi_bottom,phi";

enum ExitCode : int { kOk = 0, kValidation = 2, kSolver = 3, kIo = 4 };

inline int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::InvalidArgument:
    case ErrorCode::BadExtent:
    case ErrorCode::AnchorNotOnGrid:
    case ErrorCode::ConfigHashMismatch: return kValidation;
    case ErrorCode::Io:
    case ErrorCode::SchemaMismatch: return kIo;
    default: return kSolver;
    }
}

struct GridConfig {
    double x_left = -130.0;
    double x_right = 100.0;
    std::size_t nx = 1151;
    std::size_t ny = 21;
};

struct StageConfig {
    double epsilon0 = 0.05;
    char target_stage = 'C';
    double target_s = 1.0;
    double target_eps = 1.0;
    double shooting_tol = 1e-10;
    ContinuationOptions steps;
};

struct OutputConfig {
    std::string directory = "wave_out";
    int checkpoint_every = 1;  ///< checkpoint every k records; stage ends are always checkpointed
};

struct SymbolScanConfig {
    double xi_max = 50.0;
    std::size_t n = 10000;
    double epsilon = 0.0;
    double c0 = 1.0;
    double c1 = 0.0;
};

struct RunConfig {
    ModelParams params;
    NonlinearitySpec nonlinearity;
    GridConfig grid;
    NewtonOptions newton;
    StageConfig continuation;
    OutputConfig output;
    SymbolScanConfig symbol_scan;

    [[nodiscard]] Grid make_grid() const { return build_grid(params, grid.x_left, grid.x_right, grid.nx, grid.ny); }
};

namespace detail {

// Reads obj[key] into out when present; rejects wrong types with the field path.
template <class T>
void read_field(const json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::Validation, path + "." + key + " has the wrong type");
    }
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw Error(ErrorCode::Validation, path + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw Error(ErrorCode::Validation, "unknown field " + path + "." + k);
    }
}

inline void require_positive(double v, const std::string& name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::Validation, name + " must be strictly positive");
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
    using detail::read_field;
    using detail::reject_unknown;
    RunConfig c;
    reject_unknown(j, "config", {"params", "nonlinearity", "grid", "newton", "continuation", "output", "symbol_scan"});
    if (j.contains("params")) {
        const auto& p = j["params"];
        reject_unknown(p, "params", {"d", "D", "mu", "L"});
        read_field(p, "d", "params", c.params.d);
        read_field(p, "D", "params", c.params.D);
        read_field(p, "mu", "params", c.params.mu);
        read_field(p, "L", "params", c.params.L);
    }
    detail::require_positive(c.params.d, "params.d");
    detail::require_positive(c.params.D, "params.D");
    detail::require_positive(c.params.mu, "params.mu");
    detail::require_positive(c.params.L, "params.L");

    if (j.contains("nonlinearity")) {
        const auto& n = j["nonlinearity"];
        reject_unknown(n, "nonlinearity", {"kind", "theta"});
        std::string kind = std::string(to_string(c.nonlinearity.kind));
        read_field(n, "kind", "nonlinearity", kind);
        c.nonlinearity.kind = nonlinearity_kind_from_string(kind);
        read_field(n, "theta", "nonlinearity", c.nonlinearity.theta);
    }
    if (!(c.nonlinearity.theta > 0.0 && c.nonlinearity.theta < 1.0))
        throw Error(ErrorCode::Validation, "nonlinearity.theta must lie in (0,1)");

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        reject_unknown(g, "grid", {"x_left", "x_right", "nx", "ny"});
        read_field(g, "x_left", "grid", c.grid.x_left);
        read_field(g, "x_right", "grid", c.grid.x_right);
        read_field(g, "nx", "grid", c.grid.nx);
        read_field(g, "ny", "grid", c.grid.ny);
    }
    try {
        (void)c.make_grid();
    } catch (const Error& e) {
        throw Error(ErrorCode::Validation, std::string("grid: ") + e.what());
    }

    if (j.contains("newton")) {
        const auto& n = j["newton"];
        reject_unknown(n, "newton", {"tol_residual", "max_iters", "damping", "min_step"});
        read_field(n, "tol_residual", "newton", c.newton.tol_residual);
        read_field(n, "max_iters", "newton", c.newton.max_iters);
        read_field(n, "damping", "newton", c.newton.damping);
        read_field(n, "min_step", "newton", c.newton.min_step);
    }
    c.newton.validate();

    if (j.contains("continuation")) {
        const auto& n = j["continuation"];
        reject_unknown(n, "continuation",
                       {"epsilon0", "target_stage", "target_s", "target_eps", "shooting_tol", "initial_step", "min_step",
                        "growth", "fast_iterations", "max_speed_jump", "extent_factor", "enforce_extent"});
        auto& s = c.continuation;
        read_field(n, "epsilon0", "continuation", s.epsilon0);
        std::string stage(1, s.target_stage);
        read_field(n, "target_stage", "continuation", stage);
        if (stage.size() != 1 || (stage[0] != 'A' && stage[0] != 'B' && stage[0] != 'C'))
            throw Error(ErrorCode::Validation, "continuation.target_stage must be one of A, B, C");
        s.target_stage = stage[0];
        read_field(n, "target_s", "continuation", s.target_s);
        read_field(n, "target_eps", "continuation", s.target_eps);
        read_field(n, "shooting_tol", "continuation", s.shooting_tol);
        read_field(n, "initial_step", "continuation", s.steps.initial_step);
        read_field(n, "min_step", "continuation", s.steps.min_step);
        read_field(n, "growth", "continuation", s.steps.growth);
        read_field(n, "fast_iterations", "continuation", s.steps.fast_iterations);
        read_field(n, "max_speed_jump", "continuation", s.steps.max_speed_jump);
        read_field(n, "extent_factor", "continuation", s.steps.extent_factor);
        read_field(n, "enforce_extent", "continuation", s.steps.enforce_extent);
    }
    const auto& s = c.continuation;
    if (!(s.epsilon0 > 0.0 && s.epsilon0 <= 0.1)) throw Error(ErrorCode::Validation, "continuation.epsilon0 must lie in (0, 0.1]");
    if (!(s.target_s >= 0.0 && s.target_s <= 1.0)) throw Error(ErrorCode::Validation, "continuation.target_s must lie in [0,1]");
    if (s.target_stage != 'A' && s.target_s != 1.0)
        throw Error(ErrorCode::Validation, "continuation.target_s must be 1 when stages B or C are requested");
    if (!(s.target_eps >= s.epsilon0 && s.target_eps <= 1.0))
        throw Error(ErrorCode::Validation, "continuation.target_eps must lie in [epsilon0, 1]");
    detail::require_positive(s.shooting_tol, "continuation.shooting_tol");
    s.steps.validate();

    if (j.contains("output")) {
        const auto& o = j["output"];
        reject_unknown(o, "output", {"directory", "checkpoint_every"});
        read_field(o, "directory", "output", c.output.directory);
        read_field(o, "checkpoint_every", "output", c.output.checkpoint_every);
    }
    if (c.output.checkpoint_every < 0) throw Error(ErrorCode::Validation, "output.checkpoint_every must be >= 0");

    if (j.contains("symbol_scan")) {
        const auto& o = j["symbol_scan"];
        reject_unknown(o, "symbol_scan", {"xi_max", "n", "epsilon", "c0", "c1"});
        read_field(o, "xi_max", "symbol_scan", c.symbol_scan.xi_max);
        read_field(o, "n", "symbol_scan", c.symbol_scan.n);
        read_field(o, "epsilon", "symbol_scan", c.symbol_scan.epsilon);
        read_field(o, "c0", "symbol_scan", c.symbol_scan.c0);
        read_field(o, "c1", "symbol_scan", c.symbol_scan.c1);
    }
    detail::require_positive(c.symbol_scan.xi_max, "symbol_scan.xi_max");
    if (c.symbol_scan.n < 2) throw Error(ErrorCode::Validation, "symbol_scan.n must be at least 2");
    if (c.symbol_scan.epsilon < 0.0) throw Error(ErrorCode::Validation, "symbol_scan.epsilon must be non-negative");
    return c;
}

inline json to_json(const RunConfig& c) {
    const auto& s = c.continuation;
    return json{
        {"params", {{"d", c.params.d}, {"D", c.params.D}, {"mu", c.params.mu}, {"L", c.params.L}}},
        {"nonlinearity", {{"kind", std::string(to_string(c.nonlinearity.kind))}, {"theta", c.nonlinearity.theta}}},
        {"grid", {{"x_left", c.grid.x_left}, {"x_right", c.grid.x_right}, {"nx", c.grid.nx}, {"ny", c.grid.ny}}},
        {"newton",
         {{"tol_residual", c.newton.tol_residual},
          {"max_iters", c.newton.max_iters},
          {"damping", c.newton.damping},
          {"min_step", c.newton.min_step}}},
        {"continuation",
         {{"epsilon0", s.epsilon0},
          {"target_stage", std::string(1, s.target_stage)},
          {"target_s", s.target_s},
          {"target_eps", s.target_eps},
          {"shooting_tol", s.shooting_tol},
          {"initial_step", s.steps.initial_step},
          {"min_step", s.steps.min_step},
          {"growth", s.steps.growth},
          {"fast_iterations", s.steps.fast_iterations},
          {"max_speed_jump", s.steps.max_speed_jump},
          {"extent_factor", s.steps.extent_factor},
          {"enforce_extent", s.steps.enforce_extent}}},
        {"output", {{"directory", c.output.directory}, {"checkpoint_every", c.output.checkpoint_every}}},
        {"symbol_scan",
         {{"xi_max", c.symbol_scan.xi_max},
          {"n", c.symbol_scan.n},
          {"epsilon", c.symbol_scan.epsilon},
          {"c0", c.symbol_scan.c0},
          {"c1", c.symbol_scan.c1}}},
    };
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Io, origin + ": " + e.what());
    }
}

inline RunConfig load_config(const fs::path& path) {
    return parse_config(parse_json_text(read_text(path), path.string()));
}

/// FNV-1a over the canonical JSON of everything but the output section, so relocating the
/// output directory does not invalidate checkpoints.
inline std::string config_hash(const RunConfig& c) {
    json j = to_json(c);
    j.erase("output");
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Output directory, with WAVE_OUT taking precedence over the config.
inline fs::path output_directory(const RunConfig& c) {
    if (const char* env = std::getenv("WAVE_OUT"); env && *env) return fs::path(env);
    return fs::path(c.output.directory);
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
    int schema_version = kCheckpointSchema;
    std::string config_hash;
    Stage stage = Stage::A;
    std::size_t record_index = 0;  ///< row of path.csv this checkpoint corresponds to
    GridConfig grid;
    double L = 1.0;
    ContinuationCursor cursor;
};

namespace detail {

inline json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector json_vector(const json& j, const char* what) {
    if (!j.is_array()) throw Error(ErrorCode::SchemaMismatch, std::string(what) + " must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw Error(ErrorCode::SchemaMismatch, std::string(what) + " holds a non-number");
        v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    return v;
}

inline json state_json(const WaveState& s) {
    return json{{"family", std::string(to_string(s.family.kind()))},
                {"parameter", s.family.parameter()},
                {"c", s.c},
                {"psi", vector_json(s.psi)},
                {"phi", s.phi ? vector_json(*s.phi) : json(nullptr)}};
}

inline WaveState json_state(const json& j, const GridConfig& g) {
    try {
        WaveState s;
        s.family = HomotopyFamily::make(family_kind_from_string(j.at("family").get<std::string>()),
                                        j.at("parameter").get<double>());
        s.c = j.at("c").get<double>();
        s.psi = json_vector(j.at("psi"), "psi");
        if (!j.at("phi").is_null()) s.phi = json_vector(j.at("phi"), "phi");
        if (static_cast<std::size_t>(s.psi.size()) != g.nx * g.ny)
            throw Error(ErrorCode::SchemaMismatch, "psi length does not match the grid metadata");
        if (s.family.is_exchange() != s.phi.has_value() || (s.phi && static_cast<std::size_t>(s.phi->size()) != g.nx))
            throw Error(ErrorCode::SchemaMismatch, "phi does not match the family and grid metadata");
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed state: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaMismatch) throw;
        throw Error(ErrorCode::SchemaMismatch, e.what());
    }
}

} // namespace detail

inline json to_json(const Checkpoint& c) {
    json j = detail::state_json(c.cursor.current);
    j["schema_version"] = c.schema_version;
    j["config_hash"] = c.config_hash;
    j["stage"] = std::string(1, stage_letter(c.stage));
    j["record_index"] = c.record_index;
    j["grid"] = {{"x_left", c.grid.x_left}, {"x_right", c.grid.x_right}, {"nx", c.grid.nx}, {"ny", c.grid.ny}, {"L", c.L}};
    j["residual_norm"] = c.cursor.residual_norm;
    j["newton_iterations"] = c.cursor.newton_iterations;
    j["continuation"] = {{"step", c.cursor.step},
                         {"previous", c.cursor.previous ? detail::state_json(*c.cursor.previous) : json(nullptr)}};
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw Error(ErrorCode::SchemaMismatch, "checkpoint has no schema_version");
    Checkpoint c;
    c.schema_version = j["schema_version"].get<int>();
    if (c.schema_version != kCheckpointSchema)
        throw Error(ErrorCode::SchemaMismatch, "checkpoint schema_version " + std::to_string(c.schema_version) +
                                                   " (expected " + std::to_string(kCheckpointSchema) + ")");
    try {
        c.config_hash = j.at("config_hash").get<std::string>();
        const std::string stage = j.at("stage").get<std::string>();
        if (stage.size() != 1) throw Error(ErrorCode::SchemaMismatch, "bad stage");
        c.stage = stage_from_letter(stage[0]);
        c.record_index = j.at("record_index").get<std::size_t>();
        const auto& g = j.at("grid");
        c.grid.x_left = g.at("x_left").get<double>();
        c.grid.x_right = g.at("x_right").get<double>();
        c.grid.nx = g.at("nx").get<std::size_t>();
        c.grid.ny = g.at("ny").get<std::size_t>();
        c.L = g.at("L").get<double>();
        c.cursor.current = detail::json_state(j, c.grid);
        c.cursor.residual_norm = j.at("residual_norm").get<double>();
        c.cursor.newton_iterations = j.at("newton_iterations").get<int>();
        const auto& cont = j.at("continuation");
        c.cursor.step = cont.at("step").get<double>();
        if (!cont.at("previous").is_null()) c.cursor.previous = detail::json_state(cont.at("previous"), c.grid);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed checkpoint: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaMismatch) throw;
        throw Error(ErrorCode::SchemaMismatch, e.what());
    }
    return c;
}

inline std::string serialize(const Checkpoint& c) { return to_json(c).dump() + "\n"; }

inline void write_checkpoint(const fs::path& path, const Checkpoint& c) { write_text(path, serialize(c)); }

inline Checkpoint read_checkpoint(const fs::path& path) {
    return checkpoint_from_json(parse_json_text(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------------------------
// CSV output

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_flag(std::optional<bool> b) { return b ? (*b ? "1" : "0") : ""; }

inline std::string path_row(const ContinuationRecord& r) {
    const auto& d = r.diagnostics;
    std::string row;
    row += stage_letter(r.stage);
    for (double v : {r.family.parameter(), r.c, r.residual_norm, d.speed_identity_gap, d.cmax_margin, d.min_psi,
                     d.max_psi, d.min_dx_psi, d.gamma_fit, d.gamma_pred}) {
        row += ',';
        row += fmt17(v);
    }
    row += ',' + fmt_flag(d.bounds_ok) + ',' + fmt_flag(d.monotone_ok) + ',' + fmt_flag(d.sandwich_ok) + ',' +
           fmt_flag(d.left_decay_ok);
    return row;
}

inline std::string param_tag(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", p);
    return buf;
}

inline void write_profiles(const fs::path& dir, Stage stage, const WaveState& s, const Grid& g) {
    const std::string stem = std::string("profile_") + stage_letter(stage) + "_" + param_tag(s.family.parameter());
    std::string text = "x,y,psi\n";
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            text += fmt17(g.x(i)) + ',' + fmt17(g.y(j)) + ',' + fmt17(s.psi[static_cast<Eigen::Index>(g.node(i, j))]) + '\n';
    write_text(dir / (stem + ".csv"), text);
    if (s.phi) {
        std::string line = "x,phi\n";
        for (std::size_t i = 0; i < g.nx; ++i)
            line += fmt17(g.x(i)) + ',' + fmt17((*s.phi)[static_cast<Eigen::Index>(i)]) + '\n';
        write_text(dir / (stem + "_line.csv"), line);
    }
}

/// Slices psi(x, 0), psi(x, -L/2), psi(x, -L) and phi(x) of a checkpointed state.
inline std::string profile_csv(const Checkpoint& c) {
    ModelParams p;
    p.L = c.L;
    const Grid g = build_grid(p, c.grid.x_left, c.grid.x_right, c.grid.nx, c.grid.ny);
    const WaveState& s = c.cursor.current;
    std::string text = std::string(kProfileHeader) + "\n";
    for (std::size_t i = 0; i < g.nx; ++i) {
        auto at = [&](std::size_t j) { return fmt17(s.psi[static_cast<Eigen::Index>(g.node(i, j))]); };
        text += fmt17(g.x(i)) + ',' + at(g.top()) + ',' + at(g.anchor_j) + ',' + at(0) + ',';
        if (s.phi) text += fmt17((*s.phi)[static_cast<Eigen::Index>(i)]);
        text += '\n';
    }
    return text;
}

inline void emit_profile(const fs::path& checkpoint_path, const fs::path& out_path) {
    write_text(out_path, profile_csv(read_checkpoint(checkpoint_path)));
}

// ---------------------------------------------------------------------------------------------
// Orchestration

struct StageSummary {
    double final_parameter = 0.0;
    double c = 0.0;
    std::size_t records = 0;
    bool invariants_ok = true;
    double seconds = 0.0;
    DiagnosticsReport final_diagnostics;
};

struct RunResult {
    std::map<char, StageSummary> stages;
    std::vector<ContinuationRecord> records;
    WaveState final_state;
    double exchange_gap_eps0 = 0.0;
    int handoff_iterations = 0;
};

/// Runs the homotopy from a given point, writing artifacts into dir. With no checkpoint the
/// path starts from the 1-D shooting wave at s = 0.
class Runner {
public:
    Runner(RunConfig config, fs::path dir)
        : cfg_(std::move(config)), dir_(std::move(dir)), grid_(cfg_.make_grid()), hash_(config_hash(cfg_)),
          cont_(cfg_.params, cfg_.nonlinearity, grid_, cfg_.newton, cfg_.continuation.steps) {}

    RunResult run() {
        prepare_dir();
        const auto t0 = clock::now();
        const OneDimWave wave =
            solve_1d_ignition_shooting(cfg_.params.d, cfg_.nonlinearity, cfg_.continuation.shooting_tol);
        NewtonReport rep;
        const WaveState s0 = newton_solve(embed_1d_wave(wave, grid_), cfg_.params, cfg_.nonlinearity, grid_,
                                          cfg_.newton, &rep);
        ContinuationCursor cursor = cont_.start_cursor(s0);
        cursor.newton_iterations = rep.iterations;
        stage_start_ = t0;
        return from_stage_a(std::move(cursor));
    }

    RunResult resume(const Checkpoint& ck) {
        prepare_dir(ck.record_index);
        record_index_ = ck.record_index;
        stage_start_ = clock::now();
        switch (ck.stage) {
        case Stage::A: return from_stage_a(ck.cursor);
        case Stage::B: {
            RunResult res;
            ContinuationRecord rec = cont_.make_record(Stage::B, ck.cursor.current, ck.cursor.residual_norm,
                                                       ck.cursor.newton_iterations);
            sink_record(rec, ck.cursor.current, ck.cursor, Stage::B, true);
            res.records.push_back(rec);
            finish_stage(res, 'B', {rec}, ck.cursor.current);
            return from_stage_c(std::move(res), ck.cursor.current);
        }
        case Stage::C: {
            RunResult res;
            return stage_c(std::move(res), ck.cursor, true);
        }
        }
        return {};
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }

private:
    using clock = std::chrono::steady_clock;

    // Opens path.csv. On resume, rows before the checkpoint row are kept when an earlier
    // path.csv with at least that many rows is present, so the file reads as one run.
    void prepare_dir(std::size_t keep_rows = 0) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
        const fs::path file = dir_ / "path.csv";
        std::string prefix = std::string(kPathHeader) + '\n';
        if (keep_rows > 0 && fs::exists(file)) {
            std::istringstream in(read_text(file));
            std::string line;
            std::vector<std::string> rows;
            if (std::getline(in, line) && line == kPathHeader)
                while (rows.size() < keep_rows && std::getline(in, line)) rows.push_back(line);
            if (rows.size() == keep_rows)
                for (const auto& r : rows) prefix += r + '\n';
        }
        path_csv_.open(file, std::ios::binary | std::ios::trunc);
        if (!path_csv_) throw Error(ErrorCode::Io, "cannot write " + file.string());
        path_csv_ << prefix;
        path_csv_.flush();
    }

    // Appends the record to path.csv and checkpoints on cadence or when forced.
    void sink_record(ContinuationRecord& rec, const WaveState& s, const ContinuationCursor& cursor, Stage stage,
                     bool force_checkpoint) {
        const std::size_t index = record_index_++;
        const int every = cfg_.output.checkpoint_every;
        if (force_checkpoint || (every > 0 && index % static_cast<std::size_t>(every) == 0)) {
            Checkpoint ck;
            ck.config_hash = hash_;
            ck.stage = stage;
            ck.record_index = index;
            ck.grid = cfg_.grid;
            ck.L = cfg_.params.L;
            ck.cursor = cursor;
            ck.cursor.current = s;
            const std::string name = std::string("checkpoint_") + stage_letter(stage) + "_" + std::to_string(index) + ".json";
            write_checkpoint(dir_ / name, ck);
            rec.checkpoint_ref = name;
        }
        path_csv_ << path_row(rec) << '\n';
        path_csv_.flush();
    }

    RecordSink make_sink(Stage stage, double target, bool skip_first) {
        return [this, stage, target, skip_first, first = true](ContinuationRecord& rec, const WaveState& s,
                                                              const ContinuationCursor& cur) mutable {
            const bool was_first = first;
            first = false;
            if (was_first && skip_first) return;
            const bool at_end = s.family.parameter() >= target;
            sink_record(rec, s, cur, stage, at_end);
        };
    }

    void finish_stage(RunResult& res, char letter, const std::vector<ContinuationRecord>& recs, const WaveState& last) {
        StageSummary& st = res.stages[letter];
        st.final_parameter = last.family.parameter();
        st.c = last.c;
        st.records = recs.size();
        for (const auto& r : recs) st.invariants_ok = st.invariants_ok && r.diagnostics.invariants_ok();
        st.final_diagnostics = recs.back().diagnostics;
        const auto now = clock::now();
        st.seconds = std::chrono::duration<double>(now - stage_start_).count();
        stage_start_ = now;
        write_profiles(dir_, stage_from_letter(letter), last, grid_);
        res.final_state = last;
        write_summary(res);
    }

    RunResult from_stage_a(ContinuationCursor cursor) {
        RunResult res;
        const double target = cfg_.continuation.target_s;
        ContinuationPath pa = cont_.advance(std::move(cursor), target, Stage::A, make_sink(Stage::A, target, false));
        res.records = pa.records;
        finish_stage(res, 'A', pa.records, pa.final_state);
        if (cfg_.continuation.target_stage == 'A') return res;

        const WaveState predictor =
            handoff_to_system(pa.final_state, cfg_.params, grid_, cfg_.continuation.epsilon0);
        NewtonReport rep;
        const WaveState e0 = newton_solve(predictor, cfg_.params, cfg_.nonlinearity, grid_, cfg_.newton, &rep);
        res.handoff_iterations = rep.iterations;
        ContinuationCursor cb = cont_.start_cursor(e0);
        cb.residual_norm = rep.residual_norm;
        cb.newton_iterations = rep.iterations;
        ContinuationRecord rec = cont_.make_record(Stage::B, e0, rep.residual_norm, rep.iterations);
        sink_record(rec, e0, cb, Stage::B, true);
        res.records.push_back(rec);
        finish_stage(res, 'B', {rec}, e0);
        return from_stage_c(std::move(res), e0);
    }

    RunResult from_stage_c(RunResult res, const WaveState& e0) {
        res.exchange_gap_eps0 = exchange_gap(e0, cfg_.params, grid_);
        if (cfg_.continuation.target_stage != 'C') return res;
        ContinuationCursor cursor = cont_.start_cursor(e0);
        return stage_c(std::move(res), std::move(cursor), false);
    }

    // The first record of stage C duplicates the stage B state unless the run resumes inside C.
    RunResult stage_c(RunResult res, ContinuationCursor cursor, bool resumed_inside) {
        const double target = cfg_.continuation.target_eps;
        ContinuationPath pc =
            cont_.advance(std::move(cursor), target, Stage::C, make_sink(Stage::C, target, !resumed_inside));
        std::vector<ContinuationRecord> recs(pc.records.begin() + (resumed_inside ? 0 : 1), pc.records.end());
        if (recs.empty()) recs.push_back(pc.records.back());
        res.records.insert(res.records.end(), recs.begin(), recs.end());
        finish_stage(res, 'C', recs, pc.final_state);
        return res;
    }

    void write_summary(const RunResult& res) const {
        json stages = json::object();
        json timings = json::object();
        for (const auto& [letter, st] : res.stages) {
            const auto& d = st.final_diagnostics;
            stages[std::string(1, letter)] = {
                {"final_parameter", st.final_parameter},
                {"c", st.c},
                {"records", st.records},
                {"invariants_ok", st.invariants_ok},
                {"diagnostics",
                 {{"bounds_ok", d.bounds_ok},
                  {"monotone_ok", d.monotone_ok},
                  {"sandwich_ok", d.sandwich_ok ? json(*d.sandwich_ok) : json(nullptr)},
                  {"left_decay_ok", d.left_decay_ok ? json(*d.left_decay_ok) : json(nullptr)},
                  {"speed_identity_ok", d.speed_identity_ok},
                  {"speed_bound_ok", d.speed_bound_ok},
                  {"right_decay_ok", d.right_decay_ok ? json(*d.right_decay_ok) : json(nullptr)},
                  {"speed_identity_gap", d.speed_identity_gap},
                  {"cmax_margin", d.cmax_margin},
                  {"gamma_fit", std::isfinite(d.gamma_fit) ? json(d.gamma_fit) : json(nullptr)},
                  {"gamma_pred", std::isfinite(d.gamma_pred) ? json(d.gamma_pred) : json(nullptr)}}}};
            timings[std::string(1, letter)] = st.seconds;
        }
        const json summary{{"status", "ok"}, {"config_hash", hash_}, {"stages", stages}, {"timings_seconds", timings}};
        write_text(dir_ / "summary.json", summary.dump(2) + "\n");
    }

    RunConfig cfg_;
    fs::path dir_;
    Grid grid_;
    std::string hash_;
    Continuation cont_;
    std::ofstream path_csv_;
    std::size_t record_index_ = 0;
    clock::time_point stage_start_ = clock::now();
};

inline RunResult run(const RunConfig& config, const fs::path& dir) { return Runner(config, dir).run(); }

/// Continues a path from a checkpoint. The config must hash to the checkpoint's value unless
/// force is set, and its grid must match the checkpoint's grid metadata.
inline RunResult resume(const Checkpoint& ck, const RunConfig& config, const fs::path& dir, bool force = false) {
    if (!force && ck.config_hash != config_hash(config))
        throw Error(ErrorCode::ConfigHashMismatch, "checkpoint was written with config hash " + ck.config_hash +
                                                       ", current config hashes to " + config_hash(config));
    const auto& g = config.grid;
    if (g.nx != ck.grid.nx || g.ny != ck.grid.ny || g.x_left != ck.grid.x_left || g.x_right != ck.grid.x_right ||
        config.params.L != ck.L)
        throw Error(ErrorCode::SchemaMismatch, "checkpoint grid does not match the config grid");
    return Runner(config, dir).resume(ck);
}

/// Machine-readable failure record.
inline void write_error_record(const fs::path& dir, const Error& e) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const json j{{"status", "error"}, {"code", std::string(to_string(e.code()))}, {"message", e.what()},
                 {"exit_code", exit_code_for(e.code())}};
    std::ofstream out(dir / "error.json", std::ios::trunc);
    if (out) out << j.dump(2) << '\n';
}

inline std::string symbol_scan_csv(const RunConfig& c) {
    const auto& s = c.symbol_scan;
    std::string text = "xi,re_F,im_F,abs_F\n";
    for (const auto& sample : sample_symbol(c.params, s.epsilon, s.c0, s.c1, s.xi_max, s.n))
        text += fmt17(sample.xi) + ',' + fmt17(sample.value.real()) + ',' + fmt17(sample.value.imag()) + ',' +
                fmt17(std::abs(sample.value)) + '\n';
    return text;
}

inline std::string oned_csv(const OneDimWave& w, double x_left, double x_right, std::size_t n) {
    std::string text = "x,psi\n";
    for (std::size_t k = 0; k < n; ++k) {
        const double x = x_left + (x_right - x_left) * static_cast<double>(k) / static_cast<double>(n - 1);
        text += fmt17(x) + ',' + fmt17(w.value_at(x)) + '\n';
    }
    return text;
}

} // namespace wave::cli
