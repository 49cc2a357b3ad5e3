#pragma once

// JSON config file <-> ScenarioConfig (+ optional sweep block). Unknown keys
// are rejected; every error message starts with the offending key path.

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tetrasim/scenario.hpp"

namespace tetrasim::config {

using scenario::ConfigError;
using scenario::Mode;
using scenario::ScenarioConfig;

struct SweepSpec {
    std::string parameter = "lambda_f";
    std::vector<double> values;
    int replications = 1;
    std::string seeds = "sequential";   // or "fixed"
};

struct ParsedConfig {
    ScenarioConfig scenario;
    std::optional<SweepSpec> sweep;
};

namespace detail {

inline double num_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

inline int int_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<int>();
}

inline bool bool_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path + ": expected a boolean");
    return j.get<bool>();
}

inline std::string str_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
}

inline Discipline disc_at(const nlohmann::json& j, const std::string& path) {
    try {
        return discipline_from_string(str_at(j, path));
    } catch (const ParamError&) {
        throw ConfigError(path + ": unknown discipline '" + j.get<std::string>() + "'");
    }
}

inline SweepSpec parse_sweep(const nlohmann::json& j) {
    static const std::set<std::string> known = {"parameter", "values", "range",
                                                "replications", "seeds"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError("sweep." + it.key() + ": unknown key");
    }
    SweepSpec s;
    if (j.contains("parameter")) s.parameter = str_at(j["parameter"], "sweep.parameter");
    if (j.contains("values") && j.contains("range"))
        throw ConfigError("sweep.values: give either values or range, not both");
    if (j.contains("values")) {
        if (!j["values"].is_array()) throw ConfigError("sweep.values: expected an array");
        for (const auto& v : j["values"]) s.values.push_back(num_at(v, "sweep.values[]"));
    } else if (j.contains("range")) {
        const auto& r = j["range"];
        for (const auto& k : {"from", "to", "step"}) {
            if (!r.contains(k)) throw ConfigError(std::string("sweep.range.") + k + ": missing");
        }
        double from = num_at(r["from"], "sweep.range.from");
        double to = num_at(r["to"], "sweep.range.to");
        double step = num_at(r["step"], "sweep.range.step");
        if (!(step > 0.0)) throw ConfigError("sweep.range.step: must be > 0");
        for (double v = from; v <= to + 1e-12; v += step) s.values.push_back(v);
    }
    if (s.values.empty()) throw ConfigError("sweep.values: must not be empty");
    if (j.contains("replications"))
        s.replications = int_at(j["replications"], "sweep.replications");
    if (s.replications < 1) throw ConfigError("sweep.replications: must be >= 1");
    if (j.contains("seeds")) s.seeds = str_at(j["seeds"], "sweep.seeds");
    if (s.seeds != "sequential" && s.seeds != "fixed")
        throw ConfigError("sweep.seeds: must be 'sequential' or 'fixed'");
    for (double v : s.values) {
        if (!std::isfinite(v)) throw ConfigError("sweep.values: values must be finite");
    }
    return s;
}

} // namespace detail

/// Sweepable parameter paths.
inline void apply_parameter(ScenarioConfig& c, const std::string& parameter, double value) {
    if (parameter == "lambda_f") c.lambda_f = value;
    else if (parameter == "lambda_c") c.lambda_c = value;
    else if (parameter == "alpha_ch") c.alpha_ch = value;
    else if (parameter == "alpha_ch_dmo") c.alpha_ch_dmo = value;
    else if (parameter == "feedback_rate") c.feedback_rate = value;
    else if (parameter == "n_f") c.n_f = static_cast<int>(value);
    else if (parameter == "n_c") c.n_c = static_cast<int>(value);
    else throw ConfigError("sweep.parameter: unsupported parameter '" + parameter + "'");
}

inline ParsedConfig parse_config(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "mode", "n_c", "n_f", "lambda_f", "lambda_c", "lambda_voice", "call_dur",
        "feedback_rate", "setting", "fr_discipline", "gw_discipline", "bg_discipline",
        "alpha_ch", "alpha_ch_dmo", "frame_dur_ms", "n_fragments", "wt", "nu",
        "sds_retx_limit", "ack_timeout_frames", "access_randomize", "access_subslots",
        "dsb_frames", "dt316", "dn316", "dmo_retry_window", "dmo_channels", "seed",
        "horizon", "warmup", "sweep"};
    if (!j.is_object()) throw ConfigError("$: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError(it.key() + ": unknown key");
    }

    ParsedConfig out;
    ScenarioConfig& c = out.scenario;
    using namespace detail;
    if (j.contains("mode")) {
        auto m = str_at(j["mode"], "mode");
        if (m == "tmo") c.mode = Mode::Tmo;
        else if (m == "dmo") c.mode = Mode::Dmo;
        else throw ConfigError("mode: must be 'tmo' or 'dmo'");
    }
    if (j.contains("n_c")) c.n_c = int_at(j["n_c"], "n_c");
    if (j.contains("n_f")) c.n_f = int_at(j["n_f"], "n_f");
    if (j.contains("lambda_f")) c.lambda_f = num_at(j["lambda_f"], "lambda_f");
    if (j.contains("lambda_c")) c.lambda_c = num_at(j["lambda_c"], "lambda_c");
    if (j.contains("lambda_voice")) c.lambda_voice = num_at(j["lambda_voice"], "lambda_voice");
    if (j.contains("call_dur")) {
        const auto& cd = j["call_dur"];
        if (!cd.is_array() || cd.size() != 2)
            throw ConfigError("call_dur: expected [lo, hi]");
        c.call_dur_lo = num_at(cd[0], "call_dur[0]");
        c.call_dur_hi = num_at(cd[1], "call_dur[1]");
    }
    if (j.contains("feedback_rate")) {
        if (j["feedback_rate"].is_string()) {
            if (j["feedback_rate"].get<std::string>() != "auto")
                throw ConfigError("feedback_rate: expected a number or 'auto'");
            c.feedback_rate = -1.0;
        } else {
            c.feedback_rate = num_at(j["feedback_rate"], "feedback_rate");
        }
    }
    if (j.contains("setting")) c.setting = int_at(j["setting"], "setting");
    if (j.contains("fr_discipline")) c.fr_discipline = disc_at(j["fr_discipline"], "fr_discipline");
    if (j.contains("gw_discipline")) c.gw_discipline = disc_at(j["gw_discipline"], "gw_discipline");
    if (j.contains("bg_discipline")) c.bg_discipline = disc_at(j["bg_discipline"], "bg_discipline");
    if (j.contains("alpha_ch")) c.alpha_ch = num_at(j["alpha_ch"], "alpha_ch");
    if (j.contains("alpha_ch_dmo")) c.alpha_ch_dmo = num_at(j["alpha_ch_dmo"], "alpha_ch_dmo");
    if (j.contains("frame_dur_ms")) c.frame_dur_ms = num_at(j["frame_dur_ms"], "frame_dur_ms");
    if (j.contains("n_fragments")) c.n_fragments = int_at(j["n_fragments"], "n_fragments");
    if (j.contains("wt")) c.wt = int_at(j["wt"], "wt");
    if (j.contains("nu")) c.nu = int_at(j["nu"], "nu");
    if (j.contains("sds_retx_limit")) c.sds_retx_limit = int_at(j["sds_retx_limit"], "sds_retx_limit");
    if (j.contains("ack_timeout_frames"))
        c.ack_timeout_frames = int_at(j["ack_timeout_frames"], "ack_timeout_frames");
    if (j.contains("access_randomize"))
        c.access_randomize = bool_at(j["access_randomize"], "access_randomize");
    if (j.contains("access_subslots"))
        c.access_subslots = int_at(j["access_subslots"], "access_subslots");
    if (j.contains("dsb_frames")) c.dsb_frames = int_at(j["dsb_frames"], "dsb_frames");
    if (j.contains("dt316")) c.dt316 = int_at(j["dt316"], "dt316");
    if (j.contains("dn316")) c.dn316 = int_at(j["dn316"], "dn316");
    if (j.contains("dmo_retry_window"))
        c.dmo_retry_window = int_at(j["dmo_retry_window"], "dmo_retry_window");
    if (j.contains("dmo_channels")) c.dmo_channels = int_at(j["dmo_channels"], "dmo_channels");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) throw ConfigError("seed: expected an integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("horizon")) c.horizon_s = num_at(j["horizon"], "horizon");
    if (j.contains("warmup")) c.warmup_s = num_at(j["warmup"], "warmup");

    c.validate();
    if (j.contains("sweep")) out.sweep = detail::parse_sweep(j["sweep"]);
    if (out.sweep) {
        // every sweep point must itself be a valid configuration
        for (double v : out.sweep->values) {
            ScenarioConfig probe = c;
            apply_parameter(probe, out.sweep->parameter, v);
            probe.validate();
        }
    }
    return out;
}

inline ParsedConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: JSON parse error in '" + path + "': " + e.what());
    }
    return parse_config(j);
}

} // namespace tetrasim::config
