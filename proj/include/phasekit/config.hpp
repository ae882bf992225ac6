#pragma once

// JSON experiment configuration: defaults, strict key checking, dotted-path
// overrides and validation into typed specs. Requires nlohmann/json.

#include "phasekit/experiments.hpp"
#include "phasekit/potential.hpp"
#include "phasekit/schemes.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasekit {

using json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

/// Every recognised key with its default. Scans and convergence studies
/// default to the stability-table and accuracy-table setups respectively.
inline json default_config() {
    return json::parse(R"({
      "schema_version": 1,
      "dim": 2,
      "M": 63,
      "eps": 0.075,
      "gamma": 1.0,
      "tau": 0.01,
      "A": 0.0,
      "B": 0.0,
      "stabilization": "manual",
      "scheme": "sl-bdf2",
      "steps": 1024,
      "seed": 1,
      "init": {"kind": "random-uniform", "preset": "", "path": ""},
      "bootstrap": {"substeps": 16, "A": null},
      "snapshot_steps": [],
      "slices": false,
      "rel_tol": 1e-10,
      "output_dir": "out",
      "jobs": 1,
      "scan": {
        "vary": "A",
        "schemes": ["sl-bdf2", "sl-cn"],
        "taus": [10, 1, 0.1, 0.01],
        "fixed_values": [0, 5, 10],
        "candidates": []
      },
      "converge": {
        "schemes": ["sl-bdf2"],
        "taus": [0.032, 0.016, 0.008, 0.004, 0.002, 0.001],
        "T": 1.28,
        "reference_tau": null,
        "eps": 0.05,
        "gamma": 0.5,
        "A": 10.0,
        "B": 5.0,
        "init": {"kind": "preset", "preset": "phi1", "path": ""}
      }
    })");
}

/// Configuration problem, optionally anchored to a line of the source file.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what) : std::runtime_error(where + ": " + what) {}
};

struct ExperimentConfig {
    SimulationSpec sim;
    std::string stabilization = "manual";
    bool slices = false;
    std::string output_dir = "out";
    int jobs = 1;

    ScanTarget scan_target = ScanTarget::A;
    std::vector<Scheme> scan_schemes;
    ScanSpec scan;

    std::vector<Scheme> converge_schemes;
    ConvergenceSpec converge;
    SimulationSpec converge_sim;  // physics of the convergence study

    json resolved;  // the merged document, for provenance
};

namespace detail {

inline json::json_pointer pointer(const std::string& dotted) {
    std::string p = "/" + dotted;
    std::replace(p.begin(), p.end(), '.', '/');
    return json::json_pointer(p);
}

/// 1-based line where the dotted key appears in the source, or 0. Each path
/// segment is searched for after the previous one.
inline int line_of_key(const std::string& text, const std::string& dotted) {
    std::size_t pos = 0, start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const auto seg = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        const std::string quoted = "\"" + seg + "\"";
        for (pos = text.find(quoted, pos); pos != std::string::npos; pos = text.find(quoted, pos + 1)) {
            const auto next = text.find_first_not_of(" \t\r\n", pos + quoted.size());
            if (next != std::string::npos && text[next] == ':') break;
        }
        if (pos == std::string::npos) return 0;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

inline void check_known_keys(const json& user, const json& defaults, const std::string& prefix,
                             const std::string& source, const std::string& text) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!defaults.contains(it.key())) {
            const int line = line_of_key(text, path);
            throw ConfigError(line ? source + ":" + std::to_string(line) : source, "unknown key '" + path + "'");
        }
        const json& d = defaults.at(it.key());
        if (d.is_object()) {
            if (!it->is_object()) {
                const int line = line_of_key(text, path);
                throw ConfigError(line ? source + ":" + std::to_string(line) : source,
                                  "key '" + path + "' must be an object");
            }
            check_known_keys(*it, d, path, source, text);
        }
    }
}

inline void deep_merge(json& target, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it->is_object() && target.contains(it.key()) && target[it.key()].is_object())
            deep_merge(target[it.key()], *it);
        else
            target[it.key()] = *it;
    }
}

}  // namespace detail

/// Parses `text` (named `source` in messages) over the defaults and applies
/// `key=value` overrides. Values are read as JSON, falling back to a string.
inline json merge_config(const std::string& text, const std::string& source,
                         const std::vector<std::string>& overrides = {}) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line
        int line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
        throw ConfigError(source + ":" + std::to_string(line), "malformed JSON");
    }
    if (!user.is_object()) throw ConfigError(source + ":1", "top level must be a JSON object");

    json merged = default_config();
    detail::check_known_keys(user, merged, "", source, text);
    detail::deep_merge(merged, user);

    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + ov, "expected key=value");
        const std::string key = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        json::json_pointer ptr;
        try {
            ptr = detail::pointer(key);
        } catch (const json::exception&) {
            throw ConfigError("--set " + ov, "invalid key '" + key + "'");
        }
        if (!merged.contains(ptr)) throw ConfigError("--set " + ov, "unknown key '" + key + "'");
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;
        }
        merged[ptr] = value;
    }
    return merged;
}

namespace detail {

struct Validator {
    const json& doc;
    const std::string& source;
    const std::string& text;
    const std::vector<std::string>& overrides;

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        for (auto it = overrides.rbegin(); it != overrides.rend(); ++it)
            if (it->starts_with(key + "=")) throw ConfigError("--set " + *it, "key '" + key + "': " + what);
        const int line = line_of_key(text, key);
        throw ConfigError(line ? source + ":" + std::to_string(line) : source, "key '" + key + "': " + what);
    }

    const json& at(const std::string& key) const { return doc.at(pointer(key)); }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) fail(key, "must be a number");
        return v.get<double>();
    }
    double positive(const std::string& key) const {
        const double v = number(key);
        if (!(v > 0.0)) fail(key, "must be > 0");
        return v;
    }
    double non_negative(const std::string& key) const {
        const double v = number(key);
        if (!(v >= 0.0)) fail(key, "must be >= 0");
        return v;
    }
    long integer(const std::string& key, long lo) const {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "must be an integer");
        const long n = v.get<long>();
        if (n < lo) fail(key, "must be >= " + std::to_string(lo));
        return n;
    }
    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "must be a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const std::string& key, bool allow_empty, bool positive_only) const {
        const json& v = at(key);
        if (!v.is_array()) fail(key, "must be an array of numbers");
        if (!allow_empty && v.empty()) fail(key, "must not be empty");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(key, "must be an array of numbers");
            const double x = e.get<double>();
            if (positive_only ? !(x > 0.0) : !(x >= 0.0))
                fail(key, positive_only ? "entries must be > 0" : "entries must be >= 0");
            out.push_back(x);
        }
        return out;
    }
    std::vector<Scheme> schemes(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of scheme names");
        std::vector<Scheme> out;
        for (const auto& e : v) {
            if (!e.is_string()) fail(key, "must be a non-empty array of scheme names");
            out.push_back(scheme(key, e.get<std::string>()));
        }
        return out;
    }
    InitSpec init(const std::string& prefix) const {
        InitSpec out;
        const std::string kind = string(prefix + ".kind");
        if (kind == "random-uniform") {
            out.kind = InitKind::random_uniform;
        } else if (kind == "preset") {
            out.kind = InitKind::preset;
            out.preset = string(prefix + ".preset");
            static const char* known[] = {"ones", "minus-ones", "zeros", "phi1", "tanh-circle"};
            if (std::find(std::begin(known), std::end(known), out.preset) == std::end(known))
                fail(prefix + ".preset", "unknown preset '" + out.preset + "'");
        } else if (kind == "file") {
            out.kind = InitKind::file;
            out.path = string(prefix + ".path");
            if (out.path.empty()) fail(prefix + ".path", "must name a snapshot file");
        } else {
            fail(prefix + ".kind", "must be \"random-uniform\", \"preset\" or \"file\"");
        }
        return out;
    }
    Scheme scheme(const std::string& key, const std::string& name) const {
        if (name == "sl-bdf2") return Scheme::sl_bdf2;
        if (name == "sl-cn") return Scheme::sl_cn;
        fail(key, "unknown scheme '" + name + "' (expected sl-bdf2 or sl-cn)");
    }
};

}  // namespace detail

/// Checks the merged document against the schema and the physical-parameter
/// invariants and builds the typed configuration.
inline ExperimentConfig validate_config(const json& doc, const std::string& source = "<config>",
                                        const std::string& text = "", const std::vector<std::string>& overrides = {}) {
    const detail::Validator v{doc, source, text, overrides};
    ExperimentConfig cfg;
    cfg.resolved = doc;

    if (v.integer("schema_version", 1) != kConfigSchemaVersion)
        v.fail("schema_version", "unsupported version (expected " + std::to_string(kConfigSchemaVersion) + ")");

    auto& sim = cfg.sim;
    sim.dim = static_cast<int>(v.integer("dim", 2));
    if (sim.dim != 2 && sim.dim != 3) v.fail("dim", "must be 2 or 3");
    sim.M = static_cast<int>(v.integer("M", 2));
    if (sim.M > 512) v.fail("M", "must be <= 512");
    sim.params.eps = v.positive("eps");
    sim.params.gamma = v.positive("gamma");
    sim.params.tau = v.positive("tau");
    sim.params.scheme = v.scheme("scheme", v.string("scheme"));
    sim.steps = v.integer("steps", 1);
    const json& seed = v.at("seed");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<long long>() < 0))
        v.fail("seed", "must be a non-negative integer");
    sim.seed = seed.get<std::uint64_t>();
    sim.rel_tol = v.non_negative("rel_tol");

    cfg.stabilization = v.string("stabilization");
    if (cfg.stabilization == "manual") {
        sim.params.A = v.non_negative("A");
        sim.params.B = v.non_negative("B");
    } else if (cfg.stabilization == "unconditional") {
        const auto ab = stability_constants_unconditional(sim.params.eps, sim.params.gamma, sim.params.scheme,
                                                          TruncatedDoubleWell{});
        sim.params.A = ab.A;
        sim.params.B = ab.B;
    } else {
        v.fail("stabilization", "must be \"manual\" or \"unconditional\"");
    }

    sim.init = v.init("init");

    sim.bootstrap_substeps = static_cast<int>(v.integer("bootstrap.substeps", 1));
    if (!v.at("bootstrap.A").is_null()) sim.bootstrap_A = v.non_negative("bootstrap.A");

    const json& snaps = v.at("snapshot_steps");
    if (!snaps.is_array()) v.fail("snapshot_steps", "must be an array of step indices");
    for (const auto& s : snaps) {
        if (!s.is_number_integer() || s.get<long>() < 0) v.fail("snapshot_steps", "entries must be integers >= 0");
        sim.snapshot_steps.push_back(s.get<long>());
    }
    if (!v.at("slices").is_boolean()) v.fail("slices", "must be true or false");
    cfg.slices = v.at("slices").get<bool>();

    cfg.output_dir = v.string("output_dir");
    if (cfg.output_dir.empty()) v.fail("output_dir", "must not be empty");
    cfg.jobs = static_cast<int>(v.integer("jobs", 1));

    const std::string vary = v.string("scan.vary");
    if (vary != "A" && vary != "B") v.fail("scan.vary", "must be \"A\" or \"B\"");
    cfg.scan_target = vary == "A" ? ScanTarget::A : ScanTarget::B;
    cfg.scan.target = cfg.scan_target;
    cfg.scan_schemes = v.schemes("scan.schemes");
    cfg.scan.taus = v.numbers("scan.taus", false, true);
    cfg.scan.fixed_values = v.numbers("scan.fixed_values", false, false);
    cfg.scan.candidates = v.numbers("scan.candidates", true, false);
    cfg.scan.jobs = cfg.jobs;

    cfg.converge_schemes = v.schemes("converge.schemes");
    cfg.converge.taus = v.numbers("converge.taus", false, true);
    cfg.converge.T = v.positive("converge.T");
    if (!v.at("converge.reference_tau").is_null()) cfg.converge.reference_tau = v.positive("converge.reference_tau");
    const double ref = cfg.converge.reference_tau.value_or(
        *std::min_element(cfg.converge.taus.begin(), cfg.converge.taus.end()) / 8.0);
    for (double tau : cfg.converge.taus)
        if (!commensurate_steps(cfg.converge.T, tau)) v.fail("converge.taus", "T must be a multiple of every tau");
    if (!commensurate_steps(cfg.converge.T, ref)) v.fail("converge.reference_tau", "T must be a multiple of it");
    cfg.converge.jobs = cfg.jobs;

    auto& cs = cfg.converge_sim;
    cs = sim;
    cs.snapshot_steps.clear();
    cs.params.eps = v.positive("converge.eps");
    cs.params.gamma = v.positive("converge.gamma");
    cs.params.A = v.non_negative("converge.A");
    cs.params.B = v.non_negative("converge.B");
    cs.init = v.init("converge.init");
    return cfg;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    const std::string text = read_text_file(path);
    return validate_config(merge_config(text, path, overrides), path, text, overrides);
}

}  // namespace phasekit
