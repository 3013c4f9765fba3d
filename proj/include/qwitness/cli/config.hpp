// config.hpp: strict JSON experiment configuration with defaults and dotted-key overrides

#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qwitness/bath.hpp"
#include "qwitness/error.hpp"
#include "qwitness/witness.hpp"

namespace qwitness::cli {

using json = nlohmann::json;

enum class Quantity { witness, delta_witness };

struct InitialState {
    enum class Kind { fock, coherent } kind = Kind::fock;
    int fock = 0;
    std::complex<double> alpha{0.0, 0.0};

    std::string label() const {
        if (kind == Kind::fock) return "fock(" + std::to_string(fock) + ")";
        return fmt::format("coherent({:g},{:g})", alpha.real(), alpha.imag());
    }
};

struct ExperimentConfig {
    // system
    double omega = 1.0;
    int dim = 20;
    int n = 1;
    // reservoir
    BathSpec bath{};
    SpectralDensity spectral{};
    // protocol
    bool fock_basis = true;
    int grid_half_extent = 2;
    double grid_spacing = 1.0;
    InitialState initial{};
    std::optional<double> tau_stop;  // periods 2 pi/omega; basis default when empty
    int tau_points = 200;
    double t2_over_t1 = 2.0;
    Quantity quantity = Quantity::witness;
    BranchMode branch_mode = BranchMode::aggregated;
    // batch fan-out
    std::vector<double> batch_alpha_exp;
    std::vector<int> batch_initial_fock;
    // numerics
    double quad_abs_tol = 1e-9;
    double panels_per_period = 8.0;
    double ode_rel_tol = 1e-8;
    double ode_abs_tol = 1e-10;
    int rate_grid_points = 1024;
    std::optional<double> t_max;  // periods; defaults to the last second-measurement time
    TailPolicy coherent_tail = TailPolicy::warn;
    // outputs
    std::string directory = "qwitness_out";
    bool emit_rates = true;
    bool emit_witness = true;
    bool emit_svg = false;
    bool emit_trajectory = false;

    double tau_stop_periods() const { return tau_stop.value_or(fock_basis ? 0.5 : 1.0); }
    double t_max_periods() const { return t_max.value_or(t2_over_t1 * tau_stop_periods()); }
};

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Reads keys from one JSON object, rejecting anything not consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object", path_);
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field(key) + ": " + e.what(), field(key));
        }
    }

    template <class T>
    void get_optional(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        get(key, v);
        out = v;
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }
    const json& raw(const char* key) const { return j_.at(key); }
    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key '" + (path_.empty() ? it.key() : path_ + "." + it.key()) + "'",
                                  path_.empty() ? it.key() : path_ + "." + it.key());
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline json empty_object() { return json::object(); }

inline const json& child(const json& root, const char* key, const json& fallback) {
    if (root.contains(key) && !root.at(key).is_null()) return root.at(key);
    return fallback;
}

inline double parse_beta(const json& v, const std::string& field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
        return std::numeric_limits<double>::infinity();
    throw ConfigError(field + ": expected a number or \"inf\"", field);
}

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> options, const std::string& field) {
    std::string allowed;
    for (const auto& [name, value] : options) {
        if (s == name) return value;
        allowed += std::string(allowed.empty() ? "" : ", ") + name;
    }
    throw ConfigError(field + ": '" + s + "' is not one of {" + allowed + "}", field);
}

inline void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + ": " + what, field);
}

} // namespace detail

/// Builds and validates a config from a JSON document (null or {} gives all defaults).
inline ExperimentConfig config_from_json(const json& root_in) {
    using detail::Section;
    const json root = root_in.is_null() ? json::object() : root_in;
    ExperimentConfig c;
    Section top(root, "");
    const json none = json::object();

    Section sys(detail::child(root, "system", none), "system");
    top.has("system");
    sys.get("omega", c.omega);
    sys.get("dim", c.dim);
    sys.get("n", c.n);
    sys.finish();

    Section bath(detail::child(root, "bath", none), "bath");
    top.has("bath");
    std::string kind = "thermal";
    bath.get("kind", kind);
    c.bath.kind = detail::parse_enum<BathKind>(
        kind, {{"thermal", BathKind::thermal}, {"squeezed_vacuum", BathKind::squeezed_vacuum}}, "bath.kind");
    bath.get("m", c.bath.m);
    if (bath.has("beta")) c.bath.beta = detail::parse_beta(bath.raw("beta"), "bath.beta");
    bath.get("r0", c.bath.r0);
    bath.get("alpha_exp", c.bath.alpha_exp);
    bath.get("theta", c.bath.theta);
    bath.finish();

    Section spec(detail::child(root, "spectral", none), "spectral");
    top.has("spectral");
    spec.get("A", c.spectral.A);
    spec.get("omega_ir", c.spectral.omega_ir);
    spec.get("omega_uv", c.spectral.omega_uv);
    std::string form = "soft_double_cutoff";
    spec.get("form", form);
    c.spectral.form = detail::parse_enum<SpectralForm>(
        form, {{"soft_double_cutoff", SpectralForm::soft_double_cutoff}, {"exp_uv_only", SpectralForm::exp_uv_only}},
        "spectral.form");
    spec.finish();

    Section proto(detail::child(root, "protocol", none), "protocol");
    top.has("protocol");
    std::string basis = "fock";
    proto.get("basis", basis);
    c.fock_basis = detail::parse_enum<bool>(basis, {{"fock", true}, {"coherent_grid", false}}, "protocol.basis");
    if (proto.has("grid")) {
        Section grid(proto.raw("grid"), "protocol.grid");
        grid.get("half_extent", c.grid_half_extent);
        grid.get("spacing", c.grid_spacing);
        grid.finish();
    }
    if (proto.has("initial_state")) {
        Section init(proto.raw("initial_state"), "protocol.initial_state");
        const bool has_fock = init.has("fock");
        const bool has_coh = init.has("coherent");
        detail::require(has_fock != has_coh, "protocol.initial_state", "give exactly one of 'fock' or 'coherent'");
        if (has_fock) {
            c.initial.kind = InitialState::Kind::fock;
            init.get("fock", c.initial.fock);
        } else {
            std::vector<double> re_im;
            init.get("coherent", re_im);
            detail::require(re_im.size() == 2, "protocol.initial_state.coherent", "expected [re, im]");
            c.initial.kind = InitialState::Kind::coherent;
            c.initial.alpha = {re_im[0], re_im[1]};
        }
        init.finish();
    }
    if (proto.has("tau")) {
        Section tau(proto.raw("tau"), "protocol.tau");
        tau.get_optional("stop", c.tau_stop);
        tau.get("points", c.tau_points);
        tau.finish();
    }
    proto.get("t2_over_t1", c.t2_over_t1);
    std::string quantity = "witness";
    proto.get("quantity", quantity);
    c.quantity = detail::parse_enum<Quantity>(
        quantity, {{"witness", Quantity::witness}, {"delta_witness", Quantity::delta_witness}}, "protocol.quantity");
    std::string mode = "aggregated";
    proto.get("branch_mode", mode);
    c.branch_mode = detail::parse_enum<BranchMode>(
        mode, {{"aggregated", BranchMode::aggregated}, {"per_outcome", BranchMode::per_outcome}},
        "protocol.branch_mode");
    proto.finish();

    Section batch(detail::child(root, "batch", none), "batch");
    top.has("batch");
    batch.get("alpha_exp", c.batch_alpha_exp);
    batch.get("initial_fock", c.batch_initial_fock);
    batch.finish();

    Section num(detail::child(root, "numerics", none), "numerics");
    top.has("numerics");
    num.get("quad_abs_tol", c.quad_abs_tol);
    num.get("panels_per_period", c.panels_per_period);
    num.get("ode_rel_tol", c.ode_rel_tol);
    num.get("ode_abs_tol", c.ode_abs_tol);
    num.get("rate_grid_points", c.rate_grid_points);
    num.get_optional("t_max", c.t_max);
    std::string tail = "warn";
    num.get("coherent_tail", tail);
    c.coherent_tail = detail::parse_enum<TailPolicy>(
        tail, {{"reject", TailPolicy::reject}, {"warn", TailPolicy::warn}, {"ignore", TailPolicy::ignore}},
        "numerics.coherent_tail");
    // The printed kappa kernel is the only implemented form; the key exists so configs can say so.
    std::string kernel = "as_printed";
    num.get("kappa_kernel", kernel);
    detail::parse_enum<int>(kernel, {{"as_printed", 0}}, "numerics.kappa_kernel");
    num.finish();

    Section outs(detail::child(root, "outputs", none), "outputs");
    top.has("outputs");
    outs.get("directory", c.directory);
    outs.get("emit_rates", c.emit_rates);
    outs.get("emit_witness", c.emit_witness);
    outs.get("emit_svg", c.emit_svg);
    outs.get("emit_trajectory", c.emit_trajectory);
    outs.finish();

    top.finish();

    // ---- validation
    using detail::require;
    require(c.omega == 1.0, "system.omega", "frequencies are expressed in units of omega; only 1 is supported");
    require(c.n == 1 || c.n == 2, "system.n", "must be 1 or 2");
    require(c.bath.m == 1 || c.bath.m == 2, "bath.m", "must be 1 or 2");
    require(c.bath.theta == 0.0, "bath.theta", "only 0 is supported");
    require(c.bath.beta > 0.0, "bath.beta", "must be > 0");
    require(c.bath.r0 >= 0.0, "bath.r0", "must be >= 0");
    require(c.spectral.A > 0.0, "spectral.A", "must be > 0");
    require(c.spectral.omega_uv > 0.0, "spectral.omega_uv", "must be > 0");
    require(c.spectral.omega_ir > 0.0 && c.spectral.omega_ir < c.spectral.omega_uv, "spectral.omega_ir",
            "need 0 < omega_ir < omega_uv");
    require(c.grid_half_extent >= 0, "protocol.grid.half_extent", "must be >= 0");
    require(c.grid_spacing > 0.0, "protocol.grid.spacing", "must be > 0");
    require(c.tau_points >= 0, "protocol.tau.points", "must be >= 0");
    require(c.tau_stop_periods() > 0.0, "protocol.tau.stop", "must be > 0");
    require(c.t2_over_t1 >= 1.0, "protocol.t2_over_t1", "must be >= 1");
    require(c.quad_abs_tol > 0.0, "numerics.quad_abs_tol", "must be > 0");
    require(c.panels_per_period >= 1.0, "numerics.panels_per_period", "must be >= 1");
    require(c.ode_rel_tol > 0.0 && c.ode_rel_tol <= 1e-8, "numerics.ode_rel_tol", "must be in (0, 1e-8]");
    require(c.ode_abs_tol > 0.0 && c.ode_abs_tol <= 1e-10, "numerics.ode_abs_tol", "must be in (0, 1e-10]");
    require(c.rate_grid_points >= 2, "numerics.rate_grid_points", "must be >= 2");
    require(c.t_max_periods() >= c.t2_over_t1 * c.tau_stop_periods() * (1.0 - 1e-12), "numerics.t_max",
            "must cover the last second measurement (t2_over_t1 * tau.stop)");
    require(!c.directory.empty(), "outputs.directory", "must not be empty");
    for (double a : c.batch_alpha_exp) require(std::isfinite(a), "batch.alpha_exp", "entries must be finite");
    require(c.batch_alpha_exp.empty() || c.bath.kind == BathKind::squeezed_vacuum, "batch.alpha_exp",
            "only meaningful for squeezed_vacuum baths");
    require(c.batch_initial_fock.empty() || c.fock_basis, "batch.initial_fock",
            "heatmap batches use the fock basis");

    int top_level = c.initial.kind == InitialState::Kind::fock ? c.initial.fock : 0;
    require(c.initial.kind != InitialState::Kind::fock || c.initial.fock >= 0, "protocol.initial_state.fock",
            "must be >= 0");
    for (int f : c.batch_initial_fock) {
        require(f >= 0, "batch.initial_fock", "entries must be >= 0");
        top_level = std::max(top_level, f);
    }
    require(c.dim >= std::max(top_level + 10, 20), "system.dim",
            "must be >= max(initial fock index + 10, 20), got " + std::to_string(c.dim));
    return c;
}

/// Fully resolved configuration: every knob with its effective value.
inline json to_json(const ExperimentConfig& c) {
    json j;
    j["system"] = {{"omega", c.omega}, {"dim", c.dim}, {"n", c.n}};
    json beta = std::isinf(c.bath.beta) ? json("inf") : json(c.bath.beta);
    j["bath"] = {{"kind", std::string(to_string(c.bath.kind))}, {"m", c.bath.m}, {"beta", beta}, {"r0", c.bath.r0},
                 {"alpha_exp", c.bath.alpha_exp}, {"theta", c.bath.theta}};
    j["spectral"] = {{"A", c.spectral.A}, {"omega_ir", c.spectral.omega_ir}, {"omega_uv", c.spectral.omega_uv},
                     {"form", std::string(to_string(c.spectral.form))}};
    json init = c.initial.kind == InitialState::Kind::fock
                    ? json{{"fock", c.initial.fock}}
                    : json{{"coherent", {c.initial.alpha.real(), c.initial.alpha.imag()}}};
    j["protocol"] = {{"basis", c.fock_basis ? "fock" : "coherent_grid"},
                     {"grid", {{"half_extent", c.grid_half_extent}, {"spacing", c.grid_spacing}}},
                     {"initial_state", init},
                     {"tau", {{"stop", c.tau_stop_periods()}, {"points", c.tau_points}}},
                     {"t2_over_t1", c.t2_over_t1},
                     {"quantity", c.quantity == Quantity::witness ? "witness" : "delta_witness"},
                     {"branch_mode", c.branch_mode == BranchMode::aggregated ? "aggregated" : "per_outcome"}};
    j["batch"] = {{"alpha_exp", c.batch_alpha_exp}, {"initial_fock", c.batch_initial_fock}};
    const char* tail = c.coherent_tail == TailPolicy::reject ? "reject"
                       : c.coherent_tail == TailPolicy::warn ? "warn"
                                                             : "ignore";
    j["numerics"] = {{"quad_abs_tol", c.quad_abs_tol},   {"panels_per_period", c.panels_per_period},
                     {"ode_rel_tol", c.ode_rel_tol},     {"ode_abs_tol", c.ode_abs_tol},
                     {"rate_grid_points", c.rate_grid_points}, {"t_max", c.t_max_periods()},
                     {"coherent_tail", tail}, {"kappa_kernel", "as_printed"}};
    j["outputs"] = {{"directory", c.directory},
                    {"emit_rates", c.emit_rates},
                    {"emit_witness", c.emit_witness},
                    {"emit_svg", c.emit_svg},
                    {"emit_trajectory", c.emit_trajectory}};
    return j;
}

/// Parses text; an empty or whitespace-only document is an empty configuration.
inline json parse_config_text(const std::string& text, const std::string& origin = "config") {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // Drop the library's own "[json.exception...] parse error at ...:" prefix.
        std::string msg = e.what();
        if (const auto p = msg.find(": ", msg.find(']')); p != std::string::npos) msg = msg.substr(p + 2);
        throw ConfigError(origin + ": parse error at " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) +
                          ": " + msg);
    }
}

/// `key.path=value`: value is read as JSON when it parses, as a string otherwise.
inline void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set: malformed key '" + path + "'", path);
        if (!node->is_object()) throw ConfigError("--set: '" + path + "' does not address an object member", path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json root = parse_config_text(ss.str(), path);
    for (const auto& o : overrides) apply_override(root, o);
    return config_from_json(root);
}

} // namespace qwitness::cli
