// experiment.hpp: run orchestration, CSV/SVG emission and the run manifest

#pragma once

#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qwitness/cli/config.hpp"
#include "qwitness/cli/hash.hpp"
#include "qwitness/cli/svg.hpp"
#include "qwitness/dynamics.hpp"
#include "qwitness/parallel.hpp"
#include "qwitness/rates.hpp"
#include "qwitness/witness.hpp"

namespace qwitness::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { full, rates_only };

/// Everything one profile (one alpha_exp value) produced.
struct ProfileResult {
    double alpha_exp = 0.0;
    std::string suffix;
    std::shared_ptr<const RateTable> rates;
    std::vector<WitnessCurve> curves;  // one per initial state
    std::vector<int> n0;               // initial Fock index per curve (heatmap batches)
    EvolveDiagnostics diagnostics;
    std::size_t positivity_flags = 0;
};

struct RunResult {
    std::vector<ProfileResult> profiles;
    json manifest;
};

namespace detail {

inline std::string profile_suffix(double alpha_exp) {
    std::string s = fmt::format("{:.6g}", alpha_exp);
    for (char& c : s) {
        if (c == '-') c = 'm';
        if (c == '.') c = 'p';
    }
    return "_alpha_" + s;
}

inline std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json error_record(const std::exception& e) {
    json rec{{"message", e.what()}, {"type", "Error"}};
    if (auto* c = dynamic_cast<const ConfigError*>(&e)) {
        rec["type"] = "ConfigError";
        rec["field"] = c->field();
    } else if (auto* t = dynamic_cast<const TruncationError*>(&e)) {
        rec["type"] = "TruncationError";
        rec["tail_weight"] = t->tail_weight();
    } else if (auto* q = dynamic_cast<const QuadratureError*>(&e)) {
        rec["type"] = "QuadratureError";
        rec["achieved_error"] = q->achieved_error();
    } else if (auto* tb = dynamic_cast<const TabulationError*>(&e)) {
        rec["type"] = "TabulationError";
        rec["max_deviation"] = tb->max_deviation();
    } else if (dynamic_cast<const IntegrationError*>(&e)) {
        rec["type"] = "IntegrationError";
    } else if (dynamic_cast<const DomainError*>(&e)) {
        rec["type"] = "DomainError";
    } else if (dynamic_cast<const NumericalError*>(&e)) {
        rec["type"] = "NumericalError";
    } else if (!dynamic_cast<const Error*>(&e)) {
        rec["type"] = "InternalError";
    }
    return rec;
}

inline json diagnostics_json(const EvolveDiagnostics& d, std::size_t positivity_flags) {
    return {{"max_trace_drift", d.max_trace_drift},
            {"max_hermiticity_drift", d.max_hermiticity_drift},
            {"min_eigenvalue", std::isfinite(d.min_eigenvalue) ? json(d.min_eigenvalue) : json(nullptr)},
            {"accepted_steps", d.steps},
            {"rejected_steps", d.rejected},
            {"renormalized", d.renormalized},
            {"negativity_flags", d.negativity_flags},
            {"probability_clips", positivity_flags}};
}

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message(),
                                  "outputs.directory");
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        if (!out) throw Error("write failed for '" + (dir_ / name).string() + "'");
        files_.push_back({{"file", name}, {"git_blob_sha1", git_blob_hash(content)}, {"bytes", content.size()}});
    }

    const std::filesystem::path& path() const noexcept { return dir_; }
    const json& files() const noexcept { return files_; }

private:
    std::filesystem::path dir_;
    json files_ = json::array();
};

inline std::vector<double> tau_grid(const ExperimentConfig& c) {
    const double stop = c.tau_stop_periods() * 2.0 * std::numbers::pi / c.omega;
    std::vector<double> tau(static_cast<std::size_t>(c.tau_points));
    for (int k = 1; k <= c.tau_points; ++k) tau[k - 1] = stop * k / c.tau_points;
    return tau;
}

inline DensityMatrix initial_state(const ExperimentConfig& c, const FockSpace& space, int fock_override) {
    if (fock_override >= 0) return DensityMatrix::fock(space, fock_override);
    if (c.initial.kind == InitialState::Kind::fock) return DensityMatrix::fock(space, c.initial.fock);
    return DensityMatrix::pure(coherent_state(space, c.initial.alpha, c.coherent_tail));
}

inline std::string heatmap_csv(const std::vector<WitnessCurve>& curves, const std::vector<int>& n0) {
    std::ostringstream os;
    const auto& meta = curves.front().meta;
    os << fmt::format("# n={}, m={}, bath={}, alpha_exp={:.17g}, r0={:.17g}, basis={}, initial=fock(batch), "
                      "quantity={}\n",
                      meta.n, meta.m, meta.bath, meta.alpha_exp, meta.r0, meta.basis, meta.quantity);
    os << "tau,n0,value\n";
    for (std::size_t c = 0; c < curves.size(); ++c)
        for (std::size_t i = 0; i < curves[c].tau.size(); ++i)
            os << fmt::format("{:.17g},{},{:.17g}\n", curves[c].tau[i] / (2.0 * std::numbers::pi), n0[c],
                              curves[c].values[i]);
    return os.str();
}

inline ProfileResult run_profile(const ExperimentConfig& c, double alpha_exp, RunMode mode) {
    ProfileResult res;
    res.alpha_exp = alpha_exp;
    BathSpec bath = c.bath;
    bath.alpha_exp = alpha_exp;
    bath.omega_ref = c.omega;

    TabulationOptions topt;
    topt.quad.abs_tol = c.quad_abs_tol;
    topt.quad.panels_per_period = c.panels_per_period;
    const double t_max = c.t_max_periods() * 2.0 * std::numbers::pi / c.omega;
    spdlog::info("tabulating rates: n={}, m={}, bath={}, alpha_exp={}, t_max={} periods, {} points", c.n, bath.m,
                 to_string(bath.kind), alpha_exp, c.t_max_periods(), c.rate_grid_points);
    res.rates = std::make_shared<const RateTable>(tabulate_rates(
        c.n, bath.m, bath, c.spectral, t_max, static_cast<std::size_t>(c.rate_grid_points), topt));
    if (mode == RunMode::rates_only) return res;

    const FockSpace space(c.dim);
    const OdeOptions ode{.rel_tol = c.ode_rel_tol, .abs_tol = c.ode_abs_tol};
    const Propagator prop(space, c.n, res.rates, c.omega, ode);
    std::unique_ptr<Propagator> markov;
    if (c.quantity == Quantity::delta_witness)
        markov = std::make_unique<Propagator>(space, c.n, markovian_rates(c.n, bath.m, bath, c.spectral), c.omega,
                                              ode);

    const MeasurementBasis basis =
        c.fock_basis ? MeasurementBasis::fock(c.dim) : MeasurementBasis::square_grid(c.grid_half_extent, c.grid_spacing);
    WitnessOptions wopt;
    wopt.mode = c.branch_mode;
    wopt.tail = c.coherent_tail;
    const Schedule schedule{c.t2_over_t1};
    const std::vector<double> tau = tau_grid(c);

    std::vector<int> starts = c.batch_initial_fock;
    if (starts.empty()) starts.push_back(-1);
    for (int f : starts) {
        const DensityMatrix rho0 = initial_state(c, space, f);
        WitnessCurve curve = markov ? delta_witness_sweep(prop, *markov, rho0, basis, tau, schedule, wopt)
                                    : witness_sweep(prop, rho0, basis, tau, schedule, wopt);
        curve.meta.m = bath.m;
        curve.meta.bath = std::string(to_string(bath.kind));
        curve.meta.alpha_exp = alpha_exp;
        curve.meta.r0 = bath.kind == BathKind::squeezed_vacuum ? bath.r0 : 0.0;
        curve.meta.initial = f >= 0 ? "fock(" + std::to_string(f) + ")" : c.initial.label();
        res.diagnostics.merge(curve.diagnostics);
        res.positivity_flags += curve.positivity_flags;
        res.n0.push_back(f >= 0 ? f : (c.initial.kind == InitialState::Kind::fock ? c.initial.fock : -1));
        res.curves.push_back(std::move(curve));
    }
    if (res.diagnostics.negativity_flags > 0)
        spdlog::warn("{} evolutions ended with a density-matrix eigenvalue below {:g} (min {:.3e})",
                     res.diagnostics.negativity_flags, kNegativityFlag, res.diagnostics.min_eigenvalue);
    if (res.positivity_flags > 0)
        spdlog::warn("{} probabilities were clipped to zero", res.positivity_flags);
    return res;
}

inline void emit_profile(const ExperimentConfig& c, const ProfileResult& p, OutputDir& out, RunMode mode) {
    const double period = 2.0 * std::numbers::pi / c.omega;
    if (c.emit_rates || mode == RunMode::rates_only) {
        std::ostringstream os;
        p.rates->write_csv(os, c.omega);
        out.write("rates" + p.suffix + ".csv", os.str());
        if (c.emit_svg) {
            LinePlot plot{"decay rates" + p.suffix, "t [2pi/omega]", "rate [omega]", {}};
            Series g{"gamma", {}, p.rates->gamma()}, k{"kappa", {}, p.rates->kappa()};
            for (double t : p.rates->times()) g.x.push_back(t / period);
            k.x = g.x;
            plot.series = {g, k};
            out.write("rates" + p.suffix + ".svg", render_svg(plot));
        }
    }
    if (mode == RunMode::rates_only || !c.emit_witness || p.curves.empty()) return;
    if (!c.batch_initial_fock.empty()) {
        out.write("witness_heatmap" + p.suffix + ".csv", heatmap_csv(p.curves, p.n0));
        return;
    }
    const WitnessCurve& curve = p.curves.front();
    std::ostringstream os;
    curve.write_csv(os, c.omega);
    out.write("witness" + p.suffix + ".csv", os.str());
    if (c.emit_svg) {
        Series s{curve.meta.quantity, {}, curve.values};
        for (double t : curve.tau) s.x.push_back(t / period);
        out.write("witness" + p.suffix + ".svg",
                  render_svg({curve.meta.quantity + p.suffix, "tau [2pi/omega]", curve.meta.quantity, {s}}));
    }
}

inline void emit_trajectory(const ExperimentConfig& c, const ProfileResult& p, OutputDir& out) {
    const FockSpace space(c.dim);
    const Propagator prop(space, c.n, p.rates, c.omega, {.rel_tol = c.ode_rel_tol, .abs_tol = c.ode_abs_tol});
    const int f = c.batch_initial_fock.empty() ? -1 : c.batch_initial_fock.front();
    const int d = c.dim;
    std::ostringstream os;
    os << "t";
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) os << fmt::format(",re_{}_{},im_{}_{}", i, j, i, j);
    os << '\n';
    evolve(prop, initial_state(c, space, f), 0.0, p.rates->t_max(), [&](double t, const Matrix& rho) {
        os << fmt::format("{:.17g}", t * c.omega / (2.0 * std::numbers::pi));
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) os << fmt::format(",{:.17g},{:.17g}", rho(i, j).real(), rho(i, j).imag());
        os << '\n';
    });
    out.write("trajectory" + p.suffix + ".csv", os.str());
}

} // namespace detail

/// Runs a validated configuration into `out_dir`. The manifest is written even
/// when a module fails; the error is then rethrown to the caller.
inline RunResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                RunMode mode = RunMode::full) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult result;
    detail::OutputDir out(out_dir);
    const json resolved = to_json(c);
    json& m = result.manifest;
    m["tool"] = "qwitness";
    m["version"] = kVersion;
    m["mode"] = mode == RunMode::full ? "run" : "rates";
    m["started_utc"] = detail::utc_now();
    m["threads"] = max_threads();
    m["config"] = resolved;
    m["config_sha1"] = git_blob_hash(resolved.dump());
    {
        // Knobs that affect outputs but are not exposed in the config file.
        const TabulationOptions tab;
        const OdeOptions ode;
        const WitnessOptions wit;
        m["fixed_numerics"] = {{"quad_max_panels", tab.quad.max_panels},
                               {"quad_window", {c.spectral.quad_lower(), c.spectral.quad_upper()}},
                               {"rate_interpolation_tol", tab.interpolation_tol},
                               {"rate_check_points", tab.check_points},
                               {"rate_check_seed", tab.check_seed},
                               {"ode_method", "dormand_prince_5_4"},
                               {"ode_initial_step", ode.initial_step},
                               {"ode_max_steps", ode.max_steps},
                               {"drift_repair_threshold", kDriftRepairThreshold},
                               {"negativity_flag_threshold", kNegativityFlag},
                               {"probability_clip_threshold", wit.negativity_threshold},
                               {"coherent_tail_tolerance", kCoherentTailTol},
                               {"squeeze_omega_ref", c.omega}};
    }
    m["units"] = {{"time_in_csv", "periods 2pi/omega"}, {"rates", "omega"}};

    auto finish = [&](const char* status) {
        m["status"] = status;
        m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m["outputs"] = out.files();
        std::ofstream f(out.path() / "manifest.json", std::ios::trunc);
        f << m.dump(2) << '\n';
    };

    try {
        std::vector<double> alphas = c.batch_alpha_exp;
        const bool batch = !alphas.empty();
        if (!batch) alphas.push_back(c.bath.alpha_exp);
        json profiles = json::array();
        for (double a : alphas) {
            ProfileResult p = detail::run_profile(c, a, mode);
            p.suffix = batch ? detail::profile_suffix(a) : "";
            detail::emit_profile(c, p, out, mode);
            if (c.emit_trajectory && mode == RunMode::full) detail::emit_trajectory(c, p, out);
            json kz = json::array();
            for (double t : p.rates->kappa_zero_crossings()) kz.push_back(t * c.omega / (2.0 * std::numbers::pi));
            profiles.push_back({{"alpha_exp", a},
                                {"suffix", p.suffix},
                                {"kappa_zero_crossings_periods", kz},
                                {"diagnostics", detail::diagnostics_json(p.diagnostics, p.positivity_flags)}});
            result.profiles.push_back(std::move(p));
        }
        m["profiles"] = profiles;
    } catch (const std::exception& e) {
        m["error"] = detail::error_record(e);
        finish("error");
        throw;
    }
    finish("ok");
    return result;
}

} // namespace qwitness::cli
