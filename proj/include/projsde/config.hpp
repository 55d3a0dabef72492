#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "projsde/integrator.hpp"
#include "projsde/lyapunov.hpp"
#include "projsde/median_machine.hpp"

namespace projsde {

using Json = nlohmann::json;

struct ConfigError {
    std::string path;
    std::string message;
};

struct ConfigException : std::runtime_error {
    explicit ConfigException(std::vector<ConfigError> errs)
        : std::runtime_error(join(errs)), errors(std::move(errs)) {}
    std::vector<ConfigError> errors;
    static std::string join(const std::vector<ConfigError>& errs) {
        std::ostringstream os;
        os << "invalid config:";
        for (const auto& e : errs) os << "\n  " << e.path << ": " << e.message;
        return os.str();
    }
};

enum class Scenario { Simulate, Lyapunov, Contraction, Instability, ValidateNoise, Selftest };

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "simulate") return Scenario::Simulate;
    if (s == "lyapunov") return Scenario::Lyapunov;
    if (s == "contraction") return Scenario::Contraction;
    if (s == "instability") return Scenario::Instability;
    if (s == "validate-noise") return Scenario::ValidateNoise;
    if (s == "selftest") return Scenario::Selftest;
    throw std::invalid_argument("unknown scenario: " + s);
}

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Simulate: return "simulate";
        case Scenario::Lyapunov: return "lyapunov";
        case Scenario::Contraction: return "contraction";
        case Scenario::Instability: return "instability";
        case Scenario::ValidateNoise: return "validate-noise";
        case Scenario::Selftest: return "selftest";
    }
    return "?";
}

/// Initial condition recipe. "mode" puts unit mass on one +/-k pair;
/// "modes" sums weighted pairs and normalizes; "two-band" puts mass
/// epsilon^2 at k = 0 and spreads the rest uniformly over the two central
/// shells below the given level (the concentrated high-frequency state).
struct InitialSpec {
    std::string type = "mode";
    std::vector<int> k;
    int component = 0;
    struct Term {
        std::vector<int> k;
        int component = 0;
        double re = 1.0;
        double im = 0.0;
    };
    std::vector<Term> terms;
    int level = 1;
    double epsilon = 0.05;
};

struct RunConfig {
    ModelParams model;
    int K_noise = -1;  // defaults to model.K
    std::string noise_form = "diagonal-parametric";
    double noise_c = 0.0;
    double noise_gamma0 = 2.5;
    std::vector<NoiseSpec::TableEntry> noise_entries;

    LyapParams lyap;
    SkeletonConfig skeleton;
    bool skeleton_enabled = true;

    Scenario scenario = Scenario::Simulate;
    int n_paths = 1;
    long long n_steps = 1000;
    int record_stride = 1;
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
    InitialSpec initial;

    double burn_in = 0.0;
    double horizon = -1.0;  // defaults to n_steps * dt
    int fk_batch = 100;
    double t_star = 5.0;
    std::vector<int> M_values = {10, 20, 30};
    double contraction_c = 0.9;
    double contraction_J = 1.0;

    Json raw;  // canonical echo for the manifest

    NoiseSpec make_noise() const {
        const int kn = K_noise >= 0 ? K_noise : model.K;
        if (noise_form == "diagonal-parametric")
            return NoiseSpec::parametric(model.d, model.m, kn, noise_c, noise_gamma0);
        if (noise_form == "diagonal-table")
            return NoiseSpec::diagonal_table(model.d, model.m, kn, noise_entries);
        throw std::invalid_argument("unsupported noise form: " + noise_form);
    }

    double effective_horizon() const {
        return horizon > 0.0 ? horizon : n_steps * model.dt;
    }
};

/// FNV-1a 64 over the canonical (sorted-key, no-whitespace) JSON dump.
inline std::string config_hash(const Json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

inline void require(std::vector<ConfigError>& errs, bool ok, const std::string& path,
                    const std::string& msg) {
    if (!ok) errs.push_back({path, msg});
}

}  // namespace detail

inline RunConfig parse_config_json(const Json& j) {
    using detail::get_or;
    using detail::require;
    std::vector<ConfigError> errs;
    RunConfig cfg;
    cfg.raw = j;

    const Json model = j.value("model", Json::object());
    cfg.model.d = get_or(model, "d", 1);
    cfg.model.m = get_or(model, "m", 1);
    cfg.model.a = get_or(model, "a", 1.0);
    cfg.model.K = get_or(model, "K", 8);
    cfg.model.dt = get_or(model, "dt", 1e-3);
    if (model.contains("nu"))
        cfg.model.nu = model.at("nu").get<std::vector<double>>();
    else
        cfg.model.nu.assign(cfg.model.m, 1.0);
    const std::string drift = get_or<std::string>(model, "drift_form", "ito");
    if (drift == "ito")
        cfg.model.drift_form = DriftForm::Ito;
    else if (drift == "stratonovich-corrected")
        cfg.model.drift_form = DriftForm::StratonovichCorrected;
    else
        errs.push_back({"model.drift_form", "must be 'ito' or 'stratonovich-corrected'"});
    require(errs, cfg.model.d >= 1, "model.d", "must be >= 1");
    require(errs, cfg.model.m >= 1, "model.m", "must be >= 1");
    require(errs, cfg.model.a >= 1.0, "model.a", "a must be >= 1");
    require(errs, cfg.model.K >= 1, "model.K", "must be >= 1");
    require(errs, cfg.model.dt > 0.0, "model.dt", "must be > 0");
    require(errs, static_cast<int>(cfg.model.nu.size()) == cfg.model.m, "model.nu",
            "needs one entry per component");
    for (std::size_t i = 0; i < cfg.model.nu.size(); ++i)
        require(errs, cfg.model.nu[i] > 0.0, "model.nu[" + std::to_string(i) + "]",
                "must be > 0");

    const Json noise = j.value("noise", Json::object());
    cfg.noise_form = get_or<std::string>(noise, "form", "diagonal-parametric");
    cfg.K_noise = get_or(noise, "K_noise", -1);
    cfg.noise_c = get_or(noise, "c", 0.0);
    cfg.noise_gamma0 = get_or(noise, "gamma0", 2.5);
    if (cfg.noise_form == "diagonal-parametric") {
        require(errs, cfg.noise_c >= 0.0, "noise.c", "must be >= 0");
        require(errs, cfg.noise_gamma0 > 0.0, "noise.gamma0", "must be > 0");
    } else if (cfg.noise_form == "diagonal-table") {
        if (!noise.contains("entries")) {
            errs.push_back({"noise.entries", "required for diagonal-table"});
        } else {
            for (const Json& row : noise.at("entries")) {
                // [alpha, beta, k_1..k_d, value]
                if (!row.is_array() || static_cast<int>(row.size()) != 3 + cfg.model.d) {
                    errs.push_back({"noise.entries", "each row is [alpha, beta, k.., value]"});
                    continue;
                }
                NoiseSpec::TableEntry e;
                e.alpha = row[0].get<int>();
                e.beta = row[1].get<int>();
                for (int i = 0; i < cfg.model.d; ++i) e.k.push_back(row[2 + i].get<int>());
                e.value = row[2 + cfg.model.d].get<double>();
                cfg.noise_entries.push_back(std::move(e));
            }
        }
    } else {
        errs.push_back({"noise.form", "must be 'diagonal-parametric' or 'diagonal-table'"});
    }

    const Json lyap = j.value("lyap", Json::object());
    cfg.lyap.kappa0 = get_or(lyap, "kappa0", 1.0);
    cfg.lyap.k0 = get_or(lyap, "k0", 1);
    cfg.lyap.kappa = get_or(lyap, "kappa", 0.5);
    require(errs, cfg.lyap.kappa0 > 0.0, "lyap.kappa0", "must be > 0");
    require(errs, cfg.lyap.k0 >= 1, "lyap.k0", "must be >= 1");
    require(errs, cfg.lyap.kappa > 0.0, "lyap.kappa", "must be > 0");

    const Json sk = j.value("skeleton", Json::object());
    cfg.skeleton_enabled = get_or(sk, "enabled", true);
    cfg.skeleton.delta = get_or(sk, "delta", 0.5);
    const Json thr = sk.value("thresholds", Json::object());
    cfg.skeleton.tau_less = get_or(thr, "tau_less", 0.5);
    cfg.skeleton.sigma_pad = get_or(thr, "sigma_pad", 1.25);
    cfg.skeleton.sigma_dil = get_or(thr, "sigma_dil", 1.5);
    cfg.skeleton.sigma_dis = get_or(thr, "sigma_dis", 2.0);
    cfg.skeleton.marker_quarter = get_or(thr, "marker", 0.25);
    cfg.skeleton.k0 = cfg.lyap.k0;
    require(errs, cfg.skeleton.delta > 0.0 && cfg.skeleton.delta < 1.0, "skeleton.delta",
            "delta must lie in (0,1)");

    try {
        cfg.scenario = scenario_from_string(get_or<std::string>(j, "scenario", "simulate"));
    } catch (const std::exception& e) {
        errs.push_back({"scenario", e.what()});
    }
    cfg.n_paths = get_or(j, "n_paths", 1);
    cfg.n_steps = get_or<long long>(j, "n_steps", 1000);
    cfg.record_stride = get_or(j, "record_stride", 1);
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
    cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
    cfg.burn_in = get_or(j, "burn_in", 0.0);
    cfg.horizon = get_or(j, "horizon", -1.0);
    cfg.fk_batch = get_or(j, "fk_batch", 100);
    cfg.t_star = get_or(j, "t_star", 5.0);
    if (j.contains("M_values")) cfg.M_values = j.at("M_values").get<std::vector<int>>();
    const Json con = j.value("contraction", Json::object());
    cfg.contraction_c = get_or(con, "c", 0.9);
    cfg.contraction_J = get_or(con, "J", 1.0);
    require(errs, cfg.n_paths >= 1, "n_paths", "must be >= 1");
    require(errs, cfg.n_steps >= 0, "n_steps", "must be >= 0");
    require(errs, cfg.record_stride >= 1, "record_stride", "must be >= 1");

    const Json init = j.value("initial", Json::object());
    cfg.initial.type = get_or<std::string>(init, "type", "mode");
    if (cfg.initial.type == "mode") {
        cfg.initial.k = init.contains("k") ? init.at("k").get<std::vector<int>>()
                                           : std::vector<int>(cfg.model.d, 0);
        cfg.initial.component = get_or(init, "component", 0);
        require(errs, static_cast<int>(cfg.initial.k.size()) == cfg.model.d, "initial.k",
                "needs d entries");
    } else if (cfg.initial.type == "modes") {
        if (!init.contains("terms")) {
            errs.push_back({"initial.terms", "required for type 'modes'"});
        } else {
            for (const Json& trm : init.at("terms")) {
                InitialSpec::Term t;
                t.k = trm.at("k").get<std::vector<int>>();
                t.component = trm.value("component", 0);
                t.re = trm.value("re", 1.0);
                t.im = trm.value("im", 0.0);
                cfg.initial.terms.push_back(std::move(t));
            }
        }
    } else if (cfg.initial.type == "two-band") {
        cfg.initial.level = get_or(init, "level", 1);
        cfg.initial.epsilon = get_or(init, "epsilon", 0.05);
        require(errs, cfg.initial.level >= 2, "initial.level", "must be >= 2");
        require(errs, cfg.initial.epsilon > 0.0 && cfg.initial.epsilon < 1.0, "initial.epsilon",
                "must lie in (0,1)");
    } else {
        errs.push_back({"initial.type", "must be 'mode', 'modes' or 'two-band'"});
    }

    // Cross checks that need a constructed noise spec.
    if (errs.empty()) {
        try {
            (void)cfg.make_noise();
        } catch (const std::exception& e) {
            errs.push_back({"noise", e.what()});
        }
        try {
            cfg.skeleton.validate();
        } catch (const std::exception& e) {
            errs.push_back({"skeleton", e.what()});
        }
    }

    if (!errs.empty()) throw ConfigException(std::move(errs));
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config_json(j);
}

/// Builds the configured initial field on the given lattice.
inline SpectralField build_initial(const InitialSpec& init,
                                   std::shared_ptr<const Lattice> lat, int m,
                                   const FreqGeometry& geom) {
    if (init.type == "mode") return unit_mode_field(std::move(lat), m, init.k, init.component);
    if (init.type == "modes") {
        SpectralField f(std::move(lat), m);
        for (const auto& t : init.terms) {
            const int idx = f.lattice->find(t.k);
            if (idx < 0) throw std::invalid_argument("initial: mode outside lattice");
            const Complex add{t.re, t.im};
            const int nix = f.lattice->neg_index(idx);
            if (nix == idx)
                f.at(t.component, idx) += Complex{t.re, 0.0};
            else {
                f.at(t.component, idx) += add;
                f.at(t.component, nix) += std::conj(add);
            }
        }
        const double r = f.norm();
        if (!(r > 0.0)) throw std::invalid_argument("initial: zero field");
        f *= 1.0 / r;
        return f;
    }
    if (init.type == "two-band") {
        SpectralField f(std::move(lat), m);
        const int M = init.level;
        std::vector<int> shell_reps;
        for (int idx : f.lattice->representatives()) {
            const double kabs = f.lattice->mode_abs(idx);
            if (kabs > geom.threshold(0, M - 2) && kabs <= geom.threshold(0, M))
                shell_reps.push_back(idx);
        }
        if (shell_reps.empty())
            throw std::invalid_argument(
                "initial: two-band shells are empty on this lattice (infeasible)");
        const double eps = init.epsilon;
        const int zero_idx = f.lattice->find(std::vector<int>(f.lattice->dim(), 0));
        f.at(0, zero_idx) = Complex{eps, 0.0};
        const double rest = std::sqrt((1.0 - eps * eps) / (2.0 * shell_reps.size()));
        for (int idx : shell_reps) {
            if (f.lattice->neg_index(idx) == idx)
                f.at(0, idx) = Complex{rest * std::sqrt(2.0), 0.0};
            else
                f.set_pair(0, idx, Complex{rest, 0.0});
        }
        const double r = f.norm();
        f *= 1.0 / r;
        return f;
    }
    throw std::invalid_argument("initial: unknown type " + init.type);
}

}  // namespace projsde
