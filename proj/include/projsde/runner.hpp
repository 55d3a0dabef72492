#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <thread>
#include <vector>

#include "projsde/config.hpp"
#include "projsde/projective.hpp"
#include "projsde/record.hpp"

namespace projsde {

/// Worker count: PF_THREADS when set, otherwise the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("PF_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(0..n-1) on a pool; results land in an index-addressed vector, so
/// the reduction order is independent of the worker count.
template <class T>
std::vector<T> run_indexed(int n, const std::function<T(int)>& fn) {
    std::vector<T> out(n);
    const int workers = std::min(worker_count(), std::max(1, n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next.store(n);
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

/// Drives one trajectory, invoking the callback after every step (and once
/// at t = 0). The callback sees the grid step index and the current state.
template <class Callback>
void run_path(const Stepper& stepper, const SpectralField& u0, long long n_steps,
              std::uint64_t seed, Callback&& cb) {
    SimState s = stepper.initial_state(u0);
    SplitMix64 rng(seed);
    Stepper::Workspace ws = stepper.make_workspace();
    cb(0LL, s);
    for (long long step = 1; step <= n_steps; ++step) {
        stepper.step(s, rng, ws);
        cb(step, s);
    }
}

struct SimulateOptions {
    int record_stride = 1;
    bool skeleton_enabled = true;
    SkeletonConfig skeleton;
    LyapParams lyap;
};

/// Full per-trajectory simulation: observable rows at the record stride plus
/// the skeleton machine fed at every grid point.
inline RunRecord simulate_path(const Stepper& stepper, const SpectralField& u0,
                               long long n_steps, std::uint64_t seed,
                               const SimulateOptions& opt, int traj_index = 0) {
    RunRecord rec;
    rec.traj_index = traj_index;
    rec.seed = seed;
    SkeletonMachine machine(opt.skeleton, stepper.geometry(), stepper.params().dt);
    const auto& geom = stepper.geometry();
    const auto& tensors = stepper.tensors();

    auto record_row = [&](const SimState& s) {
        const int M = energy_median(s.pi, geom);
        rec.t.push_back(s.t);
        rec.logr.push_back(s.logr);
        rec.median.push_back(M);
        rec.fk.push_back(
            fk_integrand(s.pi, stepper.params(), stepper.noise(), tensors, s.t).integrand);
        rec.sem_g.push_back(shifted_seminorm(s.pi, 0.5, M + opt.lyap.k0, geom));
        rec.h_half.push_back(sobolev_norm(s.pi, 0.5));
    };

    try {
        run_path(stepper, u0, n_steps, seed, [&](long long step, const SimState& s) {
            if (opt.skeleton_enabled) {
                auto jump = machine.observe(step, s.t, s.pi);
                if (jump) rec.jumps.push_back(*jump);
            }
            if (step % opt.record_stride == 0) record_row(s);
        });
    } catch (const TrajectoryDied& e) {
        rec.died = true;
        rec.death_time = e.time;
    }
    if (machine.aborted()) {
        rec.machine_aborted = true;
        rec.machine_abort_time = machine.abort_time();
        rec.machine_abort_reason = machine.abort_reason();
    }
    return rec;
}

inline std::vector<RunRecord> run_ensemble(const Stepper& stepper, const SpectralField& u0,
                                           long long n_steps, int n_paths,
                                           std::uint64_t master_seed,
                                           const SimulateOptions& opt) {
    return run_indexed<RunRecord>(n_paths, [&](int i) {
        return simulate_path(stepper, u0, n_steps, derive_seed(master_seed, i), opt, i);
    });
}

namespace detail {

inline SimulateOptions options_from(const RunConfig& cfg) {
    SimulateOptions opt;
    opt.record_stride = cfg.record_stride;
    opt.skeleton_enabled = cfg.skeleton_enabled;
    opt.skeleton = cfg.skeleton;
    opt.lyap = cfg.lyap;
    return opt;
}

inline std::string traj_name(const char* stem, int idx) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.csv", stem, idx);
    return buf;
}

struct ManifestBuilder {
    RunManifest man;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::filesystem::path dir;

    ManifestBuilder(const RunConfig& cfg) {
        man.config = cfg.raw;
        man.config_hash = config_hash(cfg.raw);
        man.master_seed = cfg.master_seed;
        dir = cfg.output_dir;
        std::filesystem::create_directories(dir);
    }
    void add_file(const std::string& name, const std::string& body) {
        write_text_file((dir / name).string(), body);
        man.files.push_back(name);
    }
    RunManifest finish() {
        man.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        nlohmann::json j = man.to_json();
        man.files.push_back("manifest.json");
        j["files"].push_back("manifest.json");
        write_text_file((dir / "manifest.json").string(), j.dump(2) + "\n");
        return man;
    }
    void note_warnings(const std::vector<RunRecord>& recs) {
        for (const RunRecord& r : recs) {
            if (r.died)
                man.warnings.push_back("trajectory " + std::to_string(r.traj_index) +
                                       " died at t = " + std::to_string(r.death_time));
            if (r.machine_aborted)
                man.warnings.push_back("skeleton machine aborted on trajectory " +
                                       std::to_string(r.traj_index) + " at t = " +
                                       std::to_string(r.machine_abort_time) + " (" +
                                       r.machine_abort_reason + ")");
        }
    }
    void note_seeds(const RunConfig& cfg) {
        for (int i = 0; i < cfg.n_paths; ++i)
            man.trajectory_seeds.push_back(derive_seed(cfg.master_seed, i));
    }
};

}  // namespace detail

inline RunManifest run_simulate(const RunConfig& cfg) {
    Stepper stepper(cfg.model, cfg.make_noise());
    const SpectralField u0 =
        build_initial(cfg.initial, stepper.lattice(), cfg.model.m, stepper.geometry());
    const auto recs = run_ensemble(stepper, u0, cfg.n_steps, cfg.n_paths, cfg.master_seed,
                                   detail::options_from(cfg));
    detail::ManifestBuilder mb(cfg);
    mb.note_seeds(cfg);
    for (const RunRecord& r : recs) {
        mb.add_file(detail::traj_name("traj", r.traj_index), time_series_csv(r));
        mb.add_file(detail::traj_name("jumps", r.traj_index), jumps_csv(r.jumps));
    }
    mb.note_warnings(recs);
    return mb.finish();
}

inline nlohmann::json estimate_to_json(const ExponentEstimate& e, const std::string& hash) {
    nlohmann::json j;
    j["method"] = e.method;
    j["lambda"] = e.lambda;
    j["stderr"] = e.stderr_;
    j["n_paths"] = e.n_paths;
    j["burn_in"] = e.burn_in;
    j["horizon"] = e.horizon;
    j["config_hash"] = hash;
    return j;
}

inline RunManifest run_lyapunov(const RunConfig& cfg) {
    Stepper stepper(cfg.model, cfg.make_noise());
    const SpectralField u0 =
        build_initial(cfg.initial, stepper.lattice(), cfg.model.m, stepper.geometry());
    const auto recs = run_ensemble(stepper, u0, cfg.n_steps, cfg.n_paths, cfg.master_seed,
                                   detail::options_from(cfg));
    const double horizon = cfg.effective_horizon();
    const auto direct = estimate_lambda_direct(recs, cfg.burn_in, horizon);
    const auto fk = estimate_lambda_fk(recs, cfg.burn_in, horizon, cfg.fk_batch);

    detail::ManifestBuilder mb(cfg);
    mb.note_seeds(cfg);
    nlohmann::json rep;
    rep["estimates"] = {estimate_to_json(direct, mb.man.config_hash),
                        estimate_to_json(fk, mb.man.config_hash)};
    rep["difference"] = std::abs(direct.lambda - fk.lambda);
    rep["combined_stderr"] =
        std::sqrt(direct.stderr_ * direct.stderr_ + fk.stderr_ * fk.stderr_);
    mb.add_file("report.json", rep.dump(2) + "\n");
    mb.note_warnings(recs);
    return mb.finish();
}

/// Monte Carlo check of the one-cycle contraction of the Lyapunov functional:
/// for each initial level M, estimate E[G(pi_{t*})] from e_M and report the
/// log-space ratio against G(pi_0).
inline RunManifest run_contraction(const RunConfig& cfg) {
    Stepper stepper(cfg.model, cfg.make_noise());
    const auto& geom = stepper.geometry();
    const long long n_steps =
        static_cast<long long>(std::llround(cfg.t_star / cfg.model.dt));
    detail::ManifestBuilder mb(cfg);
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> g0s, egs;
    for (std::size_t mi = 0; mi < cfg.M_values.size(); ++mi) {
        const int M = cfg.M_values[mi];
        std::vector<int> k(cfg.model.d, 0);
        k[0] = M;
        const SpectralField u0 = unit_mode_field(stepper.lattice(), cfg.model.m, k);
        const double log_g0 = log_functional_G(u0, cfg.lyap, geom);
        const std::uint64_t block_seed = derive_seed(cfg.master_seed, 1000 + mi);
        std::vector<double> log_g =
            run_indexed<double>(cfg.n_paths, [&](int i) {
                double out = 0.0;
                run_path(stepper, u0, n_steps, derive_seed(block_seed, i),
                         [&](long long step, const SimState& s) {
                             if (step == n_steps)
                                 out = log_functional_G(s.pi, cfg.lyap, geom);
                         });
                return out;
            });
        const double log_eg = log_mean_exp(log_g);
        nlohmann::json row;
        row["M"] = M;
        row["log_G0"] = log_g0;
        row["log_EG"] = log_eg;
        row["ratio"] = std::exp(log_eg - log_g0);
        row["pass_configured"] =
            std::exp(log_eg) <= cfg.contraction_c * std::exp(log_g0) + cfg.contraction_J;
        rows.push_back(row);
        g0s.push_back(std::exp(log_g0));
        egs.push_back(std::exp(log_eg));
    }
    // Least-squares (c, J) over the sampled levels, J clipped at zero.
    double fitted_c = 0.0, fitted_J = 0.0;
    if (g0s.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = static_cast<int>(g0s.size());
        for (int i = 0; i < n; ++i) {
            sx += g0s[i];
            sy += egs[i];
            sxx += g0s[i] * g0s[i];
            sxy += g0s[i] * egs[i];
        }
        const double denom = n * sxx - sx * sx;
        if (denom != 0.0) {
            fitted_c = (n * sxy - sx * sy) / denom;
            fitted_J = std::max(0.0, (sy - fitted_c * sx) / n);
        }
    }
    nlohmann::json rep;
    rep["rows"] = rows;
    rep["fitted"] = {{"c", fitted_c}, {"J", fitted_J}};
    rep["configured"] = {{"c", cfg.contraction_c}, {"J", cfg.contraction_J}};
    rep["t_star"] = cfg.t_star;
    mb.add_file("report.json", rep.dump(2) + "\n");
    return mb.finish();
}

/// Ensemble probability that a state concentrated in the two shells below
/// level M dilutes within the horizon, with a Wilson 95% interval per M, plus
/// the mean skeleton median at the horizon.
inline RunManifest run_instability(const RunConfig& cfg) {
    Stepper stepper(cfg.model, cfg.make_noise());
    const auto& geom = stepper.geometry();
    const long long n_steps =
        static_cast<long long>(std::llround(cfg.t_star / cfg.model.dt));
    detail::ManifestBuilder mb(cfg);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t mi = 0; mi < cfg.M_values.size(); ++mi) {
        const int M = cfg.M_values[mi];
        InitialSpec init;
        init.type = "two-band";
        init.level = M;
        init.epsilon = cfg.initial.type == "two-band" ? cfg.initial.epsilon : 0.05;
        const SpectralField u0 = build_initial(init, stepper.lattice(), cfg.model.m, geom);
        // entry conditions of the concentrated state
        double low_sq, geq_sq;
        split_sq_norm(u0, geom, M, low_sq, geq_sq);
        if (!(std::sqrt(geq_sq) <= 2.0 * std::sqrt(low_sq)) ||
            marker(M - 1, u0, geom, cfg.skeleton.marker_quarter) != Marker::C)
            throw std::runtime_error("instability: initial data violates the entry conditions");

        const std::uint64_t block_seed = derive_seed(cfg.master_seed, 2000 + mi);
        struct PathOut {
            int diluted = 0;
            int skel_M = 0;
        };
        std::vector<PathOut> outs = run_indexed<PathOut>(cfg.n_paths, [&](int i) {
            PathOut po;
            SkeletonMachine machine(cfg.skeleton, geom, cfg.model.dt);
            run_path(stepper, u0, n_steps, derive_seed(block_seed, i),
                     [&](long long step, const SimState& s) {
                         machine.observe(step, s.t, s.pi);
                         if (!po.diluted &&
                             marker(M - 1, s.pi, geom, cfg.skeleton.marker_quarter) ==
                                 Marker::D)
                             po.diluted = 1;
                         if (step == n_steps) po.skel_M = machine.current_level();
                     });
            return po;
        });
        int hits = 0;
        double mean_skel = 0.0;
        for (const PathOut& po : outs) {
            hits += po.diluted;
            mean_skel += po.skel_M;
        }
        mean_skel /= cfg.n_paths;
        const WilsonInterval w = wilson_interval(hits, cfg.n_paths);
        nlohmann::json row;
        row["M"] = M;
        row["p_hat"] = w.p_hat;
        row["wilson_lo"] = w.lo;
        row["wilson_hi"] = w.hi;
        row["mean_skeleton_median_at_horizon"] = mean_skel;
        rows.push_back(row);
    }
    nlohmann::json rep;
    rep["rows"] = rows;
    rep["horizon"] = cfg.t_star;
    rep["n_paths"] = cfg.n_paths;
    mb.add_file("report.json", rep.dump(2) + "\n");
    return mb.finish();
}

/// Noise validation: decay envelope, per-component large-scale support
/// condition with the smallest passing K0, and the correlation tensors.
inline RunManifest run_validate_noise(const RunConfig& cfg) {
    const NoiseSpec spec = cfg.make_noise();
    const CorrelationTensors ct = correlation_tensors(spec);
    detail::ManifestBuilder mb(cfg);
    nlohmann::json rep;

    const double C = cfg.noise_form == "diagonal-parametric" && cfg.noise_c > 0.0
                         ? cfg.noise_c
                         : std::max(1e-300, ct.envelope);
    const DecayReport dec = check_decay(spec, cfg.noise_gamma0, C);
    rep["decay"] = {{"pass", dec.pass},
                    {"worst_ratio", dec.worst_ratio},
                    {"worst_mode", dec.worst_mode},
                    {"gamma0", cfg.noise_gamma0},
                    {"gamma0_exceeds_d_half_plus_one", cfg.noise_gamma0 > cfg.model.d / 2.0 + 1.0},
                    {"C", C}};

    const FreqGeometry geom(cfg.model.nu, cfg.model.a);
    const double b = 3.0 * std::pow(geom.nu_min(), -1.0 / (2.0 * cfg.model.a));
    const int M_max = std::max(2, cfg.model.K);
    nlohmann::json support = nlohmann::json::array();
    for (int beta = 0; beta < cfg.model.m; ++beta) {
        int best_alpha = -1;
        int best_K0 = -1;
        for (int alpha = 0; alpha < cfg.model.m; ++alpha) {
            if (!(cfg.model.nu[beta] >= cfg.model.nu[alpha])) continue;
            std::vector<std::vector<int>> A;
            for (int i = 0; i < spec.lattice().size(); ++i)
                if (spec.gamma_diag(alpha, beta, i) > 0.0) {
                    const int* k = spec.lattice().mode(i);
                    A.emplace_back(k, k + cfg.model.d);
                }
            if (A.empty()) continue;
            for (int K0 = 1; K0 <= M_max; ++K0) {
                const SupportReport sr = check_support_condition(A, b, K0, M_max, cfg.model.d);
                if (sr.pass) {
                    if (best_K0 < 0 || K0 < best_K0) {
                        best_K0 = K0;
                        best_alpha = alpha;
                    }
                    break;
                }
            }
        }
        support.push_back({{"beta", beta},
                           {"alpha", best_alpha},
                           {"smallest_passing_K0", best_K0},
                           {"pass", best_K0 >= 0},
                           {"b", b},
                           {"M_max", M_max}});
    }
    rep["support"] = support;
    rep["tensors"] = {{"envelope", ct.envelope}, {"tr", ct.tr}, {"tr_u", ct.tr_u}};
    mb.add_file("report.json", rep.dump(2) + "\n");
    return mb.finish();
}

}  // namespace projsde
