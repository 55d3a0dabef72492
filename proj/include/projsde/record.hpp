#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "projsde/median_machine.hpp"

namespace projsde {

inline constexpr const char* kVersionTag = "projsde 0.1.0";

/// Sampled observables of one trajectory plus its jump records.
struct RunRecord {
    int traj_index = 0;
    std::uint64_t seed = 0;
    std::vector<double> t;
    std::vector<double> logr;
    std::vector<int> median;
    std::vector<double> fk;     // drift integrand of d log r
    std::vector<double> sem_g;  // |pi|_{1/2, M(pi)+k0}
    std::vector<double> h_half; // |pi|_{H^(1/2)}
    std::vector<JumpRecord> jumps;
    bool machine_aborted = false;
    double machine_abort_time = 0.0;
    std::string machine_abort_reason;
    bool died = false;
    double death_time = 0.0;
};

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

/// Time-series CSV: fixed column order, %.17g doubles, bit-stable per build.
inline std::string time_series_csv(const RunRecord& rec) {
    std::string out = "t,logr,median,fk_integrand,seminorm_g,seminorm_h_half\n";
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        out += detail::fmt_double(rec.t[i]);
        out += ',';
        out += detail::fmt_double(rec.logr[i]);
        out += ',';
        out += std::to_string(rec.median[i]);
        out += ',';
        out += detail::fmt_double(rec.fk[i]);
        out += ',';
        out += detail::fmt_double(rec.sem_g[i]);
        out += ',';
        out += detail::fmt_double(rec.h_half[i]);
        out += '\n';
    }
    return out;
}

inline std::string jumps_csv(const std::vector<JumpRecord>& jumps) {
    std::string out = "i,T_i,T_next,M_i,M_next,event,marker,w_seminorm\n";
    for (const JumpRecord& r : jumps) {
        out += std::to_string(r.i);
        out += ',';
        out += detail::fmt_double(r.Ti);
        out += ',';
        out += detail::fmt_double(r.Tnext);
        out += ',';
        out += std::to_string(r.Mi);
        out += ',';
        out += std::to_string(r.Mnext);
        out += ',';
        out += r.event;
        out += ',';
        out += static_cast<char>(r.marker_at_S);
        out += ',';
        out += detail::fmt_double(r.w_seminorm_pre);
        out += '\n';
    }
    return out;
}

/// Everything needed to reproduce a run byte-for-byte on the same build.
struct RunManifest {
    nlohmann::json config;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> trajectory_seeds;
    double wall_clock_sec = 0.0;
    std::vector<std::string> files;
    std::vector<std::string> warnings;
    std::string version = kVersionTag;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config"] = config;
        j["config_hash"] = config_hash;
        j["master_seed"] = master_seed;
        j["trajectory_seeds"] = trajectory_seeds;
        j["wall_clock_sec"] = wall_clock_sec;
        j["files"] = files;
        j["warnings"] = warnings;
        j["version"] = version;
        return j;
    }
};

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << body;
}

}  // namespace projsde
