#pragma once

#include "sleepctl/core_model.hpp"

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

namespace sleepctl {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Canonical text form of everything that affects a solved model.
/// Doubles are written with 17 significant digits so equal values hash equal.
inline std::string canonical_string(const ClusterConfig& cfg) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "m=" << cfg.m_cells << ";k=" << cfg.k_max_off << ";ts=" << cfg.segment_duration
       << ";nth=" << cfg.n_th << ";ps=" << cfg.power.p_static << ";psw=" << cfg.power.p_switch
       << ";pd=" << cfg.power.p_d << ";pe=" << cfg.power.p_e << ";f=" << cfg.cost_fn.name();
    if (const auto* pw = std::get_if<PiecewiseLinearCost>(&cfg.cost_fn.variant())) {
        for (const auto& p : pw->pieces)
            os << "," << p.x_start << ":" << p.slope << ":" << p.intercept;
    }
    for (const auto& c : cfg.cells) {
        os << ";cell:" << c.mean_service_time;
        for (std::size_t j = 0; j < c.arrivals.rates.size(); ++j)
            os << "," << c.arrivals.rates[j] << "@" << c.arrivals.probs[j];
    }
    return os.str();
}

inline std::uint64_t config_hash(const ClusterConfig& cfg) { return fnv1a(canonical_string(cfg)); }

inline std::string hex64(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace sleepctl
