#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sburgers/forcing.hpp"

namespace testing_util {

/// Realization of a preset over grid times [first, first + n_steps].
inline std::shared_ptr<const sburgers::Realization> make(const sburgers::ForcingSpec& spec, std::uint64_t seed, double dt,
                                                         std::int64_t n_steps, std::int64_t first = 0) {
    return std::make_shared<const sburgers::Realization>(spec, sburgers::sample_path(spec, seed, dt, n_steps, first));
}

inline std::shared_ptr<const sburgers::Realization> make(const std::string& preset, std::uint64_t seed, double dt,
                                                         std::int64_t n_steps, std::int64_t first = 0) {
    return make(sburgers::preset_spec(preset), seed, dt, n_steps, first);
}

inline sburgers::ForcingSpec zero_spec() { return sburgers::scaled(sburgers::preset_spec("sine_basic"), 0.0); }

} // namespace testing_util
